#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mclv/bit_vector.hpp"

namespace mclv {

enum class IdxErrorKind { Io, BadMagic, Truncated, CountMismatch };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IdxErrorKind kind() const { return kind_; }

 private:
  IdxErrorKind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct RawImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// count * rows * cols bytes, image-major.
  std::vector<std::uint8_t> pixels;
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t pixels_per_image() const { return rows * cols; }
};

/// Parses big-endian IDX image (and optional label) files.
RawImages load_idx(const std::filesystem::path& images_path,
                   const std::optional<std::filesystem::path>& labels_path = std::nullopt);

void write_idx_images(const std::filesystem::path& path, const RawImages& raw);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

struct Dataset {
  std::vector<BitVector> images;
  std::optional<std::vector<int>> labels;
  std::string source_digest;

  std::size_t size() const { return images.size(); }
  std::size_t n_visible() const { return images.empty() ? 0 : images.front().size(); }
  /// Empirical p_i of each pixel being on.
  std::vector<double> feature_means() const;
  /// First `n` examples (all when n >= size()).
  Dataset head(std::size_t n) const;
};

struct Binarization {
  enum class Mode { Threshold, Stochastic };
  Mode mode = Mode::Threshold;
  std::uint64_t seed = 0;

  static Binarization threshold() { return {}; }
  static Binarization stochastic(std::uint64_t seed) { return {Mode::Stochastic, seed}; }
};

/// Threshold: pixel >= 128 is on. Stochastic: on with probability pixel/255.
Dataset binarize(const RawImages& raw, const Binarization& mode = Binarization::threshold());

/// Concatenates train and test and re-partitions so the first `n_train`
/// examples form the training set.
std::pair<Dataset, Dataset> resplit(const Dataset& train, const Dataset& test, std::size_t n_train);

/// Dense 0/1 matrix with one column per example.
Eigen::MatrixXd to_matrix(const std::vector<BitVector>& examples);

}  // namespace mclv
