#include "mclv/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <random>

#include "mclv/digest.hpp"

namespace mclv {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& name) {
  if (bytes.size() < offset + 4) throw IdxError(IdxErrorKind::Truncated, name + ": header truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t x) {
  const char b[4] = {static_cast<char>(x >> 24), static_cast<char>(x >> 16), static_cast<char>(x >> 8),
                     static_cast<char>(x)};
  out.write(b, 4);
}

}  // namespace

RawImages load_idx(const std::filesystem::path& images_path, const std::optional<std::filesystem::path>& labels_path) {
  const std::string name = images_path.string();
  const auto bytes = read_file(images_path);
  if (read_be32(bytes, 0, name) != kIdxImageMagic) throw IdxError(IdxErrorKind::BadMagic, name + ": bad magic");
  RawImages raw;
  raw.count = read_be32(bytes, 4, name);
  raw.rows = read_be32(bytes, 8, name);
  raw.cols = read_be32(bytes, 12, name);
  const std::size_t n_bytes = raw.count * raw.rows * raw.cols;
  if (bytes.size() < 16 + n_bytes) throw IdxError(IdxErrorKind::Truncated, name + ": pixel data truncated");
  raw.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(n_bytes));

  if (labels_path) {
    const std::string lname = labels_path->string();
    const auto lbytes = read_file(*labels_path);
    if (read_be32(lbytes, 0, lname) != kIdxLabelMagic) throw IdxError(IdxErrorKind::BadMagic, lname + ": bad magic");
    const std::size_t n = read_be32(lbytes, 4, lname);
    if (n != raw.count) throw IdxError(IdxErrorKind::CountMismatch, lname + ": label count differs from image count");
    if (lbytes.size() < 8 + n) throw IdxError(IdxErrorKind::Truncated, lname + ": label data truncated");
    raw.labels.emplace(lbytes.begin() + 8, lbytes.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  }
  return raw;
}

void write_idx_images(const std::filesystem::path& path, const RawImages& raw) {
  if (raw.pixels.size() != raw.count * raw.rows * raw.cols) throw std::invalid_argument("pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxErrorKind::Io, "cannot write " + path.string());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(raw.count));
  write_be32(out, static_cast<std::uint32_t>(raw.rows));
  write_be32(out, static_cast<std::uint32_t>(raw.cols));
  out.write(reinterpret_cast<const char*>(raw.pixels.data()), static_cast<std::streamsize>(raw.pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxErrorKind::Io, "cannot write " + path.string());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

std::vector<double> Dataset::feature_means() const {
  std::vector<double> means(n_visible(), 0.0);
  if (images.empty()) return means;
  for (const auto& v : images) {
    for (std::size_t i = 0; i < means.size(); ++i) means[i] += v.get(i) ? 1.0 : 0.0;
  }
  for (auto& p : means) p /= static_cast<double>(images.size());
  return means;
}

Dataset Dataset::head(std::size_t n) const {
  Dataset out;
  n = std::min(n, size());
  out.images.assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(n));
  if (labels) out.labels.emplace(labels->begin(), labels->begin() + static_cast<std::ptrdiff_t>(n));
  out.source_digest = source_digest;
  return out;
}

Dataset binarize(const RawImages& raw, const Binarization& mode) {
  Dataset out;
  const std::size_t d = raw.pixels_per_image();
  out.images.reserve(raw.count);
  std::mt19937_64 rng(mode.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t n = 0; n < raw.count; ++n) {
    BitVector v(d);
    const std::uint8_t* px = raw.pixels.data() + n * d;
    for (std::size_t i = 0; i < d; ++i) {
      const bool on = mode.mode == Binarization::Mode::Threshold ? px[i] >= 128 : unif(rng) < px[i] / 255.0;
      if (on) v.set(i, true);
    }
    out.images.push_back(std::move(v));
  }
  if (raw.labels) out.labels.emplace(raw.labels->begin(), raw.labels->end());
  out.source_digest = git_blob_digest(std::span<const unsigned char>(raw.pixels.data(), raw.pixels.size()));
  return out;
}

std::pair<Dataset, Dataset> resplit(const Dataset& train, const Dataset& test, std::size_t n_train) {
  Dataset all = train;
  all.images.insert(all.images.end(), test.images.begin(), test.images.end());
  if (train.labels && test.labels) {
    all.labels->insert(all.labels->end(), test.labels->begin(), test.labels->end());
  } else {
    all.labels.reset();
  }
  n_train = std::min(n_train, all.size());
  Dataset a = all.head(n_train);
  Dataset b;
  b.images.assign(all.images.begin() + static_cast<std::ptrdiff_t>(n_train), all.images.end());
  if (all.labels) b.labels.emplace(all.labels->begin() + static_cast<std::ptrdiff_t>(n_train), all.labels->end());
  a.source_digest = train.source_digest;
  b.source_digest = test.source_digest;
  return {std::move(a), std::move(b)};
}

Eigen::MatrixXd to_matrix(const std::vector<BitVector>& examples) {
  if (examples.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(examples.front().size()), static_cast<Eigen::Index>(examples.size()));
  for (std::size_t n = 0; n < examples.size(); ++n) out.col(static_cast<Eigen::Index>(n)) = examples[n].to_dense<double>();
  return out;
}

}  // namespace mclv
