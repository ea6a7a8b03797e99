#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mclv {

/// Fixed-length bit vector packed into 64-bit words.
///
/// Bits past size() in the last word are always zero, so word-wise equality
/// and hashing agree with element-wise equality. Conditional sampling code
/// only ever touches bits through get()/set() or the Eigen conversions, so
/// the packing is invisible to it.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

  /// Bit i of `code` becomes element i. Requires size <= 64.
  static BitVector from_code(std::uint64_t code, std::size_t size) {
    BitVector out(size);
    if (size > 0) {
      out.words_[0] = size >= 64 ? code : (code & ((std::uint64_t{1} << size) - 1));
    }
    return out;
  }

  template <typename Derived>
  static BitVector from_dense(const Eigen::DenseBase<Derived>& values) {
    BitVector out(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (values(i) != 0) out.set(static_cast<std::size_t>(i), true);
    }
    return out;
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  bool operator[](std::size_t i) const { return get(i); }

  void set(std::size_t i, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }

  void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
  }

  /// Inverse of from_code(). Requires size() <= 64.
  std::uint64_t code() const { return words_.empty() ? 0 : words_[0]; }

  const std::vector<std::uint64_t>& words() const { return words_; }

  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> to_dense() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(static_cast<Eigen::Index>(size_));
    for (std::size_t i = 0; i < size_; ++i) out(static_cast<Eigen::Index>(i)) = get(i) ? Scalar(1) : Scalar(0);
    return out;
  }

  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i) {
      if (get(i)) s[i] = '1';
    }
    return s;
  }

  std::uint64_t hash() const {
    // splitmix64 finalizer folded over the words
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ size_;
    for (auto w : words_) {
      std::uint64_t z = w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      h ^= z ^ (z >> 31);
    }
    return h;
  }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct BitVectorHash {
  std::size_t operator()(const BitVector& b) const { return static_cast<std::size_t>(b.hash()); }
};

}  // namespace mclv
