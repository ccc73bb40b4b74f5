#ifndef TAILMEM_BITSET_H_
#define TAILMEM_BITSET_H_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace tailmem {

// Fixed-length packed bit vector. Bit i lives in byte i/8 at bit i%8 of the
// serialized form, which on 64-bit words is bit i%64 of word i/64.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(size_t size) : size_(size), words_((size + 63) / 64, 0) {}

  size_t size() const { return size_; }
  size_t byte_size() const { return (size_ + 7) / 8; }

  bool test(size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(size_t i) { words_[i >> 6] |= uint64_t{1} << (i & 63); }
  void reset(size_t i) { words_[i >> 6] &= ~(uint64_t{1} << (i & 63)); }
  void assign(size_t i, bool value) { value ? set(i) : reset(i); }

  size_t count() const {
    size_t total = 0;
    for (const uint64_t w : words_) total += std::popcount(w);
    return total;
  }

  // popcount(this & other); sizes must match.
  size_t count_and(const BitVector& other) const {
    size_t total = 0;
    for (size_t w = 0; w < words_.size(); ++w) total += std::popcount(words_[w] & other.words_[w]);
    return total;
  }

  void append_bytes(std::vector<uint8_t>& out) const {
    for (size_t b = 0; b < byte_size(); ++b) out.push_back(static_cast<uint8_t>(words_[b >> 3] >> ((b & 7) * 8)));
  }

  static BitVector FromBytes(std::span<const uint8_t> bytes, size_t size) {
    if (bytes.size() != (size + 7) / 8) throw std::invalid_argument("bitset byte length mismatch");
    BitVector bits(size);
    for (size_t b = 0; b < bytes.size(); ++b) bits.words_[b >> 3] |= uint64_t{bytes[b]} << ((b & 7) * 8);
    if (size % 8 != 0 && (bytes.back() >> (size % 8)) != 0) throw std::invalid_argument("bitset has bits set past its length");
    return bits;
  }

  std::span<const uint64_t> words() const { return words_; }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  size_t size_ = 0;
  std::vector<uint64_t> words_;
};

}  // namespace tailmem

#endif  // TAILMEM_BITSET_H_
