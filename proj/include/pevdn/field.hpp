#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pevdn/errors.hpp"
#include "pevdn/rng.hpp"

namespace pevdn {

// Element of Z_p. The invariant 0 <= value < p is enforced by Field, which
// owns the modulus; raw construction is reserved for code that has already
// reduced the value.
struct FieldElement {
  uint64_t value = 0;

  friend bool operator==(FieldElement, FieldElement) = default;
};

// Complete additive (n,n) sharing of one secret: the shares sum to the
// secret mod p.
using ShareSet = std::vector<FieldElement>;

// Prime-field arithmetic, additive secret sharing, and the fixed-point codec
// that maps reals into the field by scaling with 10^precision and truncating
// toward zero. Negative reals land in the upper half of the field.
//
// The default modulus is the Mersenne prime 2^61 - 1: elements fit a 64-bit
// word, sums fit unsigned intermediates, and the capacity p/2 ~ 1.15e18
// keeps any realistic sum of encoded values (|x| <= 1e10 per value at
// precision 5) far from wraparound. The small prime 257 supports exhaustive
// checks in tests.
class Field {
 public:
  static constexpr uint64_t kMersenne61 = (uint64_t{1} << 61) - 1;
  static constexpr uint64_t kTestPrime = 257;

  // Maximum magnitude a single encoded real may take; callers assert their
  // values against this before encoding sums that must not wrap.
  static constexpr double kMaxMagnitude = 1e10;

  explicit Field(uint64_t prime = kMersenne61);

  uint64_t prime() const { return prime_; }

  // Checked constructor for a reduced value.
  FieldElement element(uint64_t value) const;

  FieldElement add(FieldElement a, FieldElement b) const;
  FieldElement neg(FieldElement a) const;

  // Uniform element via rejection sampling (no modulo bias).
  FieldElement uniform(Rng& rng) const;

  // Split a secret into n_parties additive shares. The n-1 blinding shares
  // are drawn from the RNG before the secret is consulted; the last share
  // completes the sum, reduced mod p.
  ShareSet share(FieldElement secret, int n_parties, Rng& rng) const;

  // Sum of a complete share set, mod p.
  FieldElement reconstruct(std::span<const FieldElement> shares) const;

  // code = int(10^precision * x) mod p, truncation toward zero.
  // Throws EncodeRangeError when |x| >= p / (2 * 10^precision).
  FieldElement encode(double x, int precision) const;

  // Inverse of encode: values at or below p/2 map to nonnegative reals,
  // values above p/2 to negative reals.
  double decode(FieldElement code, int precision) const;

  // p / (2 * 10^precision), the open bound on encodable magnitudes.
  double encodable_bound(int precision) const;

 private:
  uint64_t prime_;
};

// Deterministic Miller-Rabin for 64-bit integers.
bool is_prime_u64(uint64_t n);

}  // namespace pevdn
