#include "pevdn/field.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pevdn {

namespace {

uint64_t mulmod(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

uint64_t powmod(uint64_t base, uint64_t exp, uint64_t m) {
  uint64_t result = 1;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

double pow10_exact(int precision) {
  double scale = 1.0;
  for (int i = 0; i < precision; ++i) scale *= 10.0;
  return scale;
}

}  // namespace

bool is_prime_u64(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  // These witnesses are deterministic for all 64-bit integers.
  for (uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 0; i < r - 1; ++i) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

Field::Field(uint64_t prime) : prime_(prime) {
  if (!is_prime_u64(prime)) {
    throw std::invalid_argument("Field: modulus " + std::to_string(prime) + " is not prime");
  }
}

FieldElement Field::element(uint64_t value) const {
  if (value >= prime_) {
    throw std::invalid_argument("Field::element: value " + std::to_string(value) +
                                " not reduced mod " + std::to_string(prime_));
  }
  return FieldElement{value};
}

FieldElement Field::add(FieldElement a, FieldElement b) const {
  uint64_t sum = a.value + b.value;  // p < 2^62, no overflow
  if (sum >= prime_) sum -= prime_;
  return FieldElement{sum};
}

FieldElement Field::neg(FieldElement a) const {
  return FieldElement{a.value == 0 ? 0 : prime_ - a.value};
}

FieldElement Field::uniform(Rng& rng) const { return FieldElement{rng.uniform_below(prime_)}; }

ShareSet Field::share(FieldElement secret, int n_parties, Rng& rng) const {
  if (n_parties < 2) {
    throw std::invalid_argument("Field::share: need at least 2 parties, got " +
                                std::to_string(n_parties));
  }
  ShareSet shares;
  shares.reserve(static_cast<size_t>(n_parties));
  // Blinding shares come off the RNG before the secret is touched; the
  // secrecy tests rely on this construction.
  FieldElement blind_sum{0};
  for (int i = 0; i + 1 < n_parties; ++i) {
    const FieldElement r = uniform(rng);
    shares.push_back(r);
    blind_sum = add(blind_sum, r);
  }
  shares.push_back(add(neg(blind_sum), secret));
  return shares;
}

FieldElement Field::reconstruct(std::span<const FieldElement> shares) const {
  FieldElement sum{0};
  for (const FieldElement s : shares) sum = add(sum, s);
  return sum;
}

FieldElement Field::encode(double x, int precision) const {
  const double scaled = std::trunc(x * pow10_exact(precision));
  if (!(std::abs(scaled) < 0.5 * static_cast<double>(prime_))) {
    throw EncodeRangeError("encode: |" + std::to_string(x) + "| exceeds decodable range at precision " +
                           std::to_string(precision));
  }
  if (scaled >= 0.0) return FieldElement{static_cast<uint64_t>(scaled)};
  return FieldElement{prime_ - static_cast<uint64_t>(-scaled)};
}

double Field::decode(FieldElement code, int precision) const {
  const double scale = pow10_exact(precision);
  if (code.value <= prime_ / 2) return static_cast<double>(code.value) / scale;
  return -static_cast<double>(prime_ - code.value) / scale;
}

double Field::encodable_bound(int precision) const {
  return 0.5 * static_cast<double>(prime_) / pow10_exact(precision);
}

}  // namespace pevdn
