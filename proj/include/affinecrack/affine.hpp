#pragma once

#include <array>
#include <cassert>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "affinecrack/errors.hpp"

namespace affinecrack {

inline constexpr int kAlphabetSize = 26;
inline constexpr std::uint8_t kPadToken = 26;  // 27th vocabulary id, marks positions past the text
inline constexpr int kVocabSize = 27;
inline constexpr int kNumCoeffs = 12;
inline constexpr int kNumKeys = 312;  // 12 coprime coefficients x 26 shifts

// The multiplicative coefficients coprime to 26, ascending. Their rank fixes
// the class-label order.
inline constexpr std::array<int, kNumCoeffs> kCoprimeCoeffs = {1,  3,  5,  7,  9,  11,
                                                               15, 17, 19, 21, 23, 25};

// Key (a, b) of y = (a x + b) mod 26. Valid iff gcd(a, 26) = 1 and 0 <= b <= 25.
struct AffineKey {
  int a = 1;
  int b = 0;

  bool operator==(const AffineKey&) const = default;
};

inline bool is_valid_key(const AffineKey& key) {
  return key.a >= 0 && key.a < kAlphabetSize && key.b >= 0 && key.b < kAlphabetSize &&
         std::gcd(key.a, kAlphabetSize) == 1;
}

inline void validate_key(const AffineKey& key) {
  if (!is_valid_key(key)) {
    throw KeyError("invalid affine key (a=" + std::to_string(key.a) +
                   ", b=" + std::to_string(key.b) + "): need gcd(a,26)=1 and 0<=b<=25");
  }
}

// 'A' -> 0 ... 'Z' -> 25. Callers pre-filter; anything else is a contract
// violation, not a recoverable error.
inline std::uint8_t map_char(char c) {
  assert(c >= 'A' && c <= 'Z');
  return static_cast<std::uint8_t>(c - 'A');
}

inline char render_letter(std::uint8_t value) {
  assert(value < kAlphabetSize);
  return static_cast<char>('A' + value);
}

// a^{-1} mod 26 by exhaustive search; the domain has 26 elements.
inline int mod_inverse(int a) {
  if (a < 0 || a >= kAlphabetSize || std::gcd(a, kAlphabetSize) != 1) {
    throw KeyError("no inverse mod 26 for a=" + std::to_string(a));
  }
  for (int x = 0; x < kAlphabetSize; ++x) {
    if ((a * x) % kAlphabetSize == 1) {
      return x;
    }
  }
  return -1;  // unreachable: every coprime element has an inverse
}

// Per-letter substitution table of y = (a x + b) mod 26.
inline std::array<std::uint8_t, kAlphabetSize> encrypt_table(const AffineKey& key) {
  validate_key(key);
  std::array<std::uint8_t, kAlphabetSize> table{};
  for (int x = 0; x < kAlphabetSize; ++x) {
    table[static_cast<std::size_t>(x)] =
        static_cast<std::uint8_t>((key.a * x + key.b) % kAlphabetSize);
  }
  return table;
}

// Table of x = a^{-1} (y - b) mod 26, the inverse substitution.
inline std::array<std::uint8_t, kAlphabetSize> decrypt_table(const AffineKey& key) {
  validate_key(key);
  const int inv = mod_inverse(key.a);
  std::array<std::uint8_t, kAlphabetSize> table{};
  for (int y = 0; y < kAlphabetSize; ++y) {
    table[static_cast<std::size_t>(y)] =
        static_cast<std::uint8_t>((inv * (y - key.b % kAlphabetSize + kAlphabetSize)) %
                                  kAlphabetSize);
  }
  return table;
}

inline std::vector<std::uint8_t> encrypt(std::span<const std::uint8_t> plaintext,
                                         const AffineKey& key) {
  const auto table = encrypt_table(key);
  std::vector<std::uint8_t> out(plaintext.size());
  for (std::size_t i = 0; i < plaintext.size(); ++i) {
    assert(plaintext[i] < kAlphabetSize);
    out[i] = table[plaintext[i]];
  }
  return out;
}

inline std::vector<std::uint8_t> decrypt(std::span<const std::uint8_t> ciphertext,
                                         const AffineKey& key) {
  const auto table = decrypt_table(key);
  std::vector<std::uint8_t> out(ciphertext.size());
  for (std::size_t i = 0; i < ciphertext.size(); ++i) {
    assert(ciphertext[i] < kAlphabetSize);
    out[i] = table[ciphertext[i]];
  }
  return out;
}

// Rank of a coefficient in kCoprimeCoeffs, or -1.
inline int coeff_rank(int a) {
  for (int r = 0; r < kNumCoeffs; ++r) {
    if (kCoprimeCoeffs[static_cast<std::size_t>(r)] == a) {
      return r;
    }
  }
  return -1;
}

// Class label: rank(a) * 26 + b. Bijective over the 312 valid keys.
inline int key_to_index(const AffineKey& key) {
  validate_key(key);
  return coeff_rank(key.a) * kAlphabetSize + key.b;
}

inline AffineKey index_to_key(int index) {
  if (index < 0 || index >= kNumKeys) {
    throw IndexRangeError("key index " + std::to_string(index) + " outside [0, 311]");
  }
  return AffineKey{kCoprimeCoeffs[static_cast<std::size_t>(index / kAlphabetSize)],
                   index % kAlphabetSize};
}

// All 312 valid keys in index order.
inline const std::array<AffineKey, kNumKeys>& enumerate_keys() {
  static const std::array<AffineKey, kNumKeys> keys = [] {
    std::array<AffineKey, kNumKeys> out{};
    for (int i = 0; i < kNumKeys; ++i) {
      out[static_cast<std::size_t>(i)] = index_to_key(i);
    }
    return out;
  }();
  return keys;
}

}  // namespace affinecrack
