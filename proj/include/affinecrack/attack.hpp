#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "affinecrack/affine.hpp"
#include "affinecrack/corpus.hpp"
#include "affinecrack/errors.hpp"
#include "affinecrack/io.hpp"

namespace affinecrack {

// English letter distribution estimated from a reference corpus. Entries are
// floored away from zero so chi-square denominators stay finite.
struct ReferenceFrequencies {
  std::array<double, 26> freq{};
  std::string source_digest;
};

inline constexpr double kReferenceFloor = 1e-6;

inline ReferenceFrequencies compute_reference(std::span<const std::uint8_t> corpus) {
  if (corpus.empty()) {
    throw EmptyCorpusError("compute_reference: empty corpus");
  }
  ReferenceFrequencies ref;
  std::array<std::uint64_t, 26> counts{};
  for (std::uint8_t letter : corpus) {
    counts[letter] += 1;
  }
  double sum = 0.0;
  for (int j = 0; j < kAlphabetSize; ++j) {
    ref.freq[static_cast<std::size_t>(j)] =
        static_cast<double>(counts[static_cast<std::size_t>(j)]) /
            static_cast<double>(corpus.size()) +
        kReferenceFloor;
    sum += ref.freq[static_cast<std::size_t>(j)];
  }
  for (double& f : ref.freq) {
    f /= sum;
  }
  ref.source_digest = fnv1a64_hex(corpus);
  return ref;
}

// Pearson statistic on counts: sum_j (n*obs_j - n*ref_j)^2 / (n*ref_j).
inline double chi_square(const std::array<double, 26>& observed, const ReferenceFrequencies& ref,
                         std::size_t n) {
  const double nd = static_cast<double>(n);
  double stat = 0.0;
  for (int j = 0; j < kAlphabetSize; ++j) {
    const double expected = nd * ref.freq[static_cast<std::size_t>(j)];
    const double diff = nd * observed[static_cast<std::size_t>(j)] - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

struct AttackResult {
  AffineKey best_key;
  std::array<double, kNumKeys> scores{};  // chi-square per candidate, key-index order
};

// Scores every candidate decryption against the reference. Decrypting with
// key k permutes letters, so the decryption's count at letter j equals the
// ciphertext count at encrypt_k(j); one count pass serves all 312 keys.
inline AttackResult brute_force_attack(std::span<const std::uint8_t> ciphertext,
                                       const ReferenceFrequencies& ref) {
  if (ciphertext.empty()) {
    throw EmptyDataError("brute_force_attack: empty ciphertext");
  }
  std::array<double, 26> counts{};
  for (std::uint8_t letter : ciphertext) {
    counts[letter] += 1.0;
  }
  const double n = static_cast<double>(ciphertext.size());

  AttackResult result;
  double best = 0.0;
  int best_index = -1;
  for (int index = 0; index < kNumKeys; ++index) {
    const auto table = encrypt_table(index_to_key(index));
    double stat = 0.0;
    for (int j = 0; j < kAlphabetSize; ++j) {
      const double expected = n * ref.freq[static_cast<std::size_t>(j)];
      const double diff = counts[table[static_cast<std::size_t>(j)]] - expected;
      stat += diff * diff / expected;
    }
    result.scores[static_cast<std::size_t>(index)] = stat;
    if (best_index < 0 || stat < best) {
      best = stat;
      best_index = index;
    }
  }
  result.best_key = index_to_key(best_index);
  return result;
}

}  // namespace affinecrack
