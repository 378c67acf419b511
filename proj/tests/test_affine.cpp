#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "affinecrack/affine.hpp"
#include "affinecrack/rng.hpp"

using namespace affinecrack;

namespace {

std::vector<std::uint8_t> letters(const std::string& text) {
  std::vector<std::uint8_t> out;
  for (char c : text) {
    out.push_back(map_char(c));
  }
  return out;
}

std::vector<std::uint8_t> random_text(Rng& rng, std::size_t length) {
  std::vector<std::uint8_t> out(length);
  for (auto& v : out) {
    v = static_cast<std::uint8_t>(rng.below(kAlphabetSize));
  }
  return out;
}

}  // namespace

TEST_CASE("map_char maps alphabetical positions", "[affine]") {
  CHECK(map_char('A') == 0);
  CHECK(map_char('Z') == 25);
  CHECK(map_char('M') == 12);
  CHECK(render_letter(0) == 'A');
  CHECK(render_letter(25) == 'Z');
}

TEST_CASE("encrypt applies y = (ax + b) mod 26", "[affine]") {
  const std::vector<std::uint8_t> abc = {0, 1, 2};
  CHECK(encrypt(abc, AffineKey{1, 0}) == abc);

  CHECK(encrypt(std::vector<std::uint8_t>{0}, AffineKey{5, 8}) ==
        std::vector<std::uint8_t>{8});

  // AFFINE -> IHHWVC under (a=5, b=8), each letter evaluated directly
  CHECK(encrypt(letters("AFFINE"), AffineKey{5, 8}) == letters("IHHWVC"));
}

TEST_CASE("decrypt inverts encrypt", "[affine]") {
  CHECK(decrypt(std::vector<std::uint8_t>{8}, AffineKey{5, 8}) ==
        std::vector<std::uint8_t>{0});
  const std::vector<std::uint8_t> abc = {0, 1, 2};
  CHECK(decrypt(abc, AffineKey{1, 0}) == abc);
  CHECK(decrypt(letters("IHHWVC"), AffineKey{5, 8}) == letters("AFFINE"));
}

TEST_CASE("invalid keys are rejected", "[affine]") {
  CHECK_THROWS_AS(encrypt(std::vector<std::uint8_t>{0}, AffineKey{2, 0}), KeyError);
  CHECK_THROWS_AS(decrypt(std::vector<std::uint8_t>{0}, AffineKey{13, 5}), KeyError);
  CHECK_THROWS_AS(validate_key(AffineKey{1, 26}), KeyError);
  CHECK_THROWS_AS(validate_key(AffineKey{-3, 0}), KeyError);
  CHECK(is_valid_key(AffineKey{25, 25}));
}

TEST_CASE("mod_inverse over the coprime residues", "[affine]") {
  CHECK(mod_inverse(1) == 1);
  CHECK(mod_inverse(5) == 21);   // 5 * 21 = 105 = 4*26 + 1
  CHECK(mod_inverse(25) == 25);  // 25 * 25 = 625 = 24*26 + 1
  for (int a : kCoprimeCoeffs) {
    CHECK((a * mod_inverse(a)) % kAlphabetSize == 1);
  }
  CHECK_THROWS_AS(mod_inverse(0), KeyError);
  CHECK_THROWS_AS(mod_inverse(13), KeyError);
  CHECK_THROWS_AS(mod_inverse(4), KeyError);
}

TEST_CASE("key codec is the rank(a)*26+b bijection", "[affine]") {
  CHECK(key_to_index(AffineKey{1, 0}) == 0);
  CHECK(key_to_index(AffineKey{25, 25}) == 311);
  CHECK(key_to_index(AffineKey{3, 4}) == 30);
  CHECK(index_to_key(0) == AffineKey{1, 0});
  CHECK(index_to_key(311) == AffineKey{25, 25});
  CHECK(index_to_key(30) == AffineKey{3, 4});

  for (int i = 0; i < kNumKeys; ++i) {
    CHECK(key_to_index(index_to_key(i)) == i);
  }
  CHECK_THROWS_AS(index_to_key(-1), IndexRangeError);
  CHECK_THROWS_AS(index_to_key(312), IndexRangeError);
  CHECK_THROWS_AS(key_to_index(AffineKey{2, 0}), KeyError);
}

TEST_CASE("enumerate_keys lists all 312 keys in index order", "[affine]") {
  const auto& keys = enumerate_keys();
  CHECK(keys.size() == 312);
  CHECK(keys.front() == AffineKey{1, 0});
  CHECK(keys.back() == AffineKey{25, 25});

  std::set<int> coefficients;
  std::set<int> indices;
  for (const auto& key : keys) {
    CHECK(is_valid_key(key));
    coefficients.insert(key.a);
    indices.insert(key_to_index(key));
  }
  CHECK(coefficients.size() == 12);
  CHECK(indices.size() == 312);  // codec is injective over the enumeration
}

TEST_CASE("roundtrip decrypt(encrypt(p)) = p for every key", "[affine]") {
  Rng rng(2024);
  const auto text = random_text(rng, 257);
  for (const auto& key : enumerate_keys()) {
    CHECK(decrypt(encrypt(text, key), key) == text);
  }
}

TEST_CASE("every key induces a bijection on Z26", "[affine]") {
  for (const auto& key : enumerate_keys()) {
    const auto table = encrypt_table(key);
    std::set<std::uint8_t> image(table.begin(), table.end());
    CHECK(image.size() == 26);
  }
}

TEST_CASE("composition of two keys is an affine key", "[affine]") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k1 = index_to_key(static_cast<int>(rng.below(kNumKeys)));
    const auto k2 = index_to_key(static_cast<int>(rng.below(kNumKeys)));
    const AffineKey k3{(k2.a * k1.a) % kAlphabetSize,
                       (k2.a * k1.b + k2.b) % kAlphabetSize};
    const auto text = random_text(rng, 64);
    CHECK(encrypt(encrypt(text, k1), k2) == encrypt(text, k3));
  }
}
