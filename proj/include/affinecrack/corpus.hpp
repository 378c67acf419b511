#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "affinecrack/affine.hpp"
#include "affinecrack/errors.hpp"
#include "affinecrack/io.hpp"
#include "affinecrack/rng.hpp"
#include "affinecrack/version.hpp"

namespace affinecrack {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetConfig {
  std::uint32_t seq_len = 100;
  std::uint32_t num_samples = 20000;
  std::array<double, 3> split = {0.8, 0.1, 0.1};  // train / validation / test
  std::uint64_t seed = 0;
  std::string corpus_path;

  bool operator==(const DatasetConfig&) const = default;
};

inline void validate_config(const DatasetConfig& cfg) {
  if (cfg.seq_len == 0) {
    throw ConfigError("seq_len must be positive");
  }
  if (cfg.num_samples == 0) {
    throw ConfigError("num_samples must be positive");
  }
  double sum = 0.0;
  for (double f : cfg.split) {
    if (f < 0.0) {
      throw ConfigError("split fractions must be non-negative");
    }
    sum += f;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

// One (ciphertext, key, plaintext) tuple. Token ids are 0-25 letters plus
// PAD = 26; PAD positions coincide in both sequences.
struct Sample {
  std::vector<std::uint8_t> ciphertext;
  std::vector<std::uint8_t> plaintext;
  std::uint16_t key_index = 0;

  bool operator==(const Sample&) const = default;
};

struct SplitDataset {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
  DatasetConfig config;
  std::string corpus_digest;

  bool operator==(const SplitDataset&) const = default;
};

// Uppercases ASCII letters, maps A-Z to 0-25, drops everything else.
inline std::vector<std::uint8_t> preprocess_corpus(std::string_view raw) {
  std::vector<std::uint8_t> out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (c >= 'a' && c <= 'z') {
      out.push_back(static_cast<std::uint8_t>(c - 'a'));
    } else if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<std::uint8_t>(c - 'A'));
    }
  }
  if (out.empty()) {
    throw EmptyCorpusError("input contains no ASCII letters");
  }
  return out;
}

// 0-25 back to 'A'-'Z'; the inverse of preprocessing on its image.
inline std::string render_letters(std::span<const std::uint8_t> letters) {
  std::string out;
  out.reserve(letters.size());
  for (std::uint8_t v : letters) {
    out.push_back(render_letter(v));
  }
  return out;
}

// num_samples contiguous windows of seq_len letters at uniform offsets.
// Windows may overlap.
inline std::vector<std::vector<std::uint8_t>> sample_plaintexts(
    std::span<const std::uint8_t> corpus, const DatasetConfig& cfg, Rng& rng) {
  validate_config(cfg);
  if (corpus.size() < cfg.seq_len) {
    throw InsufficientCorpusError("corpus has " + std::to_string(corpus.size()) +
                                  " letters, need at least " + std::to_string(cfg.seq_len));
  }
  const std::uint64_t offsets = corpus.size() - cfg.seq_len + 1;
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(cfg.num_samples);
  for (std::uint32_t i = 0; i < cfg.num_samples; ++i) {
    const std::uint64_t start = rng.below(offsets);
    out.emplace_back(corpus.begin() + static_cast<std::ptrdiff_t>(start),
                     corpus.begin() + static_cast<std::ptrdiff_t>(start + cfg.seq_len));
  }
  return out;
}

// a uniform over the 12 coprime coefficients, b uniform over 0-25,
// independent.
inline AffineKey random_key(Rng& rng) {
  const int a = kCoprimeCoeffs[static_cast<std::size_t>(rng.below(kNumCoeffs))];
  const int b = static_cast<int>(rng.below(kAlphabetSize));
  return AffineKey{a, b};
}

// Normalized letter frequencies over non-PAD tokens; the zero vector for an
// all-PAD sequence.
inline std::array<double, 26> letter_frequencies(std::span<const std::uint8_t> tokens) {
  std::array<double, 26> freq{};
  std::size_t n = 0;
  for (std::uint8_t t : tokens) {
    assert(t < kVocabSize);
    if (t < kAlphabetSize) {
      freq[t] += 1.0;
      ++n;
    }
  }
  if (n > 0) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double& f : freq) {
      f *= inv;
    }
  }
  return freq;
}

// Validation and test take floor(n * fraction); train gets the remainder.
inline std::array<std::size_t, 3> partition_sizes(std::size_t n, const std::array<double, 3>& split) {
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * split[1]));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * split[2]));
  return {n - n_val - n_test, n_val, n_test};
}

inline SplitDataset build_dataset_from_letters(std::span<const std::uint8_t> corpus,
                                               const DatasetConfig& cfg) {
  validate_config(cfg);
  Rng rng(cfg.seed);
  auto windows = sample_plaintexts(corpus, cfg, rng);

  std::vector<Sample> samples;
  samples.reserve(windows.size());
  for (auto& window : windows) {
    const AffineKey key = random_key(rng);
    Sample s;
    s.ciphertext = encrypt(window, key);
    s.plaintext = std::move(window);
    s.key_index = static_cast<std::uint16_t>(key_to_index(key));
    samples.push_back(std::move(s));
  }
  rng.shuffle(samples);

  const auto sizes = partition_sizes(samples.size(), cfg.split);
  SplitDataset ds;
  ds.config = cfg;
  ds.corpus_digest = fnv1a64_hex(corpus);
  auto it = samples.begin();
  ds.train.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(sizes[0])));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  ds.validation.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(sizes[1])));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  ds.test.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(sizes[2])));
  return ds;
}

// Reads cfg.corpus_path, preprocesses it, and builds the split dataset.
inline SplitDataset build_dataset(const DatasetConfig& cfg) {
  const std::string raw = read_file_text(cfg.corpus_path);
  const auto letters = preprocess_corpus(raw);
  return build_dataset_from_letters(letters, cfg);
}

namespace detail {

inline void append_partition(std::string& payload, const std::vector<Sample>& part,
                             std::uint32_t seq_len) {
  for (const Sample& s : part) {
    if (s.ciphertext.size() != seq_len || s.plaintext.size() != seq_len) {
      throw ShapeError("sample length differs from configured seq_len");
    }
  }
  for (const Sample& s : part) {
    payload.append(reinterpret_cast<const char*>(s.ciphertext.data()), s.ciphertext.size());
  }
  for (const Sample& s : part) {
    payload.append(reinterpret_cast<const char*>(s.plaintext.data()), s.plaintext.size());
  }
  for (const Sample& s : part) {
    wire::put_u16(payload, s.key_index);
  }
}

inline std::vector<Sample> read_partition(wire::Reader& reader, std::size_t count,
                                          std::uint32_t seq_len) {
  std::vector<Sample> part(count);
  for (Sample& s : part) {
    s.ciphertext.resize(seq_len);
    reader.get_bytes(s.ciphertext.data(), seq_len);
  }
  for (Sample& s : part) {
    s.plaintext.resize(seq_len);
    reader.get_bytes(s.plaintext.data(), seq_len);
  }
  for (Sample& s : part) {
    s.key_index = reader.get_u16();
  }
  return part;
}

}  // namespace detail

// Container layout: one JSON manifest line, then for each partition in
// train/validation/test order the ciphertext bytes, plaintext bytes, and
// little-endian u16 key indices.
inline void save_dataset(const SplitDataset& ds, const std::filesystem::path& path) {
  std::string payload;
  const std::uint64_t per_sample = 2ull * ds.config.seq_len + 2ull;
  payload.reserve(per_sample * (ds.train.size() + ds.validation.size() + ds.test.size()));
  detail::append_partition(payload, ds.train, ds.config.seq_len);
  detail::append_partition(payload, ds.validation, ds.config.seq_len);
  detail::append_partition(payload, ds.test, ds.config.seq_len);

  nlohmann::ordered_json manifest;
  manifest["format"] = "afds";
  manifest["version"] = kDatasetFormatVersion;
  manifest["rng"] = kRngAlgorithm;
  manifest["config"] = {{"seq_len", ds.config.seq_len},
                        {"num_samples", ds.config.num_samples},
                        {"split", ds.config.split},
                        {"seed", ds.config.seed},
                        {"corpus_path", ds.config.corpus_path}};
  manifest["corpus_digest"] = ds.corpus_digest;
  manifest["counts"] = {{"train", ds.train.size()},
                        {"validation", ds.validation.size()},
                        {"test", ds.test.size()}};
  manifest["payload_digest"] = fnv1a64_hex(
      {reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()});

  std::string file = manifest.dump();
  file.push_back('\n');
  file += payload;
  atomic_write_file(path, file);
}

inline SplitDataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file_text(path);
  auto [manifest_text, payload] = split_container(bytes);

  nlohmann::json manifest = nlohmann::json::parse(manifest_text, nullptr, false);
  std::string format;
  int version = -1;
  try {
    if (!manifest.is_discarded()) {
      format = manifest.value("format", "");
      version = manifest.value("version", -1);
    }
  } catch (const nlohmann::json::exception&) {
  }
  if (format != "afds") {
    throw MalformedFileError(path.string() + ": not an afds container");
  }
  if (version != kDatasetFormatVersion) {
    throw VersionError(path.string() + ": unsupported afds version");
  }

  SplitDataset ds;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  try {
    const auto& cfg = manifest.at("config");
    ds.config.seq_len = cfg.at("seq_len").get<std::uint32_t>();
    ds.config.num_samples = cfg.at("num_samples").get<std::uint32_t>();
    ds.config.split = cfg.at("split").get<std::array<double, 3>>();
    ds.config.seed = cfg.at("seed").get<std::uint64_t>();
    ds.config.corpus_path = cfg.at("corpus_path").get<std::string>();
    ds.corpus_digest = manifest.at("corpus_digest").get<std::string>();
    const auto& counts = manifest.at("counts");
    n_train = counts.at("train").get<std::size_t>();
    n_val = counts.at("validation").get<std::size_t>();
    n_test = counts.at("test").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(path.string() + ": bad manifest: " + e.what());
  }

  const std::uint64_t per_sample = 2ull * ds.config.seq_len + 2ull;
  if (payload.size() != per_sample * (n_train + n_val + n_test)) {
    throw MalformedFileError(path.string() + ": payload length does not match counts");
  }
  const std::string actual = fnv1a64_hex(
      {reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()});
  if (manifest.value("payload_digest", "") != actual) {
    throw DigestError(path.string() + ": payload digest mismatch");
  }

  wire::Reader reader(payload.data(), payload.size());
  ds.train = detail::read_partition(reader, n_train, ds.config.seq_len);
  ds.validation = detail::read_partition(reader, n_val, ds.config.seq_len);
  ds.test = detail::read_partition(reader, n_test, ds.config.seq_len);
  return ds;
}

}  // namespace affinecrack
