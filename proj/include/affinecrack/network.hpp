#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "affinecrack/affine.hpp"
#include "affinecrack/errors.hpp"
#include "affinecrack/io.hpp"
#include "affinecrack/rng.hpp"
#include "affinecrack/tensor.hpp"

namespace affinecrack {

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kNumClasses = kNumKeys;

struct ModelConfig {
  std::uint32_t seq_len = 100;
  std::uint32_t embed_dim = 16;
  std::uint32_t hidden_dim = 128;
  std::uint32_t vocab_size = kVocabSize;
  std::uint32_t num_classes = kNumClasses;

  bool operator==(const ModelConfig&) const = default;
};

inline void validate_config(const ModelConfig& cfg) {
  if (cfg.seq_len == 0 || cfg.embed_dim == 0 || cfg.hidden_dim == 0) {
    throw ConfigError("seq_len, embed_dim and hidden_dim must be positive");
  }
  if (cfg.vocab_size != kVocabSize || cfg.num_classes != kNumClasses) {
    throw ConfigError("vocab_size must be 27 and num_classes 312");
  }
}

// Two parallel branches feeding one linear head:
//   modular:     tokens -> embedding -> flatten -> dense+ReLU -> dense+ReLU
//   statistical: letter frequencies  -> dense+ReLU -> dense+ReLU
//   head:        concat(2*hidden) -> dense, no activation -> 312 logits
// Biases are stored as 1 x n matrices.
struct ModelParams {
  Matrix embedding;  // vocab x embed
  Matrix mod_w1, mod_b1;    // embed*L x hidden, 1 x hidden
  Matrix mod_w2, mod_b2;    // hidden x hidden
  Matrix stat_w1, stat_b1;  // 26 x hidden
  Matrix stat_w2, stat_b2;  // hidden x hidden
  Matrix head_w, head_b;    // 2*hidden x classes, 1 x classes

  bool operator==(const ModelParams&) const = default;
};

// Gradients share the parameter layout.
using ParamGrads = ModelParams;

// Applies fn(name, matrix) to every learnable array in the serialization
// order. The order is part of the checkpoint format.
template <typename Params, typename Fn>
void visit_params(Params& p, Fn&& fn) {
  fn("embedding", p.embedding);
  fn("mod_w1", p.mod_w1);
  fn("mod_b1", p.mod_b1);
  fn("mod_w2", p.mod_w2);
  fn("mod_b2", p.mod_b2);
  fn("stat_w1", p.stat_w1);
  fn("stat_b1", p.stat_b1);
  fn("stat_w2", p.stat_w2);
  fn("stat_b2", p.stat_b2);
  fn("head_w", p.head_w);
  fn("head_b", p.head_b);
}

inline ModelParams make_param_shapes(const ModelConfig& cfg) {
  validate_config(cfg);
  ModelParams p;
  const std::size_t hidden = cfg.hidden_dim;
  p.embedding = Matrix(cfg.vocab_size, cfg.embed_dim);
  p.mod_w1 = Matrix(static_cast<std::size_t>(cfg.embed_dim) * cfg.seq_len, hidden);
  p.mod_b1 = Matrix(1, hidden);
  p.mod_w2 = Matrix(hidden, hidden);
  p.mod_b2 = Matrix(1, hidden);
  p.stat_w1 = Matrix(kAlphabetSize, hidden);
  p.stat_b1 = Matrix(1, hidden);
  p.stat_w2 = Matrix(hidden, hidden);
  p.stat_b2 = Matrix(1, hidden);
  p.head_w = Matrix(2 * hidden, cfg.num_classes);
  p.head_b = Matrix(1, cfg.num_classes);
  return p;
}

inline std::size_t count_params(const ModelConfig& cfg) {
  ModelParams shapes = make_param_shapes(cfg);
  std::size_t n = 0;
  visit_params(shapes, [&](const char*, const Matrix& m) { n += m.size(); });
  return n;
}

// Dense weights: zero-mean normal with stddev sqrt(2 / fan_in), the ReLU
// fan-in scaling. Biases zero. Embedding uniform in [-0.05, 0.05].
inline ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  ModelParams p = make_param_shapes(cfg);
  for (double& v : p.embedding.data) {
    v = rng.unit_real() * 0.1 - 0.05;
  }
  for (Matrix* w : {&p.mod_w1, &p.mod_w2, &p.stat_w1, &p.stat_w2, &p.head_w}) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(w->rows));
    for (double& v : w->data) {
      v = rng.normal(0.0, stddev);
    }
  }
  return p;
}

struct ForwardCache {
  std::size_t batch = 0;
  std::vector<std::uint8_t> tokens;  // batch x L, for the embedding scatter
  Matrix freqs;                      // batch x 26
  Matrix flat;                       // batch x embed*L
  Matrix mod_z1, mod_a1, mod_z2, mod_a2;
  Matrix stat_z1, stat_a1, stat_z2, stat_a2;
  Matrix concat;  // batch x 2*hidden
  Matrix logits;  // batch x classes
};

namespace detail {

inline void check_forward_inputs(const ModelConfig& cfg, std::span<const std::uint8_t> tokens,
                                 const Matrix& freqs) {
  if (tokens.size() % cfg.seq_len != 0) {
    throw ShapeError("token buffer is not a whole number of length-L rows");
  }
  const std::size_t batch = tokens.size() / cfg.seq_len;
  if (freqs.rows != batch || freqs.cols != kAlphabetSize) {
    throw ShapeError("frequency matrix must be batch x 26");
  }
  for (std::uint8_t t : tokens) {
    if (t >= cfg.vocab_size) {
      throw VocabError("token id " + std::to_string(t) + " outside vocabulary");
    }
  }
}

inline void dense_forward(const Matrix& x, const Matrix& w, const Matrix& b, Matrix& z) {
  z = Matrix(x.rows, w.cols);
  matmul_into(x, w, z);
  add_row_vector(z, b);
}

}  // namespace detail

// tokens is batch x L row-major; freqs is batch x 26 (rows sum to 1, or are
// all-zero for all-PAD samples).
inline std::pair<Matrix, ForwardCache> forward(const ModelParams& params, const ModelConfig& cfg,
                                               std::span<const std::uint8_t> tokens,
                                               const Matrix& freqs) {
  detail::check_forward_inputs(cfg, tokens, freqs);
  const std::size_t batch = tokens.size() / cfg.seq_len;
  const std::size_t embed = cfg.embed_dim;
  const std::size_t hidden = cfg.hidden_dim;

  ForwardCache cache;
  cache.batch = batch;
  cache.tokens.assign(tokens.begin(), tokens.end());
  cache.freqs = freqs;

  // embedding lookup, flattened to batch x embed*L
  cache.flat = Matrix(batch, embed * cfg.seq_len);
  for (std::size_t i = 0; i < batch; ++i) {
    double* dst = cache.flat.row(i);
    const std::uint8_t* row_tokens = tokens.data() + i * cfg.seq_len;
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
      const double* src = params.embedding.row(row_tokens[t]);
      std::copy(src, src + embed, dst + t * embed);
    }
  }

  detail::dense_forward(cache.flat, params.mod_w1, params.mod_b1, cache.mod_z1);
  cache.mod_a1 = relu(cache.mod_z1);
  detail::dense_forward(cache.mod_a1, params.mod_w2, params.mod_b2, cache.mod_z2);
  cache.mod_a2 = relu(cache.mod_z2);

  detail::dense_forward(cache.freqs, params.stat_w1, params.stat_b1, cache.stat_z1);
  cache.stat_a1 = relu(cache.stat_z1);
  detail::dense_forward(cache.stat_a1, params.stat_w2, params.stat_b2, cache.stat_z2);
  cache.stat_a2 = relu(cache.stat_z2);

  cache.concat = Matrix(batch, 2 * hidden);
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy(cache.mod_a2.row(i), cache.mod_a2.row(i) + hidden, cache.concat.row(i));
    std::copy(cache.stat_a2.row(i), cache.stat_a2.row(i) + hidden, cache.concat.row(i) + hidden);
  }

  detail::dense_forward(cache.concat, params.head_w, params.head_b, cache.logits);
  return {cache.logits, std::move(cache)};
}

// Exact gradients of the loss whose dlogits is supplied. Embedding gradients
// scatter-add over token occurrences; the PAD row is trained like any other.
inline ParamGrads backward(const ModelParams& params, const ModelConfig& cfg,
                           const ForwardCache& cache, const Matrix& dlogits) {
  if (dlogits.rows != cache.batch || dlogits.cols != cfg.num_classes) {
    throw ShapeError("dlogits must be batch x num_classes");
  }
  const std::size_t hidden = cfg.hidden_dim;
  const std::size_t embed = cfg.embed_dim;
  ParamGrads g = make_param_shapes(cfg);

  // head
  matmul_transA_into(cache.concat, dlogits, g.head_w);
  g.head_b = column_sums(dlogits);
  const Matrix dconcat = matmul_transB(dlogits, params.head_w);

  Matrix dmod_a2(cache.batch, hidden);
  Matrix dstat_a2(cache.batch, hidden);
  for (std::size_t i = 0; i < cache.batch; ++i) {
    std::copy(dconcat.row(i), dconcat.row(i) + hidden, dmod_a2.row(i));
    std::copy(dconcat.row(i) + hidden, dconcat.row(i) + 2 * hidden, dstat_a2.row(i));
  }

  // modular branch
  const Matrix dmod_z2 = relu_backward(cache.mod_z2, dmod_a2);
  matmul_transA_into(cache.mod_a1, dmod_z2, g.mod_w2);
  g.mod_b2 = column_sums(dmod_z2);
  const Matrix dmod_a1 = matmul_transB(dmod_z2, params.mod_w2);
  const Matrix dmod_z1 = relu_backward(cache.mod_z1, dmod_a1);
  matmul_transA_into(cache.flat, dmod_z1, g.mod_w1);
  g.mod_b1 = column_sums(dmod_z1);
  const Matrix dflat = matmul_transB(dmod_z1, params.mod_w1);

  for (std::size_t i = 0; i < cache.batch; ++i) {
    const double* src = dflat.row(i);
    const std::uint8_t* row_tokens = cache.tokens.data() + i * cfg.seq_len;
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
      double* dst = g.embedding.row(row_tokens[t]);
      const double* chunk = src + t * embed;
      for (std::size_t e = 0; e < embed; ++e) {
        dst[e] += chunk[e];
      }
    }
  }

  // statistical branch
  const Matrix dstat_z2 = relu_backward(cache.stat_z2, dstat_a2);
  matmul_transA_into(cache.stat_a1, dstat_z2, g.stat_w2);
  g.stat_b2 = column_sums(dstat_z2);
  const Matrix dstat_a1 = matmul_transB(dstat_z2, params.stat_w2);
  const Matrix dstat_z1 = relu_backward(cache.stat_z1, dstat_a1);
  matmul_transA_into(cache.freqs, dstat_z1, g.stat_w1);
  g.stat_b1 = column_sums(dstat_z1);

  return g;
}

// Per-sample argmax over the logits; ties break to the lowest index.
inline std::vector<std::uint16_t> predict_from_logits(const Matrix& logits) {
  std::vector<std::uint16_t> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j) {
      if (row[j] > row[best]) {
        best = j;
      }
    }
    out[i] = static_cast<std::uint16_t>(best);
  }
  return out;
}

inline std::vector<std::uint16_t> predict(const ModelParams& params, const ModelConfig& cfg,
                                          std::span<const std::uint8_t> tokens,
                                          const Matrix& freqs) {
  auto [logits, cache] = forward(params, cfg, tokens, freqs);
  return predict_from_logits(logits);
}

// Flattens every parameter array in serialization order; unpack inverts it.
inline std::vector<double> pack_params(const ModelParams& params) {
  std::vector<double> flat;
  visit_params(const_cast<ModelParams&>(params), [&](const char*, Matrix& m) {
    flat.insert(flat.end(), m.data.begin(), m.data.end());
  });
  return flat;
}

inline ModelParams unpack_params(std::span<const double> flat, const ModelConfig& cfg) {
  ModelParams p = make_param_shapes(cfg);
  std::size_t pos = 0;
  visit_params(p, [&](const char*, Matrix& m) {
    if (pos + m.size() > flat.size()) {
      throw ShapeError("flat parameter vector too short");
    }
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + m.size()), m.data.begin());
    pos += m.size();
  });
  if (pos != flat.size()) {
    throw ShapeError("flat parameter vector too long");
  }
  return p;
}

// Checkpoint container: JSON manifest line (config, array inventory, payload
// digest) followed by the little-endian f64 arrays in serialization order.
inline void save_params(const ModelParams& params, const ModelConfig& cfg,
                        const std::filesystem::path& path) {
  std::string payload;
  nlohmann::ordered_json arrays = nlohmann::ordered_json::array();
  visit_params(const_cast<ModelParams&>(params), [&](const char* name, Matrix& m) {
    arrays.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}});
    for (double v : m.data) {
      wire::put_f64(payload, v);
    }
  });

  nlohmann::ordered_json manifest;
  manifest["format"] = "afnn";
  manifest["version"] = kCheckpointFormatVersion;
  manifest["config"] = {{"seq_len", cfg.seq_len},
                        {"embed_dim", cfg.embed_dim},
                        {"hidden_dim", cfg.hidden_dim},
                        {"vocab_size", cfg.vocab_size},
                        {"num_classes", cfg.num_classes}};
  manifest["dtype"] = "f64le";
  manifest["arrays"] = arrays;
  manifest["payload_digest"] = fnv1a64_hex(
      {reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()});

  std::string file = manifest.dump();
  file.push_back('\n');
  file += payload;
  atomic_write_file(path, file);
}

inline std::pair<ModelParams, ModelConfig> load_params(const std::filesystem::path& path) {
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
  if (format != "afnn") {
    throw MalformedFileError(path.string() + ": not an afnn checkpoint");
  }
  if (version != kCheckpointFormatVersion) {
    throw VersionError(path.string() + ": unsupported afnn version");
  }

  ModelConfig cfg;
  std::uint64_t declared = 0;
  try {
    const auto& c = manifest.at("config");
    cfg.seq_len = c.at("seq_len").get<std::uint32_t>();
    cfg.embed_dim = c.at("embed_dim").get<std::uint32_t>();
    cfg.hidden_dim = c.at("hidden_dim").get<std::uint32_t>();
    cfg.vocab_size = c.at("vocab_size").get<std::uint32_t>();
    cfg.num_classes = c.at("num_classes").get<std::uint32_t>();
    for (const auto& entry : manifest.at("arrays")) {
      declared += entry.at("rows").get<std::uint64_t>() * entry.at("cols").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(path.string() + ": bad manifest: " + e.what());
  }
  if (payload.size() != declared * sizeof(double)) {
    throw MalformedFileError(path.string() + ": payload length does not match declared arrays");
  }
  const std::string actual = fnv1a64_hex(
      {reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()});
  if (manifest.value("payload_digest", "") != actual) {
    throw DigestError(path.string() + ": payload digest mismatch");
  }

  ModelParams p = make_param_shapes(cfg);
  wire::Reader reader(payload.data(), payload.size());
  std::size_t array_index = 0;
  const auto& arrays = manifest.at("arrays");
  visit_params(p, [&](const char* name, Matrix& m) {
    if (array_index >= arrays.size()) {
      throw ShapeError(path.string() + ": checkpoint missing array " + name);
    }
    const auto& entry = arrays.at(array_index++);
    if (entry.value("name", "") != name || entry.value("rows", std::size_t{0}) != m.rows ||
        entry.value("cols", std::size_t{0}) != m.cols) {
      throw ShapeError(path.string() + ": array " + name + " has unexpected shape");
    }
    for (double& v : m.data) {
      v = reader.get_f64();
    }
  });
  if (reader.remaining() != 0) {
    throw MalformedFileError(path.string() + ": trailing bytes after arrays");
  }
  return {std::move(p), cfg};
}

}  // namespace affinecrack
