// Command-line front end: dataset generation, training, evaluation, the
// chi-square baseline attack, and the accuracy-vs-length sweep.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "affinecrack/affinecrack.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace affinecrack;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One manifest per run, written atomically next to the subcommand's outputs.
struct ManifestWriter {
  ordered_json doc;

  explicit ManifestWriter(const std::string& subcommand) {
    doc["tool"] = "affinecrack";
    doc["tool_version"] = kVersion;
    doc["subcommand"] = subcommand;
    doc["started_utc"] = utc_timestamp();
  }

  void finish(const fs::path& path) {
    doc["finished_utc"] = utc_timestamp();
    atomic_write_file(path, doc.dump(2) + "\n");
  }
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SplitOption {
  std::array<double, 3> fractions = {0.8, 0.1, 0.1};
};

std::array<double, 3> parse_split(const std::string& text) {
  std::array<double, 3> out{};
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) {
      throw CLI::ValidationError("--split", "expected three comma-separated fractions");
    }
    out[static_cast<std::size_t>(i++)] = std::stod(item);
  }
  if (i != 3) {
    throw CLI::ValidationError("--split", "expected three comma-separated fractions");
  }
  return out;
}

struct TrainFlags {
  std::uint32_t epochs = 30;
  std::uint32_t batch = 128;
  std::uint32_t hidden = 128;
  std::uint32_t embed = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool best_val = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--epochs", flags.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch", flags.batch, "Mini-batch size")->capture_default_str();
  cmd->add_option("--hidden", flags.hidden, "Hidden layer width")->capture_default_str();
  cmd->add_option("--embed", flags.embed, "Embedding dimension")->capture_default_str();
  cmd->add_option("--lr", flags.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Training seed")->capture_default_str();
  cmd->add_flag("--best-val", flags.best_val,
                "Keep the best-validation weights instead of the final epoch");
}

struct TrainOutputs {
  fs::path model;
  fs::path curves;
  fs::path report;
  TrainReport train_report;
};

// Shared by `train` and `sweep`: trains on a loaded dataset and writes
// model.afnn, curves.csv and report.json under out_dir.
TrainOutputs run_training(const SplitDataset& dataset, const TrainFlags& flags,
                          const fs::path& out_dir, bool quiet = false) {
  ModelConfig mcfg;
  mcfg.seq_len = dataset.config.seq_len;
  mcfg.hidden_dim = flags.hidden;
  mcfg.embed_dim = flags.embed;
  TrainConfig tcfg;
  tcfg.epochs = flags.epochs;
  tcfg.batch_size = flags.batch;
  tcfg.lr = flags.lr;
  tcfg.seed = flags.seed;
  tcfg.best_val = flags.best_val;

  fs::create_directories(out_dir);
  TrainOutputs out;
  out.model = out_dir / "model.afnn";
  out.curves = out_dir / "curves.csv";
  out.report = out_dir / "report.json";

  std::ofstream curves(out.curves, std::ios::trunc);
  if (!curves) {
    throw IoError("cannot open " + out.curves.string());
  }
  curves << kCurvesCsvHeader << '\n';

  auto [params, report] = train(dataset, mcfg, tcfg, [&](const EpochRecord& rec) {
    curves << curves_csv_row(rec) << '\n';
    curves.flush();
    if (!quiet) {
      std::cout << "epoch " << rec.epoch << "/" << tcfg.epochs
                << "  train_loss=" << format_g6(rec.train_loss)
                << "  train_acc=" << format_g6(rec.train_acc)
                << "  val_loss=" << format_g6(rec.val_loss)
                << "  val_acc=" << format_g6(rec.val_acc) << "  (" << format_g6(rec.seconds)
                << "s)\n";
    }
  });
  curves.close();

  save_params(params, mcfg, out.model);
  atomic_write_file(out.report, report_to_json(report).dump(2) + "\n");
  out.train_report = std::move(report);
  return out;
}

std::vector<std::uint8_t> read_ciphertext_letters(const fs::path& path) {
  const std::string raw = read_file_text(path);
  std::vector<std::uint8_t> letters;
  letters.reserve(raw.size());
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      continue;
    }
    if (c >= 'A' && c <= 'Z') {
      letters.push_back(static_cast<std::uint8_t>(c - 'A'));
    } else if (c >= 'a' && c <= 'z') {
      letters.push_back(static_cast<std::uint8_t>(c - 'a'));
    } else {
      throw ConfigError(path.string() + ": ciphertext must contain only letters A-Z (got '" +
                        std::string(1, c) + "')");
    }
  }
  if (letters.empty()) {
    throw EmptyDataError(path.string() + ": no ciphertext letters");
  }
  return letters;
}

int cmd_generate(const std::string& corpus, std::uint32_t length, std::uint32_t samples,
                 std::uint64_t seed, const std::string& split_text, const fs::path& out) {
  ManifestWriter manifest("generate");

  DatasetConfig cfg;
  cfg.seq_len = length;
  cfg.num_samples = samples;
  cfg.seed = seed;
  cfg.split = parse_split(split_text);
  cfg.corpus_path = corpus;

  const SplitDataset dataset = build_dataset(cfg);
  save_dataset(dataset, out);

  manifest.doc["config"] = {{"corpus", corpus},        {"length", length}, {"samples", samples},
                            {"seed", seed},            {"split", cfg.split}};
  manifest.doc["inputs"] = {corpus};
  manifest.doc["outputs"] = {out.string()};
  manifest.doc["corpus_digest"] = dataset.corpus_digest;
  manifest.finish(out.string() + ".manifest.json");

  std::cout << "wrote " << out.string() << "  train=" << dataset.train.size()
            << " validation=" << dataset.validation.size() << " test=" << dataset.test.size()
            << "\n";
  return 0;
}

int cmd_train(const fs::path& data, const fs::path& out_dir, const TrainFlags& flags,
              std::int64_t expect_length) {
  ManifestWriter manifest("train");

  const SplitDataset dataset = load_dataset(data);
  if (expect_length >= 0 &&
      static_cast<std::uint32_t>(expect_length) != dataset.config.seq_len) {
    throw ConfigError("--length " + std::to_string(expect_length) +
                      " does not match dataset seq_len " +
                      std::to_string(dataset.config.seq_len));
  }

  const TrainOutputs outputs = run_training(dataset, flags, out_dir);

  manifest.doc["config"] = {{"data", data.string()},   {"length", dataset.config.seq_len},
                            {"epochs", flags.epochs},  {"batch", flags.batch},
                            {"hidden", flags.hidden},  {"embed", flags.embed},
                            {"lr", flags.lr},          {"seed", flags.seed},
                            {"best_val", flags.best_val},
                            {"threads", threading::num_threads()}};
  manifest.doc["inputs"] = {data.string()};
  manifest.doc["outputs"] = {outputs.model.string(), outputs.curves.string(),
                             outputs.report.string()};
  manifest.finish(out_dir / "manifest.json");

  std::cout << "test_accuracy=" << format_g6(outputs.train_report.test_accuracy) << "  ("
            << format_g6(outputs.train_report.total_seconds) << "s total)\n";
  return 0;
}

int cmd_eval(const fs::path& model_path, const fs::path& data, const std::string& partition) {
  const auto [params, mcfg] = load_params(model_path);
  const SplitDataset dataset = load_dataset(data);
  if (mcfg.seq_len != dataset.config.seq_len) {
    throw ConfigError("checkpoint seq_len " + std::to_string(mcfg.seq_len) +
                      " does not match dataset seq_len " +
                      std::to_string(dataset.config.seq_len));
  }
  const std::vector<Sample>* part = &dataset.test;
  if (partition == "train") {
    part = &dataset.train;
  } else if (partition == "validation") {
    part = &dataset.validation;
  } else if (partition != "test") {
    throw ConfigError("unknown partition " + partition);
  }
  const auto [loss, accuracy] = evaluate(params, mcfg, *part);
  std::cout << "partition=" << partition << "  samples=" << part->size()
            << "  loss=" << format_g6(loss) << "  accuracy=" << format_g6(accuracy) << "\n";
  return 0;
}

int cmd_attack(const fs::path& input, const fs::path& reference_path, int top) {
  const auto ciphertext = read_ciphertext_letters(input);
  const auto reference =
      compute_reference(preprocess_corpus(read_file_text(reference_path)));
  const AttackResult result = brute_force_attack(ciphertext, reference);

  std::vector<int> order(kNumKeys);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return result.scores[static_cast<std::size_t>(l)] <
                                              result.scores[static_cast<std::size_t>(r)]; });

  std::cout << "best key: a=" << result.best_key.a << " b=" << result.best_key.b
            << "  (class index " << key_to_index(result.best_key) << ")\n";
  std::cout << "top " << top << " candidates:\n";
  for (int rank = 0; rank < top && rank < kNumKeys; ++rank) {
    const int index = order[static_cast<std::size_t>(rank)];
    const AffineKey key = index_to_key(index);
    std::cout << "  " << (rank + 1) << ". a=" << key.a << " b=" << key.b << "  index=" << index
              << "  chi2=" << format_g6(result.scores[static_cast<std::size_t>(index)]) << "\n";
  }
  return 0;
}

// Fraction of test samples whose key the chi-square attack recovers.
double classical_accuracy(const SplitDataset& dataset, const ReferenceFrequencies& reference) {
  std::size_t hits = 0;
  for (const Sample& s : dataset.test) {
    std::vector<std::uint8_t> stripped;
    stripped.reserve(s.ciphertext.size());
    for (std::uint8_t t : s.ciphertext) {
      if (t < kAlphabetSize) {
        stripped.push_back(t);
      }
    }
    if (stripped.empty()) {
      continue;
    }
    const AttackResult result = brute_force_attack(stripped, reference);
    hits += key_to_index(result.best_key) == s.key_index;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.test.size());
}

void write_sweep_svg(const fs::path& path, const std::vector<std::uint32_t>& lengths,
                     const std::vector<double>& neural, const std::vector<double>& classical) {
  const double width = 640.0;
  const double height = 420.0;
  const double ml = 70.0, mr = 30.0, mt = 30.0, mb = 60.0;
  const double plot_w = width - ml - mr;
  const double plot_h = height - mt - mb;
  const std::size_t n = lengths.size();

  const auto x_at = [&](std::size_t i) {
    return n <= 1 ? ml + plot_w / 2 : ml + plot_w * static_cast<double>(i) / (n - 1);
  };
  const auto y_at = [&](double acc) { return mt + plot_h * (1.0 - acc); };
  const auto polyline = [&](const std::vector<double>& ys, const char* color) {
    std::string points;
    for (std::size_t i = 0; i < n; ++i) {
      points += std::to_string(x_at(i)) + "," + std::to_string(y_at(ys[i])) + " ";
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\">\n";
  svg += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  for (int tick = 0; tick <= 10; tick += 2) {
    const double y = y_at(tick / 10.0);
    svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(y) + "\" x2=\"" +
           std::to_string(ml + plot_w) + "\" y2=\"" + std::to_string(y) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + std::to_string(ml - 10) + "\" y=\"" + std::to_string(y + 4) +
           "\" text-anchor=\"end\" font-size=\"12\">" + format_g6(tick / 10.0) + "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    svg += "<text x=\"" + std::to_string(x_at(i)) + "\" y=\"" + std::to_string(mt + plot_h + 20) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + std::to_string(lengths[i]) +
           "</text>\n";
  }
  svg += polyline(neural, "#1f77b4");
  svg += polyline(classical, "#d62728");
  for (std::size_t i = 0; i < n; ++i) {
    svg += "<circle cx=\"" + std::to_string(x_at(i)) + "\" cy=\"" +
           std::to_string(y_at(neural[i])) + "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    svg += "<circle cx=\"" + std::to_string(x_at(i)) + "\" cy=\"" +
           std::to_string(y_at(classical[i])) + "\" r=\"3\" fill=\"#d62728\"/>\n";
  }
  svg += "<text x=\"" + std::to_string(ml) + "\" y=\"18\" font-size=\"13\" fill=\"#1f77b4\">"
         "hybrid network</text>\n";
  svg += "<text x=\"" + std::to_string(ml + 130) + "\" y=\"18\" font-size=\"13\" "
         "fill=\"#d62728\">chi-square brute force</text>\n";
  svg += "<text x=\"" + std::to_string(ml + plot_w / 2) + "\" y=\"" +
         std::to_string(height - 15) +
         "\" text-anchor=\"middle\" font-size=\"13\">ciphertext length</text>\n";
  svg += "<text x=\"18\" y=\"" + std::to_string(mt + plot_h / 2) +
         "\" font-size=\"13\" transform=\"rotate(-90 18 " + std::to_string(mt + plot_h / 2) +
         ")\" text-anchor=\"middle\">test accuracy</text>\n";
  svg += "</svg>\n";
  atomic_write_file(path, svg);
}

int cmd_sweep(const std::string& corpus, std::vector<std::uint32_t> lengths,
              std::vector<std::uint32_t> samples, const TrainFlags& flags,
              const fs::path& out_dir, bool include_long, bool svg) {
  ManifestWriter manifest("sweep");
  if (include_long &&
      std::find(lengths.begin(), lengths.end(), 10000u) == lengths.end()) {
    lengths.push_back(10000);  // expected-degradation regime, opt-in
  }
  if (lengths.empty()) {
    throw ConfigError("sweep needs at least one length");
  }
  if (samples.empty()) {
    samples.assign(lengths.size(), 20000);
  } else if (samples.size() == 1) {
    samples.assign(lengths.size(), samples[0]);
  } else if (samples.size() != lengths.size()) {
    throw ConfigError("--samples must give one count or one per length");
  }

  fs::create_directories(out_dir);
  const auto corpus_letters = preprocess_corpus(read_file_text(corpus));
  const auto reference = compute_reference(corpus_letters);

  std::string csv = "length,test_accuracy,classical_accuracy,status\n";
  std::vector<std::uint32_t> ok_lengths;
  std::vector<double> ok_neural;
  std::vector<double> ok_classical;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const std::uint32_t length = lengths[i];
    try {
      ManifestWriter len_manifest("sweep/length");
      DatasetConfig dcfg;
      dcfg.seq_len = length;
      dcfg.num_samples = samples[i];
      dcfg.seed = derive_seed(flags.seed, 2 * i);
      dcfg.corpus_path = corpus;
      const fs::path len_dir = out_dir / ("L" + std::to_string(length));
      fs::create_directories(len_dir);
      const SplitDataset dataset = build_dataset_from_letters(corpus_letters, dcfg);
      save_dataset(dataset, len_dir / "dataset.afds");

      TrainFlags per_length = flags;
      per_length.seed = derive_seed(flags.seed, 2 * i + 1);
      std::cout << "=== length " << length << " (" << samples[i] << " samples) ===\n";
      const TrainOutputs outputs = run_training(dataset, per_length, len_dir);
      const double classical = classical_accuracy(dataset, reference);

      len_manifest.doc["config"] = {{"corpus", corpus},
                                    {"length", length},
                                    {"samples", samples[i]},
                                    {"dataset_seed", dcfg.seed},
                                    {"train_seed", per_length.seed},
                                    {"epochs", flags.epochs},
                                    {"batch", flags.batch},
                                    {"hidden", flags.hidden},
                                    {"embed", flags.embed},
                                    {"lr", flags.lr}};
      len_manifest.doc["inputs"] = {corpus};
      len_manifest.doc["outputs"] = {(len_dir / "dataset.afds").string(),
                                     outputs.model.string(), outputs.curves.string(),
                                     outputs.report.string()};
      len_manifest.finish(len_dir / "manifest.json");

      csv += std::to_string(length) + "," + format_g6(outputs.train_report.test_accuracy) + "," +
             format_g6(classical) + ",ok\n";
      ok_lengths.push_back(length);
      ok_neural.push_back(outputs.train_report.test_accuracy);
      ok_classical.push_back(classical);
      std::cout << "length " << length
                << ": test_accuracy=" << format_g6(outputs.train_report.test_accuracy)
                << " classical_accuracy=" << format_g6(classical) << "\n";
    } catch (const Error& e) {
      std::string reason = e.what();
      std::replace(reason.begin(), reason.end(), ',', ';');
      csv += std::to_string(length) + ",,,error: " + reason + "\n";
      std::cout << "length " << length << ": failed: " << e.what() << "\n";
    }
  }

  atomic_write_file(out_dir / "sweep.csv", csv);
  if (svg && !ok_lengths.empty()) {
    write_sweep_svg(out_dir / "sweep.svg", ok_lengths, ok_neural, ok_classical);
  }

  manifest.doc["config"] = {{"corpus", corpus},
                            {"lengths", lengths},
                            {"samples", samples},
                            {"epochs", flags.epochs},
                            {"batch", flags.batch},
                            {"hidden", flags.hidden},
                            {"embed", flags.embed},
                            {"lr", flags.lr},
                            {"seed", flags.seed},
                            {"include_long", include_long}};
  manifest.doc["inputs"] = {corpus};
  manifest.doc["outputs"] = {(out_dir / "sweep.csv").string()};
  manifest.finish(out_dir / "manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine cipher key recovery: hybrid network and chi-square baseline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (1 = reference mode)")
      ->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "Build a dataset from a text corpus");
  std::string g_corpus;
  std::uint32_t g_length = 100;
  std::uint32_t g_samples = 20000;
  std::uint64_t g_seed = 0;
  std::string g_split = "0.8,0.1,0.1";
  std::string g_out;
  generate->add_option("--corpus", g_corpus, "Plain-text corpus file")->required();
  generate->add_option("--length", g_length, "Sequence length L")->capture_default_str();
  generate->add_option("--samples", g_samples, "Number of samples")->capture_default_str();
  generate->add_option("--seed", g_seed, "Generation seed")->capture_default_str();
  generate->add_option("--split", g_split, "train,validation,test fractions")
      ->capture_default_str();
  generate->add_option("--out", g_out, "Output .afds path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the hybrid network on a dataset");
  std::string t_data;
  std::string t_out;
  std::int64_t t_length = -1;
  TrainFlags t_flags;
  train_cmd->add_option("--data", t_data, "Dataset .afds path")->required();
  train_cmd->add_option("--out", t_out, "Output directory")->required();
  train_cmd->add_option("--length", t_length,
                        "Expected sequence length (checked against the dataset)");
  add_train_flags(train_cmd, t_flags);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset partition");
  std::string e_model;
  std::string e_data;
  std::string e_partition = "test";
  eval_cmd->add_option("--model", e_model, "Checkpoint .afnn path")->required();
  eval_cmd->add_option("--data", e_data, "Dataset .afds path")->required();
  eval_cmd->add_option("--partition", e_partition, "train, validation or test")
      ->capture_default_str();

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "Chi-square brute force over all 312 keys");
  std::string a_input;
  std::string a_reference;
  int a_top = 5;
  attack_cmd->add_option("--input", a_input, "Ciphertext file (letters A-Z)")->required();
  attack_cmd->add_option("--reference", a_reference, "Reference English text file")->required();
  attack_cmd->add_option("--top", a_top, "Candidates to print")->capture_default_str();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy vs ciphertext length");
  std::string s_corpus;
  std::vector<std::uint32_t> s_lengths = {100, 500, 1000};
  std::vector<std::uint32_t> s_samples;
  std::string s_out;
  bool s_include_long = false;
  bool s_svg = false;
  TrainFlags s_flags;
  sweep_cmd->add_option("--corpus", s_corpus, "Plain-text corpus file")->required();
  sweep_cmd->add_option("--lengths", s_lengths, "Sequence lengths")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--samples", s_samples, "Samples per length (one value or one per length)")
      ->delimiter(',');
  sweep_cmd->add_option("--out", s_out, "Output directory")->required();
  sweep_cmd->add_flag("--include-long", s_include_long,
                      "Also run L=10000 (hours of CPU; accuracy collapses by design)");
  sweep_cmd->add_flag("--svg", s_svg, "Emit sweep.svg line chart");
  add_train_flags(sweep_cmd, s_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help / --version
    }
    std::cerr << e.what() << "\n";
    return 2;
  }

  threading::set_num_threads(threads);
  try {
    if (generate->parsed()) {
      return cmd_generate(g_corpus, g_length, g_samples, g_seed, g_split, g_out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(t_data, t_out, t_flags, t_length);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(e_model, e_data, e_partition);
    }
    if (attack_cmd->parsed()) {
      return cmd_attack(a_input, a_reference, a_top);
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep(s_corpus, s_lengths, s_samples, s_flags, s_out, s_include_long, s_svg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
