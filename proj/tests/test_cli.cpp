#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "affinecrack/corpus.hpp"
#include "affinecrack/trainer.hpp"

using namespace affinecrack;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

CliResult run_cli(const std::string& args) {
  const fs::path capture = fs::temp_directory_path() / "afc_cli_capture.txt";
  const std::string cmd =
      std::string(AFC_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = slurp(capture);
  return result;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "afc_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// one small corpus file shared by the CLI cases
const std::string& corpus_file() {
  static const std::string path = [] {
    Rng rng(60);
    std::string text;
    for (int i = 0; i < 60000; ++i) {
      const auto r = rng.below(100);
      text.push_back(static_cast<char>(
          'a' + (r < 55 ? rng.below(4) : rng.below(kAlphabetSize))));
      if (i % 60 == 59) {
        text.push_back('\n');
      }
    }
    const fs::path p = work_dir() / "corpus.txt";
    std::ofstream(p) << text;
    return p.string();
  }();
  return path;
}

}  // namespace

TEST_CASE("generate writes the dataset and prints partition sizes", "[cli]") {
  const fs::path out = work_dir() / "gen.afds";
  const auto result = run_cli("generate --corpus " + corpus_file() +
                              " --length 50 --samples 200 --seed 7 --out " + out.string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("train=160 validation=20 test=20") != std::string::npos);
  CHECK(fs::exists(out));
  CHECK(fs::exists(out.string() + ".manifest.json"));

  const auto ds = load_dataset(out);
  CHECK(ds.train.size() == 160);
  CHECK(ds.config.seq_len == 50);

  // rerun with identical flags -> byte-identical container
  const fs::path out2 = work_dir() / "gen2.afds";
  run_cli("generate --corpus " + corpus_file() +
          " --length 50 --samples 200 --seed 7 --out " + out2.string());
  CHECK(slurp(out) == slurp(out2));
}

TEST_CASE("missing required flags is a usage error", "[cli]") {
  CHECK(run_cli("generate --length 50 --out x.afds").exit_code == 2);
  CHECK(run_cli("nonsense").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("train writes curves, report, checkpoint and manifest", "[cli]") {
  const fs::path data = work_dir() / "train.afds";
  run_cli("generate --corpus " + corpus_file() +
          " --length 50 --samples 300 --seed 3 --out " + data.string());

  const fs::path out = work_dir() / "run1";
  const auto result = run_cli("train --data " + data.string() + " --out " + out.string() +
                              " --epochs 1 --hidden 16 --embed 4 --seed 5");
  CHECK(result.exit_code == 0);

  // --epochs 1 -> header plus exactly one row
  const std::string curves = slurp(out / "curves.csv");
  CHECK(curves.rfind("epoch,train_loss,train_acc,val_loss,val_acc\n1,", 0) == 0);
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 2);

  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(report.at("epochs").size() == 1);
  CHECK(report.contains("test_accuracy"));
  CHECK(fs::exists(out / "model.afnn"));
  CHECK(fs::exists(out / "manifest.json"));

  SECTION("eval reproduces the report's test accuracy exactly") {
    const auto eval = run_cli("eval --model " + (out / "model.afnn").string() + " --data " +
                              data.string() + " --partition test");
    CHECK(eval.exit_code == 0);
    const double reported = report.at("test_accuracy").get<double>();
    CHECK(eval.output.find("accuracy=" + format_g6(reported)) != std::string::npos);
  }

  SECTION("eval on the train partition is allowed") {
    const auto eval = run_cli("eval --model " + (out / "model.afnn").string() + " --data " +
                              data.string() + " --partition train");
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("partition=train") != std::string::npos);
  }

  SECTION("length mismatch between flag and dataset is a runtime config error") {
    const auto bad = run_cli("train --data " + data.string() + " --out " +
                             (work_dir() / "bad").string() + " --length 100 --epochs 1");
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("does not match dataset") != std::string::npos);
  }
}

TEST_CASE("attack prints the recovered key and five candidates", "[cli]") {
  // encrypt a held-out slice of the corpus under (a=5, b=8)
  const auto letters = preprocess_corpus(slurp(corpus_file()));
  const auto window = std::span(letters).subspan(letters.size() - 1200, 1000);
  const auto ciphertext = encrypt(window, AffineKey{5, 8});
  const fs::path ct = work_dir() / "ct.txt";
  std::ofstream(ct) << render_letters(ciphertext);

  const auto result =
      run_cli("attack --input " + ct.string() + " --reference " + corpus_file());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("best key: a=5 b=8") != std::string::npos);
  CHECK(result.output.find("class index 60") != std::string::npos);
  CHECK(std::count(result.output.begin(), result.output.end(), '\n') == 7);  // header + 5 + title

  SECTION("digits-only input is an input error") {
    const fs::path digits = work_dir() / "digits.txt";
    std::ofstream(digits) << "0123 456";
    CHECK(run_cli("attack --input " + digits.string() + " --reference " + corpus_file())
              .exit_code == 1);
  }
}

TEST_CASE("sweep emits one CSV row per length", "[cli]") {
  const fs::path out = work_dir() / "sweep";
  const auto result = run_cli("sweep --corpus " + corpus_file() +
                              " --lengths 30,60 --samples 200 --epochs 1 --hidden 16" +
                              " --embed 4 --seed 2 --out " + out.string());
  CHECK(result.exit_code == 0);
  const std::string csv = slurp(out / "sweep.csv");
  CHECK(csv.rfind("length,test_accuracy,classical_accuracy,status\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\n30,") != std::string::npos);
  CHECK(csv.find("\n60,") != std::string::npos);
  CHECK(csv.find(",ok") != std::string::npos);

  // accuracies parse back into [0, 1]
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  while (std::getline(ss, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    const double neural = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    const double classical = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
    CHECK(neural >= 0.0);
    CHECK(neural <= 1.0);
    CHECK(classical >= 0.0);
    CHECK(classical <= 1.0);
  }
}
