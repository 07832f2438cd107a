#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pilotdesign/io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string cli = PILOTDESIGN_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("pilotdesign_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("design generation succeeds and is reproducible byte for byte") {
  TempDir dir;
  const std::string out1 = dir.file("bibd.csv");
  const std::string out2 = dir.file("bibd2.csv");
  CHECK(run_cli("design generate --structure bibd --subjects 30 --grid 25 --obs 5 --seed 3 --out " +
                out1) == 0);
  CHECK(run_cli("design generate --structure bibd --subjects 30 --grid 25 --obs 5 --seed 3 --out " +
                out2) == 0);
  CHECK(fs::exists(out1));
  CHECK(fs::exists(out1 + ".meta.json"));
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(out1 + ".meta.json") == slurp(out2 + ".meta.json"));

  const pilotdesign::IncidenceMatrix design = pilotdesign::read_design_csv(out1);
  CHECK(design.n_subjects == 30);
  CHECK(design.structure == pilotdesign::DesignStructure::bibd);

  const std::string hybrid = dir.file("hybrid.csv");
  CHECK(run_cli("design generate --structure hybrid --subjects 60 --grid 25 --obs 5 "
                "--snippet-frac 0.2 --delta 2 --gap 2 --seed 7 --out " +
                hybrid) == 0);
  CHECK(run_cli("design inspect --design " + hybrid + " --plot-data " + dir.file("plot.csv")) == 0);
  CHECK(fs::exists(dir.file("plot.csv")));
}

TEST_CASE("validation and construction failures use distinct exit codes") {
  TempDir dir;
  // K > v: validation error.
  CHECK(run_cli("design generate --structure random --subjects 10 --grid 25 --obs 30 --out " +
                dir.file("x.csv")) == 2);
  // Unattainable tolerance: construction error.
  CHECK(run_cli("design generate --structure hybrid --subjects 30 --grid 25 --obs 5 "
                "--snippet-frac 0.2 --delta 1 --gap 2 --seed 1 --out " +
                dir.file("y.csv")) == 3);
  // Impossible snippet gap: construction error.
  CHECK(run_cli("design generate --structure hybrid --subjects 30 --grid 25 --obs 5 "
                "--snippet-frac 0.2 --delta 2 --gap 22 --seed 1 --out " +
                dir.file("z.csv")) == 3);
  // Unknown flags are errors.
  CHECK(run_cli("design generate --structure bibd --frobnicate --out " + dir.file("w.csv")) == 2);
  // Missing input file: I/O error.
  CHECK(run_cli("design inspect --design " + dir.file("absent.csv")) == 5);
  // Help exits cleanly.
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("design --help") == 0);
}

TEST_CASE("simulate, fit, search, and evaluate chain together") {
  TempDir dir;
  CHECK(run_cli("simulate --datasets 1 --subjects 80 --seed 11 --out " + dir.path.string()) == 0);
  CHECK(fs::exists(dir.file("true_model.json")));
  CHECK(fs::exists(dir.file("noisy_1.csv")));
  CHECK(fs::exists(dir.file("truth_1.csv")));

  const std::string design = dir.file("design.csv");
  CHECK(run_cli("design generate --structure random --subjects 80 --grid 25 --obs 5 --seed 2 "
                "--out " +
                design) == 0);

  const std::string model = dir.file("model.json");
  CHECK(run_cli("fit --data " + dir.file("noisy_1.csv") + " --layout long --design " + design +
                " --max-components 5 --out " + model) == 0);
  CHECK(fs::exists(model));

  CHECK(run_cli("search --model " + model + " --obs 5 --true-model " + dir.file("true_model.json") +
                " --thresholds 0.99") == 0);
  CHECK(run_cli("search --model " + model + " --obs 5 --method heuristic --samples 200 --seed 4") ==
        0);

  const std::string report = dir.file("report.csv");
  CHECK(run_cli("evaluate --truth " + dir.file("truth_1.csv") + " --noisy " + dir.file("noisy_1.csv") +
                " --layout long --design " + design + " --true-model " + dir.file("true_model.json") +
                " --max-components 5 --thresholds 0.99 --report " + report) == 0);
  const std::string content = slurp(report);
  CHECK(content.find("structure,n,seed,are,rrmse,composite,t_opt,t_star") == 0);
  CHECK(content.find("random,80") != std::string::npos);
}

TEST_CASE("experiment command writes results and is thread-invariant") {
  TempDir dir;
  const std::string config = dir.file("config.json");
  {
    std::ofstream out(config);
    out << R"({
      "master_seed": 31,
      "n_datasets": 1,
      "n_designs_per_structure": 1,
      "subject_counts": [60],
      "structures": ["bibd", "random"],
      "concurrence_tol": 2.0,
      "thresholds": [0.99],
      "fit": {"max_components": 5}
    })";
  }
  const std::string out1 = dir.file("run1");
  const std::string out2 = dir.file("run2");
  CHECK(run_cli("experiment --config " + config + " --out " + out1 + " --threads 1") == 0);
  CHECK(run_cli("experiment --config " + config + " --out " + out2 + " --threads 4 --plots") == 0);
  CHECK(slurp(out1 + "/results.csv") == slurp(out2 + "/results.csv"));
  CHECK(slurp(out1 + "/summary.csv") == slurp(out2 + "/summary.csv"));
  CHECK(fs::exists(out2 + "/boxplot_composite.svg"));
  CHECK(run_cli("experiment --config " + dir.file("nope.json") + " --out " + out1) == 5);
}
