#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string cli = STABLETREE_CLI;
const std::string server = STABLETREE_ORACLE_SERVER;

struct Run {
  int code = -1;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Scratch directory shared by the cases below; artifacts from earlier steps are reused.
const fs::path& work() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("stabletree_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    std::atexit([] { fs::remove_all(work()); });
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const auto err = work() / "stderr.txt";
  const std::string cmd = "'" + cli + "' " + args + " > /dev/null 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::string at(const std::string& name) { return "'" + (work() / name).string() + "'"; }

const std::string quick = " --nps 4000 --n-initial 400 --max-depth 3";

/// simulate + fit-oracle once for the whole file.
void prepare() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("simulate --n 400 --seed 3 --out " + at("train.csv") + " --schema-out " + at("schema.json")).code == 0);
  REQUIRE(run("fit-oracle --data " + at("train.csv") + " --schema " + at("schema.json") + " --trees 20 --seed 1 --out " +
              at("forest.bin"))
              .code == 0);
  done = true;
}

std::string distill_args(const std::string& out) {
  return "distill --oracle " + at("forest.bin") + " --data " + at("train.csv") + " --schema " + at("schema.json") +
         quick + " --seed 9 --out " + at(out);
}

}  // namespace

TEST_CASE("pipeline writes artifacts and manifests") {
  prepare();
  REQUIRE(run(distill_args("tree.json")).code == 0);
  const auto tree = nlohmann::json::parse(slurp(work() / "tree.json"));
  CHECK(tree.at("format") == "stabletree.tree");
  CHECK(tree.at("root").contains("rule"));

  const auto manifest = nlohmann::json::parse(slurp(work() / "tree.json.manifest.json"));
  CHECK(manifest.at("tool") == "stabletree");
  CHECK(manifest.at("command") == "distill");
  CHECK(manifest.at("config").at("alpha") == 0.1);
  CHECK(manifest.at("config").at("n_ps_max") == 4000);
  CHECK(manifest.contains("inputs"));
  CHECK(manifest.contains("outputs"));
  CHECK(manifest.at("timings_seconds").is_object());
  CHECK(fs::exists(work() / "forest.bin.manifest.json"));

  REQUIRE(run("evaluate --oracle " + at("forest.bin") + " --tree " + at("tree.json") +
              " --fresh-synth 2000 --seed 5 --out " + at("eval.json"))
              .code == 0);
  const auto report = nlohmann::json::parse(slurp(work() / "eval.json"));
  CHECK(report.at("class_agreement").get<double>() > 0.8);

  CHECK(run("export --tree " + at("tree.json") + " --format dot --out " + at("tree.dot")).code == 0);
  CHECK(slurp(work() / "tree.dot").rfind("digraph", 0) == 0);
  CHECK(run("export --tree " + at("tree.json") + " --format json --out " + at("copy.json")).code == 0);
  CHECK(slurp(work() / "copy.json") == slurp(work() / "tree.json"));
}

TEST_CASE("identical seeds give identical bytes at any thread count") {
  prepare();
  REQUIRE(run(distill_args("a.json")).code == 0);
  REQUIRE(run("--threads 3 " + distill_args("b.json")).code == 0);
  const auto a = slurp(work() / "a.json");
  CHECK(!a.empty());
  CHECK(a == slurp(work() / "b.json"));
}

TEST_CASE("stability subcommand") {
  prepare();
  const auto args = "stability --oracle " + at("forest.bin") + " --data " + at("train.csv") + " --schema " +
                    at("schema.json") + quick + " --depths 1,2 --seed 2";
  REQUIRE(run(args + " --replicates 3 --out " + at("st.json") + " --keys-csv " + at("st.csv")).code == 0);
  const auto j = nlohmann::json::parse(slurp(work() / "st.json"));
  CHECK(j.at("replicates") == 3);
  CHECK(slurp(work() / "st.csv").rfind("replicate,seed,depth,key", 0) == 0);

  const auto one = run(args + " --replicates 1 --out " + at("st1.json"));
  CHECK(one.code == 2);
  CHECK(one.err.find("replicates") != std::string::npos);
}

TEST_CASE("alpha one is plain greedy growth") {
  prepare();
  REQUIRE(run(distill_args("greedy.json") + " --alpha 1.0").code == 0);
  const auto tree = nlohmann::json::parse(slurp(work() / "greedy.json"));
  CHECK(tree.at("root").at("diagnostics").at("rounds") == 1);
  CHECK(tree.at("root").at("diagnostics").at("pseudo_samples_used") == 400);
}

TEST_CASE("external oracle") {
  prepare();
  const auto base = "distill --data " + at("train.csv") + " --schema " + at("schema.json") + quick + " --out ";
  CHECK(run(base + at("ext.json") + " --external-oracle \"'" + server + "' ok\"").code == 0);
  CHECK(fs::exists(work() / "ext.json"));
  const auto crash = run(base + at("ext2.json") + " --external-oracle \"'" + server + "' garbage\" --oracle-timeout 5");
  CHECK(crash.code == 4);
  CHECK(crash.err.find("malformed") != std::string::npos);
}

TEST_CASE("errors map to exit codes") {
  prepare();
  {
    std::ofstream out(work() / "nolabel.csv");
    out << "x1,x2,x3,x4,x5\n0.1,0.2,0.3,0.4,0.5\n0.5,0.4,0.3,0.2,0.1\n";
  }
  const auto missing = run("fit-oracle --data " + at("nolabel.csv") + " --schema " + at("schema.json") + " --out " +
                           at("f2.bin"));
  CHECK(missing.code == 3);
  CHECK(missing.err.find("'label'") != std::string::npos);

  CHECK(run(distill_args("bad.json") + " --alpha 0").code == 2);
  CHECK(run(distill_args("bad.json") + " --bogus-flag").code == 2);
  CHECK(run("distill --data " + at("train.csv") + " --schema " + at("schema.json") + " --out " + at("bad.json"))
            .code == 2);
  CHECK(run("export --tree " + at("missing.json") + " --out " + at("x.dot")).code == 3);
  CHECK(!fs::exists(work() / "bad.json"));
}
