#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "condense/cli.hpp"

namespace fs = std::filesystem;
using namespace condense;

namespace {

const fs::path kScenarios = CONDENSE_SCENARIO_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("condense_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& body) {
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string scenario(const std::string& name) { return (kScenarios / name).string(); }

const char* kStar = R"(schema_version: 1
topology:
  generator: star
  sources: 2
application: forwarding
)";

}  // namespace

TEST_CASE("validate exit codes") {
  const fs::path dir = scratch("validate");
  const Outcome ok = call({"validate", write(dir, "ok.yaml", kStar).string()});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out.empty());
  CHECK(ok.err.empty());

  const Outcome cycle = call({"validate", scenario("bad_cycle.yaml")});
  CHECK(cycle.code == cli::kValidation);
  CHECK(cycle.err.find("b -> a") != std::string::npos);
  CHECK(cycle.err.find(":12:") != std::string::npos);

  CHECK(call({"validate", (dir / "missing.yaml").string()}).code == cli::kIo);

  for (const auto& entry : fs::directory_iterator(kScenarios)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("bad_")) continue;
    INFO(name);
    CHECK(call({"validate", scenario(name)}).code == cli::kOk);
  }
}

TEST_CASE("schema diagnostics carry line numbers") {
  const fs::path dir = scratch("schema");
  const Outcome unknown = call({"validate", write(dir, "u.yaml", std::string(kStar) + "colour: blue\n").string()});
  CHECK(unknown.code == cli::kValidation);
  CHECK(unknown.err.find(":6: unknown key 'colour'") != std::string::npos);

  const Outcome nested = call({"validate", write(dir, "n.yaml", std::string(kStar) +
                                                                    "failures:\n  node_dropout: 0.1\n  jitter: 2\n")
                                               .string()});
  CHECK(nested.err.find(":8: unknown key 'jitter' in failures") != std::string::npos);

  const Outcome type = call({"validate", write(dir, "t.yaml", std::string(kStar) + "generations: lots\n").string()});
  CHECK(type.code == cli::kValidation);
  CHECK(type.err.find(":6: 'generations' must be a non-negative integer") != std::string::npos);

  const Outcome version = call({"validate", write(dir, "v.yaml", "schema_version: 7\ntopology: {generator: star, sources: 2}\n").string()});
  CHECK(version.err.find("unsupported schema_version 7") != std::string::npos);

  const Outcome no_version = call({"validate", write(dir, "nv.yaml", "topology: {generator: star, sources: 2}\n").string()});
  CHECK(no_version.err.find("missing 'schema_version'") != std::string::npos);

  const Outcome syntax = call({"validate", write(dir, "s.yaml", "schema_version: 1\ntopology: [\n").string()});
  CHECK(syntax.code == cli::kValidation);

  const Outcome dangling = call({"validate", write(dir, "d.yaml", R"(schema_version: 1
topology:
  nodes:
    - {name: s, role: source}
    - {name: d, role: destination}
  arcs:
    - [s, x]
)").string()});
  CHECK(dangling.err.find(":7: arc s -> x references unknown node 'x'") != std::string::npos);

  const Outcome mismatch = call({"validate", write(dir, "m.yaml", std::string(kStar) + "domain: field\n").string()});
  CHECK(mismatch.code == cli::kOk);
  const Outcome rlnc_real =
      call({"validate", write(dir, "r.yaml", std::string(kStar) + "domain: real\n").string()});
  CHECK(rlnc_real.code == cli::kOk);
  const Outcome bad_app = call({"validate", write(dir, "b.yaml", R"(schema_version: 1
topology: {generator: star, sources: 2}
application: rlnc
domain: real
)").string()});
  CHECK(bad_app.code == cli::kValidation);
  CHECK(bad_app.err.find(":3:") != std::string::npos);
}

TEST_CASE("run rlnc star GF(2) N'=2") {
  const fs::path out = scratch("rlnc");
  const Outcome r = call({"run", scenario("rlnc_star_gf2.yaml"), "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  const auto at = r.out.find("success_probability=");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(r.out.substr(at + 20)) == doctest::Approx(0.375).epsilon(0.01 / 0.375));
  for (const char* f : {"arcs.csv", "generations.csv", "trajectory.csv", "success.csv", "manifest.yaml"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK(slurp(out / "success.csv").starts_with("field_order,N,N_prime,trials,successes,probability,seed\n2,2,2,100000,"));
  CHECK(slurp(out / "trajectory.csv").starts_with("generation,value,dropped_nodes,lost_messages\n"));
}

TEST_CASE("run consensus reaches the population mean") {
  const fs::path out = scratch("consensus");
  const Outcome r = call({"run", scenario("consensus_star.yaml"), "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  const auto at = r.out.find("final_estimate=");
  REQUIRE(at != std::string::npos);
  // 10^4 unit-variance samples: the mean has standard error 0.01.
  CHECK(std::abs(std::stod(r.out.substr(at + 15)) - 3.0) < 0.05);
}

TEST_CASE("runs are byte-identical and manifests replay") {
  const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  const std::string file = scenario("neural_tree7.yaml");
  REQUIRE(call({"run", file, "--out", a.string(), "--quiet"}).code == cli::kOk);
  REQUIRE(call({"run", file, "--out", b.string(), "--quiet"}).code == cli::kOk);
  REQUIRE(call({"run", (a / "manifest.yaml").string(), "--out", c.string(), "--quiet"}).code == cli::kOk);
  for (const char* f : {"arcs.csv", "generations.csv", "trajectory.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) == slurp(c / f));
  }
  CHECK(slurp(c / "manifest.yaml").find("output: " + c.string()) != std::string::npos);
}

TEST_CASE("--seed and --trials override the file and land in the manifest") {
  const fs::path out = scratch("override");
  const Outcome r =
      call({"run", scenario("rlnc_star_gf2.yaml"), "--seed", "99", "--trials", "50", "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("generations=50 ") != std::string::npos);
  const std::string manifest = slurp(out / "manifest.yaml");
  CHECK(manifest.find("seed: 99\n") != std::string::npos);
  CHECK(manifest.find("generations: 50\n") != std::string::npos);
  CHECK(manifest.find("tool_version: ") != std::string::npos);
  CHECK(call({"run", scenario("rlnc_star_gf2.yaml"), "--seed", "99", "--trials", "50", "--out", out.string(),
              "--quiet"})
            .out.empty());
}

TEST_CASE("capacity verdicts and the cap exit code") {
  const Outcome id = call({"capacity", scenario("capacity_identity.yaml")});
  CHECK(id.code == cli::kOk);
  CHECK(id.out.find("not solvable (cut 1 < N=2)") != std::string::npos);
  CHECK(id.out.find("K=1, L=1, general: not solvable") != std::string::npos);

  const Outcome x = call({"capacity", scenario("capacity_star.yaml")});
  CHECK(x.code == cli::kOk);
  CHECK(x.out.find("K=1, L=1, general: solvable, witness attached") != std::string::npos);

  const Outcome big = call({"capacity", scenario("capacity_oversize.yaml")});
  CHECK(big.code == cli::kCap);
  CHECK(big.out.find("unknown (capped)") != std::string::npos);
  CHECK(big.out.find("K/L >= 1/2") != std::string::npos);

  CHECK(call({"capacity", scenario("consensus_star.yaml")}).code == cli::kValidation);
}

TEST_CASE("compare against forwarding") {
  const fs::path out = scratch("compare");
  const Outcome r = call({"compare", scenario("average_tree64.yaml"), "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("nfc_symbols=8190 forwarding_symbols=24576") != std::string::npos);
  CHECK(slurp(out / "costs.csv").starts_with("arc,from,to,nfc_symbols,forwarding_symbols\n"));
}

TEST_CASE("usage and I/O errors") {
  CHECK(call({}).code == cli::kValidation);
  CHECK(call({"frobnicate"}).code == cli::kValidation);
  CHECK(call({"run"}).code == cli::kValidation);
  CHECK(call({"run", scenario("rlnc_star_gf2.yaml"), "--seed", "x"}).code == cli::kValidation);
  CHECK(call({"run", scenario("consensus_star.yaml"), "--out", "/proc/condense/none"}).code == cli::kIo);
  CHECK(call({"run", scenario("capacity_star.yaml")}).code == cli::kValidation);
}
