#include "icgp/config.hpp"
#include "icgp/errors.hpp"
#include "icgp/experiments.hpp"
#include "icgp/ppd_head.hpp"
#include "icgp/result_table.hpp"
#include "icgp/svg.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace icgp;

namespace {

Config resolved(const std::string& name, const std::vector<std::string>& overrides) {
  Config c;
  for (const auto& o : overrides) c.apply_override(o);
  return resolve_config(name, c);
}

double value(const ResultTable& t, const std::string& metric, const std::string& variant, int depth, int bins,
             int n_max, int n_eval) {
  const ResultRow* r = t.find(metric, variant, depth, bins, n_max, n_eval);
  REQUIRE(r != nullptr);
  return r->value;
}

const ResultRow& row(const ResultTable& t, const std::string& metric, const std::string& variant, int depth,
                     int bins, int n_max, int n_eval) {
  const ResultRow* r = t.find(metric, variant, depth, bins, n_max, n_eval);
  REQUIRE(r != nullptr);
  return *r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ICGP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("icgp_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing, overrides and typed getters") {
  Config c = Config::parse("# comment\n\n a = 1 \nlist=1,2, 3\nrange=40:60:10\nflag=yes\nx=0.5\na=2\n");
  CHECK(c.get_int("a") == 2);
  CHECK(c.get_int_list("list") == std::vector<int>{1, 2, 3});
  CHECK(c.get_int_list("range") == std::vector<int>{40, 50, 60});
  CHECK(c.get_bool("flag"));
  CHECK(c.get_double("x") == 0.5);
  c.apply_override("x=1e-3");
  CHECK(c.get_double("x") == 1e-3);
  CHECK_THROWS_AS(c.apply_override("novalue"), ConfigError);
  CHECK_THROWS_AS(c.get_int("x"), ConfigError);
  CHECK_THROWS_AS(c.get_double("missing"), ConfigError);
  CHECK_THROWS_AS(Config::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/icgp.cfg"), IoError);
  try {
    c.get_int("x");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("canonical text and hash") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  const Config a = Config::parse("b=2\na=1\n");
  const Config b = Config::parse("a=1\n# reordered\nb=2\n");
  CHECK(a.canonical() == "a=1\nb=2\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash_hex().size() == 16);
  CHECK(Config::parse(a.canonical()).hash() == a.hash());
  CHECK(Config::parse("a=1\nb=3\n").hash() != a.hash());
}

TEST_CASE("resolving fills defaults and rejects unknown keys") {
  for (const auto& name : experiment_names()) {
    const Config r = resolve_config(name, Config{});
    CHECK(r.get_string("experiment") == name);
    CHECK(r.has("seed"));
    CHECK(resolve_config(Config::parse(manifest_text(r))).hash() == r.hash());
  }
  CHECK_THROWS_AS(resolved("depth-bins", {"bogus=1"}), ConfigError);
  CHECK_THROWS_AS(resolve_config(Config{}), ConfigError);
  CHECK_THROWS_AS(resolve_config("spectra", Config::parse("experiment=stepsize\n")), ConfigError);
  CHECK_THROWS_AS(experiment_defaults("nope"), ConfigError);
  CHECK_THROWS_AS(run_experiment(resolved("depth-bins", {"replicates=0"}), 1), ConfigError);
  CHECK_THROWS_AS(run_experiment(resolved("depth-bins", {"depths=4,0"}), 1), ConfigError);
}

TEST_CASE("dry-run description lists the sweep") {
  const std::string text = describe_grid(resolved("depth-bins", {}));
  CHECK(text.find("depths (5): 2,4,8,16,32") != std::string::npos);
  CHECK(text.find("bins (5): 16,32,64,128,256") != std::string::npos);
  CHECK(text.find("cells: 25 x 4096 replicates") != std::string::npos);
}

TEST_CASE("long-format CSV rows") {
  ResultTable t;
  t.rows.push_back({"exp", "00ff", 3, "a,b", 2, 16, 128, 0, "tv", 0.1, 0.01, 10, 1});
  const std::string csv = t.to_csv();
  CHECK(csv.rfind("experiment,config_hash,seed,variant,depth,bins,n_max,n_eval,metric,value,stderr,replicates,"
                  "diverged\n",
                  0) == 0);
  CHECK(csv.find("exp,00ff,3,\"a,b\",2,16,128,0,tv,0.1,0.01,10,1\n") != std::string::npos);
  CHECK(t.find("tv", "a,b", 2, 0, 0, 0) == &t.rows[0]);
  CHECK(t.find("tv", "", 4, 0, 0, 0) == nullptr);
  CHECK_THROWS_AS(t.write_csv("/nonexistent/dir/out.csv"), IoError);
}

TEST_CASE("summaries skip non-finite entries") {
  const Summary s = summarize({1.0, 3.0, NAN, INFINITY});
  CHECK(s.count == 2);
  CHECK(s.mean == 2.0);
  CHECK(s.stderr_ == doctest::Approx(1.0));
  CHECK(std::isnan(summarize({NAN}).mean));
}

TEST_CASE("parallel_for visits each index once and rethrows") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, 4, [&](int i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(100, 3, [](int i) {
                    if (i == 37) throw NumericError("boom");
                  }),
                  NumericError);
  parallel_for(0, 4, [](int) { FAIL("no calls expected"); });
}

TEST_CASE("SVG output is a standalone document") {
  svg::LinePlot plot{"t<1>", "x", "y", true, true, {{"s", {1, 10, 100}, {1, NAN, 0.01}, true}}};
  const std::string doc = svg::render(plot);
  CHECK(doc.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
  CHECK(doc.find("t&lt;1&gt;") != std::string::npos);
  CHECK(doc.find("stroke-dasharray") != std::string::npos);
  CHECK(doc.find("nan") == std::string::npos);
  CHECK(doc.substr(doc.size() - 7) == "</svg>\n");
  svg::Heatmap map{"h", "r", "c", {"1", "2"}, {"a"}, Eigen::MatrixXd::Constant(2, 1, 0.5), true};
  map.values(1, 0) = NAN;
  CHECK(svg::render(map).find("n/a") != std::string::npos);
}

TEST_CASE("results do not depend on the thread count") {
  const Config cfg = resolved("generalization",
                              {"replicates=6", "d=3", "n_min=16", "n_max=32,48", "depths=2,6", "n_eval=16,40", "bins=64"});
  CHECK(run_experiment(cfg, 1).table.to_csv() == run_experiment(cfg, 4).table.to_csv());
  const Config nz = resolved("normalization", {"replicates=6", "n_eval=50,150", "depth=8"});
  CHECK(run_experiment(nz, 1).table.to_csv() == run_experiment(nz, 3).table.to_csv());
}

TEST_CASE("every row carries the seed and config hash") {
  const Config cfg = resolved("spectra", {"n_values=8,16", "trials=3", "seed=9"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  REQUIRE_FALSE(out.table.rows.empty());
  for (const ResultRow& r : out.table.rows) {
    CHECK(r.seed == 9);
    CHECK(r.config_hash == cfg.hash_hex());
  }
}

TEST_CASE("depth-bins: one layer gives the prior head") {
  const Config cfg = resolved("depth-bins", {"replicates=16", "depths=1", "bins=16,64", "truncation=-3,3"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  const PriorConfig prior = prior_from_config(cfg);
  for (int C : {16, 64}) {
    const Partition part = Partition::make(-3, 3, C);
    double sum = 0.0;
    for (int r = 0; r < 16; ++r) {
      const SyntheticInstance inst = sample_instance(prior, -3, 3, 1, static_cast<std::uint64_t>(r));
      sum += tv_continuous(inst.true_ppd(), head_binned(PPDMoments{0.0, 1.0 + 0.2}, part));
    }
    CHECK(value(out.table, "tv", "", 1, C, 0, 0) == doctest::Approx(sum / 16).epsilon(1e-12));
  }
}

TEST_CASE("depth-bins: TV halves per bin doubling once the solver has converged") {
  const Config cfg = resolved("depth-bins", {"replicates=32", "n_min=12", "n_max=20", "depths=1500",
                                             "bins=32,64,128", "eta_rule=optimal"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  CHECK(value(out.table, "moment_error_max", "", 1500, 0, 0, 0) < 1e-8);
  for (int C : {32, 64}) {
    const double ratio = value(out.table, "tv", "", 1500, C, 0, 0) / value(out.table, "tv", "", 1500, 2 * C, 0, 0);
    CHECK(ratio >= 1.7);
    CHECK(ratio <= 2.3);
  }
  CHECK(out.files.size() == 3);
}

TEST_CASE("depth-bins: deepest finest cell is ten times below the shallowest coarsest" * doctest::may_fail()) {
  const Config cfg = resolved("depth-bins", {"replicates=64", "depths=2,32", "bins=16,256"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  CHECK(value(out.table, "tv", "", 2, 16, 0, 0) >= 10.0 * value(out.table, "tv", "", 32, 256, 0, 0));
}

TEST_CASE("depth-bins: deeper and finer is better") {
  const Config cfg = resolved("depth-bins", {"replicates=64", "depths=2,32", "bins=16,256"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  CHECK(value(out.table, "tv", "", 2, 16, 0, 0) >= 3.0 * value(out.table, "tv", "", 32, 256, 0, 0));
}

TEST_CASE("normalization: out-of-range behaviour of both variants") {
  const Config cfg = resolved("normalization", {"replicates=32", "n_eval=128,256"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  const ResultRow& norm = row(out.table, "tv", "normalized", 0, 0, 0, 256);
  CHECK(std::isfinite(norm.value));
  CHECK(norm.diverged == 0);
  CHECK(value(out.table, "diverged_fraction", "normalized", 0, 0, 0, 256) == 0.0);
  CHECK(value(out.table, "diverged_fraction", "unnormalized", 0, 0, 0, 256) > 0.5);
  const double a = value(out.table, "tv", "normalized", 0, 0, 0, 128);
  const double b = value(out.table, "tv", "unnormalized", 0, 0, 0, 128);
  CHECK(std::max(a, b) <= 3.0 * std::min(a, b));
  const ResultRow& plain = row(out.table, "tv", "unnormalized", 0, 0, 0, 256);
  CHECK(plain.diverged > 0);
}

TEST_CASE("generalization: converged solver reproduces the moments" * doctest::may_fail()) {
  const Config cfg = resolved("generalization", {"replicates=16", "d=2", "n_max=128", "depths=512",
                                                 "n_eval=64"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  CHECK(value(out.table, "mean_mse", "normalized", 512, 0, 128, 64) < 1e-6);
  CHECK(value(out.table, "second_moment_mse_truncated", "normalized", 512, 0, 128, 64) < 1e-6);
}

TEST_CASE("generalization: error grows with the evaluation size") {
  const Config cfg = resolved("generalization", {"replicates=64", "d=2", "n_min=8", "n_max=16", "depths=8",
                                                 "n_eval=8,128"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  CHECK(value(out.table, "tv", "normalized", 8, 0, 16, 128) >= value(out.table, "tv", "normalized", 8, 0, 16, 8));
  CHECK(out.table.find("coverage", "true_ppd", 0, 0, 0, 128) != nullptr);
}

TEST_CASE("generalization: true-PPD baseline reaches nominal coverage") {
  const Config cfg = resolved("generalization", {"replicates=4096", "d=2", "n_min=8", "n_max=16", "depths=1",
                                                 "n_eval=16", "calib_draws=1000"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  const double cov = value(out.table, "coverage", "true_ppd", 0, 0, 0, 16);
  CHECK(cov >= 0.88);
  CHECK(cov <= 0.92);
}

TEST_CASE("stepsize: bound ratio and the large-noise limit") {
  const Config cfg = resolved("stepsize", {"kernels=rbf", "n_values=100,1000", "trials=10"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  const double ratio = value(out.table, "bound_ratio_first_last", "rbf", 0, 0, 0, 0);
  CHECK(ratio >= 8.0);
  CHECK(ratio <= 12.0);

  const Config noisy = resolved("stepsize", {"n_values=50,400", "trials=3", "sigma2=1e8"});
  const ExperimentOutput big = run_experiment(noisy, 1);
  for (const char* k : {"linear", "rbf"})
    for (int n : {50, 400}) CHECK(value(big.table, "step_bound", k, 0, 0, 0, n) == doctest::Approx(2e-8).epsilon(1e-4));
}

TEST_CASE("spectra: scalar systems and the preconditioned spectrum") {
  const Config cfg = resolved("spectra", {"n_values=1,32,64", "trials=5"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  CHECK(value(out.table, "cond", "preconditioned", 0, 0, 0, 1) == 1.0);
  CHECK(value(out.table, "cond", "plain", 0, 0, 0, 1) == 1.0);
  for (int n : {1, 32, 64}) CHECK(value(out.table, "lambda_max_bound_violations", "preconditioned", 0, 0, 0, n) == 0);
  CHECK(out.table.find("cond_doubling_ratio", "preconditioned", 0, 0, 0, 64) != nullptr);
  CHECK_THROWS_AS(run_experiment(resolved("spectra", {"kernel=linear"}), 1), ConfigError);
}

TEST_CASE("calibrate reports the truncation interval") {
  const ExperimentOutput out = run_experiment(resolved("calibrate", {"calib_draws=500"}), 1);
  const double a = value(out.table, "a", "", 0, 0, 0, 0);
  const double b = value(out.table, "b", "", 0, 0, 0, 0);
  CHECK(a < 0.0);
  CHECK(b > 0.0);
}

TEST_CASE("fit-eb selects a grid point and writes the transform") {
  const auto dir = scratch("fit_eb");
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "data.csv");
    f << "east;north;value\n";
    CounterRng rng(5, 0);
    for (int i = 0; i < 60; ++i) {
      const double x = 10 * rng.uniform(), y = 10 * rng.uniform();
      f << x << ";" << y << ";" << std::sin(x / 3) + std::cos(y / 3) + 0.1 * rng.normal() << "\n";
    }
  }
  const Config cfg = resolved("fit-eb", {"data=" + (dir / "data.csv").string(), "features=east,north",
                                         "response=value", "delimiter=semicolon"});
  const ExperimentOutput out = run_experiment(cfg, 1);
  CHECK(out.table.rows.size() == 9 + 3);
  double best = -INFINITY;
  for (const ResultRow& r : out.table.rows)
    if (r.metric == "lml") best = std::max(best, r.value);
  CHECK(value(out.table, "selected_lml", "", 0, 0, 0, 60) == best);
  REQUIRE(out.files.size() == 1);
  CHECK(out.files[0].first == "transform.txt");
  CHECK_THROWS_AS(run_experiment(resolved("fit-eb", {}), 1), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("outputs and manifest rerun") {
  const auto dir = scratch("outputs");
  const Config cfg = resolved("depth-bins", {"replicates=8", "depths=2,4", "bins=16,32"});
  write_outputs(dir.string(), cfg, run_experiment(cfg, 1));
  for (const char* f : {"results.csv", "manifest.txt", "tv_heatmap.svg", "tv_vs_bins.svg", "tv_vs_depth.svg"})
    CHECK(std::filesystem::exists(dir / f));
  const Config again = resolve_config(Config::load((dir / "manifest.txt").string()));
  CHECK(again.hash() == cfg.hash());
  CHECK(run_experiment(again, 2).table.to_csv() == slurp(dir / "results.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("command line exit codes and reruns") {
  const auto dir = scratch("cli");
  CHECK(run_cli("run --config /nonexistent/icgp.cfg") == 2);
  CHECK(run_cli("depth-bins --set bogus=1") == 1);
  CHECK(run_cli("depth-bins --set replicates=zero") == 1);
  CHECK(run_cli("depth-bins --dry-run") == 0);
  CHECK(run_cli("stepsize --set kernels=rbf --set n_values=20,40 --set trials=2 --threads 1 --out " +
                (dir / "a").string()) == 0);
  CHECK(run_cli("run --config " + (dir / "a" / "manifest.txt").string() + " --threads 3 --out " +
                (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"));
  CHECK_FALSE(slurp(dir / "a" / "results.csv").empty());
  std::filesystem::remove_all(dir);
}
