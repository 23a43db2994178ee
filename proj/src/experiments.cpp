#include "icgp/experiments.hpp"

#include "icgp/attention.hpp"
#include "icgp/errors.hpp"
#include "icgp/format.hpp"
#include "icgp/gp_oracle.hpp"
#include "icgp/kernels.hpp"
#include "icgp/ppd_head.hpp"
#include "icgp/richardson.hpp"
#include "icgp/rng.hpp"
#include "icgp/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iterator>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace icgp {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Streams at or above this offset are reserved for tuning draws; evaluation
// streams are (n << 32 | r) with n < 2^31.
constexpr std::uint64_t kTuningStreams = 1ULL << 63;

Config make_config(std::initializer_list<std::pair<const char*, const char*>> kv) {
  Config c;
  for (const auto& [k, v] : kv) c.set(k, v);
  return c;
}

Config prior_defaults() {
  return make_config({{"seed", "1"},
                      {"kernel", "rbf"},
                      {"amplitude", "1"},
                      {"lengthscale", "0.8"},
                      {"linear_cov", "blr"},
                      {"sigma2", "0.2"},
                      {"input_law", "gaussian"},
                      {"hierarchical", "false"},
                      {"truncation", "auto"},
                      {"calib_draws", "2000"},
                      {"tail_mass", "0.002"}});
}

bool valid_moments(const PPDMoments& m) {
  return std::isfinite(m.mean) && std::isfinite(m.var) && m.var > 0.0 && std::abs(m.mean) <= 1e12 &&
         m.var <= 1e12;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

int max_of(const std::vector<int>& v) { return *std::max_element(v.begin(), v.end()); }

void require_positive(const std::vector<int>& v, const std::string& key) {
  for (int x : v)
    if (x < 1) throw ConfigError("config key '" + key + "' needs positive entries");
}

int positive_int(const Config& cfg, const std::string& key) {
  const auto v = cfg.get_int(key);
  if (v < 1 || v > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + key + "' must be a positive integer");
  return static_cast<int>(v);
}

struct Rows {
  std::string experiment;
  std::string hash;
  std::uint64_t seed;
  ResultTable table;

  void add(const std::string& variant, int depth, int bins, int n_max, int n_eval,
           const std::string& metric, const std::vector<double>& values) {
    const Summary s = summarize(values);
    const int diverged = static_cast<int>(values.size()) - s.count;
    table.rows.push_back({experiment, hash, seed, variant, depth, bins, n_max, n_eval, metric, s.mean,
                          s.stderr_, static_cast<int>(values.size()), diverged});
  }
  void add_value(const std::string& variant, int depth, int bins, int n_max, int n_eval,
                 const std::string& metric, double value, int replicates) {
    table.rows.push_back(
        {experiment, hash, seed, variant, depth, bins, n_max, n_eval, metric, value, 0.0, replicates, 0});
  }
};

Rows rows_for(const Config& cfg) {
  return Rows{cfg.get_string("experiment"), cfg.hash_hex(), static_cast<std::uint64_t>(cfg.get_int("seed")),
              {}};
}

double eta_for(const std::string& rule, double fixed, const GramMatrix& G, double sigma2,
               bool normalized) {
  if (rule == "fixed") return fixed;
  const SpectralSummary s = spectral_summary(G, sigma2, normalized);
  if (rule == "optimal") return optimal_step(s).eta;
  if (rule == "inverse_lambda") return normalized ? 1.0 / s.lambda_max : 1.0 / (s.lambda_max + sigma2);
  throw ConfigError("eta_rule must be inverse_lambda, optimal or fixed, got '" + rule + "'");
}

TransformerConfig transformer(const KernelSpec& kernel, double sigma2, int d, int depth, double eta,
                              bool normalized) {
  TransformerConfig tc;
  tc.depth = depth;
  tc.schedule = StepSchedule::constant(eta);
  tc.sigma2 = sigma2;
  tc.kernel = kernel;
  tc.d = d;
  tc.normalized = normalized;
  return tc;
}

// Moments of the reference predictive (mixture-aware).
PPDMoments truth_moments(const MixturePPD& truth) {
  const double mu = truth.mean();
  return {mu, truth.second_moment() - mu * mu};
}

// ---------------------------------------------------------------- depth-bins

ExperimentOutput run_depth_bins(const Config& cfg, int threads) {
  const PriorConfig prior = prior_from_config(cfg);
  const Truncation tr = truncation_from_config(cfg, prior);
  const std::vector<int> depths = cfg.get_int_list("depths");
  const std::vector<int> bins = cfg.get_int_list("bins");
  require_positive(depths, "depths");
  require_positive(bins, "bins");
  const int R = positive_int(cfg, "replicates");
  const std::string rule = cfg.get_string("eta_rule");
  const double fixed_eta = cfg.get_double("eta");
  const bool normalized = cfg.get_bool("normalized");
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const KernelSpec kernel = kernel_from_config(cfg);
  const int maxL = max_of(depths);
  const std::size_t nL = depths.size(), nC = bins.size();

  std::vector<Partition> parts;
  for (int C : bins) parts.push_back(Partition::make(tr.a, tr.b, C));

  struct Rep {
    std::vector<double> err, tv;
    double eta = 0.0;
  };
  std::vector<Rep> reps(R);
  parallel_for(R, threads, [&](int r) {
    const SyntheticInstance inst = sample_instance(prior, tr.a, tr.b, seed, static_cast<std::uint64_t>(r));
    const GramMatrix G = gram(kernel, inst.ctx.X);
    const double eta = eta_for(rule, fixed_eta, G, prior.sigma2, normalized);
    const ForwardResult f =
        forward(transformer(kernel, prior.sigma2, prior.d, maxL, eta, normalized), build_tokens(inst.ctx), false);
    const MixturePPD truth = inst.true_ppd();
    const PPDMoments exact = truth_moments(truth);
    Rep& rep = reps[r];
    rep.eta = eta;
    rep.err.assign(nL, kNaN);
    rep.tv.assign(nL * nC, kNaN);
    for (std::size_t li = 0; li < nL; ++li) {
      const PPDMoments m = f.layer_moments[depths[li]];
      if (!valid_moments(m)) continue;
      rep.err[li] = std::max(std::abs(m.mean - exact.mean), std::abs(m.var - exact.var));
      for (std::size_t ci = 0; ci < nC; ++ci)
        rep.tv[li * nC + ci] = tv_continuous(truth, head_binned(m, parts[ci]));
    }
  });

  Rows rows = rows_for(cfg);
  const std::string variant = normalized ? "normalized" : "unnormalized";
  std::vector<double> etas;
  for (const Rep& rep : reps) etas.push_back(rep.eta);
  rows.add(variant, 0, 0, prior.n_max, 0, "eta", etas);
  Eigen::MatrixXd heat(nL, nC);
  for (std::size_t li = 0; li < nL; ++li) {
    std::vector<double> err;
    for (const Rep& rep : reps) err.push_back(rep.err[li]);
    rows.add(variant, depths[li], 0, prior.n_max, 0, "moment_error", err);
    double worst = 0.0;
    for (double e : err) worst = std::isfinite(e) ? std::max(worst, e) : worst;
    rows.add_value(variant, depths[li], 0, prior.n_max, 0, "moment_error_max", worst, R);
    for (std::size_t ci = 0; ci < nC; ++ci) {
      std::vector<double> tv;
      for (const Rep& rep : reps) tv.push_back(rep.tv[li * nC + ci]);
      rows.add(variant, depths[li], bins[ci], prior.n_max, 0, "tv", tv);
      heat(li, ci) = rows.table.rows.back().value;
    }
  }

  ExperimentOutput out;
  out.table = std::move(rows.table);
  svg::Heatmap map{"mean TV to the truncated PPD", "depth L", "bins C", {}, {}, heat, true};
  for (int L : depths) map.row_names.push_back(std::to_string(L));
  for (int C : bins) map.col_names.push_back(std::to_string(C));
  out.files.push_back({"tv_heatmap.svg", svg::render(map)});

  svg::LinePlot by_c{"TV vs bins", "bins C", "mean TV", true, true, {}};
  for (std::size_t li = 0; li < nL; ++li) {
    svg::Series s{"L=" + std::to_string(depths[li]), {}, {}, false};
    for (std::size_t ci = 0; ci < nC; ++ci) {
      s.x.push_back(bins[ci]);
      s.y.push_back(heat(li, ci));
    }
    by_c.series.push_back(s);
  }
  out.files.push_back({"tv_vs_bins.svg", svg::render(by_c)});
  svg::LinePlot by_l{"TV vs depth", "depth L", "mean TV", true, true, {}};
  for (std::size_t ci = 0; ci < nC; ++ci) {
    svg::Series s{"C=" + std::to_string(bins[ci]), {}, {}, false};
    for (std::size_t li = 0; li < nL; ++li) {
      s.x.push_back(depths[li]);
      s.y.push_back(heat(li, ci));
    }
    by_l.series.push_back(s);
  }
  out.files.push_back({"tv_vs_depth.svg", svg::render(by_l)});
  out.notes.push_back("truncation (a, b] = (" + format_double(tr.a) + ", " + format_double(tr.b) + "]");
  return out;
}

// ------------------------------------------------------------- normalization

ExperimentOutput run_normalization(const Config& cfg, int threads) {
  const NormalizationRun run = normalization_samples(cfg, threads);
  const std::vector<int> n_eval = cfg.get_int_list("n_eval");
  const int L = positive_int(cfg, "depth");
  const int C = positive_int(cfg, "bins");
  const int n_max = positive_int(cfg, "n_max");

  Rows rows = rows_for(cfg);
  rows.add_value("unnormalized", L, C, n_max, 0, "eta", run.steps.plain, 1);
  rows.add_value("normalized", L, C, n_max, 0, "eta", run.steps.normalized, 1);
  svg::LinePlot tv_plot{"TV vs evaluation size", "n'", "mean TV", false, true, {}};
  svg::LinePlot div_plot{"divergence vs evaluation size", "n'", "diverged fraction", false, false, {}};
  for (bool normalized : {false, true}) {
    const std::string variant = normalized ? "normalized" : "unnormalized";
    svg::Series tv_s{variant, {}, {}, false}, div_s{variant, {}, {}, false};
    for (int n : n_eval) {
      std::vector<double> tv;
      int diverged = 0;
      for (const auto& s : run.samples)
        if (s.normalized == normalized && s.n_eval == n) {
          tv.push_back(s.diverged ? kNaN : s.tv);
          diverged += s.diverged ? 1 : 0;
        }
      rows.add(variant, L, C, n_max, n, "tv", tv);
      tv_s.x.push_back(n);
      tv_s.y.push_back(rows.table.rows.back().value);
      const double frac = tv.empty() ? kNaN : static_cast<double>(diverged) / static_cast<double>(tv.size());
      rows.add_value(variant, L, C, n_max, n, "diverged_fraction", frac, static_cast<int>(tv.size()));
      div_s.x.push_back(n);
      div_s.y.push_back(frac);
    }
    tv_plot.series.push_back(tv_s);
    div_plot.series.push_back(div_s);
  }
  ExperimentOutput out;
  out.table = std::move(rows.table);
  out.files.push_back({"tv_vs_n.svg", svg::render(tv_plot)});
  out.files.push_back({"divergence_vs_n.svg", svg::render(div_plot)});
  out.notes.push_back("eta unnormalized = " + format_double(run.steps.plain) +
                      ", normalized = " + format_double(run.steps.normalized));
  return out;
}

// ------------------------------------------------------------ generalization

const char* const kGenMetrics[] = {"tv",       "mse",      "coverage",          "width",
                                   "crps",     "mean_mse", "second_moment_mse", "second_moment_mse_truncated"};
constexpr std::size_t kNumGen = std::size(kGenMetrics);
const char* const kBaseMetrics[] = {"mse", "coverage", "width", "crps"};
constexpr std::size_t kNumBase = std::size(kBaseMetrics);

ExperimentOutput run_generalization(const Config& cfg, int threads) {
  PriorConfig prior = prior_from_config(cfg);
  const std::vector<int> n_maxes = cfg.get_int_list("n_max");
  const std::vector<int> depths = cfg.get_int_list("depths");
  const std::vector<int> n_eval = cfg.get_int_list("n_eval");
  require_positive(n_maxes, "n_max");
  require_positive(depths, "depths");
  require_positive(n_eval, "n_eval");
  const int C = positive_int(cfg, "bins");
  const int R = positive_int(cfg, "replicates");
  const int draws = positive_int(cfg, "tuning_draws");
  const double scale = cfg.get_double("eta_scale");
  const double level = cfg.get_double("level");
  const bool normalized = cfg.get_bool("normalized");
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const KernelSpec kernel = kernel_from_config(cfg);
  const int maxL = max_of(depths);

  prior.n_max = max_of(n_maxes);
  prior.validate();
  const Truncation tr = truncation_from_config(cfg, prior);
  std::vector<double> etas;
  for (int nm : n_maxes) {
    PriorConfig p = prior;
    p.n_max = nm;
    const TunedSteps st = tune_steps(p, nm, draws, scale, seed);
    etas.push_back(normalized ? st.normalized : st.plain);
  }
  PriorConfig eval_prior = prior;
  eval_prior.law = input_law_from_string(cfg.get_string("eval_law"));
  const Partition part = Partition::make(tr.a, tr.b, C);

  const std::size_t nJ = n_maxes.size(), nL = depths.size(), nK = n_eval.size();
  const std::size_t per_rep = nJ * nL * kNumGen + kNumBase;
  std::vector<double> vals(nK * static_cast<std::size_t>(R) * per_rep, kNaN);
  parallel_for(static_cast<int>(nK) * R, threads, [&](int item) {
    const std::size_t k = static_cast<std::size_t>(item) / R;
    const int r = item % R;
    double* out = vals.data() + static_cast<std::size_t>(item) * per_rep;
    const SyntheticInstance inst =
        sample_instance_n(eval_prior, n_eval[k], tr.a, tr.b, seed, eval_stream(n_eval[k], r));
    const MixturePPD truth = inst.true_ppd();
    const PPDMoments exact = truth_moments(truth);
    const double raw_m2 = truth.second_moment();
    const TruncatedMoments tm = truncated_moments(truth, tr.a, tr.b);

    const BinnedDistribution ref = reference_binned(truth, part);
    const BinnedMoments rm = moment_readback(ref);
    const Coverage rc = coverage_and_width(ref, inst.y, level);
    double* base = out + nJ * nL * kNumGen;
    base[0] = (inst.y - rm.m1) * (inst.y - rm.m1);
    base[1] = rc.covered ? 1.0 : 0.0;
    base[2] = rc.width();
    base[3] = crps(ref, inst.y);

    const Eigen::MatrixXd Z0 = build_tokens(inst.ctx);
    for (std::size_t j = 0; j < nJ; ++j) {
      const ForwardResult f =
          forward(transformer(kernel, prior.sigma2, prior.d, maxL, etas[j], normalized), Z0, false);
      for (std::size_t li = 0; li < nL; ++li) {
        const PPDMoments m = f.layer_moments[depths[li]];
        if (!valid_moments(m)) continue;
        const BinnedDistribution q = head_binned(m, part);
        const BinnedMoments bm = moment_readback(q);
        const Coverage cov = coverage_and_width(q, inst.y, level);
        double* cell = out + (j * nL + li) * kNumGen;
        cell[0] = tv_continuous(truth, q);
        cell[1] = (inst.y - bm.m1) * (inst.y - bm.m1);
        cell[2] = cov.covered ? 1.0 : 0.0;
        cell[3] = cov.width();
        cell[4] = crps(q, inst.y);
        cell[5] = (exact.mean - bm.m1) * (exact.mean - bm.m1);
        cell[6] = (raw_m2 - bm.m2) * (raw_m2 - bm.m2);
        cell[7] = (tm.m2 - bm.m2) * (tm.m2 - bm.m2);
      }
    }
  });

  Rows rows = rows_for(cfg);
  const std::string variant = normalized ? "normalized" : "unnormalized";
  for (std::size_t j = 0; j < nJ; ++j) rows.add_value(variant, 0, C, n_maxes[j], 0, "eta", etas[j], draws);
  std::vector<svg::LinePlot> plots;
  for (std::size_t m = 0; m < kNumGen; ++m) {
    const std::string name = kGenMetrics[m];
    const bool log_y = name != "coverage" && name != "width";
    plots.push_back({name + " vs evaluation size", "n'", name, false, log_y, {}});
  }
  auto gather = [&](std::size_t k, std::size_t offset) {
    std::vector<double> v;
    for (int r = 0; r < R; ++r) v.push_back(vals[(k * R + r) * per_rep + offset]);
    return v;
  };
  for (std::size_t j = 0; j < nJ; ++j)
    for (std::size_t li = 0; li < nL; ++li) {
      std::vector<svg::Series> series(kNumGen);
      for (std::size_t m = 0; m < kNumGen; ++m)
        series[m].name = "n_max=" + std::to_string(n_maxes[j]) + " L=" + std::to_string(depths[li]);
      for (std::size_t k = 0; k < nK; ++k)
        for (std::size_t m = 0; m < kNumGen; ++m) {
          rows.add(variant, depths[li], C, n_maxes[j], n_eval[k], kGenMetrics[m],
                   gather(k, (j * nL + li) * kNumGen + m));
          series[m].x.push_back(n_eval[k]);
          series[m].y.push_back(rows.table.rows.back().value);
        }
      for (std::size_t m = 0; m < kNumGen; ++m) plots[m].series.push_back(series[m]);
    }
  std::vector<svg::Series> base_series(kNumBase);
  for (std::size_t k = 0; k < nK; ++k)
    for (std::size_t b = 0; b < kNumBase; ++b) {
      rows.add("true_ppd", 0, C, 0, n_eval[k], kBaseMetrics[b], gather(k, nJ * nL * kNumGen + b));
      base_series[b].name = "true PPD";
      base_series[b].dashed = true;
      base_series[b].x.push_back(n_eval[k]);
      base_series[b].y.push_back(rows.table.rows.back().value);
    }
  for (std::size_t b = 0; b < kNumBase; ++b)
    for (std::size_t m = 0; m < kNumGen; ++m)
      if (std::string(kGenMetrics[m]) == kBaseMetrics[b]) plots[m].series.push_back(base_series[b]);

  ExperimentOutput out;
  out.table = std::move(rows.table);
  for (std::size_t m = 0; m < kNumGen; ++m)
    out.files.push_back({std::string(kGenMetrics[m]) + "_vs_n.svg", svg::render(plots[m])});
  out.notes.push_back("truncation (a, b] = (" + format_double(tr.a) + ", " + format_double(tr.b) + "]");
  return out;
}

// ------------------------------------------------------------------ stepsize

ExperimentOutput run_stepsize(const Config& cfg, int threads) {
  const std::vector<std::string> kernel_names = cfg.get_string_list("kernels");
  const std::vector<int> ns = cfg.get_int_list("n_values");
  require_positive(ns, "n_values");
  const int trials = positive_int(cfg, "trials");
  const int d = positive_int(cfg, "d");
  const double sigma2 = cfg.get_double("sigma2");
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  const InputLaw law = input_law_from_string(cfg.get_string("input_law"));
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  std::vector<KernelSpec> kernels;
  for (const auto& name : kernel_names) {
    Config c = cfg;
    c.set("kernel", name);
    kernels.push_back(kernel_from_config(c));
  }

  const std::size_t nK = kernels.size(), nN = ns.size();
  std::vector<double> lam(nN * trials * nK);
  parallel_for(static_cast<int>(nN) * trials, threads, [&](int item) {
    const std::size_t k = static_cast<std::size_t>(item) / trials;
    const int t = item % trials;
    CounterRng rng(seed, eval_stream(ns[k], t));
    const Eigen::MatrixXd X = sample_inputs(law, ns[k], d, rng);
    for (std::size_t q = 0; q < nK; ++q) lam[static_cast<std::size_t>(item) * nK + q] = top_gram_eigenvalue(kernels[q], X);
  });

  Rows rows = rows_for(cfg);
  svg::LinePlot plot{"admissible step size bound", "n", "2 / (lambda_1 + sigma^2)", true, true, {}};
  for (std::size_t q = 0; q < nK; ++q) {
    svg::Series s{kernel_names[q], {}, {}, false};
    std::vector<double> xs, means;
    for (std::size_t k = 0; k < nN; ++k) {
      std::vector<double> bound, top;
      for (int t = 0; t < trials; ++t) {
        const double l = lam[(k * trials + t) * nK + q];
        top.push_back(l);
        bound.push_back(2.0 / (l + sigma2));
      }
      rows.add(kernel_names[q], 0, 0, 0, ns[k], "lambda_max", top);
      rows.add(kernel_names[q], 0, 0, 0, ns[k], "step_bound", bound);
      xs.push_back(ns[k]);
      means.push_back(rows.table.rows.back().value);
    }
    s.x = xs;
    s.y = means;
    plot.series.push_back(s);
    if (nN >= 2) {
      rows.add_value(kernel_names[q], 0, 0, 0, 0, "loglog_slope", loglog_slope(xs, means), trials);
      rows.add_value(kernel_names[q], 0, 0, 0, 0, "bound_ratio_first_last", means.front() / means.back(), trials);
    }
  }
  ExperimentOutput out;
  out.table = std::move(rows.table);
  out.files.push_back({"step_bound_vs_n.svg", svg::render(plot)});
  return out;
}

// ------------------------------------------------------------------- spectra

ExperimentOutput run_spectra(const Config& cfg, int threads) {
  const std::vector<int> ns = cfg.get_int_list("n_values");
  require_positive(ns, "n_values");
  const int trials = positive_int(cfg, "trials");
  const int d = positive_int(cfg, "d");
  const double sigma2 = cfg.get_double("sigma2");
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  const InputLaw law = input_law_from_string(cfg.get_string("input_law"));
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const KernelSpec kernel = kernel_from_config(cfg);
  kernel.validate(d);
  if (!kernel.strictly_positive()) throw ConfigError("spectra needs an RBF-family kernel");

  struct Trial {
    double cond_pr, cond_plain, lambda_pr;
  };
  const std::size_t nN = ns.size();
  std::vector<Trial> res(nN * trials);
  parallel_for(static_cast<int>(nN) * trials, threads, [&](int item) {
    const std::size_t k = static_cast<std::size_t>(item) / trials;
    CounterRng rng(seed, eval_stream(ns[k], item % trials));
    const GramMatrix G = gram(kernel, sample_inputs(law, ns[k], d, rng));
    const SpectralSummary pr = spectral_summary(G, sigma2, true);
    const SpectralSummary pl = spectral_summary(G, sigma2, false);
    res[item] = {pr.cond, pl.cond, pr.lambda_max};
  });

  Rows rows = rows_for(cfg);
  const double upper = 1.0 + sigma2 / (kernel.amplitude * kernel.amplitude);
  std::vector<double> mean_pr, mean_pl;
  for (std::size_t k = 0; k < nN; ++k) {
    std::vector<double> cpr, cpl, lpr;
    int violations = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int t = 0; t < trials; ++t) {
      const Trial& tr = res[k * trials + t];
      cpr.push_back(tr.cond_pr);
      cpl.push_back(tr.cond_plain);
      lpr.push_back(tr.lambda_pr);
      lo = std::min(lo, tr.lambda_pr);
      hi = std::max(hi, tr.lambda_pr);
      if (tr.lambda_pr < 1.0 - 1e-12 || tr.lambda_pr > upper + 1e-12) ++violations;
    }
    rows.add("preconditioned", 0, 0, 0, ns[k], "cond", cpr);
    mean_pr.push_back(rows.table.rows.back().value);
    rows.add("plain", 0, 0, 0, ns[k], "cond", cpl);
    mean_pl.push_back(rows.table.rows.back().value);
    rows.add("preconditioned", 0, 0, 0, ns[k], "lambda_max", lpr);
    rows.add_value("preconditioned", 0, 0, 0, ns[k], "lambda_max_min", lo, trials);
    rows.add_value("preconditioned", 0, 0, 0, ns[k], "lambda_max_max", hi, trials);
    rows.add_value("preconditioned", 0, 0, 0, ns[k], "lambda_max_bound_violations", violations, trials);
  }
  for (std::size_t k = 1; k < nN; ++k)
    if (ns[k] == 2 * ns[k - 1]) {
      rows.add_value("preconditioned", 0, 0, 0, ns[k], "cond_doubling_ratio", mean_pr[k] / mean_pr[k - 1], trials);
      rows.add_value("plain", 0, 0, 0, ns[k], "cond_doubling_ratio", mean_pl[k] / mean_pl[k - 1], trials);
    }

  std::vector<double> xs(ns.begin(), ns.end());
  svg::LinePlot plot{"condition numbers", "n", "mean condition number", true, true,
                     {{"D^-1 (G + sigma^2 I)", xs, mean_pr, false}, {"G + sigma^2 I", xs, mean_pl, false}}};
  ExperimentOutput out;
  out.table = std::move(rows.table);
  out.files.push_back({"cond_vs_n.svg", svg::render(plot)});
  return out;
}

// ----------------------------------------------------------------- calibrate

ExperimentOutput run_calibrate(const Config& cfg, int) {
  const PriorConfig prior = prior_from_config(cfg);
  Config c = cfg;
  c.set("truncation", "auto");
  const Truncation tr = truncation_from_config(c, prior);
  Rows rows = rows_for(cfg);
  const int draws = positive_int(cfg, "calib_draws");
  rows.add_value("", 0, 0, prior.n_max, 0, "a", tr.a, draws);
  rows.add_value("", 0, 0, prior.n_max, 0, "b", tr.b, draws);
  ExperimentOutput out;
  out.table = std::move(rows.table);
  out.notes.push_back("truncation=" + format_double(tr.a) + "," + format_double(tr.b));
  return out;
}

// -------------------------------------------------------------------- fit-eb

char delimiter_from(const std::string& s) {
  if (s == "comma" || s == ",") return ',';
  if (s == "semicolon" || s == ";") return ';';
  if (s == "tab" || s == "\\t") return '\t';
  if (s.size() == 1) return s[0];
  throw ConfigError("delimiter must be a single character, comma, semicolon or tab");
}

ExperimentOutput run_fit_eb(const Config& cfg, int) {
  const std::string path = cfg.get_string("data");
  if (path.empty()) throw ConfigError("fit-eb needs data=<csv path>");
  const std::string response = cfg.get_string("response");
  if (response.empty()) throw ConfigError("fit-eb needs response=<column>");
  const StandardizedData data =
      load_standardized_csv(path, cfg.get_string_list("features"), response, cfg.get_double("coord_scale"),
                            delimiter_from(cfg.get_string("delimiter")));
  const double amplitude = cfg.get_double("amplitude");
  const std::vector<double> ells = cfg.get_double_list("lengthscales");
  const std::vector<double> sds = cfg.get_double_list("noise_sds");
  std::vector<HyperCandidate> grid;
  std::vector<std::string> names;
  for (double l : ells)
    for (double s : sds) {
      grid.push_back({KernelSpec::rbf(amplitude, l), s * s});
      names.push_back("lengthscale=" + format_double(l) + ";noise_sd=" + format_double(s));
    }
  std::vector<double> scores;
  const HyperCandidate best = empirical_bayes_fit(grid, data.X, data.Y, &scores);

  Rows rows = rows_for(cfg);
  const int n = static_cast<int>(data.X.rows());
  for (std::size_t i = 0; i < grid.size(); ++i) rows.add_value(names[i], 0, 0, 0, n, "lml", scores[i], 1);
  rows.add_value("", 0, 0, 0, n, "selected_lengthscale", best.kernel.lengthscales[0], 1);
  rows.add_value("", 0, 0, 0, n, "selected_noise_sd", std::sqrt(best.sigma2), 1);
  rows.add_value("", 0, 0, 0, n, "selected_lml", *std::max_element(scores.begin(), scores.end()), 1);
  ExperimentOutput out;
  out.table = std::move(rows.table);
  out.files.push_back({"transform.txt", data.transform.to_text()});
  out.notes.push_back("selected lengthscale=" + format_double(best.kernel.lengthscales[0]) +
                      " noise_sd=" + format_double(std::sqrt(best.sigma2)) + " on " + std::to_string(n) +
                      " rows");
  return out;
}

}  // namespace

// -------------------------------------------------------------------- public

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"depth-bins", "normalization", "generalization", "stepsize",
                                                 "spectra",    "calibrate",     "fit-eb"};
  return names;
}

Config experiment_defaults(const std::string& name) {
  Config c;
  if (name == "depth-bins") {
    c = make_config({{"d", "2"},
                     {"n_min", "64"},
                     {"n_max", "128"},
                     {"depths", "2,4,8,16,32"},
                     {"bins", "16,32,64,128,256"},
                     {"replicates", "4096"},
                     {"eta_rule", "inverse_lambda"},
                     {"eta", "0.1"},
                     {"normalized", "false"}});
    c.merge_defaults(prior_defaults());
  } else if (name == "normalization") {
    c = make_config({{"d", "8"},
                     {"n_min", "64"},
                     {"n_max", "128"},
                     {"n_eval", "40:200:10"},
                     {"depth", "32"},
                     {"bins", "256"},
                     {"replicates", "4096"},
                     {"tuning_draws", "32"},
                     {"eta_scale", "0.99"}});
    c.merge_defaults(prior_defaults());
  } else if (name == "generalization") {
    c = make_config({{"d", "16"},
                     {"n_min", "64"},
                     {"n_max", "128,256,512"},
                     {"depths", "4,8,16,32"},
                     {"bins", "256"},
                     {"n_eval", "64:1024:64"},
                     {"replicates", "4096"},
                     {"tuning_draws", "32"},
                     {"eta_scale", "0.99"},
                     {"level", "0.9"},
                     {"normalized", "true"},
                     {"eval_law", "gaussian"}});
    c.merge_defaults(prior_defaults());
  } else if (name == "stepsize") {
    c = make_config({{"seed", "1"},
                     {"kernels", "linear,rbf"},
                     {"amplitude", "1"},
                     {"lengthscale", "0.8"},
                     {"linear_cov", "blr"},
                     {"d", "16"},
                     {"sigma2", "0.2"},
                     {"n_values", "100:1000:100"},
                     {"trials", "100"},
                     {"input_law", "gaussian"}});
  } else if (name == "spectra") {
    c = make_config({{"seed", "1"},
                     {"kernel", "rbf"},
                     {"amplitude", "1"},
                     {"lengthscale", "0.8"},
                     {"linear_cov", "blr"},
                     {"d", "8"},
                     {"sigma2", "0.2"},
                     {"n_values", "16,32,64,128,256"},
                     {"trials", "20"},
                     {"input_law", "gaussian"}});
  } else if (name == "calibrate") {
    c = make_config({{"d", "2"}, {"n_min", "64"}, {"n_max", "128"}});
    c.merge_defaults(prior_defaults());
  } else if (name == "fit-eb") {
    c = make_config({{"seed", "1"},
                     {"data", ""},
                     {"features", ""},
                     {"response", ""},
                     {"coord_scale", "1"},
                     {"delimiter", "comma"},
                     {"amplitude", "1"},
                     {"lengthscales", "0.4,0.8,1.2"},
                     {"noise_sds", "0.1,0.2,0.3"}});
  } else {
    std::string known;
    for (const auto& n : experiment_names()) known += " " + n;
    throw ConfigError("unknown experiment '" + name + "' (known:" + known + ")");
  }
  c.set("experiment", name);
  return c;
}

Config resolve_config(const std::string& name, Config cfg) {
  if (cfg.has("experiment") && cfg.get_string("experiment") != name)
    throw ConfigError("config is for experiment '" + cfg.get_string("experiment") + "', not '" + name + "'");
  const Config defaults = experiment_defaults(name);
  for (const auto& [k, v] : cfg.values())
    if (!defaults.has(k)) throw ConfigError("unknown config key '" + k + "' for experiment " + name);
  cfg.set("experiment", name);
  cfg.merge_defaults(defaults);
  return cfg;
}

Config resolve_config(Config cfg) {
  if (!cfg.has("experiment")) throw ConfigError("config does not name an experiment (experiment=...)");
  const std::string name = cfg.get_string("experiment");
  return resolve_config(name, std::move(cfg));
}

std::string describe_grid(const Config& resolved) {
  const std::string name = resolved.get_string("experiment");
  std::ostringstream out;
  out << "experiment: " << name << "\nconfig_hash: " << resolved.hash_hex() << "\n";
  static const std::set<std::string> int_lists = {"depths", "bins", "n_eval", "n_values", "n_max"};
  std::size_t cells = 1;
  for (const auto& [k, v] : resolved.values()) {
    if (!int_lists.count(k)) continue;
    if (k == "n_max" && name != "generalization") continue;
    if (k == "bins" && name != "depth-bins") continue;
    const auto list = resolved.get_int_list(k);
    cells *= list.size();
    out << "  " << k << " (" << list.size() << "): " << join(list) << "\n";
  }
  if (resolved.has("kernels")) {
    const auto list = resolved.get_string_list("kernels");
    cells *= list.size();
    out << "  kernels (" << list.size() << ")\n";
  }
  if (name == "normalization") cells *= 2;
  std::string reps = resolved.has("replicates") ? "replicates" : resolved.has("trials") ? "trials" : "";
  out << "cells: " << cells;
  if (!reps.empty()) out << " x " << resolved.get_string(reps) << " " << reps;
  out << "\n\nresolved config:\n" << resolved.canonical();
  return out.str();
}

ExperimentOutput run_experiment(const Config& resolved, int threads) {
  const std::string name = resolved.get_string("experiment");
  if (name == "depth-bins") return run_depth_bins(resolved, threads);
  if (name == "normalization") return run_normalization(resolved, threads);
  if (name == "generalization") return run_generalization(resolved, threads);
  if (name == "stepsize") return run_stepsize(resolved, threads);
  if (name == "spectra") return run_spectra(resolved, threads);
  if (name == "calibrate") return run_calibrate(resolved, threads);
  if (name == "fit-eb") return run_fit_eb(resolved, threads);
  throw ConfigError("unknown experiment '" + name + "'");
}

std::string manifest_text(const Config& resolved) {
  return "# icgp run manifest\n# version=" + std::string(kVersion) + "\n# config_hash=" + resolved.hash_hex() +
         "\n# rerun with: icgp run --config manifest.txt\n" + resolved.canonical();
}

void write_outputs(const std::string& dir, const Config& resolved, const ExperimentOutput& out) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path root(dir);
  out.table.write_csv((root / "results.csv").string());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(root / name, std::ios::binary);
    if (!f) throw IoError("cannot write '" + (root / name).string() + "'");
    f << text;
    if (!f) throw IoError("failed writing '" + (root / name).string() + "'");
  };
  write("manifest.txt", manifest_text(resolved));
  for (const auto& [name, text] : out.files) write(name, text);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  if (threads <= 1 || count == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    while (!stop.load()) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min(threads, count);
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

KernelSpec kernel_from_config(const Config& cfg) {
  const KernelKind kind = kernel_kind_from_string(cfg.get_string("kernel"));
  const int d = static_cast<int>(cfg.get_int("d"));
  switch (kind) {
    case KernelKind::Linear: {
      if (cfg.get_string("linear_cov") == "blr") return KernelSpec::linear(blr_covariance(d));
      const auto cov = cfg.get_double_list("linear_cov");
      return KernelSpec::linear(Eigen::Map<const Eigen::VectorXd>(cov.data(), static_cast<Eigen::Index>(cov.size())));
    }
    case KernelKind::Rbf:
      return KernelSpec::rbf(cfg.get_double("amplitude"), cfg.get_double_list("lengthscale").front());
    case KernelKind::ArdRbf: {
      const auto ls = cfg.get_double_list("lengthscale");
      Eigen::VectorXd v(d);
      for (int k = 0; k < d; ++k) v[k] = ls.size() == 1 ? ls[0] : ls.at(static_cast<std::size_t>(k));
      return KernelSpec::ard_rbf(cfg.get_double("amplitude"), v);
    }
  }
  throw ConfigError("unknown kernel");
}

PriorConfig prior_from_config(const Config& cfg) {
  PriorConfig p;
  p.d = static_cast<int>(cfg.get_int("d"));
  p.kernel = kernel_from_config(cfg);
  p.sigma2 = cfg.get_double("sigma2");
  p.n_min = static_cast<int>(cfg.get_int("n_min"));
  p.n_max = cfg.get_int_list("n_max").front();
  p.law = input_law_from_string(cfg.get_string("input_law"));
  if (cfg.get_bool("hierarchical")) {
    p.hyper = HyperPrior::default_grid();
    p.hyper->amplitude = cfg.get_double("amplitude");
  }
  p.validate();
  return p;
}

Truncation truncation_from_config(const Config& cfg, const PriorConfig& prior) {
  const std::string spec = cfg.get_string("truncation");
  if (spec == "auto") {
    // Calibration draws use their own seed so they never coincide with
    // evaluation instances.
    const std::uint64_t seed = splitmix64(static_cast<std::uint64_t>(cfg.get_int("seed")) ^ 0xca11b7a7e0ULL);
    return calibrate_truncation(prior, positive_int(cfg, "calib_draws"), cfg.get_double("tail_mass"), seed);
  }
  const auto ab = cfg.get_double_list("truncation");
  if (ab.size() != 2 || !(ab[0] < ab[1]) || !std::isfinite(ab[0]) || !std::isfinite(ab[1]))
    throw ConfigError("truncation must be 'auto' or 'a,b' with a < b");
  return {ab[0], ab[1]};
}

TunedSteps tune_steps(const PriorConfig& prior, int n, int draws, double scale, std::uint64_t seed) {
  if (draws < 1) throw InvalidInput("tune_steps needs at least one draw");
  double plain = 0.0;
  for (int i = 0; i < draws; ++i) {
    CounterRng rng(seed, kTuningStreams | static_cast<std::uint64_t>(i));
    plain += top_gram_eigenvalue(prior.kernel, sample_inputs(prior.law, n, prior.d, rng));
  }
  plain /= draws;
  TunedSteps st;
  st.plain = scale * 2.0 / (plain + prior.sigma2);
  if (prior.kernel.strictly_positive()) {
    const double a2 = prior.kernel.amplitude * prior.kernel.amplitude;
    st.normalized = scale * 2.0 / (1.0 + prior.sigma2 / a2);
  }
  return st;
}

NormalizationRun normalization_samples(const Config& cfg, int threads) {
  const PriorConfig prior = prior_from_config(cfg);
  const std::vector<int> n_eval = cfg.get_int_list("n_eval");
  require_positive(n_eval, "n_eval");
  const int L = positive_int(cfg, "depth");
  const int C = positive_int(cfg, "bins");
  const int R = positive_int(cfg, "replicates");
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  if (!prior.kernel.strictly_positive()) throw ConfigError("normalization needs an RBF-family kernel");

  NormalizationRun run;
  run.truncation = truncation_from_config(cfg, prior);
  run.steps = tune_steps(prior, prior.n_max, positive_int(cfg, "tuning_draws"), cfg.get_double("eta_scale"), seed);
  const Partition part = Partition::make(run.truncation.a, run.truncation.b, C);
  const int items = static_cast<int>(n_eval.size()) * R;
  run.samples.resize(static_cast<std::size_t>(items) * 2);
  parallel_for(items, threads, [&](int item) {
    const int n = n_eval[static_cast<std::size_t>(item / R)];
    const int r = item % R;
    const SyntheticInstance inst =
        sample_instance_n(prior, n, run.truncation.a, run.truncation.b, seed, eval_stream(n, r));
    const MixturePPD truth = inst.true_ppd();
    const Eigen::MatrixXd Z0 = build_tokens(inst.ctx);
    for (int v = 0; v < 2; ++v) {
      const bool normalized = v == 1;
      const double eta = normalized ? run.steps.normalized : run.steps.plain;
      const ForwardResult f = forward(transformer(prior.kernel, prior.sigma2, prior.d, L, eta, normalized), Z0, false);
      NormalizationSample& s = run.samples[static_cast<std::size_t>(item) * 2 + v];
      s.normalized = normalized;
      s.n_eval = n;
      s.replicate = r;
      s.diverged = f.diverged || !valid_moments(f.moments);
      s.tv = s.diverged ? kNaN : tv_continuous(truth, head_binned(f.moments, part));
    }
  });
  return run;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("loglog_slope needs two or more points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace icgp
