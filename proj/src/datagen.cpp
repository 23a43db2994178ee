#include "icgp/datagen.hpp"

#include "icgp/errors.hpp"
#include "icgp/format.hpp"
#include "icgp/normal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace icgp {

std::string to_string(InputLaw law) { return law == InputLaw::Gaussian ? "gaussian" : "uniform"; }

InputLaw input_law_from_string(const std::string& name) {
  if (name == "gaussian") return InputLaw::Gaussian;
  if (name == "uniform") return InputLaw::Uniform;
  throw InvalidInput("unknown input law '" + name + "'");
}

void PriorConfig::validate() const {
  if (d < 1) throw InvalidInput("prior dimension must be at least 1");
  if (n_min < 1 || n_max < n_min)
    throw InvalidInput("prior needs 1 <= n_min <= n_max, got [" + std::to_string(n_min) + ", " +
                       std::to_string(n_max) + "]");
  if (hyper) {
    hyper->validate();
  } else {
    kernel.validate(d);
    if (!(sigma2 > 0.0)) throw InvalidInput("prior noise variance must be positive");
  }
}

Eigen::MatrixXd sample_inputs(InputLaw law, int n, int d, CounterRng& rng) {
  Eigen::MatrixXd X(n, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      X(i, k) = law == InputLaw::Gaussian ? scale * rng.normal()
                                          : scale * (2.0 * rng.uniform() - 1.0);
  return X;
}

double sample_truncated_normal(double mean, double var, double a, double b, CounterRng& rng) {
  const double sd = std::sqrt(var);
  const double lo = (a - mean) / sd;
  const double hi = (b - mean) / sd;
  const double u = rng.uniform();
  double z;
  if (lo > 0.0) {
    const double qa = normal::sf(lo);
    const double qb = normal::sf(hi);
    if (!(qa > qb)) throw InvalidPartition("truncation interval has no mass under the PPD");
    z = normal::sf_quantile(qa - u * (qa - qb));
  } else {
    const double pa = normal::cdf(lo);
    const double pb = normal::cdf(hi);
    if (!(pb > pa)) throw InvalidPartition("truncation interval has no mass under the PPD");
    z = normal::quantile(pa + u * (pb - pa));
  }
  double y = mean + sd * z;
  if (y <= a) y = std::nextafter(a, std::numeric_limits<double>::infinity());
  if (y > b) y = b;
  return y;
}

namespace {

SyntheticInstance draw(const PriorConfig& prior, int n, CounterRng& rng, double a, double b,
                       bool with_mixture) {
  SyntheticInstance inst;
  inst.a = a;
  inst.b = b;
  if (prior.hyper) {
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t h = 0;
    for (; h + 1 < prior.hyper->components.size(); ++h) {
      cum += prior.hyper->components[h].weight;
      if (u < cum) break;
    }
    inst.hyper_index = static_cast<int>(h);
    inst.kernel = prior.hyper->kernel(h);
    inst.sigma2 = prior.hyper->sigma2(h);
  } else {
    inst.kernel = prior.kernel;
    inst.sigma2 = prior.sigma2;
  }

  inst.ctx.X = sample_inputs(prior.law, n, prior.d, rng);
  inst.ctx.x_query = sample_inputs(prior.law, 1, prior.d, rng).row(0).transpose();
  const RidgeFactor factor(gram(inst.kernel, inst.ctx.X), inst.sigma2);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  inst.ctx.Y = factor.color(z);

  inst.moments = exact_moments(inst.kernel, inst.sigma2, inst.ctx, factor);
  if (prior.hyper && with_mixture) inst.mixture = hierarchical_mixture(*prior.hyper, inst.ctx);
  inst.y = sample_truncated_normal(inst.moments.mean, inst.moments.var, a, b, rng);
  return inst;
}

}  // namespace

SyntheticInstance sample_instance(const PriorConfig& prior, double a, double b,
                                  std::uint64_t seed, std::uint64_t stream) {
  prior.validate();
  CounterRng rng(seed, stream);
  const int n = static_cast<int>(rng.uniform_int(prior.n_min, prior.n_max));
  return draw(prior, n, rng, a, b, true);
}

SyntheticInstance sample_instance_n(const PriorConfig& prior, int n, double a, double b,
                                    std::uint64_t seed, std::uint64_t stream) {
  prior.validate();
  if (n < 1) throw InvalidInput("context size must be at least 1");
  CounterRng rng(seed, stream);
  return draw(prior, n, rng, a, b, true);
}

Truncation calibrate_truncation(const PriorConfig& prior, int mc_count, double tail_mass,
                                std::uint64_t seed) {
  prior.validate();
  if (mc_count < 1) throw InvalidInput("calibration needs at least one draw");
  if (!(tail_mass > 0.0 && tail_mass < 1.0))
    throw InvalidInput("tail mass must lie in (0, 1), got " + std::to_string(tail_mass));
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> ys(mc_count);
  for (int i = 0; i < mc_count; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const int n = static_cast<int>(rng.uniform_int(prior.n_min, prior.n_max));
    ys[i] = draw(prior, n, rng, -inf, inf, false).y;
  }
  std::sort(ys.begin(), ys.end());
  auto empirical = [&](double p) {
    const double h = (mc_count - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, ys.size() - 1);
    return ys[lo] + (h - lo) * (ys[hi] - ys[lo]);
  };
  Truncation t{empirical(0.5 * tail_mass), empirical(1.0 - 0.5 * tail_mass)};
  if (!(t.a < t.b))
    throw InvalidInput("calibrated truncation interval is degenerate (a = " + format_double(t.a) +
                       ", b = " + format_double(t.b) + ")");
  return t;
}

Eigen::MatrixXd TransformRecord::forward_features(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != static_cast<Eigen::Index>(feature_center.size()))
    throw InvalidInput("feature count does not match the transform record");
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index k = 0; k < raw.cols(); ++k)
    out.col(k) = (raw.col(k).array() - feature_center[k]) / feature_scale[k] / coord_scale;
  return out;
}

Eigen::VectorXd TransformRecord::forward_response(const Eigen::VectorXd& raw) const {
  return (raw.array() - response_center) / response_scale;
}

Eigen::VectorXd TransformRecord::inverse_response(const Eigen::VectorXd& standardized) const {
  return standardized.array() * response_scale + response_center;
}

double TransformRecord::inverse_variance(double standardized_var) const {
  return standardized_var * response_scale * response_scale;
}

std::string TransformRecord::to_text() const {
  std::ostringstream out;
  out << "coord_scale=" << format_double(coord_scale) << '\n';
  out << "response=" << response_name << '\n';
  out << "response_center=" << format_double(response_center) << '\n';
  out << "response_scale=" << format_double(response_scale) << '\n';
  out << "features=" << feature_names.size() << '\n';
  for (std::size_t k = 0; k < feature_names.size(); ++k) {
    out << "feature." << k << ".name=" << feature_names[k] << '\n';
    out << "feature." << k << ".center=" << format_double(feature_center[k]) << '\n';
    out << "feature." << k << ".scale=" << format_double(feature_scale[k]) << '\n';
  }
  return out.str();
}

void TransformRecord::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write transform record '" + path + "'");
  out << to_text();
  if (!out) throw IoError("failed writing transform record '" + path + "'");
}

TransformRecord TransformRecord::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read transform record '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("transform record line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("transform record is missing '" + key + "'");
    return it->second;
  };
  auto num = [&](const std::string& key) {
    double v;
    if (!parse_double(get(key), v)) throw ParseError("transform record: bad number for " + key);
    return v;
  };
  TransformRecord rec;
  rec.coord_scale = num("coord_scale");
  rec.response_name = get("response");
  rec.response_center = num("response_center");
  rec.response_scale = num("response_scale");
  const int count = static_cast<int>(num("features"));
  for (int k = 0; k < count; ++k) {
    const std::string prefix = "feature." + std::to_string(k) + ".";
    rec.feature_names.push_back(get(prefix + "name"));
    rec.feature_center.push_back(num(prefix + "center"));
    rec.feature_scale.push_back(num(prefix + "scale"));
  }
  return rec;
}

namespace {

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  const auto lo = s.find_first_not_of(" \t");
  if (lo == std::string::npos) return "";
  const auto hi = s.find_last_not_of(" \t");
  return s.substr(lo, hi - lo + 1);
}

void center_scale(const Eigen::VectorXd& col, const std::string& name, double& center,
                  double& scale) {
  const double n = static_cast<double>(col.size());
  center = col.mean();
  scale = std::sqrt((col.array() - center).square().sum() / (n - 1.0));
  if (!(scale > 0.0)) throw InvalidData("column '" + name + "' is constant; cannot standardize");
}

}  // namespace

StandardizedData load_standardized_csv(const std::string& path,
                                       const std::vector<std::string>& feature_columns,
                                       const std::string& response_column, double coord_scale,
                                       char delimiter) {
  if (!(coord_scale > 0.0)) throw InvalidInput("coord_scale must be positive");
  if (feature_columns.empty()) throw InvalidInput("no feature columns requested");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_row(line, delimiter);
  auto locate = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (trim(header[c]) == name) return c;
    throw ParseError(path + ": column '" + name + "' not found in header");
  };
  std::vector<std::size_t> fidx;
  for (const auto& name : feature_columns) fidx.push_back(locate(name));
  const std::size_t ridx = locate(response_column);

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_row(line, delimiter);
    std::vector<double> row;
    auto read = [&](std::size_t c, const std::string& name) {
      double v;
      if (c >= cells.size())
        throw ParseError(path + ": row " + std::to_string(line_no) + ", column '" + name +
                         "': missing cell");
      if (!parse_double(cells[c], v) || !std::isfinite(v))
        throw ParseError(path + ": row " + std::to_string(line_no) + ", column '" + name +
                         "': cannot parse '" + cells[c] + "' as a number");
      row.push_back(v);
    };
    for (std::size_t k = 0; k < fidx.size(); ++k) read(fidx[k], feature_columns[k]);
    read(ridx, response_column);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw InvalidData(path + ": need at least two data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = static_cast<Eigen::Index>(feature_columns.size());
  Eigen::MatrixXd raw(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) raw(i, k) = rows[i][k];
    y[i] = rows[i][d];
  }

  StandardizedData out;
  TransformRecord& rec = out.transform;
  rec.coord_scale = coord_scale;
  rec.feature_names = feature_columns;
  rec.response_name = response_column;
  rec.feature_center.resize(d);
  rec.feature_scale.resize(d);
  for (Eigen::Index k = 0; k < d; ++k)
    center_scale(raw.col(k), feature_columns[k], rec.feature_center[k], rec.feature_scale[k]);
  center_scale(y, response_column, rec.response_center, rec.response_scale);
  out.X = rec.forward_features(raw);
  out.Y = rec.forward_response(y);
  return out;
}

}  // namespace icgp
