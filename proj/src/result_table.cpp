#include "icgp/result_table.hpp"

#include "icgp/errors.hpp"
#include "icgp/format.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace icgp {

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string ResultTable::to_csv() const {
  std::string out =
      "experiment,config_hash,seed,variant,depth,bins,n_max,n_eval,metric,value,stderr,replicates,"
      "diverged\n";
  for (const ResultRow& r : rows) {
    out += quote(r.experiment) + "," + r.config_hash + "," + std::to_string(r.seed) + "," +
           quote(r.variant) + "," + std::to_string(r.depth) + "," + std::to_string(r.bins) + "," +
           std::to_string(r.n_max) + "," + std::to_string(r.n_eval) + "," + quote(r.metric) + "," +
           format_double(r.value) + "," + format_double(r.stderr_) + "," +
           std::to_string(r.replicates) + "," + std::to_string(r.diverged) + "\n";
  }
  return out;
}

void ResultTable::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << to_csv();
  if (!out) throw IoError("failed writing '" + path + "'");
}

const ResultRow* ResultTable::find(const std::string& metric, const std::string& variant, int depth,
                                   int bins, int n_max, int n_eval) const {
  for (const ResultRow& r : rows) {
    if (r.metric != metric) continue;
    if (!variant.empty() && r.variant != variant) continue;
    if (depth != 0 && r.depth != depth) continue;
    if (bins != 0 && r.bins != bins) continue;
    if (n_max != 0 && r.n_max != n_max) continue;
    if (n_eval != 0 && r.n_eval != n_eval) continue;
    return &r;
  }
  return nullptr;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++s.count;
    }
  if (s.count == 0) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    s.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = sum / s.count;
  if (s.count < 2) return s;
  double sq = 0.0;
  for (double v : values)
    if (std::isfinite(v)) sq += (v - s.mean) * (v - s.mean);
  s.stderr_ = std::sqrt(sq / (s.count - 1) / s.count);
  return s;
}

}  // namespace icgp
