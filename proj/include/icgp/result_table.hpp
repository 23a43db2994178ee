#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace icgp {

// One metric value of one sweep cell. Coordinates that do not apply to an
// experiment are 0.
struct ResultRow {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string variant;
  int depth = 0;
  int bins = 0;
  int n_max = 0;
  int n_eval = 0;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  int replicates = 0;
  // Replicates flagged as diverged; they are excluded from `value`.
  int diverged = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  // Header plus one line per row, numbers in shortest round-trip form.
  std::string to_csv() const;
  // Throws IoError.
  void write_csv(const std::string& path) const;
  // First row matching every non-empty / non-zero key; nullptr if none.
  const ResultRow* find(const std::string& metric, const std::string& variant = "", int depth = 0,
                        int bins = 0, int n_max = 0, int n_eval = 0) const;
};

// Mean and standard error of the finite entries of `values`.
struct Summary {
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};
Summary summarize(const std::vector<double>& values);

}  // namespace icgp
