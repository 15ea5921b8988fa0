#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace nj::harness {

struct ResultsRow {
  std::string experiment;
  std::size_t n = 0;  // units, or horizon T
  std::size_t L = 0;
  std::string estimator;
  double mean_vhat = 0.0;
  double true_var = 0.0;
  double ratio = 0.0;
  std::size_t reps = 0;
  std::size_t degenerate = 0;
  std::uint64_t seed = 0;
  // Not written to CSV; used by summaries and tests.
  double vhat_se = 0.0;
  double true_var_se = 0.0;
};

inline constexpr const char* kCsvHeader = "experiment,n,L,estimator,mean_vhat,true_var,ratio,reps,degenerate,seed";

// 17 significant digits so values round-trip exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<ResultsRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.experiment << ',' << r.n << ',' << r.L << ',' << r.estimator << ',' << format_double(r.mean_vhat) << ','
       << format_double(r.true_var) << ',' << format_double(r.ratio) << ',' << r.reps << ',' << r.degenerate << ','
       << r.seed << '\n';
  }
}

}  // namespace nj::harness
