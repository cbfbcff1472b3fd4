#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ffevss {

/// One evaluated instance. CSV header:
/// seed,method,makespan,decision_events,seconds
struct ResultRow {
  std::uint64_t seed = 0;
  std::string method;  // rl | greedy | oracle | random
  double makespan = 0.0;  // minutes
  int decision_events = 0;
  double seconds = 0.0;  // wall clock for the rollout

  bool operator==(const ResultRow&) const = default;
};

struct ResultSummary {
  std::string method;
  std::size_t count = 0;
  double mean_makespan = 0.0;
  double mean_seconds = 0.0;
};

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
/// Throws ParseError on a wrong header or malformed row.
std::vector<ResultRow> read_results_csv(std::istream& in);

ResultSummary summarize(const std::vector<ResultRow>& rows);

/// Share (in percent) of instances on which `a` performed at least as well
/// as `b`. Rows are paired by position and must carry the same seeds.
double win_percentage(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b);

}  // namespace ffevss
