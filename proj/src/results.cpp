#include "ffevss/results.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "ffevss/errors.hpp"

namespace ffevss {

namespace {

constexpr const char* kHeader = "seed,method,makespan,decision_events,seconds";

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_field(const std::string& text, std::size_t line, const char* field) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size())
    throw ParseError("results line " + std::to_string(line) + ": bad " + field + " '" + text + "'");
  return value;
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kHeader << '\n';
  for (const ResultRow& r : rows) {
    if (r.method.find_first_of(",\n\"") != std::string::npos)
      throw ContractViolation("method names cannot contain commas, quotes or newlines");
    out << r.seed << ',' << r.method << ',' << exact(r.makespan) << ',' << r.decision_events << ','
        << exact(r.seconds) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw ParseError("results: missing header '" + std::string(kHeader) + "'");
  std::vector<ResultRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) throw ParseError("results line " + std::to_string(number) + ": expected 5 fields");
    ResultRow r;
    r.seed = parse_field<std::uint64_t>(fields[0], number, "seed");
    r.method = fields[1];
    r.makespan = parse_field<double>(fields[2], number, "makespan");
    r.decision_events = parse_field<int>(fields[3], number, "decision_events");
    r.seconds = parse_field<double>(fields[4], number, "seconds");
    rows.push_back(std::move(r));
  }
  return rows;
}

ResultSummary summarize(const std::vector<ResultRow>& rows) {
  ResultSummary s;
  s.count = rows.size();
  if (rows.empty()) return s;
  s.method = rows.front().method;
  for (const ResultRow& r : rows) {
    s.mean_makespan += r.makespan;
    s.mean_seconds += r.seconds;
  }
  s.mean_makespan /= static_cast<double>(rows.size());
  s.mean_seconds /= static_cast<double>(rows.size());
  return s;
}

double win_percentage(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b) {
  if (a.size() != b.size()) throw ContractViolation("win_percentage: result sets differ in length");
  if (a.empty()) throw ContractViolation("win_percentage: empty result sets");
  std::size_t wins = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed != b[i].seed)
      throw ContractViolation("win_percentage: row " + std::to_string(i) + " pairs seeds " +
                              std::to_string(a[i].seed) + " and " + std::to_string(b[i].seed));
    wins += a[i].makespan <= b[i].makespan;
  }
  return 100.0 * static_cast<double>(wins) / static_cast<double>(a.size());
}

}  // namespace ffevss
