#include "bsl/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace bsl {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidArgument("loglog_slope: x values must not all be equal");
  return sxy / sxx;
}

namespace {

class CorruptResults : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size()) throw CorruptResults("line " + std::to_string(line) + ": '" + cell + "' is not a number");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw CorruptResults("missing column '" + name + "'");
  }
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorruptResults("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw CorruptResults("line " + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                           " fields, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(n);
  }
  if (t.header.empty()) throw CorruptResults(path.string() + " is empty");
  if (t.rows.empty()) throw CorruptResults(path.string() + " has no data rows");
  return t;
}

const char* const kMetrics[] = {"beta_l1",      "beta_sq_l2",   "emp_risk",      "pop_risk",
                                "gap",          "gap_bound_l1", "gap_bound_l2",  "beta_bound_l1",
                                "beta_sq_bound_l2"};

struct GridAggregate {
  std::size_t grid = 0;
  std::size_t m1 = 0, m2 = 0, K = 0, T = 1;
  std::string algorithm;
  std::string status = "ok";
  std::map<std::string, std::vector<double>> values;

  MeanSe stat(const std::string& metric) const {
    auto it = values.find(metric);
    return it == values.end() ? MeanSe{} : mean_and_se(it->second);
  }
  bool has(const std::string& metric) const {
    auto it = values.find(metric);
    return it != values.end() && !it->second.empty();
  }
};

std::string fmt(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string pass(bool ok) { return ok ? "PASS" : "FAIL"; }

// Groups the aggregates by every sweep coordinate except `free` and returns
// the groups with at least two distinct values of `free`.
template <typename Key, typename KeyFn, typename XFn>
void print_slopes(std::ostream& out, const std::vector<GridAggregate>& grids, const std::string& label,
                  KeyFn key_fn, XFn x_fn) {
  std::map<Key, std::vector<const GridAggregate*>> groups;
  for (const GridAggregate& g : grids) groups[key_fn(g)].push_back(&g);
  for (const auto& [key, members] : groups) {
    std::vector<double> xs, ys;
    for (const GridAggregate* g : members) {
      const MeanSe b = g->stat("beta_l1");
      if (!g->has("beta_l1") || !(b.mean > 0.0) || !(x_fn(*g) > 0)) continue;
      xs.push_back(static_cast<double>(x_fn(*g)));
      ys.push_back(b.mean);
    }
    bool distinct = false;
    for (double x : xs) distinct = distinct || x != xs.front();
    if (xs.size() < 2 || !distinct) continue;
    out << "  beta_l1 vs " << label << " (" << members.front()->algorithm;
    if (label != "m1") out << ", m1=" << members.front()->m1;
    if (label != "K") out << ", K=" << members.front()->K;
    if (label != "T") out << ", T=" << members.front()->T;
    out << "): slope " << fmt(loglog_slope(xs, ys), 4) << " over " << xs.size() << " points\n";
  }
}

}  // namespace

int cmd_report(const std::string& results_dir, const ReportOptions& opts, std::ostream& out, std::ostream& err) {
  const std::filesystem::path path = std::filesystem::path(results_dir) / "results.csv";
  std::vector<GridAggregate> grids;
  try {
    const Table t = read_table(path);
    const std::size_t c_grid = t.column("grid");
    const std::size_t c_m1 = t.column("m1"), c_m2 = t.column("m2"), c_k = t.column("K"), c_t = t.column("T");
    const std::size_t c_alg = t.column("algorithm"), c_status = t.column("status");
    std::map<std::string, std::size_t> metric_cols;
    for (const char* m : kMetrics) metric_cols[m] = t.column(m);

    std::map<std::size_t, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      const std::size_t line = t.line_numbers[r];
      auto integer = [&](std::size_t c) {
        const auto v = parse_number(row[c], line);
        if (!v || *v < 0 || std::floor(*v) != *v) {
          throw CorruptResults("line " + std::to_string(line) + ": '" + t.header[c] + "' must be an integer");
        }
        return static_cast<std::size_t>(*v);
      };
      const std::size_t g = integer(c_grid);
      auto [it, inserted] = index.emplace(g, grids.size());
      if (inserted) {
        GridAggregate agg;
        agg.grid = g;
        agg.m1 = integer(c_m1);
        agg.m2 = integer(c_m2);
        agg.K = integer(c_k);
        agg.T = integer(c_t);
        agg.algorithm = row[c_alg];
        grids.push_back(std::move(agg));
      }
      GridAggregate& agg = grids[it->second];
      if (row[c_status] != "ok") agg.status = row[c_status];
      for (const auto& [name, c] : metric_cols) {
        if (auto v = parse_number(row[c], line)) {
          if (!std::isfinite(*v)) {
            throw CorruptResults("line " + std::to_string(line) + ": non-finite '" + name + "'");
          }
          agg.values[name].push_back(*v);
        }
      }
    }
  } catch (const CorruptResults& e) {
    err << "report: " << e.what() << "\n";
    return 1;
  }

  out << "grid  algorithm      m1      m2       K     T  trials  beta_l1 (se)              gap (se)"
         "                  L_f*beta\n";
  for (const GridAggregate& g : grids) {
    char line[256];
    const MeanSe b = g.stat("beta_l1"), gap = g.stat("gap"), bound = g.stat("gap_bound_l1");
    std::size_t trials = 0;
    for (const auto& [_, v] : g.values) trials = std::max(trials, v.size());
    std::snprintf(line, sizeof line, "%4zu  %-9s %7zu %7zu %7zu %5zu %7zu  %-25s %-25s %s\n", g.grid,
                  g.algorithm.c_str(), g.m1, g.m2, g.K, g.T, trials,
                  g.has("beta_l1") ? (fmt(b.mean) + " (" + fmt(b.se, 3) + ")").c_str() : "-",
                  g.has("gap") ? (fmt(gap.mean) + " (" + fmt(gap.se, 3) + ")").c_str() : "-",
                  g.has("gap_bound_l1") ? fmt(bound.mean).c_str() : "-");
    out << line;
  }

  out << "\nscaling (log-log least squares):\n";
  using MKey = std::tuple<std::string, std::size_t, std::size_t, std::size_t>;
  print_slopes<MKey>(
      out, grids, "m1", [](const GridAggregate& g) { return MKey{g.algorithm, g.m2, g.K, g.T}; },
      [](const GridAggregate& g) { return g.m1; });
  print_slopes<MKey>(
      out, grids, "K", [](const GridAggregate& g) { return MKey{g.algorithm, g.m1, g.m2, g.T}; },
      [](const GridAggregate& g) { return g.K; });
  print_slopes<MKey>(
      out, grids, "T", [](const GridAggregate& g) { return MKey{g.algorithm, g.m1, g.m2, g.K}; },
      [](const GridAggregate& g) { return g.T; });

  out << "\nbound checks (" << fmt(opts.sigma, 3) << " combined standard errors of slack):\n";
  bool any_l1 = false, ok_l1 = true, any_l2 = false, ok_l2 = true;
  for (const GridAggregate& g : grids) {
    if (!g.has("gap")) continue;
    const MeanSe gap = g.stat("gap");
    if (g.has("gap_bound_l1")) {
      const MeanSe bound = g.stat("gap_bound_l1");
      const bool ok = std::abs(gap.mean) <= bound.mean + opts.sigma * std::hypot(gap.se, bound.se);
      any_l1 = true;
      ok_l1 = ok_l1 && ok;
      out << "  grid " << g.grid << ": |gap| " << fmt(std::abs(gap.mean)) << " <= L_f*beta " << fmt(bound.mean)
          << ": " << pass(ok) << "\n";
    }
    if (g.has("gap_bound_l2")) {
      const MeanSe bound = g.stat("gap_bound_l2");
      const bool ok = gap.mean <= bound.mean + opts.sigma * std::hypot(gap.se, bound.se);
      any_l2 = true;
      ok_l2 = ok_l2 && ok;
      out << "  grid " << g.grid << ": gap " << fmt(gap.mean) << " <= smooth l2 bound " << fmt(bound.mean) << ": "
          << pass(ok) << "\n";
    }
    if (g.status != "ok") out << "  grid " << g.grid << ": status " << g.status << "\n";
  }
  if (any_l1) out << "gap <= L_f*beta check: " << pass(ok_l1) << "\n";
  if (any_l2) out << "gap <= smooth l2 bound check: " << pass(ok_l2) << "\n";
  if (!any_l1 && !any_l2) out << "bound checks skipped: results carry no gap with matching stability\n";

  if (opts.long_csv) {
    std::ofstream lc(*opts.long_csv);
    if (!lc) {
      err << "report: cannot write " << *opts.long_csv << "\n";
      return 1;
    }
    lc << "grid,algorithm,m1,m2,K,T,metric,mean,se,n\n";
    for (const GridAggregate& g : grids) {
      for (const char* m : kMetrics) {
        if (!g.has(m)) continue;
        const MeanSe s = g.stat(m);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", s.mean, s.se);
        lc << g.grid << ',' << g.algorithm << ',' << g.m1 << ',' << g.m2 << ',' << g.K << ',' << g.T << ',' << m
           << ',' << buf << ',' << g.values.at(m).size() << '\n';
      }
    }
    out << "wrote " << *opts.long_csv << "\n";
  }
  return 0;
}

}  // namespace bsl
