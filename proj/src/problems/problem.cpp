#include "bsl/problems.hpp"

#include <cmath>

namespace bsl {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::SCSC: return "SC-SC";
    case Regime::CC: return "C-C";
    case Regime::NCNC: return "NC-NC";
  }
  return "?";
}

Regime parse_regime(std::string_view s) {
  if (s == "SC-SC" || s == "scsc") return Regime::SCSC;
  if (s == "C-C" || s == "cc") return Regime::CC;
  if (s == "NC-NC" || s == "ncnc") return Regime::NCNC;
  throw InvalidArgument("unknown regime '" + std::string(s) + "'");
}

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

BilevelProblem::BilevelProblem(std::size_t d1, std::size_t d2, Regime regime, double region_radius)
    : d1_(d1), d2_(d2), regime_(regime), region_radius_(region_radius) {
  if (d1 == 0 || d2 == 0) throw InvalidArgument("BilevelProblem: dimensions must be >= 1");
  if (!(region_radius > 0.0) || !std::isfinite(region_radius)) {
    throw InvalidArgument("BilevelProblem: region radius must be positive and finite");
  }
}

double BilevelProblem::mean_outer_loss(const ParameterPair& w, const Dataset& d) const {
  double sum = 0.0;
  for (const Sample& s : d.samples()) sum += outer_loss(w, s);
  return sum / static_cast<double>(d.size());
}

std::optional<Vector> BilevelProblem::inner_solution(const Vector&) const { return std::nullopt; }
std::optional<ParameterPair> BilevelProblem::exact_minimizer() const { return std::nullopt; }
std::optional<double> BilevelProblem::exact_population_risk(const ParameterPair&) const {
  return std::nullopt;
}

bool BilevelProblem::in_region(const ParameterPair& w) const {
  return squared_norm(w) <= region_radius_ * region_radius_;
}

Dataset PopulationSpec::draw_validation(std::size_t m, RandomStream& stream) const {
  std::vector<Sample> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(sample_validation(stream));
  return Dataset(std::move(out));
}

Dataset PopulationSpec::draw_training(std::size_t m, RandomStream& stream) const {
  std::vector<Sample> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(sample_training(stream));
  return Dataset(std::move(out));
}

double empirical_outer_risk(const BilevelProblem& p, const Dataset& d_val, const ParameterPair& w) {
  if (d_val.empty()) throw InvalidArgument("empirical_outer_risk: empty dataset");
  return p.mean_outer_loss(w, d_val);
}

RiskEstimate population_outer_risk(const BilevelProblem& p, const PopulationSpec& spec,
                                   const ParameterPair& w, std::size_t n_mc, RandomStream& stream) {
  if (auto exact = p.exact_population_risk(w)) return {*exact, 0.0};
  if (n_mc < 2) throw InvalidArgument("population_outer_risk: n_mc must be >= 2");
  // Welford
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double v = p.outer_loss(w, spec.sample_validation(stream));
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(n_mc);
  const double var = m2 / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace bsl
