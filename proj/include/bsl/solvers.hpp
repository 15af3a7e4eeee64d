#pragma once

// First-order stochastic bilevel solvers: single-timescale SGD (SSGD),
// two-timescale SGD (TSGD) and the re-initializing unrolled variant (UD).
//
// All three perform exactly K outer updates. Sample indices are drawn from
// two substreams of the solver stream, one for the training set and one for
// the validation set, so two runs given the same stream consume identical
// index sequences whatever their datasets contain.

#include "bsl/core.hpp"
#include "bsl/problems.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bsl {

enum class Algorithm { SSGD, TSGD, UD };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

/// Order of the two SSGD updates within one iteration.
enum class UpdateOrder {
  /// Both updates read (x_k, y_k).
  Simultaneous,
  /// The x update reads the freshly updated y_{k+1}.
  GaussSeidel,
};

struct StepWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// Admissible common step size for SSGD on an SC-SC problem:
///   [(2S - sqrt(D)) / (2L), (2S + sqrt(D)) / (2L)]
/// with S = mu_f + mu_g, L = ell_f^2 + ell_g^2 and D = 4 S^2 - 2 L.
/// Returns nullopt when D < 0. Throws InvalidArgument on nonpositive input.
std::optional<StepWindow> scsc_stepsize_window(double mu_f, double mu_g, double ell_f, double ell_g);

struct ScheduleContext {
  RegularityConstants constants;
  std::size_t K = 1;
  std::size_t T = 1;
};

struct StepSchedule {
  enum class Kind {
    Constant,      // eta
    OuterInverse,  // c / (ell * (k + 1)), k the 0-based outer index
    InnerInverse,  // c / (ell_g * (t + 1)), t the 0-based inner index
    LogOverK,      // c ln(K) / (sqrt(2) K ell)
    LogOverT,      // c ln(T) / (sqrt(1 + T^2) K ell)
    ScscWindow,    // fraction * upper end of the SC-SC window
  };

  Kind kind = Kind::Constant;
  double eta = 0.01;
  double c = 1.0;
  double fraction = 0.9;

  static StepSchedule constant(double eta);
  static StepSchedule scsc_window(double fraction = 0.9);

  /// Step size for the given 0-based iteration index. Always positive and
  /// finite; throws InvalidArgument otherwise.
  double step(std::size_t index, const ScheduleContext& ctx) const;
};

std::string_view to_string(StepSchedule::Kind k);
StepSchedule::Kind parse_schedule_kind(std::string_view s);

struct SolverConfig {
  Algorithm algorithm = Algorithm::SSGD;
  std::size_t K = 1;
  /// Inner iterations per outer iteration (TSGD, UD).
  std::size_t T = 1;
  StepSchedule schedule_x;
  StepSchedule schedule_y;
  ParameterPair init;
  std::uint64_t seed = 0;
  /// 0 records only the final iterate.
  std::size_t checkpoint_every = 0;
  /// Samples averaged per stochastic gradient.
  std::size_t batch_size = 1;
  UpdateOrder update_order = UpdateOrder::Simultaneous;
  /// Use the full dataset gradient every step (deterministic).
  bool full_batch = false;
  /// Record the empirical validation risk each outer iteration.
  bool record_risk = true;
  /// Fail when an iterate leaves the problem's operating region.
  bool enforce_region = true;
};

/// Raised when an iterate becomes non-finite or leaves the operating region.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " at outer iteration " + std::to_string(iteration)), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

TrajectoryRecord run_ssgd(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                          const SolverConfig& cfg, const RandomStream& stream);
TrajectoryRecord run_tsgd(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                          const SolverConfig& cfg, const RandomStream& stream);
TrajectoryRecord run_ud(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                        const SolverConfig& cfg, const RandomStream& stream);

/// Dispatches on cfg.algorithm.
TrajectoryRecord run_solver(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                            const SolverConfig& cfg, const RandomStream& stream);

/// Default initial point (zeros) sized for the problem.
ParameterPair default_init(const BilevelProblem& p);

}  // namespace bsl
