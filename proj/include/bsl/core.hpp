#pragma once

// Shared value types: parameter pairs, datasets, counter-based random
// streams, regularity constants and trajectory records.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when an argument violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Joint iterate (x, y): outer parameter x in R^d1, inner parameter y in R^d2.
struct ParameterPair {
  Vector x;
  Vector y;

  ParameterPair() = default;
  ParameterPair(Vector x_, Vector y_);

  static ParameterPair zeros(std::size_t d1, std::size_t d2);

  std::size_t d1() const { return static_cast<std::size_t>(x.size()); }
  std::size_t d2() const { return static_cast<std::size_t>(y.size()); }
  bool all_finite() const;
  bool operator==(const ParameterPair& other) const;
};

/// sqrt(|a.x - b.x|^2 + |a.y - b.y|^2). Throws on dimension mismatch.
double joint_norm(const ParameterPair& a, const ParameterPair& b);

/// Squared Euclidean norm of the concatenation (x, y).
double squared_norm(const ParameterPair& p);

/// One sample record. The payload is interpreted only by the problem that
/// generated it: a target vector, a feature vector with a label, etc.
struct Sample {
  Vector v;
  double label = 0.0;
  std::size_t tag = 0;

  bool operator==(const Sample& other) const;
};

/// Immutable indexed sample set with replace-one support.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Sample> samples);

  std::size_t size() const { return samples_ ? samples_->size() : 0; }
  bool empty() const { return size() == 0; }
  const Sample& operator[](std::size_t i) const { return (*samples_)[i]; }
  const Sample& at(std::size_t i) const;
  const std::vector<Sample>& samples() const;

  bool operator==(const Dataset& other) const;

 private:
  std::shared_ptr<const std::vector<Sample>> samples_;
};

/// Copy of `d` with position `i` replaced by `s`. `d` is unchanged.
Dataset dataset_replace(const Dataset& d, std::size_t i, const Sample& s);

/// Counter-based pseudo random stream. Output k of a stream is a pure
/// function of (key, k); fork() derives an independent key from a label.
/// Satisfies UniformRandomBitGenerator so it can drive <random>
/// distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). Unbiased (rejection).
  std::size_t index(std::size_t n);
  double normal();
  /// Standard normal vector of length n.
  Vector normal_vector(std::size_t n);
  /// Uniform point in the Euclidean ball of the given radius.
  Vector uniform_ball(std::size_t n, double radius);
  /// `k` distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  RandomStream fork(std::string_view label) const;
  RandomStream fork(std::uint64_t id) const;
  RandomStream fork(std::string_view label, std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  RandomStream(std::uint64_t seed, std::uint64_t key, int);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Declared constants of the outer loss f and inner loss g. Lipschitz and
/// smoothness constants are joint in (x, y); mu_g is strong convexity of
/// g(x, .) in y. Zero means "absent".
struct RegularityConstants {
  double L_f = 0.0;
  double L_g = 0.0;
  double ell_f = 0.0;
  double ell_g = 0.0;
  double mu_f = 0.0;
  double mu_g = 0.0;
  double alpha = 1.0;
  double tau = 0.0;
  double grad_at_zero_sup = 0.0;

  /// max(ell_f, ell_g)
  double ell() const;
  /// Throws InvalidArgument when any documented invariant fails.
  void validate() const;
};

/// Snapshot taken at the start of outer iteration k (k == K is the output).
struct Checkpoint {
  std::size_t k = 0;
  /// Output the algorithm would return if stopped after k outer iterations.
  ParameterPair iterate;
  /// Inner state the k-th outer loop starts from (after any reset).
  Vector inner_start;
};

struct TrajectoryRecord {
  std::vector<Checkpoint> iterates;
  /// Empirical validation risk at the point each outer gradient is taken.
  std::vector<double> empirical_risk_path;
  ParameterPair final;
};

/// Runs fn(0..n-1) on up to `workers` threads. Each index runs exactly once;
/// the first exception (lowest index) is rethrown after all work stops.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace bsl
