#include "bsl/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <numbers>
#include <unordered_set>

namespace bsl {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

ParameterPair::ParameterPair(Vector x_, Vector y_) : x(std::move(x_)), y(std::move(y_)) {}

ParameterPair ParameterPair::zeros(std::size_t d1, std::size_t d2) {
  return {Vector::Zero(static_cast<Eigen::Index>(d1)), Vector::Zero(static_cast<Eigen::Index>(d2))};
}

bool ParameterPair::all_finite() const { return x.allFinite() && y.allFinite(); }

bool ParameterPair::operator==(const ParameterPair& other) const {
  return x.size() == other.x.size() && y.size() == other.y.size() && x == other.x && y == other.y;
}

double joint_norm(const ParameterPair& a, const ParameterPair& b) {
  if (a.x.size() != b.x.size() || a.y.size() != b.y.size()) {
    throw InvalidArgument("joint_norm: dimension mismatch");
  }
  return std::sqrt((a.x - b.x).squaredNorm() + (a.y - b.y).squaredNorm());
}

double squared_norm(const ParameterPair& p) { return p.x.squaredNorm() + p.y.squaredNorm(); }

bool Sample::operator==(const Sample& other) const {
  return label == other.label && tag == other.tag && v.size() == other.v.size() && v == other.v;
}

Dataset::Dataset(std::vector<Sample> samples)
    : samples_(std::make_shared<const std::vector<Sample>>(std::move(samples))) {}

const Sample& Dataset::at(std::size_t i) const {
  if (i >= size()) throw InvalidArgument("Dataset::at: index out of range");
  return (*samples_)[i];
}

const std::vector<Sample>& Dataset::samples() const {
  static const std::vector<Sample> kEmpty;
  return samples_ ? *samples_ : kEmpty;
}

bool Dataset::operator==(const Dataset& other) const { return samples() == other.samples(); }

Dataset dataset_replace(const Dataset& d, std::size_t i, const Sample& s) {
  if (i >= d.size()) throw InvalidArgument("dataset_replace: index out of range");
  std::vector<Sample> copy = d.samples();
  copy[i] = s;
  return Dataset(std::move(copy));
}

// ---------------------------------------------------------------------------

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed), key_(splitmix64(seed ^ 0x5bd1e995ULL)) {}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t key, int) : seed_(seed), key_(key) {}

std::uint64_t RandomStream::next_u64() {
  // Two rounds so that streams with related keys do not share outputs.
  return splitmix64(splitmix64(counter_++) ^ key_);
}

double RandomStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t RandomStream::index(std::size_t n) {
  if (n == 0) throw InvalidArgument("RandomStream::index: empty range");
  const std::uint64_t bound = n;
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r > limit);
  return static_cast<std::size_t>(r % bound);
}

double RandomStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_normal_ = true;
  return r * std::cos(theta);
}

Vector RandomStream::normal_vector(std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal();
  return v;
}

Vector RandomStream::uniform_ball(std::size_t n, double radius) {
  Vector v = normal_vector(n);
  const double norm = v.norm();
  if (norm == 0.0) return v;
  const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(n));
  return v * (r / norm);
}

std::vector<std::size_t> RandomStream::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw InvalidArgument("sample_without_replacement: k > n");
  std::vector<std::size_t> out;
  out.reserve(k);
  if (2 * k >= n) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + index(n - i);
      std::swap(all[i], all[j]);
      out.push_back(all[i]);
    }
    return out;
  }
  std::unordered_set<std::size_t> seen;
  while (out.size() < k) {
    const std::size_t j = index(n);
    if (seen.insert(j).second) out.push_back(j);
  }
  return out;
}

RandomStream RandomStream::fork(std::string_view label) const {
  return RandomStream(seed_, splitmix64(key_ ^ splitmix64(fnv1a(label))), 0);
}

RandomStream RandomStream::fork(std::uint64_t id) const {
  return RandomStream(seed_, splitmix64(key_ + splitmix64(id ^ kGolden) + 0x632BE59BD9B4E019ULL), 0);
}

RandomStream RandomStream::fork(std::string_view label, std::uint64_t id) const {
  return fork(label).fork(id);
}

// ---------------------------------------------------------------------------

double RegularityConstants::ell() const { return std::max(ell_f, ell_g); }

void RegularityConstants::validate() const {
  const double all[] = {L_f, L_g, ell_f, ell_g, mu_f, mu_g, alpha, tau, grad_at_zero_sup};
  for (double v : all) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("RegularityConstants: constants must be finite and nonnegative");
    }
  }
  if (alpha > 1.0) throw InvalidArgument("RegularityConstants: alpha must lie in [0, 1]");
  if (mu_f > 0.0 && ell_f > 0.0 && mu_f > ell_f * (1.0 + 1e-12)) {
    throw InvalidArgument("RegularityConstants: mu_f exceeds ell_f");
  }
  if (mu_g > 0.0 && ell_g > 0.0 && mu_g > ell_g * (1.0 + 1e-12)) {
    throw InvalidArgument("RegularityConstants: mu_g exceeds ell_g");
  }
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  // Indices claimed below the lowest failure still run, so the rethrown
  // error does not depend on scheduling.
  std::atomic<std::size_t> failed_index{n};
  std::mutex mu;
  std::exception_ptr error;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || i > failed_index.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index.load()) {
          failed_index.store(i);
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min(workers, n);
  pool.reserve(count - 1);
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bsl
