#pragma once

#include "bsl/core.hpp"

namespace bsl::detail {

/// Haar-distributed orthogonal n x n matrix.
Matrix random_orthogonal(std::size_t n, RandomStream& stream);

/// Gaussian rows x cols matrix rescaled to the given spectral norm.
Matrix random_with_spectral_norm(std::size_t rows, std::size_t cols, double norm, RandomStream& stream);

/// Symmetric matrix with eigenvalues evenly spaced in [lo, hi] and random
/// eigenvectors; exactly lo * I when lo == hi.
Matrix random_spd(std::size_t n, double lo, double hi, RandomStream& stream);

/// Random vector with the given Euclidean norm (zero vector if norm == 0).
Vector random_direction(std::size_t n, double norm, RandomStream& stream);

/// Vector with entries uniform in [-half, half].
Vector uniform_box(std::size_t n, double half, RandomStream& stream);

}  // namespace bsl::detail
