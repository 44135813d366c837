#pragma once

#include <vector>

#include "modalid/types.hpp"

namespace modalid {

/// A sequence of Hermitian PSD matrices, one per frequency line, stored either
/// as real diagonals or as dense complex matrices. Used for FRF covariances and
/// for frequency weightings.
class HermitianSequence {
public:
    HermitianSequence() = default;

    static HermitianSequence identity(std::size_t n_freq, Index dim);
    static HermitianSequence from_diagonals(std::vector<VectorXd> diagonals);
    static HermitianSequence from_matrices(std::vector<MatrixXcd> matrices);

    std::size_t size() const { return diagonal_ ? diagonals_.size() : matrices_.size(); }
    Index dim() const { return dim_; }
    bool is_diagonal() const { return diagonal_; }

    /// Only valid when is_diagonal().
    const VectorXd& diagonal(std::size_t k) const { return diagonals_[k]; }
    /// Dense view of entry k (materialized for diagonal storage).
    MatrixXcd matrix(std::size_t k) const;
    /// W(k) x
    VectorXcd apply(std::size_t k, const VectorXcd& x) const;
    /// x^H W(k) x, real part.
    double quadratic_form(std::size_t k, const VectorXcd& x) const;

    HermitianSequence scaled(double factor) const;

    /// Smallest eigenvalue at frequency k.
    double min_eigenvalue(std::size_t k) const;

private:
    bool diagonal_ = true;
    Index dim_ = 0;
    std::vector<VectorXd> diagonals_;
    std::vector<MatrixXcd> matrices_;
};

}  // namespace modalid
