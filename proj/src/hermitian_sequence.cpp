#include "modalid/hermitian_sequence.hpp"

#include <Eigen/Eigenvalues>

namespace modalid {

HermitianSequence HermitianSequence::identity(std::size_t n_freq, Index dim) {
    return from_diagonals(std::vector<VectorXd>(n_freq, VectorXd::Ones(dim)));
}

HermitianSequence HermitianSequence::from_diagonals(std::vector<VectorXd> diagonals) {
    HermitianSequence seq;
    seq.diagonal_ = true;
    seq.dim_ = diagonals.empty() ? 0 : diagonals.front().size();
    for (const auto& d : diagonals)
        if (d.size() != seq.dim_) throw ConfigError("inconsistent diagonal dimensions in matrix sequence");
    seq.diagonals_ = std::move(diagonals);
    return seq;
}

HermitianSequence HermitianSequence::from_matrices(std::vector<MatrixXcd> matrices) {
    HermitianSequence seq;
    seq.diagonal_ = false;
    seq.dim_ = matrices.empty() ? 0 : matrices.front().rows();
    for (const auto& m : matrices)
        if (m.rows() != seq.dim_ || m.cols() != seq.dim_)
            throw ConfigError("inconsistent matrix dimensions in matrix sequence");
    seq.matrices_ = std::move(matrices);
    return seq;
}

MatrixXcd HermitianSequence::matrix(std::size_t k) const {
    if (diagonal_) return diagonals_[k].cast<Complex>().asDiagonal();
    return matrices_[k];
}

VectorXcd HermitianSequence::apply(std::size_t k, const VectorXcd& x) const {
    if (diagonal_) return diagonals_[k].cast<Complex>().cwiseProduct(x);
    return matrices_[k] * x;
}

double HermitianSequence::quadratic_form(std::size_t k, const VectorXcd& x) const {
    if (diagonal_) return (diagonals_[k].array() * x.array().abs2()).sum();
    return x.dot(matrices_[k] * x).real();
}

HermitianSequence HermitianSequence::scaled(double factor) const {
    HermitianSequence out = *this;
    for (auto& d : out.diagonals_) d *= factor;
    for (auto& m : out.matrices_) m *= factor;
    return out;
}

double HermitianSequence::min_eigenvalue(std::size_t k) const {
    if (diagonal_) return diagonals_[k].size() ? diagonals_[k].minCoeff() : 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(matrices_[k], Eigen::EigenvaluesOnly);
    return es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
}

}  // namespace modalid
