#pragma once

#include <string>
#include <vector>

#include "modalid/frf.hpp"
#include "modalid/hermitian_sequence.hpp"
#include "modalid/types.hpp"

namespace modalid {

/// Orders of one additive submodel B(s) / (s^l A(s)).
struct SubmodelOrder {
    int n = 0;  ///< denominator order
    int m = 0;  ///< numerator order
    int l = 0;  ///< integrators at the origin

    bool biproper() const { return m >= l + n; }
    bool operator==(const SubmodelOrder&) const = default;
};

class AdditiveStructure {
public:
    AdditiveStructure() = default;
    AdditiveStructure(Index n_outputs, Index n_inputs, std::vector<SubmodelOrder> submodels);

    Index n_outputs() const { return n_outputs_; }
    Index n_inputs() const { return n_inputs_; }
    Index vec_size() const { return n_outputs_ * n_inputs_; }
    std::size_t size() const { return submodels_.size(); }
    const SubmodelOrder& operator[](std::size_t i) const { return submodels_[i]; }
    const std::vector<SubmodelOrder>& submodels() const { return submodels_; }

    /// Flat parameter count: sum of n_i + (m_i + 1) * ny * nu.
    Index parameter_count() const { return offsets_.back(); }
    Index submodel_size(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
    Index offset(std::size_t i) const { return offsets_[i]; }
    /// Index of a_{i,p}, p = 1..n_i.
    Index denominator_index(std::size_t i, int p) const { return offsets_[i] + p - 1; }
    /// First index of vec(B_{i,p}), p = 0..m_i.
    Index numerator_index(std::size_t i, int p) const {
        return offsets_[i] + submodels_[i].n + Index(p) * vec_size();
    }
    /// Human-readable name for flat index j, e.g. "sub2.a1" or "sub0.B1(2,3)".
    std::string parameter_name(Index j) const;

    bool operator==(const AdditiveStructure& o) const {
        return n_outputs_ == o.n_outputs_ && n_inputs_ == o.n_inputs_ && submodels_ == o.submodels_;
    }

private:
    Index n_outputs_ = 0;
    Index n_inputs_ = 0;
    std::vector<SubmodelOrder> submodels_;
    std::vector<Index> offsets_{0};
};

struct SubmodelParameters {
    /// a_1 .. a_n of A(s) = 1 + a_1 s + ... + a_n s^n.
    VectorXd denominator;
    /// B_0 .. B_m, each ny x nu.
    std::vector<MatrixXd> numerators;
};

struct AdditiveParameters {
    AdditiveStructure structure;
    std::vector<SubmodelParameters> submodels;

    /// Zero numerators and denominators A(s) = 1.
    static AdditiveParameters zeros(const AdditiveStructure& structure);
    /// Per submodel: denominator coefficients, then vec(B_0) ... vec(B_m).
    static AdditiveParameters from_vector(const AdditiveStructure& structure, const VectorXd& beta);
    VectorXd to_vector() const;
};

/// A(s) = 1 + a_1 s + ... + a_n s^n.
Complex eval_denominator(const VectorXd& a, Complex s);

/// Roots of 1 + a_1 s + ... + a_n s^n; trailing zero coefficients lower the degree.
std::vector<Complex> denominator_roots(const VectorXd& a);

/// Coefficients a_1..a_n (constant term 1) of prod_j (1 - s / r_j), roots closed under conjugation.
VectorXd denominator_from_roots(const std::vector<Complex>& roots);

/// P_i(s) for a single submodel.
MatrixXcd eval_submodel(const AdditiveParameters& params, std::size_t i, Complex s);

/// P(s) = sum_i B_i(s) / (s^l_i A_i(s)).
MatrixXcd eval_additive(const AdditiveParameters& params, Complex s);

/// E(w_k) = G(w_k) - P(j w_k).
MatrixXcd residual_matrix(const FrfDataset& data, const AdditiveParameters& params, std::size_t k);

/// (1/2N) sum_k vec(E)^H W vec(E).
double cost(const FrfDataset& data, const AdditiveParameters& params, const HermitianSequence& weights);

/// Pairs of submodels whose denominator roots coincide within `tol` relative distance.
std::vector<std::string> common_root_conflicts(const AdditiveParameters& params, double tol = 1e-8);

/// Structured row set of a regressor-like matrix for one submodel: `dense`
/// holds the n_i denominator rows, `identity[p]` the scalar multiplying the
/// identity block of numerator coefficient p.
struct SubmodelRows {
    std::vector<VectorXcd> dense;
    std::vector<Complex> identity;
};
using RowSet = std::vector<SubmodelRows>;

struct PseudolinearRows {
    RowSet phi;
    /// vec(G~_i) / A_i per submodel.
    std::vector<VectorXcd> upsilon;
};

/// Regressor rows Phi and filtered residual-plant outputs of the pseudolinear form.
PseudolinearRows pseudolinear_rows(const AdditiveParameters& params, const MatrixXcd& g, Complex xi);

/// Rows of the instrument matrix Phi_hat = (d vec(P) / d beta^T)^H.
RowSet instrument_rows(const AdditiveParameters& params, Complex xi);

/// Dense dim(beta) x (ny*nu) matrix from a structured row set.
MatrixXcd to_dense(const RowSet& rows, const AdditiveStructure& structure);

struct RegressorPhi {
    MatrixXcd phi;      ///< dim(beta) x ny*nu
    MatrixXcd upsilon;  ///< K x ny*nu, row i = vec(G~_i)^T / A_i
};

RegressorPhi regressor_phi(const AdditiveParameters& params, const FrfDataset& data, std::size_t k);
MatrixXcd instrument_phi_hat(const AdditiveParameters& params, const FrfDataset& data, std::size_t k);

}  // namespace modalid
