#pragma once

#include <functional>
#include <string>
#include <vector>

#include "modalid/additive_model.hpp"
#include "modalid/modal_model.hpp"
#include "modalid/riv.hpp"

namespace modalid {

struct IpemOptions {
    int max_iterations = 40;
    double relative_tolerance = 1e-9;
    /// Backtracking halves the step from 1 until it drops below this.
    double min_step = 0x1p-20;
    /// Singular values below rank_threshold * sigma_max are dropped in the step solve.
    double rank_threshold = 1e-10;

    void validate() const;
};

/// A ~ u v^T with |A - u v^T|_F minimal over rank-one matrices.
struct RankOne {
    VectorXcd u;
    VectorXcd v;
    VectorXd singular_values;
};

RankOne rank_one_approx(const MatrixXcd& a);

/// Singular values of an estimated residue and the share of squared mass that
/// the modal form cannot represent.
struct ResidueDiagnostic {
    std::string label;
    VectorXd singular_values;
    double discarded_fraction = 0.0;
};

struct SvdInitResult {
    ModalParameters rho;
    std::vector<ResidueDiagnostic> diagnostics;
    std::vector<std::string> warnings;
};

/// Modal initialization from an additive estimate whose submodels follow
/// modal_structure(): rigid-body (l = 2), second-order flexible, constant DC.
SvdInitResult svd_init(const AdditiveParameters& beta_hat, DampingModel damping, std::size_t n_rbm);

/// Whitening factor L_w with L_w^T L_w equal to the inverse parameter covariance.
class ParameterWeighting {
public:
    explicit ParameterWeighting(const CovarianceEstimate& sigma);

    Index dim() const { return factor_.rows(); }
    bool upper_triangular() const { return upper_; }
    const MatrixXd& factor() const { return factor_; }

    VectorXd apply(const VectorXd& x) const;
    /// e^T Sigma^-1 e.
    double norm2(const VectorXd& e) const { return apply(e).squaredNorm(); }

private:
    MatrixXd factor_;
    bool upper_ = false;
};

/// (beta_hat - f(rho))^T Sigma^-1 (beta_hat - f(rho)).
double ipem_objective(const VectorXd& beta_hat, const ParameterWeighting& weighting, const ModalParameters& rho);

enum class IpemStatus { converged, max_iterations, stalled };
std::string to_string(IpemStatus status);

struct IpemTraceRow {
    int iter = 0;
    double objective = 0.0;
    double step_alpha = 0.0;
    double param_rel_change = 0.0;
};

struct IpemResult {
    ModalParameters rho;
    std::vector<IpemTraceRow> trace;
    IpemStatus status = IpemStatus::max_iterations;
    /// The covariance was built from an identity FRF covariance.
    bool relative_only = false;
};

/// Called with the iteration number and iterate, starting with the initial one.
using IpemObserver = std::function<void(int, const ModalParameters&)>;

IpemResult gauss_newton(const VectorXd& beta_hat, const CovarianceEstimate& sigma, const ModalParameters& rho0,
                        const IpemOptions& opts = {}, const IpemObserver& observer = {});

}  // namespace modalid
