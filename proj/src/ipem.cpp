#include "modalid/ipem.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace modalid {

void IpemOptions::validate() const {
    if (max_iterations < 1) throw ConfigError("IPEM max_iterations must be >= 1");
    if (!(relative_tolerance > 0.0)) throw ConfigError("IPEM relative_tolerance must be positive");
    if (!(min_step > 0.0 && min_step <= 1.0)) throw ConfigError("IPEM min_step must lie in (0, 1]");
    if (!(rank_threshold > 0.0 && rank_threshold < 1.0)) throw ConfigError("IPEM rank_threshold must lie in (0, 1)");
}

std::string to_string(IpemStatus status) {
    switch (status) {
        case IpemStatus::converged: return "converged";
        case IpemStatus::max_iterations: return "max_iterations";
        case IpemStatus::stalled: return "stalled";
    }
    return "unknown";
}

RankOne rank_one_approx(const MatrixXcd& a) {
    if (a.size() == 0 || !(a.cwiseAbs().maxCoeff() > 0.0)) throw NumericalError("rank-one approximation of a zero matrix");
    Eigen::JacobiSVD<MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd s = svd.singularValues();
    return {s[0] * svd.matrixU().col(0), svd.matrixV().col(0).conjugate(), s};
}

namespace {

ResidueDiagnostic diagnose(const std::string& label, const VectorXd& s, Index kept) {
    const double total = s.squaredNorm();
    const double kept_mass = s.head(std::min(kept, s.size())).squaredNorm();
    return {label, s, total > 0.0 ? (total - kept_mass) / total : 0.0};
}

}  // namespace

SvdInitResult svd_init(const AdditiveParameters& beta_hat, DampingModel damping, std::size_t n_rbm) {
    const AdditiveStructure& st = beta_hat.structure;
    const Index ny = st.n_outputs(), nu = st.n_inputs();
    SvdInitResult out;
    out.rho.damping = damping;
    out.rho.n_outputs = ny;
    out.rho.n_inputs = nu;

    bool rigid_seen = false;
    std::size_t flex_count = 0;
    for (std::size_t i = 0; i < st.size(); ++i) {
        const SubmodelOrder& o = st[i];
        const auto& sub = beta_hat.submodels[i];
        if (o.l == 2 && o.n == 0 && o.m == 0) {
            if (rigid_seen) throw ConfigError("more than one rigid-body submodel");
            rigid_seen = true;
            if (n_rbm == 0) throw ConfigError("estimate has a rigid-body submodel but n_rbm = 0");
            Eigen::JacobiSVD<MatrixXd> svd(sub.numerators[0], Eigen::ComputeThinU | Eigen::ComputeThinV);
            const VectorXd s = svd.singularValues();
            if (n_rbm > std::size_t(s.size()))
                throw ConfigError("n_rbm = " + std::to_string(n_rbm) + " exceeds min(ny, nu)");
            for (std::size_t r = 0; r < n_rbm; ++r) {
                if (!(s[Index(r)] > 1e-10 * s[0]))
                    out.warnings.push_back("rigid-body residue has numerical rank below n_rbm; mode " +
                                           std::to_string(r) + " filled from a weak singular direction");
                out.rho.rigid.push_back({s[Index(r)] * svd.matrixU().col(Index(r)), svd.matrixV().col(Index(r))});
            }
            out.diagnostics.push_back(diagnose("rigid", s, Index(n_rbm)));
        } else if (o.l == 0 && o.n == 2 && o.m <= 1) {
            const double a1n = sub.denominator[0], a2n = sub.denominator[1];
            const std::string name = "flexible mode " + std::to_string(flex_count);
            if (!(a2n > 0.0)) throw NumericalError(name + ": denominator is not an underdamped stable quadratic");
            // Back to s^2 + a1 s + a2.
            const double a2 = 1.0 / a2n, a1 = a1n / a2n;
            const double disc = 4.0 * a2 - a1 * a1;
            if (!(disc > 0.0)) throw NumericalError(name + ": denominator has real roots");
            if (!(a1 > 0.0)) throw NumericalError(name + ": denominator is not stable");
            const Complex lambda(-0.5 * a1, 0.5 * std::sqrt(disc));
            const MatrixXd n0 = sub.numerators[0] * a2;
            const MatrixXd n1 = o.m == 1 ? MatrixXd(sub.numerators[1] * a2) : MatrixXd::Zero(ny, nu);
            if (damping == DampingModel::general) {
                const MatrixXcd l = (n0.cast<Complex>() + lambda * n1.cast<Complex>()) / (lambda - std::conj(lambda));
                const RankOne r1 = rank_one_approx(l);
                out.rho.general.push_back({lambda, r1.u, r1.v});
                out.diagnostics.push_back(diagnose("flex" + std::to_string(flex_count), r1.singular_values, 1));
            } else {
                const double omega = std::sqrt(a2);
                const RankOne r1 = rank_one_approx(n0.cast<Complex>());
                out.rho.proportional.push_back({omega, a1 / (2.0 * omega), r1.u.real(), r1.v.real()});
                out.diagnostics.push_back(diagnose("flex" + std::to_string(flex_count), r1.singular_values, 1));
            }
            ++flex_count;
        } else if (o.l == 0 && o.n == 0 && o.m == 0) {
            if (out.rho.dc_gain) throw ConfigError("more than one constant submodel");
            out.rho.dc_gain = sub.numerators[0];
            Eigen::JacobiSVD<MatrixXd> svd(sub.numerators[0]);
            out.diagnostics.push_back(diagnose("dc", svd.singularValues(), svd.singularValues().size()));
        } else {
            throw ConfigError("submodel " + std::to_string(i) + " has no modal counterpart");
        }
    }
    if (n_rbm > 0 && !rigid_seen) throw ConfigError("n_rbm > 0 requires a rigid-body submodel");
    out.rho = normalize_gauge(out.rho);
    out.rho.validate();
    return out;
}

ParameterWeighting::ParameterWeighting(const CovarianceEstimate& sigma) {
    if (sigma.information.size() > 0) {
        const MatrixXd& info = sigma.information;
        const Index n = info.rows();
        VectorXd d(n);
        for (Index a = 0; a < n; ++a) {
            if (!(info(a, a) > 0.0)) throw NumericalError("information matrix has a non-positive diagonal");
            d[a] = 1.0 / std::sqrt(info(a, a));
        }
        const MatrixXd s = d.asDiagonal() * info * d.asDiagonal();
        // Sigma^-1 = 2 * information.
        Eigen::LLT<MatrixXd> llt(s);
        if (llt.info() == Eigen::Success) {
            factor_ = std::sqrt(2.0) * MatrixXd(llt.matrixU()) * d.cwiseInverse().asDiagonal();
            upper_ = true;
        } else {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
            factor_ = std::sqrt(2.0) * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      es.eigenvectors().transpose() * d.cwiseInverse().asDiagonal();
        }
        return;
    }
    const MatrixXd& m = sigma.matrix;
    const Index n = m.rows();
    VectorXd d(n);
    for (Index a = 0; a < n; ++a) {
        if (!(m(a, a) > 0.0)) throw NumericalError("parameter covariance has a non-positive diagonal");
        d[a] = std::sqrt(m(a, a));
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(d.cwiseInverse().asDiagonal() * m * d.cwiseInverse().asDiagonal());
    const VectorXd ev = es.eigenvalues();
    VectorXd inv_sqrt(n);
    for (Index a = 0; a < n; ++a) inv_sqrt[a] = ev[a] > 1e-15 * ev.maxCoeff() ? 1.0 / std::sqrt(ev[a]) : 0.0;
    factor_ = inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * d.cwiseInverse().asDiagonal();
}

VectorXd ParameterWeighting::apply(const VectorXd& x) const {
    if (upper_) return factor_.triangularView<Eigen::Upper>() * x;
    return factor_ * x;
}

double ipem_objective(const VectorXd& beta_hat, const ParameterWeighting& weighting, const ModalParameters& rho) {
    return weighting.norm2(beta_hat - map_f(rho).to_vector());
}

namespace {

bool admissible(const ModalParameters& rho) {
    try {
        rho.validate();
    } catch (const Error&) {
        return false;
    }
    return rho.to_vector().allFinite();
}

// A = L_w J using the block structure of J and, when available, the triangular L_w.
MatrixXd whitened_jacobian(const ParameterWeighting& w, const MatrixXd& j, const std::vector<JacobianBlock>& blocks) {
    const MatrixXd& f = w.factor();
    MatrixXd a = MatrixXd::Zero(f.rows(), j.cols());
    for (const auto& b : blocks) {
        const Index rows = w.upper_triangular() ? b.row_offset + b.rows : f.rows();
        a.block(0, b.col_offset, rows, b.cols).noalias() =
            f.block(0, b.row_offset, rows, b.rows) * j.block(b.row_offset, b.col_offset, b.rows, b.cols);
    }
    return a;
}

// Minimum-norm solution of min |r - A x| after column equilibration, with
// singular values below threshold * sigma_max dropped.
VectorXd min_norm_step(const MatrixXd& a, const VectorXd& r, double threshold) {
    VectorXd scale(a.cols());
    for (Index c = 0; c < a.cols(); ++c) {
        const double n = a.col(c).norm();
        scale[c] = n > 0.0 ? 1.0 / n : 0.0;
    }
    MatrixXd as = a * scale.asDiagonal();
    VectorXd rhs = r;
    if (as.rows() > as.cols()) {
        // Compress to the triangular factor first.
        Eigen::HouseholderQR<MatrixXd> qr(as);
        rhs = (qr.householderQ().transpose() * r).head(as.cols());
        as = qr.matrixQR().topRows(as.cols()).triangularView<Eigen::Upper>();
    }
    Eigen::BDCSVD<MatrixXd> svd(as, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd s = svd.singularValues();
    const double cut = threshold * (s.size() > 0 ? s[0] : 0.0);
    const VectorXd ut_r = svd.matrixU().transpose() * rhs;
    VectorXd coeff = VectorXd::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i)
        if (s[i] > cut) coeff[i] = ut_r[i] / s[i];
    return scale.asDiagonal() * (svd.matrixV() * coeff);
}

}  // namespace

IpemResult gauss_newton(const VectorXd& beta_hat, const CovarianceEstimate& sigma, const ModalParameters& rho0,
                        const IpemOptions& opts, const IpemObserver& observer) {
    opts.validate();
    rho0.validate();
    const ModalLayout lay = rho0.layout();
    const AdditiveStructure st = modal_structure(lay);
    if (beta_hat.size() != st.parameter_count())
        throw ConfigError("estimate has " + std::to_string(beta_hat.size()) + " parameters, modal map produces " +
                          std::to_string(st.parameter_count()));
    const ParameterWeighting w(sigma);
    if (w.dim() != beta_hat.size()) throw ConfigError("parameter covariance does not match the estimate");
    const auto blocks = jacobian_blocks(lay);

    IpemResult result{normalize_gauge(rho0), {}, IpemStatus::max_iterations, sigma.relative_only};
    double objective = ipem_objective(beta_hat, w, result.rho);
    if (!std::isfinite(objective)) throw NumericalError("non-finite IPEM objective at the initial estimate");
    result.trace.push_back({0, objective, 0.0, 0.0});
    if (observer) observer(0, result.rho);
    if (objective == 0.0) {
        result.status = IpemStatus::converged;
        return result;
    }

    for (int it = 1; it <= opts.max_iterations; ++it) {
        const VectorXd rho = result.rho.to_vector();
        const VectorXd r = w.apply(beta_hat - map_f(result.rho).to_vector());
        const MatrixXd a = whitened_jacobian(w, jacobian_f(result.rho), blocks);
        const VectorXd delta = min_norm_step(a, r, opts.rank_threshold);
        if (!delta.allFinite()) throw NumericalError("non-finite Gauss-Newton step");

        double alpha = 1.0;
        bool accepted = false;
        ModalParameters trial;
        double trial_obj = 0.0;
        for (; alpha >= opts.min_step; alpha *= 0.5) {
            trial = ModalParameters::from_vector(lay, rho + alpha * delta);
            if (!admissible(trial)) continue;
            try {
                trial = normalize_gauge(trial);
            } catch (const Error&) {
                continue;
            }
            trial_obj = ipem_objective(beta_hat, w, trial);
            if (std::isfinite(trial_obj) && trial_obj < objective) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.status = IpemStatus::stalled;
            break;
        }
        const VectorXd next = trial.to_vector();
        const double change = (next - rho).norm() / std::max(rho.norm(), 1e-300);
        result.rho = trial;
        objective = trial_obj;
        result.trace.push_back({it, objective, alpha, change});
        if (observer) observer(it, result.rho);
        if (change < opts.relative_tolerance || objective == 0.0) {
            result.status = IpemStatus::converged;
            break;
        }
    }
    return result;
}

}  // namespace modalid
