#include "modalid/realization.hpp"

#include <cmath>
#include <limits>

namespace modalid {

void StateSpace::validate() const {
    const Index n = a.rows();
    if (a.cols() != n || b.rows() != n || c.cols() != n || d.rows() != c.rows() || d.cols() != b.cols())
        throw ConfigError("state-space matrices have inconsistent dimensions");
    if (!a.allFinite() || !b.allFinite() || !c.allFinite() || !d.allFinite())
        throw ConfigError("state-space matrices contain non-finite entries");
}

namespace {

MatrixXd checked_real(const MatrixXcd& m, std::size_t mode, const char* what) {
    const double scale = m.cwiseAbs().maxCoeff();
    if (m.imag().cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw NumericalError(std::string(what) + " of flexible mode " + std::to_string(mode) +
                             " has a non-negligible imaginary part");
    return m.real();
}

}  // namespace

StateSpace realize(const ModalParameters& rho) {
    rho.validate();
    const Index ny = rho.n_outputs, nu = rho.n_inputs;
    const Index n = 2 * Index(rho.rigid.size() + rho.n_flex());
    StateSpace ss{MatrixXd::Zero(n, n), MatrixXd::Zero(n, nu), MatrixXd::Zero(ny, n),
                  rho.dc_gain ? *rho.dc_gain : MatrixXd::Zero(ny, nu)};
    Index o = 0;
    for (const auto& m : rho.rigid) {
        ss.a(o, o + 1) = 1.0;
        ss.b.row(o + 1) = m.right.transpose();
        ss.c.col(o) = m.left;
        o += 2;
    }
    for (std::size_t i = 0; i < rho.n_flex(); ++i, o += 2) {
        const Complex lambda = rho.eigenvalue(i);
        ss.a(o, o + 1) = 1.0;
        ss.a(o + 1, o) = -std::norm(lambda);
        ss.a(o + 1, o + 1) = 2.0 * lambda.real();
        if (rho.damping == DampingModel::proportional) {
            ss.b.row(o + 1) = rho.proportional[i].right.transpose();
            ss.c.col(o) = rho.proportional[i].left;
            continue;
        }
        const auto& m = rho.general[i];
        // Complex pair (lambda, conj(lambda)) with x_c = T x_r.
        Eigen::Matrix2cd t;
        t << std::conj(lambda), -1.0, lambda, -1.0;
        MatrixXcd bc(2, nu), cc(ny, 2);
        bc.row(0) = m.right.transpose();
        bc.row(1) = m.right.conjugate().transpose();
        cc.col(0) = m.left;
        cc.col(1) = m.left.conjugate();
        ss.b.middleRows(o, 2) = checked_real(t.partialPivLu().solve(bc), i, "input matrix");
        ss.c.middleCols(o, 2) = checked_real(cc * t, i, "output matrix");
    }
    return ss;
}

MatrixXcd eval_ss(const StateSpace& ss, Complex s) {
    ss.validate();
    if (ss.n_states() == 0) return ss.d.cast<Complex>();
    const MatrixXcd m = s * MatrixXcd::Identity(ss.n_states(), ss.n_states()) - ss.a.cast<Complex>();
    Eigen::PartialPivLU<MatrixXcd> lu(m);
    if (!(lu.rcond() > std::numeric_limits<double>::epsilon()))
        throw NumericalError("sI - A is singular at the evaluation point");
    return ss.c.cast<Complex>() * lu.solve(ss.b.cast<Complex>()) + ss.d.cast<Complex>();
}

}  // namespace modalid
