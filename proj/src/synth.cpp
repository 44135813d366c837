#include "modalid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace modalid {

namespace {

double symmetry_error(const MatrixXd& x) { return (x - x.transpose()).cwiseAbs().maxCoeff(); }

VectorXd unit_real(std::mt19937_64& rng, Index n) {
    std::normal_distribution<double> nd;
    VectorXd v(n);
    do {
        for (Index i = 0; i < n; ++i) v[i] = nd(rng);
    } while (!(v.norm() > 1e-8));
    return v / v.norm();
}

VectorXcd unit_complex(std::mt19937_64& rng, Index n) {
    std::normal_distribution<double> nd;
    VectorXcd v(n);
    do {
        for (Index i = 0; i < n; ++i) {
            const double re = nd(rng);
            v[i] = Complex(re, nd(rng));
        }
    } while (!(v.norm() > 1e-8));
    return v / v.norm();
}

}  // namespace

void MechanicalSystem::validate() const {
    const Index n = m.rows();
    if (n < 1 || m.cols() != n || d.rows() != n || d.cols() != n || k.rows() != n || k.cols() != n ||
        f.rows() != n || q.cols() != n)
        throw ConfigError("mechanical system matrices have inconsistent dimensions");
    if (f.cols() < 1 || q.rows() < 1) throw ConfigError("mechanical system needs at least one input and output");
    const double ms = m.cwiseAbs().maxCoeff(), ks = k.cwiseAbs().maxCoeff();
    if (symmetry_error(m) > 1e-12 * ms) throw ConfigError("mass matrix is not symmetric");
    if (Eigen::LLT<MatrixXd>(m).info() != Eigen::Success) throw ConfigError("mass matrix is not positive definite");
    if (symmetry_error(k) > 1e-12 * std::max(ks, 1e-300)) throw ConfigError("stiffness matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(k, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * ks) throw ConfigError("stiffness matrix is not positive semi-definite");
}

MatrixXcd MechanicalSystem::transfer(Complex s) const {
    const MatrixXcd z = m.cast<Complex>() * s * s + d.cast<Complex>() * s + k.cast<Complex>();
    return q.cast<Complex>() * z.partialPivLu().solve(f.cast<Complex>());
}

void SynthSpec::validate() const {
    if (n_outputs < 1 || n_inputs < 1) throw ConfigError("synth spec needs n_outputs, n_inputs >= 1");
    if (n_rbm > std::size_t(std::min(n_outputs, n_inputs)))
        throw ConfigError("n_rbm cannot exceed min(n_outputs, n_inputs)");
    if (!(f_lo_hz > 0.0 && f_hi_hz > f_lo_hz)) throw ConfigError("synth band must satisfy 0 < f_lo < f_hi");
    if (!(zeta_lo > 0.0 && zeta_hi >= zeta_lo && zeta_hi < 1.0))
        throw ConfigError("synth damping range must lie inside (0, 1)");
    if (!(gamma >= 0.0)) throw ConfigError("noise level must be non-negative");
    if (peak_height && !(*peak_height > 0.0)) throw ConfigError("peak_height must be positive");
}

ModalParameters random_modal_system(const SynthSpec& spec) {
    spec.validate();
    const double gap = std::log(1.05);
    const double span = std::log(spec.f_hi_hz / spec.f_lo_hz);
    const double slack = span - gap * double(spec.n_flex > 0 ? spec.n_flex - 1 : 0);
    if (slack < 0.0) throw ConfigError("band too narrow for the 5% mode-separation rule");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Uniform over separated configurations: sort free positions, then insert the gaps.
    std::vector<double> pos(spec.n_flex);
    for (auto& p : pos) p = slack * unit(rng);
    std::sort(pos.begin(), pos.end());

    ModalParameters rho;
    rho.damping = spec.damping;
    rho.n_outputs = spec.n_outputs;
    rho.n_inputs = spec.n_inputs;
    for (std::size_t i = 0; i < spec.n_rbm; ++i)
        rho.rigid.push_back({unit_real(rng, spec.n_outputs), unit_real(rng, spec.n_inputs)});
    for (std::size_t i = 0; i < spec.n_flex; ++i) {
        const double omega = 2.0 * kPi * spec.f_lo_hz * std::exp(pos[i] + gap * double(i));
        const double zeta = spec.zeta_lo + (spec.zeta_hi - spec.zeta_lo) * unit(rng);
        if (spec.damping == DampingModel::general) {
            GeneralMode m{eigenvalue_from(omega, zeta), unit_complex(rng, spec.n_outputs),
                          unit_complex(rng, spec.n_inputs)};
            if (spec.peak_height) m.right *= *spec.peak_height * std::abs(m.lambda.real());
            rho.general.push_back(std::move(m));
        } else {
            ProportionalMode m{omega, zeta, unit_real(rng, spec.n_outputs), unit_real(rng, spec.n_inputs)};
            if (spec.peak_height) m.right *= *spec.peak_height * 2.0 * zeta * omega * omega;
            rho.proportional.push_back(std::move(m));
        }
    }
    return normalize_gauge(rho);
}

DescriptorModes descriptor_modes(const MechanicalSystem& sys) {
    sys.validate();
    const Index n = sys.n_dof();
    DescriptorModes out;
    out.e = MatrixXd::Zero(2 * n, 2 * n);
    out.e << sys.d, sys.m, sys.m, MatrixXd::Zero(n, n);
    out.a = MatrixXd::Zero(2 * n, 2 * n);
    out.a.topLeftCorner(n, n) = -sys.k;
    out.a.bottomRightCorner(n, n) = sys.m;
    if (Eigen::FullPivLU<MatrixXd>(sys.k).rank() < n) throw ConfigError("descriptor modes need a nonsingular stiffness");

    Eigen::PartialPivLU<MatrixXd> lu(out.e);
    const MatrixXd ea = lu.solve(out.a);
    Eigen::EigenSolver<MatrixXd> es(ea);
    if (es.info() != Eigen::Success) throw NumericalError("descriptor eigenvalue iteration did not converge");
    out.eigenvalues = es.eigenvalues();
    out.vectors = es.eigenvectors();
    for (Index i = 0; i < 2 * n; ++i) {
        const Complex s = out.vectors.col(i).transpose() * out.e.cast<Complex>() * out.vectors.col(i);
        if (!(std::abs(s) > 0.0)) throw NumericalError("descriptor eigenvector is E-orthogonal to itself");
        out.vectors.col(i) /= std::sqrt(s);
    }
    return out;
}

namespace {

// Flexible eigenpairs as (lambda, psi_l, psi_r) from the general formula
// C V diag(1 / (s - lambda)) V^-1 E^-1 B.
std::vector<GeneralMode> general_modes(const MechanicalSystem& sys) {
    const DescriptorModes dm = descriptor_modes(sys);
    const Index n = sys.n_dof(), n2 = 2 * n;
    Eigen::JacobiSVD<MatrixXcd> svd(dm.vectors);
    const VectorXd sv = svd.singularValues();
    if (!(sv[n2 - 1] > 1e-12 * sv[0])) throw NumericalError("defective eigenstructure (ill-conditioned eigenvectors)");

    MatrixXd b = MatrixXd::Zero(n2, sys.f.cols());
    b.topRows(n) = sys.f;
    const MatrixXcd ve = dm.vectors.partialPivLu().solve(Eigen::PartialPivLU<MatrixXd>(dm.e).solve(b).cast<Complex>());
    const double radius = dm.eigenvalues.cwiseAbs().maxCoeff();

    std::vector<GeneralMode> modes;
    std::vector<Complex> lower;
    for (Index i = 0; i < n2; ++i) {
        const Complex l = dm.eigenvalues[i];
        if (std::abs(l.imag()) <= 1e-12 * radius) throw NumericalError("real eigenvalue: overdamped mode");
        if (l.imag() < 0.0) {
            lower.push_back(l);
            continue;
        }
        modes.push_back({l, sys.q.cast<Complex>() * dm.vectors.col(i).head(n), ve.row(i).transpose()});
    }
    if (lower.size() != modes.size()) throw NumericalError("eigenvalues are not in conjugate pairs");
    for (const auto& m : modes) {
        const auto it = std::min_element(lower.begin(), lower.end(), [&](Complex x, Complex y) {
            return std::abs(x - std::conj(m.lambda)) < std::abs(y - std::conj(m.lambda));
        });
        if (std::abs(*it - std::conj(m.lambda)) > 1e-8 * std::abs(m.lambda))
            throw NumericalError("eigenvalues are not in conjugate pairs");
    }
    std::sort(modes.begin(), modes.end(), [](const GeneralMode& x, const GeneralMode& y) {
        return std::abs(x.lambda) < std::abs(y.lambda);
    });
    return modes;
}

}  // namespace

ModalParameters mech_to_modal(const MechanicalSystem& sys, DampingModel damping) {
    sys.validate();
    const Index n = sys.n_dof();
    ModalParameters rho;
    rho.damping = damping;
    rho.n_outputs = sys.q.rows();
    rho.n_inputs = sys.f.cols();

    // Rigid-body modes from the nullspace of K.
    Eigen::SelfAdjointEigenSolver<MatrixXd> kes(sys.k);
    const double kmax = kes.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<Index> null_idx;
    for (Index i = 0; i < n; ++i)
        if (std::abs(kes.eigenvalues()[i]) <= 1e-8 * kmax) null_idx.push_back(i);
    const Index r = Index(null_idx.size());
    MatrixXd nmat(n, r);
    for (Index j = 0; j < r; ++j) nmat.col(j) = kes.eigenvectors().col(null_idx[std::size_t(j)]);

    MatrixXd p = MatrixXd::Identity(n, n);
    if (r > 0) {
        const double dn = std::max(sys.d.cwiseAbs().maxCoeff(), 1e-300);
        if ((sys.d * nmat).cwiseAbs().maxCoeff() > 1e-8 * dn || (sys.d.transpose() * nmat).cwiseAbs().maxCoeff() > 1e-8 * dn)
            throw ConfigError("damping acts on the rigid-body motion; the double-integrator form does not apply");
        // Mass-orthonormal rigid shapes.
        const MatrixXd g = nmat.transpose() * sys.m * nmat;
        const MatrixXd lg = Eigen::LLT<MatrixXd>(g).matrixL();
        nmat = lg.triangularView<Eigen::Lower>().solve(nmat.transpose()).transpose();
        for (Index j = 0; j < r; ++j) rho.rigid.push_back({sys.q * nmat.col(j), sys.f.transpose() * nmat.col(j)});
        // Basis of the flexible subspace with N^T M P = 0.
        Eigen::HouseholderQR<MatrixXd> qr(sys.m * nmat);
        p = MatrixXd(qr.householderQ()).rightCols(n - r);
    }

    if (n - r > 0) {
        MechanicalSystem red{p.transpose() * sys.m * p, p.transpose() * sys.d * p, p.transpose() * sys.k * p,
                             p.transpose() * sys.f, sys.q * p};
        red.m = 0.5 * (red.m + red.m.transpose()).eval();
        red.k = 0.5 * (red.k + red.k.transpose()).eval();
        if (damping == DampingModel::general) {
            rho.general = general_modes(red);
        } else {
            Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(red.k, red.m);
            if (ges.info() != Eigen::Success) throw NumericalError("undamped eigenproblem failed");
            const MatrixXd phi = ges.eigenvectors();
            const MatrixXd modal_d = phi.transpose() * red.d * phi;
            const double dmax = std::max(modal_d.diagonal().cwiseAbs().maxCoeff(), 1e-300);
            const MatrixXd off = modal_d - MatrixXd(modal_d.diagonal().asDiagonal());
            if (off.cwiseAbs().maxCoeff() > 1e-8 * dmax)
                throw ConfigError("damping matrix is not proportional: modal damping has off-diagonal terms");
            for (Index i = 0; i < phi.cols(); ++i) {
                const double w2 = ges.eigenvalues()[i];
                if (!(w2 > 0.0)) throw NumericalError("non-positive stiffness eigenvalue in the flexible subspace");
                const double omega = std::sqrt(w2);
                const double zeta = modal_d(i, i) / (2.0 * omega);
                if (!(zeta > 0.0 && zeta < 1.0)) throw NumericalError("mode is not underdamped");
                rho.proportional.push_back({omega, zeta, red.q * phi.col(i), red.f.transpose() * phi.col(i)});
            }
        }
    }
    return normalize_gauge(rho);
}

MechanicalSystem random_mechanical_system(const MechanicalSpec& spec) {
    if (spec.n_dof < 1 || spec.n_outputs < 1 || spec.n_inputs < 1)
        throw ConfigError("mechanical spec needs positive sizes");
    if (spec.free_free && spec.n_dof < 2) throw ConfigError("a free-free chain needs at least two masses");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> nd;
    const Index n = spec.n_dof;

    MechanicalSystem sys;
    sys.m = MatrixXd::Zero(n, n);
    sys.k = MatrixXd::Zero(n, n);
    MatrixXd dmat = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) sys.m(i, i) = 0.5 + unit(rng);
    auto add_element = [](MatrixXd& x, Index i, Index j, double c) {
        x(i, i) += c;
        x(j, j) += c;
        x(i, j) -= c;
        x(j, i) -= c;
    };
    for (Index i = 0; i + 1 < n; ++i) {
        const double k = 1e4 * (0.5 + unit(rng));
        add_element(sys.k, i, i + 1, k);
        add_element(dmat, i, i + 1, (0.5 + unit(rng)) * 2.0);
    }
    if (!spec.free_free) {
        sys.k(0, 0) += 1e4 * (0.5 + unit(rng));
        dmat(0, 0) += (0.5 + unit(rng)) * 2.0;
    }
    if (spec.damping == DampingModel::proportional) {
        const double alpha = spec.free_free ? 0.0 : 0.5 * unit(rng);
        const double beta = 1e-4 * (0.5 + unit(rng));
        sys.d = alpha * sys.m + beta * sys.k;
    } else {
        sys.d = dmat;
    }
    sys.f = MatrixXd(n, spec.n_inputs);
    sys.q = MatrixXd(spec.n_outputs, n);
    for (Index i = 0; i < sys.f.size(); ++i) sys.f.data()[i] = nd(rng);
    for (Index i = 0; i < sys.q.size(); ++i) sys.q.data()[i] = nd(rng);
    return sys;
}

FrfDataset simulate_frf(const ModalParameters& rho, const FrequencyGrid& grid, double gamma, std::uint64_t seed) {
    if (!(gamma >= 0.0)) throw ConfigError("noise level must be non-negative");
    rho.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<MatrixXcd> frf;
    std::vector<VectorXd> var;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        MatrixXcd g = eval_modal(rho, Complex(0.0, grid[k]));
        VectorXd v(g.size());
        for (Index e = 0; e < g.size(); ++e) {
            const double sd = gamma * std::abs(g.data()[e]);
            v[e] = sd * sd;
            if (gamma > 0.0) {
                const double re = nd(rng);
                const double im = nd(rng);
                g.data()[e] += sd * inv_sqrt2 * Complex(re, im);
            }
        }
        frf.push_back(std::move(g));
        var.push_back(std::move(v));
    }
    return FrfDataset(grid, std::move(frf), HermitianSequence::from_diagonals(std::move(var)));
}

}  // namespace modalid
