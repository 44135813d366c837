#include "modalid/modal_model.hpp"

#include <cmath>

namespace modalid {

DampingModel parse_damping_model(const std::string& name) {
    if (name == "general") return DampingModel::general;
    if (name == "proportional") return DampingModel::proportional;
    throw ConfigError("unknown damping model '" + name + "'");
}

std::string to_string(DampingModel model) { return model == DampingModel::general ? "general" : "proportional"; }

ModalLayout ModalParameters::layout() const {
    return {damping, n_outputs, n_inputs, rigid.size(), n_flex(), dc_gain.has_value()};
}

void ModalParameters::validate() const {
    if (n_outputs < 1 || n_inputs < 1) throw ConfigError("modal model needs ny, nu >= 1");
    auto check_shape = [&](Index got, Index want, const std::string& what) {
        if (got != want) throw ConfigError(what + " has length " + std::to_string(got) + ", expected " + std::to_string(want));
    };
    for (std::size_t i = 0; i < rigid.size(); ++i) {
        check_shape(rigid[i].left.size(), n_outputs, "rigid mode " + std::to_string(i) + " left shape");
        check_shape(rigid[i].right.size(), n_inputs, "rigid mode " + std::to_string(i) + " right shape");
        if (!rigid[i].left.allFinite() || !rigid[i].right.allFinite())
            throw ConfigError("rigid mode " + std::to_string(i) + " has non-finite shapes");
    }
    if (damping == DampingModel::general) {
        if (!proportional.empty()) throw ConfigError("general-damping model holds proportional modes");
        for (std::size_t i = 0; i < general.size(); ++i) {
            const auto& m = general[i];
            const std::string name = "flexible mode " + std::to_string(i);
            check_shape(m.left.size(), n_outputs, name + " left shape");
            check_shape(m.right.size(), n_inputs, name + " right shape");
            if (!(m.lambda.real() < 0.0) || !(m.lambda.imag() > 0.0))
                throw ConfigError(name + " eigenvalue must satisfy Re < 0 and Im > 0");
            if (!m.left.allFinite() || !m.right.allFinite()) throw ConfigError(name + " has non-finite shapes");
        }
    } else {
        if (!general.empty()) throw ConfigError("proportional-damping model holds general modes");
        for (std::size_t i = 0; i < proportional.size(); ++i) {
            const auto& m = proportional[i];
            const std::string name = "flexible mode " + std::to_string(i);
            check_shape(m.left.size(), n_outputs, name + " left shape");
            check_shape(m.right.size(), n_inputs, name + " right shape");
            if (!(m.omega > 0.0) || !std::isfinite(m.omega)) throw ConfigError(name + " needs omega > 0");
            if (!(m.zeta > 0.0 && m.zeta < 1.0)) throw ConfigError(name + " needs 0 < zeta < 1");
            if (!m.left.allFinite() || !m.right.allFinite()) throw ConfigError(name + " has non-finite shapes");
        }
    }
    if (dc_gain && (dc_gain->rows() != n_outputs || dc_gain->cols() != n_inputs))
        throw ConfigError("dc gain has the wrong shape");
}

VectorXd ModalParameters::to_vector() const {
    const ModalLayout lay = layout();
    VectorXd rho(lay.parameter_count());
    const Index ny = n_outputs, nu = n_inputs;
    Index o = 0;
    for (const auto& m : rigid) {
        rho.segment(o, ny) = m.left;
        rho.segment(o + ny, nu) = m.right;
        o += lay.rigid_size();
    }
    for (const auto& m : general) {
        rho[o] = m.lambda.real();
        rho[o + 1] = m.lambda.imag();
        rho.segment(o + 2, ny) = m.left.real();
        rho.segment(o + 2 + ny, ny) = m.left.imag();
        rho.segment(o + 2 + 2 * ny, nu) = m.right.real();
        rho.segment(o + 2 + 2 * ny + nu, nu) = m.right.imag();
        o += lay.flex_size();
    }
    for (const auto& m : proportional) {
        rho[o] = m.omega;
        rho[o + 1] = m.zeta;
        rho.segment(o + 2, ny) = m.left;
        rho.segment(o + 2 + ny, nu) = m.right;
        o += lay.flex_size();
    }
    if (dc_gain) rho.segment(o, ny * nu) = vec(*dc_gain);
    return rho;
}

ModalParameters ModalParameters::from_vector(const ModalLayout& lay, const VectorXd& rho) {
    if (rho.size() != lay.parameter_count())
        throw ConfigError("modal parameter vector has length " + std::to_string(rho.size()) + ", expected " +
                          std::to_string(lay.parameter_count()));
    ModalParameters out;
    out.damping = lay.damping;
    out.n_outputs = lay.n_outputs;
    out.n_inputs = lay.n_inputs;
    const Index ny = lay.n_outputs, nu = lay.n_inputs;
    Index o = 0;
    for (std::size_t i = 0; i < lay.n_rbm; ++i, o += lay.rigid_size())
        out.rigid.push_back({rho.segment(o, ny), rho.segment(o + ny, nu)});
    for (std::size_t i = 0; i < lay.n_flex; ++i, o += lay.flex_size()) {
        if (lay.damping == DampingModel::general) {
            GeneralMode m;
            m.lambda = Complex(rho[o], rho[o + 1]);
            m.left = rho.segment(o + 2, ny).cast<Complex>() + Complex(0, 1) * rho.segment(o + 2 + ny, ny).cast<Complex>();
            m.right = rho.segment(o + 2 + 2 * ny, nu).cast<Complex>() +
                      Complex(0, 1) * rho.segment(o + 2 + 2 * ny + nu, nu).cast<Complex>();
            out.general.push_back(std::move(m));
        } else {
            out.proportional.push_back({rho[o], rho[o + 1], rho.segment(o + 2, ny), rho.segment(o + 2 + ny, nu)});
        }
    }
    if (lay.has_dc) out.dc_gain = unvec(VectorXd(rho.segment(o, ny * nu)), ny, nu);
    return out;
}

Complex ModalParameters::eigenvalue(std::size_t i) const {
    if (damping == DampingModel::general) return general.at(i).lambda;
    const auto& m = proportional.at(i);
    return eigenvalue_from(m.omega, m.zeta);
}

MatrixXcd ModalParameters::flex_residue(std::size_t i) const {
    if (damping == DampingModel::general) return general.at(i).left * general.at(i).right.transpose();
    return (proportional.at(i).left * proportional.at(i).right.transpose()).cast<Complex>();
}

Complex eigenvalue_from(double omega, double zeta) {
    if (!(omega > 0.0)) throw ConfigError("natural frequency must be positive");
    if (!(zeta > 0.0 && zeta < 1.0)) throw ConfigError("damping ratio must lie in (0, 1)");
    return Complex(-zeta * omega, omega * std::sqrt(1.0 - zeta * zeta));
}

MatrixXcd eval_modal(const ModalParameters& rho, Complex s) {
    MatrixXcd g = MatrixXcd::Zero(rho.n_outputs, rho.n_inputs);
    if (!rho.rigid.empty()) {
        if (s == Complex(0.0, 0.0)) throw NumericalError("evaluation at the rigid-body pole s = 0");
        MatrixXd r = MatrixXd::Zero(rho.n_outputs, rho.n_inputs);
        for (const auto& m : rho.rigid) r += m.left * m.right.transpose();
        g += r.cast<Complex>() / (s * s);
    }
    for (std::size_t i = 0; i < rho.general.size(); ++i) {
        const auto& m = rho.general[i];
        const double tol = 1e-14 * std::abs(m.lambda);
        if (std::abs(s - m.lambda) <= tol || std::abs(s - std::conj(m.lambda)) <= tol)
            throw NumericalError("evaluation at the pole of flexible mode " + std::to_string(i));
        const MatrixXcd l = m.left * m.right.transpose();
        g += l / (s - m.lambda) + l.conjugate() / (s - std::conj(m.lambda));
    }
    for (std::size_t i = 0; i < rho.proportional.size(); ++i) {
        const auto& m = rho.proportional[i];
        const Complex den = s * s + 2.0 * m.zeta * m.omega * s + m.omega * m.omega;
        if (std::abs(den) <= 1e-14 * (m.omega * m.omega + std::norm(s)))
            throw NumericalError("evaluation at the pole of flexible mode " + std::to_string(i));
        g += (m.left * m.right.transpose()).cast<Complex>() / den;
    }
    if (rho.dc_gain) g += rho.dc_gain->cast<Complex>();
    return g;
}

AdditiveStructure modal_structure(const ModalLayout& lay) {
    std::vector<SubmodelOrder> subs;
    if (lay.n_rbm > 0) subs.push_back({0, 0, 2});
    for (std::size_t i = 0; i < lay.n_flex; ++i) subs.push_back({2, 1, 0});
    if (lay.has_dc) subs.push_back({0, 0, 0});
    return AdditiveStructure(lay.n_outputs, lay.n_inputs, std::move(subs));
}

VectorXd monic_mode_map(const ModalParameters& rho, std::size_t i) {
    const Index q = rho.n_outputs * rho.n_inputs;
    VectorXd out(2 + 2 * q);
    if (rho.damping == DampingModel::general) {
        const auto& m = rho.general.at(i);
        const MatrixXcd l = m.left * m.right.transpose();
        out[0] = -2.0 * m.lambda.real();
        out[1] = std::norm(m.lambda);
        out.segment(2, q) = -2.0 * vec(MatrixXd((std::conj(m.lambda) * l).real()));
        out.segment(2 + q, q) = 2.0 * vec(MatrixXd(l.real()));
    } else {
        const auto& m = rho.proportional.at(i);
        out[0] = 2.0 * m.zeta * m.omega;
        out[1] = m.omega * m.omega;
        out.segment(2, q) = vec(MatrixXd(m.left * m.right.transpose()));
        out.segment(2 + q, q).setZero();
    }
    return out;
}

namespace {

// d vec(x y^T) / dx = y (x) I_nx and d vec(x y^T) / dy = I_ny (x) x.
MatrixXd kron_left(const VectorXd& y, Index nx) {
    MatrixXd k = MatrixXd::Zero(y.size() * nx, nx);
    for (Index j = 0; j < y.size(); ++j) k.block(j * nx, 0, nx, nx).diagonal().setConstant(y[j]);
    return k;
}

MatrixXd kron_right(const VectorXd& x, Index ny) {
    MatrixXd k = MatrixXd::Zero(x.size() * ny, ny);
    for (Index j = 0; j < ny; ++j) k.block(j * x.size(), j, x.size(), 1) = x;
    return k;
}

}  // namespace

MatrixXd monic_mode_jacobian(const ModalParameters& rho, std::size_t i) {
    const Index ny = rho.n_outputs, nu = rho.n_inputs, q = ny * nu;
    if (rho.damping == DampingModel::general) {
        const auto& m = rho.general.at(i);
        const double x = m.lambda.real(), y = m.lambda.imag();
        const VectorXd a = m.left.real(), b = m.left.imag(), u = m.right.real(), v = m.right.imag();
        const MatrixXcd l = m.left * m.right.transpose();
        const VectorXd re_l = vec(MatrixXd(l.real())), im_l = vec(MatrixXd(l.imag()));
        // Partials of vec(Re L) and vec(Im L) with respect to a, b, u, v.
        const MatrixXd ua = kron_left(u, ny), va = kron_left(v, ny), ia = kron_right(a, nu), ib = kron_right(b, nu);
        MatrixXd x_i = MatrixXd::Zero(2 + 2 * q, 2 + 2 * (ny + nu));
        const Index ca = 2, cb = 2 + ny, cu = 2 + 2 * ny, cv = 2 + 2 * ny + nu;
        x_i(0, 0) = -2.0;
        x_i(1, 0) = 2.0 * x;
        x_i(1, 1) = 2.0 * y;
        x_i.block(2, 0, q, 1) = -2.0 * re_l;
        x_i.block(2, 1, q, 1) = -2.0 * im_l;
        x_i.block(2, ca, q, ny) = -2.0 * (x * ua + y * va);
        x_i.block(2, cb, q, ny) = -2.0 * (y * ua - x * va);
        x_i.block(2, cu, q, nu) = -2.0 * (x * ia + y * ib);
        x_i.block(2, cv, q, nu) = -2.0 * (y * ia - x * ib);
        x_i.block(2 + q, ca, q, ny) = 2.0 * ua;
        x_i.block(2 + q, cb, q, ny) = -2.0 * va;
        x_i.block(2 + q, cu, q, nu) = 2.0 * ia;
        x_i.block(2 + q, cv, q, nu) = -2.0 * ib;
        return x_i;
    }
    const auto& m = rho.proportional.at(i);
    MatrixXd x_i = MatrixXd::Zero(2 + 2 * q, 2 + ny + nu);
    x_i(0, 0) = 2.0 * m.zeta;
    x_i(0, 1) = 2.0 * m.omega;
    x_i(1, 0) = 2.0 * m.omega;
    x_i.block(2, 2, q, ny) = kron_left(m.right, ny);
    x_i.block(2, 2 + ny, q, nu) = kron_right(m.left, nu);
    return x_i;
}

AdditiveParameters map_f(const ModalParameters& rho) {
    rho.validate();
    const ModalLayout lay = rho.layout();
    AdditiveParameters out = AdditiveParameters::zeros(modal_structure(lay));
    const Index ny = rho.n_outputs, nu = rho.n_inputs, q = ny * nu;
    std::size_t sub = 0;
    if (!rho.rigid.empty()) {
        MatrixXd r = MatrixXd::Zero(ny, nu);
        for (const auto& m : rho.rigid) r += m.left * m.right.transpose();
        out.submodels[sub++].numerators[0] = r;
    }
    for (std::size_t i = 0; i < rho.n_flex(); ++i, ++sub) {
        const VectorXd g = monic_mode_map(rho, i);
        const double a2 = g[1];
        out.submodels[sub].denominator = Eigen::Vector2d(g[0] / a2, 1.0 / a2);
        out.submodels[sub].numerators[0] = unvec(VectorXd(g.segment(2, q) / a2), ny, nu);
        out.submodels[sub].numerators[1] = unvec(VectorXd(g.segment(2 + q, q) / a2), ny, nu);
    }
    if (rho.dc_gain) out.submodels[sub].numerators[0] = *rho.dc_gain;
    return out;
}

std::vector<JacobianBlock> jacobian_blocks(const ModalLayout& lay) {
    const AdditiveStructure st = modal_structure(lay);
    std::vector<JacobianBlock> blocks;
    std::size_t sub = 0;
    if (lay.n_rbm > 0) {
        blocks.push_back({st.offset(sub), st.submodel_size(sub), 0, Index(lay.n_rbm) * lay.rigid_size()});
        ++sub;
    }
    for (std::size_t i = 0; i < lay.n_flex; ++i, ++sub)
        blocks.push_back({st.offset(sub), st.submodel_size(sub), lay.flex_offset(i), lay.flex_size()});
    if (lay.has_dc) blocks.push_back({st.offset(sub), st.submodel_size(sub), lay.dc_offset(), lay.dc_size()});
    return blocks;
}

MatrixXd jacobian_f(const ModalParameters& rho) {
    rho.validate();
    const ModalLayout lay = rho.layout();
    const auto blocks = jacobian_blocks(lay);
    const Index ny = rho.n_outputs, nu = rho.n_inputs, q = ny * nu;
    MatrixXd j = MatrixXd::Zero(modal_structure(lay).parameter_count(), lay.parameter_count());
    std::size_t b = 0;
    if (!rho.rigid.empty()) {
        const auto& blk = blocks[b++];
        for (std::size_t i = 0; i < rho.rigid.size(); ++i) {
            const Index c = Index(i) * lay.rigid_size();
            j.block(blk.row_offset, c, q, ny) = kron_left(rho.rigid[i].right, ny);
            j.block(blk.row_offset, c + ny, q, nu) = kron_right(rho.rigid[i].left, nu);
        }
    }
    for (std::size_t i = 0; i < rho.n_flex(); ++i) {
        const auto& blk = blocks[b++];
        const VectorXd g = monic_mode_map(rho, i);
        const double a2 = g[1];
        // Normalization (a1, a2, N0, N1) -> (a1 / a2, 1 / a2, N0 / a2, N1 / a2).
        MatrixXd h = MatrixXd::Zero(2 + 2 * q, 2 + 2 * q);
        h(0, 0) = 1.0 / a2;
        h(0, 1) = -g[0] / (a2 * a2);
        h(1, 1) = -1.0 / (a2 * a2);
        h.block(2, 2, 2 * q, 2 * q).diagonal().setConstant(1.0 / a2);
        h.block(2, 1, 2 * q, 1) = -g.segment(2, 2 * q) / (a2 * a2);
        j.block(blk.row_offset, blk.col_offset, blk.rows, blk.cols) = h * monic_mode_jacobian(rho, i);
    }
    if (rho.dc_gain) {
        const auto& blk = blocks[b];
        j.block(blk.row_offset, blk.col_offset, q, q).setIdentity();
    }
    return j;
}

namespace {

Index pivot_index(const VectorXcd& v) {
    Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    return idx;
}

}  // namespace

ModalParameters normalize_gauge(const ModalParameters& rho) {
    ModalParameters out = rho;
    for (std::size_t i = 0; i < out.rigid.size(); ++i) {
        auto& m = out.rigid[i];
        const double n = m.left.norm();
        if (!(n > 0.0)) throw NumericalError("rigid mode " + std::to_string(i) + " has a zero left shape");
        Index idx = 0;
        m.left.cwiseAbs().maxCoeff(&idx);
        const double alpha = m.left[idx] < 0.0 ? -n : n;
        m.left /= alpha;
        m.right *= alpha;
    }
    for (std::size_t i = 0; i < out.general.size(); ++i) {
        auto& m = out.general[i];
        const double n = m.left.norm();
        if (!(n > 0.0)) throw NumericalError("flexible mode " + std::to_string(i) + " has a zero left shape");
        const Complex p = m.left[pivot_index(m.left)];
        const Complex alpha = n * p / std::abs(p);
        m.left /= alpha;
        m.right *= alpha;
        // Exact zero phase on the pivot.
        const Index idx = pivot_index(m.left);
        m.left[idx] = Complex(m.left[idx].real(), 0.0);
    }
    for (std::size_t i = 0; i < out.proportional.size(); ++i) {
        auto& m = out.proportional[i];
        const double n = m.left.norm();
        if (!(n > 0.0)) throw NumericalError("flexible mode " + std::to_string(i) + " has a zero left shape");
        Index idx = 0;
        m.left.cwiseAbs().maxCoeff(&idx);
        const double alpha = m.left[idx] < 0.0 ? -n : n;
        m.left /= alpha;
        m.right *= alpha;
    }
    return out;
}

}  // namespace modalid
