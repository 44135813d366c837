#include "modalid/additive_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace modalid {

AdditiveStructure::AdditiveStructure(Index n_outputs, Index n_inputs, std::vector<SubmodelOrder> submodels)
    : n_outputs_(n_outputs), n_inputs_(n_inputs), submodels_(std::move(submodels)) {
    if (n_outputs_ < 1 || n_inputs_ < 1) throw ConfigError("additive structure needs ny, nu >= 1");
    int with_integrators = 0, biproper = 0;
    for (const auto& s : submodels_) {
        if (s.n < 0 || s.m < 0 || s.l < 0) throw ConfigError("submodel orders must be non-negative");
        with_integrators += s.l > 0;
        biproper += s.biproper();
    }
    if (with_integrators > 1) throw ConfigError("at most one submodel may have poles at the origin");
    if (biproper > 1) throw ConfigError("at most one submodel may be biproper");
    for (const auto& s : submodels_) offsets_.push_back(offsets_.back() + s.n + Index(s.m + 1) * vec_size());
}

std::string AdditiveStructure::parameter_name(Index j) const {
    for (std::size_t i = 0; i < submodels_.size(); ++i) {
        if (j >= offsets_[i + 1]) continue;
        Index local = j - offsets_[i];
        const std::string prefix = "sub" + std::to_string(i) + ".";
        if (local < submodels_[i].n) return prefix + "a" + std::to_string(local + 1);
        local -= submodels_[i].n;
        const Index p = local / vec_size(), e = local % vec_size();
        return prefix + "B" + std::to_string(p) + "(" + std::to_string(e % n_outputs_ + 1) + "," +
               std::to_string(e / n_outputs_ + 1) + ")";
    }
    throw ConfigError("parameter index out of range");
}

AdditiveParameters AdditiveParameters::zeros(const AdditiveStructure& structure) {
    AdditiveParameters p{structure, {}};
    for (const auto& s : structure.submodels())
        p.submodels.push_back(
            {VectorXd::Zero(s.n),
             std::vector<MatrixXd>(std::size_t(s.m + 1), MatrixXd::Zero(structure.n_outputs(), structure.n_inputs()))});
    return p;
}

AdditiveParameters AdditiveParameters::from_vector(const AdditiveStructure& structure, const VectorXd& beta) {
    if (beta.size() != structure.parameter_count())
        throw ConfigError("parameter vector has length " + std::to_string(beta.size()) + ", expected " +
                          std::to_string(structure.parameter_count()));
    AdditiveParameters p = zeros(structure);
    const Index q = structure.vec_size();
    for (std::size_t i = 0; i < structure.size(); ++i) {
        const auto& s = structure[i];
        p.submodels[i].denominator = beta.segment(structure.offset(i), s.n);
        for (int k = 0; k <= s.m; ++k)
            p.submodels[i].numerators[std::size_t(k)] =
                unvec(VectorXd(beta.segment(structure.numerator_index(i, k), q)), structure.n_outputs(),
                      structure.n_inputs());
    }
    return p;
}

VectorXd AdditiveParameters::to_vector() const {
    VectorXd beta(structure.parameter_count());
    const Index q = structure.vec_size();
    for (std::size_t i = 0; i < structure.size(); ++i) {
        const auto& s = structure[i];
        beta.segment(structure.offset(i), s.n) = submodels[i].denominator;
        for (int k = 0; k <= s.m; ++k)
            beta.segment(structure.numerator_index(i, k), q) = vec(submodels[i].numerators[std::size_t(k)]);
    }
    return beta;
}

Complex eval_denominator(const VectorXd& a, Complex s) {
    Complex acc = 0.0;
    for (Index p = a.size(); p >= 1; --p) acc = acc * s + a[p - 1];
    return acc * s + 1.0;
}

std::vector<Complex> denominator_roots(const VectorXd& a) {
    Index n = a.size();
    while (n > 0 && a[n - 1] == 0.0) --n;
    if (n == 0) return {};
    if (n == 1) return {Complex(-1.0 / a[0], 0.0)};
    if (n == 2) {
        // a2 s^2 + a1 s + 1 = 0 without cancellation.
        const double a1 = a[0], a2 = a[1];
        const double disc = a1 * a1 - 4.0 * a2;
        if (disc >= 0.0) {
            const double qv = -0.5 * (a1 + std::copysign(std::sqrt(disc), a1));
            return {Complex(qv / a2, 0.0), Complex(1.0 / qv, 0.0)};
        }
        const double re = -a1 / (2.0 * a2), im = std::sqrt(-disc) / (2.0 * std::abs(a2));
        return {Complex(re, im), Complex(re, -im)};
    }
    // Companion matrix of the monic polynomial s^n + (a_{n-1}/a_n) s^{n-1} + ... + 1/a_n.
    MatrixXd companion = MatrixXd::Zero(n, n);
    companion.block(1, 0, n - 1, n - 1).setIdentity();
    companion(0, n - 1) = -1.0 / a[n - 1];
    for (Index p = 1; p < n; ++p) companion(p, n - 1) = -a[p - 1] / a[n - 1];
    Eigen::EigenSolver<MatrixXd> es(companion, false);
    std::vector<Complex> roots(es.eigenvalues().data(), es.eigenvalues().data() + n);
    return roots;
}

VectorXd denominator_from_roots(const std::vector<Complex>& roots) {
    // Coefficients in ascending powers, constant term 1.
    VectorXcd c = VectorXcd::Zero(Index(roots.size()) + 1);
    c[0] = 1.0;
    for (std::size_t j = 0; j < roots.size(); ++j) {
        const Complex f = -1.0 / roots[j];
        for (Index p = Index(j) + 1; p >= 1; --p) c[p] += f * c[p - 1];
    }
    VectorXd a(Index(roots.size()));
    for (Index p = 0; p < a.size(); ++p) a[p] = c[p + 1].real();
    return a;
}

namespace {

Complex integrator_factor(int l, Complex s) {
    Complex f = 1.0;
    for (int k = 0; k < l; ++k) f *= s;
    return f;
}

Complex checked_denominator(const AdditiveParameters& params, std::size_t i, Complex s) {
    const auto& sub = params.submodels[i];
    const int l = params.structure[i].l;
    const Complex den = integrator_factor(l, s) * eval_denominator(sub.denominator, s);
    double scale = 1.0;
    for (Index p = 0; p < sub.denominator.size(); ++p) scale += std::abs(sub.denominator[p]) * std::pow(std::abs(s), double(p + 1));
    scale *= std::pow(std::abs(s), double(l));
    if (!(std::abs(den) > 1e-14 * scale) || (l > 0 && s == Complex(0.0, 0.0)))
        throw NumericalError("evaluation at a pole of submodel " + std::to_string(i));
    return den;
}

MatrixXcd eval_numerator(const SubmodelParameters& sub, Complex s) {
    MatrixXcd acc = MatrixXcd::Zero(sub.numerators.front().rows(), sub.numerators.front().cols());
    for (std::size_t p = sub.numerators.size(); p-- > 0;) acc = acc * s + sub.numerators[p].cast<Complex>();
    return acc;
}

}  // namespace

MatrixXcd eval_submodel(const AdditiveParameters& params, std::size_t i, Complex s) {
    const Complex den = checked_denominator(params, i, s);
    return eval_numerator(params.submodels[i], s) / den;
}

MatrixXcd eval_additive(const AdditiveParameters& params, Complex s) {
    MatrixXcd p = MatrixXcd::Zero(params.structure.n_outputs(), params.structure.n_inputs());
    for (std::size_t i = 0; i < params.submodels.size(); ++i) p += eval_submodel(params, i, s);
    return p;
}

MatrixXcd residual_matrix(const FrfDataset& data, const AdditiveParameters& params, std::size_t k) {
    if (k >= data.size()) throw ConfigError("frequency index out of range");
    return data.frf(k) - eval_additive(params, Complex(0.0, data.grid()[k]));
}

double cost(const FrfDataset& data, const AdditiveParameters& params, const HermitianSequence& weights) {
    if (weights.size() != data.size()) throw ConfigError("weighting does not match the dataset length");
    double total = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const VectorXcd e = vec(residual_matrix(data, params, k));
        if (!e.allFinite()) throw NumericalError("non-finite residual at frequency index " + std::to_string(k));
        if (weights.is_diagonal()) {
            total += weights.quadratic_form(k, e);
        } else {
            const Complex c = e.dot(weights.apply(k, e));
            if (std::abs(c.imag()) > 1e-10 * std::abs(c))
                throw NumericalError("weighted residual has a non-negligible imaginary part");
            total += c.real();
        }
    }
    return total / (2.0 * double(data.size()));
}

std::vector<std::string> common_root_conflicts(const AdditiveParameters& params, double tol) {
    std::vector<std::vector<Complex>> roots;
    for (const auto& sub : params.submodels) roots.push_back(denominator_roots(sub.denominator));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < roots.size(); ++i)
        for (std::size_t j = i + 1; j < roots.size(); ++j)
            for (const auto& r : roots[i])
                for (const auto& t : roots[j])
                    if (std::abs(r - t) <= tol * std::max(std::abs(r), std::abs(t)))
                        out.push_back("submodels " + std::to_string(i) + " and " + std::to_string(j) +
                                      " share a denominator root near " + std::to_string(r.real()) +
                                      (r.imag() >= 0 ? "+" : "") + std::to_string(r.imag()) + "j");
    return out;
}

PseudolinearRows pseudolinear_rows(const AdditiveParameters& params, const MatrixXcd& g, Complex xi) {
    const std::size_t K = params.submodels.size();
    std::vector<MatrixXcd> parts(K);
    MatrixXcd total = MatrixXcd::Zero(g.rows(), g.cols());
    for (std::size_t i = 0; i < K; ++i) {
        parts[i] = eval_submodel(params, i, xi);
        total += parts[i];
    }
    PseudolinearRows out;
    out.phi.resize(K);
    out.upsilon.resize(K);
    for (std::size_t i = 0; i < K; ++i) {
        const auto& order = params.structure[i];
        const Complex a = eval_denominator(params.submodels[i].denominator, xi);
        const VectorXcd g_res = vec(MatrixXcd(g - (total - parts[i])));
        out.upsilon[i] = g_res / a;
        Complex xp = 1.0;
        for (int p = 1; p <= order.n; ++p) {
            xp *= xi;
            out.phi[i].dense.push_back(-xp * g_res / a);
        }
        const Complex den = integrator_factor(order.l, xi) * a;
        xp = 1.0;
        for (int p = 0; p <= order.m; ++p) {
            out.phi[i].identity.push_back(xp / den);
            xp *= xi;
        }
    }
    return out;
}

RowSet instrument_rows(const AdditiveParameters& params, Complex xi) {
    const std::size_t K = params.submodels.size();
    RowSet out(K);
    for (std::size_t i = 0; i < K; ++i) {
        const auto& order = params.structure[i];
        const Complex a = eval_denominator(params.submodels[i].denominator, xi);
        const Complex den = checked_denominator(params, i, xi);
        if (order.n > 0) {
            const VectorXcd p_i = vec(MatrixXcd(eval_numerator(params.submodels[i], xi) / den));
            Complex xp = 1.0;
            for (int p = 1; p <= order.n; ++p) {
                xp *= xi;
                out[i].dense.push_back((-xp * p_i / a).conjugate());
            }
        }
        Complex xp = 1.0;
        for (int p = 0; p <= order.m; ++p) {
            out[i].identity.push_back(std::conj(xp / den));
            xp *= xi;
        }
    }
    return out;
}

MatrixXcd to_dense(const RowSet& rows, const AdditiveStructure& structure) {
    const Index q = structure.vec_size();
    MatrixXcd out = MatrixXcd::Zero(structure.parameter_count(), q);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t p = 0; p < rows[i].dense.size(); ++p)
            out.row(structure.denominator_index(i, int(p) + 1)) = rows[i].dense[p].transpose();
        for (std::size_t p = 0; p < rows[i].identity.size(); ++p)
            out.block(structure.numerator_index(i, int(p)), 0, q, q).diagonal().setConstant(rows[i].identity[p]);
    }
    return out;
}

RegressorPhi regressor_phi(const AdditiveParameters& params, const FrfDataset& data, std::size_t k) {
    const auto rows = pseudolinear_rows(params, data.frf(k), Complex(0.0, data.grid()[k]));
    RegressorPhi out{to_dense(rows.phi, params.structure),
                     MatrixXcd(Index(rows.upsilon.size()), data.vec_size())};
    for (std::size_t i = 0; i < rows.upsilon.size(); ++i) out.upsilon.row(Index(i)) = rows.upsilon[i].transpose();
    return out;
}

MatrixXcd instrument_phi_hat(const AdditiveParameters& params, const FrfDataset& data, std::size_t k) {
    return to_dense(instrument_rows(params, Complex(0.0, data.grid()[k])), params.structure);
}

}  // namespace modalid
