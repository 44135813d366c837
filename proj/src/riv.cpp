#include "modalid/riv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace modalid {

Stabilization parse_stabilization(const std::string& name) {
    if (name == "reflect") return Stabilization::reflect;
    if (name == "positivity") return Stabilization::positivity;
    throw ConfigError("unknown stabilization mode '" + name + "'");
}

std::string to_string(Stabilization mode) { return mode == Stabilization::reflect ? "reflect" : "positivity"; }

void RivOptions::validate() const {
    if (max_iterations < 1) throw ConfigError("RIV max_iterations must be >= 1");
    if (!(relative_tolerance > 0.0)) throw ConfigError("RIV relative_tolerance must be positive");
}

std::vector<std::string> CovarianceEstimate::parameter_names() const {
    std::vector<std::string> names;
    for (Index j = 0; j < structure.parameter_count(); ++j) names.push_back(structure.parameter_name(j));
    return names;
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Adds Re{ L W(k) R^T } to `m` for structured row sets, where the (a, b) entry
// is l_a^T W r_b without conjugation.
void accumulate_gram(MatrixXd& m, const RowSet& left, const RowSet& right, const HermitianSequence& w, std::size_t k,
                     const AdditiveStructure& st) {
    const Index q = st.vec_size();
    const bool diag = w.is_diagonal();
    MatrixXcd wk;
    if (!diag) wk = w.matrix(k);

    std::vector<std::vector<VectorXcd>> wr(right.size()), lw(left.size());
    for (std::size_t j = 0; j < right.size(); ++j)
        for (const auto& g : right[j].dense) wr[j].push_back(w.apply(k, g));
    for (std::size_t i = 0; i < left.size(); ++i)
        for (const auto& h : left[i].dense) lw[i].push_back(w.apply(k, h.conjugate()).conjugate());

    for (std::size_t i = 0; i < left.size(); ++i) {
        for (std::size_t j = 0; j < right.size(); ++j) {
            for (std::size_t p = 0; p < left[i].dense.size(); ++p) {
                const Index a = st.denominator_index(i, int(p) + 1);
                for (std::size_t r = 0; r < right[j].dense.size(); ++r)
                    m(a, st.denominator_index(j, int(r) + 1)) += left[i].dense[p].cwiseProduct(wr[j][r]).sum().real();
                for (std::size_t r = 0; r < right[j].identity.size(); ++r)
                    m.row(a).segment(st.numerator_index(j, int(r)), q) +=
                        (right[j].identity[r] * lw[i][p]).real().transpose();
            }
            for (std::size_t p = 0; p < left[i].identity.size(); ++p) {
                const Index a = st.numerator_index(i, int(p));
                const Complex c = left[i].identity[p];
                for (std::size_t r = 0; r < right[j].dense.size(); ++r)
                    m.col(st.denominator_index(j, int(r) + 1)).segment(a, q) += (c * wr[j][r]).real();
                for (std::size_t r = 0; r < right[j].identity.size(); ++r) {
                    const Complex cd = c * right[j].identity[r];
                    auto block = m.block(a, st.numerator_index(j, int(r)), q, q);
                    if (diag)
                        block.diagonal() += cd.real() * w.diagonal(k);
                    else
                        block += (cd * wk).real();
                }
            }
        }
    }
}

// Adds Re{ L W(k) y } to column `col` of `out` for a dense vector y.
void accumulate_rhs(MatrixXd& out, Index col, const RowSet& left, const VectorXcd& y, const HermitianSequence& w,
                    std::size_t k, const AdditiveStructure& st) {
    const Index q = st.vec_size();
    const VectorXcd wy = w.apply(k, y);
    for (std::size_t i = 0; i < left.size(); ++i) {
        for (std::size_t p = 0; p < left[i].dense.size(); ++p)
            out(st.denominator_index(i, int(p) + 1), col) += left[i].dense[p].cwiseProduct(wy).sum().real();
        for (std::size_t p = 0; p < left[i].identity.size(); ++p)
            out.col(col).segment(st.numerator_index(i, int(p)), q) += (left[i].identity[p] * wy).real();
    }
}

RowSet conjugated(RowSet rows) {
    for (auto& sub : rows) {
        for (auto& d : sub.dense) d = d.conjugate();
        for (auto& c : sub.identity) c = std::conj(c);
    }
    return rows;
}

void check_weights(const FrfDataset& data, const HermitianSequence& weights) {
    if (weights.size() != data.size() || weights.dim() != data.vec_size())
        throw ConfigError("weighting does not match the dataset dimensions");
}

void check_stable(const AdditiveParameters& params, const char* what) {
    for (std::size_t i = 0; i < params.submodels.size(); ++i)
        for (const auto& r : denominator_roots(params.submodels[i].denominator))
            if (!(r.real() < 0.0))
                throw ConfigError(std::string(what) + ": denominator of submodel " + std::to_string(i) +
                                  " is not stable");
    const auto conflicts = common_root_conflicts(params);
    if (!conflicts.empty()) throw ConfigError(std::string(what) + ": " + conflicts.front());
}

void check_finite(const VectorXd& v, const char* what) {
    if (!v.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

// Numerator coefficient xi^p / (xi^l A_i(xi)) for every (submodel, power) pair.
MatrixXcd numerator_coefficients(const FrfDataset& data, const AdditiveStructure& st,
                                 const std::vector<VectorXd>& denominators, std::vector<std::string>& names) {
    Index cols = 0;
    for (const auto& s : st.submodels()) cols += s.m + 1;
    MatrixXcd c(Index(data.size()), cols);
    names.clear();
    for (std::size_t i = 0; i < st.size(); ++i)
        for (int p = 0; p <= st[i].m; ++p) names.push_back("sub" + std::to_string(i) + ".B" + std::to_string(p));
    for (std::size_t k = 0; k < data.size(); ++k) {
        const Complex xi(0.0, data.grid()[k]);
        Index col = 0;
        for (std::size_t i = 0; i < st.size(); ++i) {
            Complex den = eval_denominator(denominators[i], xi);
            for (int l = 0; l < st[i].l; ++l) den *= xi;
            Complex xp = 1.0;
            for (int p = 0; p <= st[i].m; ++p, xp *= xi) c(Index(k), col++) = xp / den;
        }
    }
    return c;
}

VectorXd solve_equilibrated_ls(const MatrixXd& a, const VectorXd& b, const std::vector<std::string>& col_names,
                               Index names_stride) {
    VectorXd scale(a.cols());
    for (Index j = 0; j < a.cols(); ++j) {
        const double n = a.col(j).norm();
        scale[j] = n > 0.0 ? 1.0 / n : 0.0;
    }
    const MatrixXd as = a * scale.asDiagonal();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(as);
    qr.setThreshold(1e-12);
    if (qr.rank() < a.cols() || (scale.array() == 0.0).any()) {
        std::string cols;
        for (Index r = qr.rank(); r < a.cols(); ++r) {
            if (!cols.empty()) cols += ", ";
            cols += col_names[std::size_t(qr.colsPermutation().indices()[r] / names_stride)];
        }
        throw NumericalError("rank-deficient numerator regressor (deficient columns: " + cols +
                             "); check for duplicate poles");
    }
    return scale.asDiagonal() * qr.solve(b);
}

}  // namespace

AdditiveParameters init_numerators(const FrfDataset& data, const AdditiveStructure& structure,
                                   const std::vector<VectorXd>& denominators, const HermitianSequence& weights) {
    if (structure.n_outputs() != data.n_outputs() || structure.n_inputs() != data.n_inputs())
        throw ConfigError("model structure does not match the dataset dimensions");
    check_weights(data, weights);
    if (denominators.size() != structure.size()) throw ConfigError("one denominator per submodel is required");
    AdditiveParameters params = AdditiveParameters::zeros(structure);
    for (std::size_t i = 0; i < structure.size(); ++i) {
        if (denominators[i].size() != structure[i].n)
            throw ConfigError("denominator of submodel " + std::to_string(i) + " has the wrong order");
        params.submodels[i].denominator = denominators[i];
    }
    check_stable(params, "initial denominators");

    std::vector<std::string> names;
    const MatrixXcd c = numerator_coefficients(data, structure, denominators, names);
    const Index n = Index(data.size()), q = data.vec_size(), cols = c.cols();
    MatrixXd eta(cols, q);

    if (weights.is_diagonal()) {
        // Each vec entry decouples into its own small problem.
        for (Index e = 0; e < q; ++e) {
            MatrixXd a(2 * n, cols);
            VectorXd b(2 * n);
            for (Index k = 0; k < n; ++k) {
                const double s = std::sqrt(std::max(weights.diagonal(std::size_t(k))[e], 0.0));
                const Complex g = data.frf(std::size_t(k))(e % data.n_outputs(), e / data.n_outputs());
                a.row(k) = s * c.row(k).real();
                a.row(n + k) = s * c.row(k).imag();
                b[k] = s * g.real();
                b[n + k] = s * g.imag();
            }
            eta.col(e) = solve_equilibrated_ls(a, b, names, 1);
        }
    } else {
        MatrixXd a = MatrixXd::Zero(2 * n * q, cols * q);
        VectorXd b(2 * n * q);
        for (Index k = 0; k < n; ++k) {
            Eigen::SelfAdjointEigenSolver<MatrixXcd> es(weights.matrix(std::size_t(k)));
            const MatrixXcd split =
                es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
            const VectorXcd rhs = split * vec(data.frf(std::size_t(k)));
            b.segment(2 * k * q, q) = rhs.real();
            b.segment(2 * k * q + q, q) = rhs.imag();
            for (Index j = 0; j < cols; ++j) {
                const MatrixXcd blk = c(k, j) * split;
                a.block(2 * k * q, j * q, q, q) = blk.real();
                a.block(2 * k * q + q, j * q, q, q) = blk.imag();
            }
        }
        const VectorXd x = solve_equilibrated_ls(a, b, names, q);
        for (Index j = 0; j < cols; ++j) eta.row(j) = x.segment(j * q, q).transpose();
    }

    Index row = 0;
    for (std::size_t i = 0; i < structure.size(); ++i)
        for (int p = 0; p <= structure[i].m; ++p)
            params.submodels[i].numerators[std::size_t(p)] =
                unvec(VectorXd(eta.row(row++).transpose()), structure.n_outputs(), structure.n_inputs());
    return params;
}

AdditiveParameters stabilize(const AdditiveParameters& params, Stabilization mode) {
    AdditiveParameters out = params;
    if (mode == Stabilization::positivity) {
        for (std::size_t i = 0; i < params.submodels.size(); ++i)
            if (params.structure[i].n > 2)
                throw ConfigError("positivity stabilization requires denominator orders <= 2 (submodel " +
                                  std::to_string(i) + ")");
        for (auto& sub : out.submodels) {
            VectorXd& a = sub.denominator;
            if (a.size() == 1) {
                a[0] = std::max(a[0], 1e-12 * std::abs(a[0]));
            } else if (a.size() == 2) {
                a[1] = std::max(a[1], 1e-12 * std::max(a[0] * a[0], std::abs(a[1])));
                a[0] = std::max(a[0], 1e-6 * 2.0 * std::sqrt(a[1]));
            }
        }
        return out;
    }
    for (auto& sub : out.submodels) {
        if (sub.denominator.size() == 0) continue;
        auto roots = denominator_roots(sub.denominator);
        bool unstable = false;
        for (auto& r : roots)
            if (r.real() > 0.0) {
                r = Complex(-r.real(), r.imag());
                unstable = true;
            }
        if (!unstable) continue;
        const VectorXd rebuilt = denominator_from_roots(roots);
        sub.denominator.setZero();
        sub.denominator.head(rebuilt.size()) = rebuilt;
    }
    return out;
}

RivResult riv_iterate(const FrfDataset& data, const AdditiveParameters& initial, const HermitianSequence& weights,
                      const RivOptions& opts) {
    opts.validate();
    check_weights(data, weights);
    check_stable(initial, "initial estimate");
    const AdditiveStructure& st = initial.structure;
    const Index dim = st.parameter_count(), n_sub = Index(st.size());

    RivResult result{initial, {cost(data, initial, weights)}, {}, false};
    VectorXd beta = initial.to_vector();
    for (int it = 0; it < opts.max_iterations; ++it) {
        MatrixXd m = MatrixXd::Zero(dim, dim), rhs = MatrixXd::Zero(dim, n_sub);
        for (std::size_t k = 0; k < data.size(); ++k) {
            const Complex xi(0.0, data.grid()[k]);
            const RowSet inst = instrument_rows(result.params, xi);
            const PseudolinearRows pl = pseudolinear_rows(result.params, data.frf(k), xi);
            accumulate_gram(m, inst, pl.phi, weights, k, st);
            for (Index i = 0; i < n_sub; ++i) accumulate_rhs(rhs, i, inst, pl.upsilon[std::size_t(i)], weights, k, st);
        }
        // Row and column equilibration before the LU factorization.
        VectorXd rs(dim), cs(dim);
        for (Index a = 0; a < dim; ++a) {
            const double mx = m.row(a).cwiseAbs().maxCoeff();
            if (!(mx > 0.0)) throw NumericalError("singular RIV normal matrix: empty row for " + st.parameter_name(a));
            rs[a] = 1.0 / mx;
        }
        const MatrixXd mr = rs.asDiagonal() * m;
        for (Index b = 0; b < dim; ++b) {
            const double mx = mr.col(b).cwiseAbs().maxCoeff();
            if (!(mx > 0.0)) throw NumericalError("singular RIV normal matrix: empty column for " + st.parameter_name(b));
            cs[b] = 1.0 / mx;
        }
        Eigen::PartialPivLU<MatrixXd> lu(mr * cs.asDiagonal());
        const double rcond = lu.rcond();
        if (!(rcond > kEps))
        {
            std::ostringstream msg;
            msg << "singular RIV normal matrix at iteration " << it + 1 << " (reciprocal condition estimate " << rcond
                << ")";
            throw NumericalError(msg.str());
        }
        const MatrixXd sol = cs.asDiagonal() * lu.solve(rs.asDiagonal() * rhs);

        VectorXd next(dim);
        for (Index i = 0; i < n_sub; ++i)
            next.segment(st.offset(std::size_t(i)), st.submodel_size(std::size_t(i))) =
                sol.block(st.offset(std::size_t(i)), i, st.submodel_size(std::size_t(i)), 1);
        check_finite(next, "RIV update");

        result.params = stabilize(AdditiveParameters::from_vector(st, next), opts.stabilization);
        next = result.params.to_vector();
        const double base = beta.norm() > 0.0 ? beta.norm() : 1.0;
        const double change = (next - beta).norm() / base;
        beta = next;
        result.cost_trace.push_back(cost(data, result.params, weights));
        result.relative_changes.push_back(change);
        if (change < opts.relative_tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

CovarianceEstimate covariance(const FrfDataset& data, const AdditiveParameters& estimate,
                              const std::optional<HermitianSequence>& frf_covariance) {
    const AdditiveStructure& st = estimate.structure;
    const Index dim = st.parameter_count(), q = data.vec_size();

    // Inverse FRF covariance; falls back to identity when absent or singular.
    bool relative_only = !frf_covariance.has_value();
    HermitianSequence inv;
    if (frf_covariance) {
        const auto& cov = *frf_covariance;
        if (cov.size() != data.size() || cov.dim() != q)
            throw ConfigError("FRF covariance does not match the dataset dimensions");
        if (cov.is_diagonal()) {
            std::vector<VectorXd> d;
            for (std::size_t k = 0; k < cov.size() && !relative_only; ++k) {
                const VectorXd& v = cov.diagonal(k);
                if (!((v.array() > 0.0).all())) relative_only = true;
                d.push_back(v.cwiseInverse());
            }
            if (!relative_only) inv = HermitianSequence::from_diagonals(std::move(d));
        } else {
            std::vector<MatrixXcd> mats;
            for (std::size_t k = 0; k < cov.size() && !relative_only; ++k) {
                Eigen::SelfAdjointEigenSolver<MatrixXcd> es(cov.matrix(k));
                const VectorXd ev = es.eigenvalues();
                if (!(ev.minCoeff() > 1e-14 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300))) {
                    relative_only = true;
                    break;
                }
                mats.push_back(es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint());
            }
            if (!relative_only) inv = HermitianSequence::from_matrices(std::move(mats));
        }
    }
    if (relative_only) inv = HermitianSequence::identity(data.size(), q);

    MatrixXd info = MatrixXd::Zero(dim, dim);
    for (std::size_t k = 0; k < data.size(); ++k) {
        const RowSet rows = instrument_rows(estimate, Complex(0.0, data.grid()[k]));
        accumulate_gram(info, rows, conjugated(rows), inv, k, st);
    }
    info = 0.5 * (info + info.transpose()).eval();
    if (!info.allFinite()) throw NumericalError("non-finite information matrix");

    VectorXd d(dim);
    for (Index a = 0; a < dim; ++a) {
        if (!(info(a, a) > 0.0))
            throw NumericalError("singular information matrix: parameter " + st.parameter_name(a) +
                                 " has no influence on the model");
        d[a] = 1.0 / std::sqrt(info(a, a));
    }
    const MatrixXd scaled = d.asDiagonal() * info * d.asDiagonal();
    Eigen::LLT<MatrixXd> llt(scaled);
    if (llt.info() != Eigen::Success || !(llt.rcond() > kEps)) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(scaled);
        const VectorXd v = es.eigenvectors().col(0);
        std::vector<Index> order(static_cast<std::size_t>(dim));
        for (Index a = 0; a < dim; ++a) order[std::size_t(a)] = a;
        std::sort(order.begin(), order.end(), [&](Index x, Index y) { return std::abs(v[x]) > std::abs(v[y]); });
        std::string desc;
        for (std::size_t j = 0; j < std::min<std::size_t>(3, order.size()); ++j)
            desc += std::string(j ? ", " : "") + st.parameter_name(order[j]);
        throw NumericalError("singular information matrix; null direction dominated by " + desc);
    }
    MatrixXd sigma = 0.5 * d.asDiagonal() * llt.solve(MatrixXd::Identity(dim, dim)) * d.asDiagonal();
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return {sigma, info, st, relative_only};
}

OptimalityResidual optimality_residual(const FrfDataset& data, const AdditiveParameters& params,
                                       const HermitianSequence& weights) {
    check_weights(data, weights);
    const AdditiveStructure& st = params.structure;
    OptimalityResidual out{VectorXd::Zero(st.parameter_count()), 0.0};
    for (std::size_t k = 0; k < data.size(); ++k) {
        const RowSet rows = instrument_rows(params, Complex(0.0, data.grid()[k]));
        MatrixXd term = MatrixXd::Zero(st.parameter_count(), 1);
        accumulate_rhs(term, 0, rows, vec(residual_matrix(data, params, k)), weights, k, st);
        out.gradient += term.col(0);
        out.largest_term = std::max(out.largest_term, term.norm());
    }
    return out;
}

}  // namespace modalid
