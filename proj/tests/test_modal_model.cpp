#include <gtest/gtest.h>

#include "modalid/modal_model.hpp"
#include "test_util.hpp"

using namespace modalid;
using namespace testutil;

namespace {

ModalParameters one_general(Complex lambda, VectorXcd l, VectorXcd r) {
    ModalParameters rho;
    rho.damping = DampingModel::general;
    rho.n_outputs = l.size();
    rho.n_inputs = r.size();
    rho.general.push_back({lambda, std::move(l), std::move(r)});
    return rho;
}

ModalParameters one_proportional(double w, double z, VectorXd l, VectorXd r) {
    ModalParameters rho;
    rho.damping = DampingModel::proportional;
    rho.n_outputs = l.size();
    rho.n_inputs = r.size();
    rho.proportional.push_back({w, z, std::move(l), std::move(r)});
    return rho;
}

VectorXcd cvec(std::initializer_list<Complex> v) {
    VectorXcd out(Index(v.size()));
    Index i = 0;
    for (const auto& x : v) out[i++] = x;
    return out;
}

// Second-order real form of every flexible term, built from the residues.
MatrixXcd second_order_eval(const ModalParameters& rho, Complex s) {
    MatrixXcd out = MatrixXcd::Zero(rho.n_outputs, rho.n_inputs);
    for (const auto& m : rho.rigid) out += (m.left * m.right.transpose()).cast<Complex>() / (s * s);
    for (const auto& m : rho.general) {
        const MatrixXcd l = m.left * m.right.transpose();
        const MatrixXcd n1 = l + l.conjugate();
        const MatrixXcd n0 = -std::conj(m.lambda) * l - m.lambda * l.conjugate();
        out += (n1 * s + n0) / (s * s - 2.0 * m.lambda.real() * s + std::norm(m.lambda));
    }
    for (const auto& m : rho.proportional)
        out += (m.left * m.right.transpose()).cast<Complex>() / (s * s + 2 * m.zeta * m.omega * s + m.omega * m.omega);
    if (rho.dc_gain) out += rho.dc_gain->cast<Complex>();
    return out;
}

}  // namespace

TEST(EigenvalueFrom, Examples) {
    EXPECT_LT(std::abs(eigenvalue_from(1.0, 1e-12) - Complex(0, 1)), 1e-11);
    EXPECT_LT(std::abs(eigenvalue_from(2.0, 0.5) - Complex(-1, std::sqrt(3.0))), 1e-15);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        const double w = uniform(rng, 0.1, 1e4), z = uniform(rng, 1e-4, 0.99);
        const Complex l = eigenvalue_from(w, z);
        EXPECT_NEAR(std::abs(l), w, 1e-14 * w);
        EXPECT_NEAR(-l.real() / std::abs(l), z, 1e-14);
    }
    EXPECT_THROW(eigenvalue_from(1.0, 1.0), ConfigError);
    EXPECT_THROW(eigenvalue_from(1.0, 0.0), ConfigError);
    EXPECT_THROW(eigenvalue_from(0.0, 0.5), ConfigError);
}

TEST(ModalParameters, ValidationAndVectorLayout) {
    std::mt19937_64 rng(2);
    for (auto damping : {DampingModel::general, DampingModel::proportional}) {
        const ModalParameters rho = random_modal(rng, damping, 3, 2, 2, 3, true);
        EXPECT_NO_THROW(rho.validate());
        const VectorXd v = rho.to_vector();
        EXPECT_EQ(v.size(), rho.layout().parameter_count());
        EXPECT_TRUE(ModalParameters::from_vector(rho.layout(), v).to_vector() == v);
    }
    ModalParameters bad = one_general(Complex(0.1, 1), cvec({1}), cvec({1}));
    EXPECT_THROW(bad.validate(), ConfigError);
    bad.general[0].lambda = Complex(-0.1, -1);
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW(one_proportional(1, 1.5, VectorXd::Ones(1), VectorXd::Ones(1)).validate(), ConfigError);
    EXPECT_EQ(parse_damping_model("proportional"), DampingModel::proportional);
    EXPECT_THROW(parse_damping_model("hysteretic"), ConfigError);
}

TEST(EvalModal, Examples) {
    EXPECT_LT(std::abs(eval_modal(one_proportional(1, 0.5, VectorXd::Ones(1), VectorXd::Ones(1)), 0.0)(0, 0) - 1.0), 1e-15);

    ModalParameters rigid;
    rigid.n_outputs = rigid.n_inputs = 1;
    rigid.rigid.push_back({VectorXd::Ones(1), VectorXd::Ones(1)});
    EXPECT_LT(std::abs(eval_modal(rigid, Complex(0, 1))(0, 0) + 1.0), 1e-15);
    EXPECT_THROW(eval_modal(rigid, 0.0), NumericalError);

    const ModalParameters g = one_general(Complex(-0.1, 1), cvec({1}), cvec({1}));
    const Complex s(0, 0.5);
    EXPECT_LT(rel_err(eval_modal(g, s), second_order_eval(g, s)), 1e-14);
    try {
        eval_modal(g, Complex(-0.1, 1));
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("mode 0"), std::string::npos);
    }
}

TEST(EvalModal, FirstAndSecondOrderFormsAgree) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const ModalParameters rho = random_modal(rng, DampingModel::general, 3, 2, 1, 4, true);
        const Complex s(uniform(rng, -1, 1), uniform(rng, -10, 10));
        EXPECT_LT(rel_err(eval_modal(rho, s), second_order_eval(rho, s)), 1e-12);
    }
}

TEST(MapF, Examples) {
    const AdditiveParameters p = map_f(one_proportional(2, 0.25, VectorXd::Ones(1), VectorXd::Ones(1)));
    ASSERT_EQ(p.structure.size(), 1u);
    EXPECT_EQ(p.structure[0], (SubmodelOrder{2, 1, 0}));
    const VectorXd mp = monic_mode_map(one_proportional(2, 0.25, VectorXd::Ones(1), VectorXd::Ones(1)), 0);
    EXPECT_NEAR(mp[0], 1.0, 1e-15);  // 2 zeta omega
    EXPECT_NEAR(mp[1], 4.0, 1e-15);  // omega^2
    EXPECT_NEAR(mp[2], 1.0, 1e-15);
    EXPECT_NEAR(mp[3], 0.0, 1e-15);
    // Unit-constant normalization divides by omega^2.
    EXPECT_NEAR(p.submodels[0].denominator[0], 0.25, 1e-15);
    EXPECT_NEAR(p.submodels[0].denominator[1], 0.25, 1e-15);
    EXPECT_NEAR(p.submodels[0].numerators[0](0, 0), 0.25, 1e-15);
    EXPECT_EQ(p.submodels[0].numerators[1](0, 0), 0.0);

    const ModalParameters g = one_general(Complex(-1, 2), cvec({1}), cvec({1}));
    const VectorXd mg = monic_mode_map(g, 0);
    EXPECT_NEAR(mg[0], 2.0, 1e-15);
    EXPECT_NEAR(mg[1], 5.0, 1e-15);
    EXPECT_NEAR(mg[2], 2.0, 1e-15);  // N0 = -2 Re(conj(lambda) L)
    EXPECT_NEAR(mg[3], 2.0, 1e-15);  // N1 = 2 Re L
    const AdditiveParameters pg = map_f(g);
    EXPECT_NEAR(pg.submodels[0].denominator[0], 0.4, 1e-15);
    EXPECT_NEAR(pg.submodels[0].denominator[1], 0.2, 1e-15);
    EXPECT_NEAR(pg.submodels[0].numerators[0](0, 0), 0.4, 1e-15);
    EXPECT_NEAR(pg.submodels[0].numerators[1](0, 0), 0.4, 1e-15);
}

TEST(MapF, StructureOrder) {
    std::mt19937_64 rng(4);
    const ModalParameters rho = random_modal(rng, DampingModel::general, 2, 3, 2, 3, true);
    const AdditiveParameters p = map_f(rho);
    ASSERT_EQ(p.structure.size(), 5u);
    EXPECT_EQ(p.structure[0], (SubmodelOrder{0, 0, 2}));
    for (std::size_t i = 1; i <= 3; ++i) EXPECT_EQ(p.structure[i], (SubmodelOrder{2, 1, 0}));
    EXPECT_EQ(p.structure[4], (SubmodelOrder{0, 0, 0}));
    MatrixXd r = MatrixXd::Zero(2, 3);
    for (const auto& m : rho.rigid) r += m.left * m.right.transpose();
    EXPECT_LT(rel_err(p.submodels[0].numerators[0], r), 1e-15);
    EXPECT_TRUE(p.submodels[4].numerators[0] == *rho.dc_gain);
    EXPECT_TRUE(p.structure == modal_structure(rho.layout()));
}

TEST(MapF, CommutesWithEvaluation) {
    std::mt19937_64 rng(5);
    for (auto damping : {DampingModel::general, DampingModel::proportional}) {
        for (int t = 0; t < 10; ++t) {
            const ModalParameters rho = random_modal(rng, damping, 2, 3, t % 3, 1 + t % 4, t % 2 == 0);
            const AdditiveParameters p = map_f(rho);
            for (int k = 0; k < 100; ++k) {
                const Complex s(uniform(rng, -2, 2), uniform(rng, -20, 20));
                EXPECT_LT(rel_err(eval_additive(p, s), eval_modal(rho, s)), 1e-12);
            }
        }
    }
}

TEST(MapF, ResidueCombinationsAreReal) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 50; ++t) {
        const ModalParameters rho = random_modal(rng, DampingModel::general, 3, 2, 0, 1);
        const auto& m = rho.general[0];
        const MatrixXcd l = m.left * m.right.transpose();
        const MatrixXcd n1 = l + l.conjugate();
        const MatrixXcd n0 = -std::conj(m.lambda) * l - m.lambda * l.conjugate();
        EXPECT_LT(n1.imag().norm(), 1e-14 * n1.norm());
        EXPECT_LT(n0.imag().norm(), 1e-14 * n0.norm());
        const VectorXd g = monic_mode_map(rho, 0);
        EXPECT_LT(rel_err(MatrixXd(g.segment(2, 6)), MatrixXd(vec(MatrixXd(n0.real())))), 1e-14);
        EXPECT_LT(rel_err(MatrixXd(g.segment(8, 6)), MatrixXd(vec(MatrixXd(n1.real())))), 1e-14);
    }
}

TEST(JacobianF, ProportionalBlock) {
    const ModalParameters rho = one_proportional(2, 0.25, VectorXd::Ones(1), VectorXd::Ones(1));
    const MatrixXd x = monic_mode_jacobian(rho, 0);
    // Rows (2 zeta omega, omega^2) against columns (omega, zeta).
    EXPECT_NEAR(x(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(x(0, 1), 4.0, 1e-15);
    EXPECT_NEAR(x(1, 0), 4.0, 1e-15);
    EXPECT_NEAR(x(1, 1), 0.0, 1e-15);
}

TEST(JacobianF, RigidBodyKroneckerBlock) {
    ModalParameters rho;
    rho.n_outputs = 2;
    rho.n_inputs = 1;
    rho.rigid.push_back({Eigen::Vector2d(1, 0), VectorXd::Ones(1)});
    MatrixXd expected(2, 3);
    expected << 1, 0, 1, 0, 1, 0;
    EXPECT_TRUE(jacobian_f(rho) == expected);
}

TEST(JacobianF, BlockLayout) {
    std::mt19937_64 rng(7);
    const ModalParameters rho = random_modal(rng, DampingModel::general, 2, 2, 1, 2, true);
    const MatrixXd j = jacobian_f(rho);
    MatrixXd mask = MatrixXd::Zero(j.rows(), j.cols());
    for (const auto& b : jacobian_blocks(rho.layout())) mask.block(b.row_offset, b.col_offset, b.rows, b.cols).setOnes();
    EXPECT_EQ(j.cwiseProduct(MatrixXd::Ones(j.rows(), j.cols()) - mask).norm(), 0.0);
    EXPECT_TRUE(j.allFinite());
}

TEST(JacobianF, MatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    for (auto damping : {DampingModel::general, DampingModel::proportional}) {
        double worst = 0.0;
        for (int t = 0; t < 50; ++t) {
            const ModalParameters rho = random_modal(rng, damping, 3, 2, 1 + t % 2, 2, t % 2 == 1);
            const ModalLayout lay = rho.layout();
            const VectorXd r0 = rho.to_vector();
            const MatrixXd j = jacobian_f(rho);
            MatrixXd fd(j.rows(), j.cols());
            for (Index c = 0; c < r0.size(); ++c) {
                const double h = 1e-6 * std::max(1.0, std::abs(r0[c]));
                VectorXd rp = r0, rm = r0;
                rp[c] += h;
                rm[c] -= h;
                fd.col(c) = (map_f(ModalParameters::from_vector(lay, rp)).to_vector() -
                             map_f(ModalParameters::from_vector(lay, rm)).to_vector()) / (2 * h);
            }
            worst = std::max(worst, rel_err(j, fd));
        }
        EXPECT_LT(worst, 1e-6) << to_string(damping);
    }
}

TEST(JacobianF, MonicSubmatricesMatchFiniteDifferences) {
    // Every (N0, N1) x (Re/Im psi_l, Re/Im psi_r) submatrix of a general mode.
    std::mt19937_64 rng(9);
    const Index ny = 3, nu = 2, q = ny * nu;
    for (int t = 0; t < 50; ++t) {
        const ModalParameters rho = random_modal(rng, DampingModel::general, ny, nu, 0, 1);
        const VectorXd r0 = rho.to_vector();
        const MatrixXd x = monic_mode_jacobian(rho, 0);
        MatrixXd fd(x.rows(), x.cols());
        for (Index c = 0; c < r0.size(); ++c) {
            const double h = 1e-6;
            VectorXd rp = r0, rm = r0;
            rp[c] += h;
            rm[c] -= h;
            fd.col(c) = (monic_mode_map(ModalParameters::from_vector(rho.layout(), rp), 0) -
                         monic_mode_map(ModalParameters::from_vector(rho.layout(), rm), 0)) / (2 * h);
        }
        const Index cols[] = {2, 2 + ny, 2 + 2 * ny, 2 + 2 * ny + nu};
        const Index widths[] = {ny, ny, nu, nu};
        for (Index rb : {Index(2), 2 + q})
            for (int cb = 0; cb < 4; ++cb) {
                const MatrixXd a = x.block(rb, cols[cb], q, widths[cb]);
                const MatrixXd b = fd.block(rb, cols[cb], q, widths[cb]);
                EXPECT_LT(rel_err(a, b), 1e-6);
            }
        EXPECT_LT(rel_err(MatrixXd(x.topRows(2)), MatrixXd(fd.topRows(2))), 1e-6);
    }
}

TEST(NormalizeGauge, Examples) {
    ModalParameters a = one_general(Complex(-0.1, 1), cvec({2}), cvec({3}));
    ModalParameters na = normalize_gauge(a);
    EXPECT_LT(std::abs(na.general[0].left[0] - 1.0), 1e-15);
    EXPECT_LT(std::abs(na.general[0].right[0] - 6.0), 1e-15);

    ModalParameters b = one_general(Complex(-0.1, 1), cvec({Complex(0, 1)}), cvec({1}));
    ModalParameters nb = normalize_gauge(b);
    EXPECT_LT(std::abs(nb.general[0].left[0] - 1.0), 1e-15);
    EXPECT_LT(std::abs(nb.general[0].right[0] - Complex(0, 1)), 1e-15);

    ModalParameters z = one_general(Complex(-0.1, 1), cvec({0}), cvec({1}));
    EXPECT_THROW(normalize_gauge(z), NumericalError);
}

TEST(NormalizeGauge, InvariantModelAndPivot) {
    std::mt19937_64 rng(10);
    for (auto damping : {DampingModel::general, DampingModel::proportional}) {
        for (int t = 0; t < 20; ++t) {
            const ModalParameters rho = random_modal(rng, damping, 3, 2, 2, 3, true);
            const ModalParameters n = normalize_gauge(rho);
            for (int k = 0; k < 10; ++k) {
                const Complex s(uniform(rng, -1, 1), uniform(rng, -10, 10));
                EXPECT_LT(rel_err(eval_modal(n, s), eval_modal(rho, s)), 1e-14);
            }
            EXPECT_LT(rel_err(MatrixXd(map_f(n).to_vector()), MatrixXd(map_f(rho).to_vector())), 1e-14);
            for (const auto& m : n.rigid) {
                Index p;
                m.left.cwiseAbs().maxCoeff(&p);
                EXPECT_NEAR(m.left.norm(), 1.0, 1e-15);
                EXPECT_GT(m.left[p], 0.0);
            }
            for (const auto& m : n.general) {
                Index p;
                m.left.cwiseAbs().maxCoeff(&p);
                EXPECT_NEAR(m.left.norm(), 1.0, 1e-15);
                EXPECT_EQ(m.left[p].imag(), 0.0);
                EXPECT_GT(m.left[p].real(), 0.0);
            }
            for (const auto& m : n.proportional) {
                Index p;
                m.left.cwiseAbs().maxCoeff(&p);
                EXPECT_NEAR(m.left.norm(), 1.0, 1e-15);
                EXPECT_GT(m.left[p], 0.0);
            }
        }
    }
}

TEST(Proportional, SpecialCaseOfGeneral) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        const ModalParameters p = random_modal(rng, DampingModel::proportional, 3, 2, 1, 3);
        ModalParameters g;
        g.damping = DampingModel::general;
        g.n_outputs = 3;
        g.n_inputs = 2;
        g.rigid = p.rigid;
        for (const auto& m : p.proportional) {
            const Complex l = eigenvalue_from(m.omega, m.zeta);
            // Purely imaginary residue L = -j R / (2 Im lambda).
            const Complex c(0.0, -1.0 / (2.0 * l.imag()));
            const Complex phase = std::polar(1.0, uniform(rng, 0, 6.28));
            g.general.push_back({l, phase * m.left.cast<Complex>(), c / phase * m.right.cast<Complex>()});
        }
        for (int k = 0; k < 20; ++k) {
            const Complex s(uniform(rng, -1, 1), uniform(rng, -10, 10));
            EXPECT_LT(rel_err(eval_modal(g, s), eval_modal(p, s)), 1e-12);
        }
    }
}
