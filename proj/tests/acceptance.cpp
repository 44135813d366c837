// Acceptance checks; one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "modalid/io.hpp"
#include "modalid/pipeline.hpp"
#include "test_util.hpp"

using namespace modalid;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

// Stage-2 traces of every fit run here, checked by the descent criterion.
std::vector<std::pair<std::string, std::vector<IpemTraceRow>>> g_traces;

VectorXcd vec(const MatrixXcd& m) { return Eigen::Map<const VectorXcd>(m.data(), m.size()); }

FrfDataset random_dataset(std::mt19937_64& rng, Index ny, Index nu, std::size_t n) {
    std::vector<double> hz;
    for (std::size_t k = 0; k < n; ++k) hz.push_back(0.05 * double(k + 1) + 0.013 * uniform(rng, 0, 1));
    std::vector<MatrixXcd> g;
    for (std::size_t k = 0; k < n; ++k) g.push_back(random_complex(rng, ny, nu));
    return FrfDataset(FrequencyGrid::from_hz(hz), g);
}

double percentile50(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Truth flexible natural frequencies [Hz], each moved by +-10%.
std::vector<double> perturbed_frequencies(const ModalParameters& truth, std::mt19937_64& rng) {
    std::vector<double> f;
    for (std::size_t i = 0; i < truth.n_flex(); ++i) {
        const double sign = rng() % 2 ? 1.0 : -1.0;
        f.push_back(truth.natural_frequency(i) / (2 * kPi) * (1.0 + 0.1 * sign));
    }
    return f;
}

// Index of the estimated mode closest to each truth mode.
std::vector<std::size_t> match_modes(const ModalParameters& truth, const ModalParameters& est) {
    std::vector<std::size_t> out;
    std::vector<bool> used(est.n_flex(), false);
    for (std::size_t i = 0; i < truth.n_flex(); ++i) {
        std::size_t best = 0;
        double d = 1e300;
        for (std::size_t j = 0; j < est.n_flex(); ++j) {
            const double dj = std::abs(est.eigenvalue(j) - truth.eigenvalue(i));
            if (!used[j] && dj < d) {
                d = dj;
                best = j;
            }
        }
        used[best] = true;
        out.push_back(best);
    }
    return out;
}

MatrixXd rigid_sum(const ModalParameters& rho) {
    MatrixXd r = MatrixXd::Zero(rho.n_outputs, rho.n_inputs);
    for (const auto& m : rho.rigid) r += m.left * m.right.transpose();
    return r;
}

SynthSpec round_trip_spec(DampingModel damping) {
    SynthSpec s;
    s.n_outputs = 2;
    s.n_inputs = 3;
    s.n_rbm = 2;
    s.n_flex = 4;
    s.f_lo_hz = 10.0;
    s.f_hi_hz = 200.0;
    s.zeta_lo = 0.005;
    s.zeta_hi = 0.05;
    s.damping = damping;
    s.seed = damping == DampingModel::general ? 21 : 11;
    return s;
}

FitConfig round_trip_config(const ModalParameters& truth, DampingModel damping, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FitConfig cfg;
    cfg.damping = damping;
    cfg.n_rbm = 2;
    cfg.flexible.frequencies_hz = perturbed_frequencies(truth, rng);
    cfg.initial_zeta = 0.01;
    cfg.riv.max_iterations = 60;
    cfg.riv.relative_tolerance = 1e-15;
    cfg.ipem.max_iterations = 40;
    return cfg;
}

void noiseless_round_trip(Outcome& o, DampingModel damping) {
    const SynthSpec spec = round_trip_spec(damping);
    const ModalParameters truth = random_modal_system(spec);
    const fs::path dir = temp_dir("accept_rt_" + to_string(damping));
    save_frf(dir / "frf.csv", simulate_frf(truth, FrequencyGrid::log_spaced_hz(1.0, 400.0, 800), 0.0, 0));
    FitConfig cfg = round_trip_config(truth, damping, spec.seed + 1);
    cfg.frf_path = dir / "frf.csv";
    cfg.output_dir = dir / "out";

    const auto t0 = Clock::now();
    const FitState st = cmd_fit(cfg);
    const double elapsed = seconds_since(t0);
    g_traces.push_back({"round trip " + to_string(damping), st.ipem->trace});

    const ModalParameters& est = st.ipem->rho;
    const double cost1 = st.riv->cost_trace.back();
    double lam_err = 0.0, res_err = 0.0;
    const auto match = match_modes(truth, est);
    for (std::size_t i = 0; i < truth.n_flex(); ++i) {
        const std::size_t j = match[i];
        lam_err = std::max(lam_err, std::abs(est.eigenvalue(j) - truth.eigenvalue(i)) / std::abs(truth.eigenvalue(i)));
        res_err = std::max(res_err, (est.flex_residue(j) - truth.flex_residue(i)).norm() / truth.flex_residue(i).norm());
    }
    res_err = std::max(res_err, (rigid_sum(est) - rigid_sum(truth)).norm() / rigid_sum(truth).norm());
    o.detail << "stage1 cost " << cost1 << ", lambda rel err " << lam_err << ", residue rel err " << res_err
             << ", runtime " << elapsed << " s";
    o.require(est.n_flex() == truth.n_flex() && est.rigid.size() == truth.rigid.size(), "mode counts");
    o.require(cost1 < 1e-18, "stage-1 cost < 1e-18");
    o.require(lam_err < 1e-8, "eigenvalue error < 1e-8");
    o.require(res_err < 1e-6, "residue error < 1e-6");
    o.require(elapsed < 10.0, "runtime < 10 s");
}

void noisy_consistency(Outcome& o) {
    const DampingModel damping = DampingModel::general;
    const ModalParameters truth = random_modal_system(round_trip_spec(damping));
    const FrequencyGrid grid = FrequencyGrid::log_spaced_hz(1.0, 400.0, 800);
    std::vector<double> w_err, z_err;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const FrfDataset data = simulate_frf(truth, grid, 0.01, seed);
        const FitState st = run_fit(data, round_trip_config(truth, damping, 100 + seed));
        g_traces.push_back({"noisy seed " + std::to_string(seed), st.ipem->trace});
        const ModalParameters& est = st.ipem->rho;
        const auto match = match_modes(truth, est);
        double we = 0.0, ze = 0.0;
        for (std::size_t i = 0; i < truth.n_flex(); ++i) {
            we = std::max(we, std::abs(est.natural_frequency(match[i]) / truth.natural_frequency(i) - 1.0));
            ze = std::max(ze, std::abs(est.damping_ratio(match[i]) / truth.damping_ratio(i) - 1.0));
        }
        w_err.push_back(we);
        z_err.push_back(ze);
    }
    const double mw = percentile50(w_err), mz = percentile50(z_err);
    o.detail << "median worst-mode error: natural frequency " << mw << ", damping ratio " << mz;
    o.require(mw < 1e-3, "frequency error < 1e-3");
    o.require(mz < 5e-2, "damping error < 5e-2");
}

double instrument_fd_error(std::mt19937_64& rng) {
    const AdditiveStructure st(2, 2, {{0, 0, 2}, {2, 1, 0}, {3, 1, 0}, {2, 2, 0}});
    const AdditiveParameters p = random_additive(rng, st);
    const FrfDataset d = random_dataset(rng, 2, 2, 3);
    const VectorXd beta = p.to_vector();
    double worst = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const MatrixXcd phi_hat = instrument_phi_hat(p, d, k);
        MatrixXcd fd(beta.size(), 4);
        for (Index j = 0; j < beta.size(); ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(beta[j]));
            VectorXd bp = beta, bm = beta;
            bp[j] += h;
            bm[j] -= h;
            const VectorXcd ep = vec(residual_matrix(d, AdditiveParameters::from_vector(st, bp), k));
            const VectorXcd em = vec(residual_matrix(d, AdditiveParameters::from_vector(st, bm), k));
            fd.row(j) = (-(ep - em) / (2 * h)).conjugate().transpose();
        }
        worst = std::max(worst, rel_err(phi_hat, fd));
    }
    return worst;
}

MatrixXd fd_columns(const VectorXd& r0, const std::function<VectorXd(const VectorXd&)>& f) {
    const VectorXd f0 = f(r0);
    MatrixXd fd(f0.size(), r0.size());
    for (Index c = 0; c < r0.size(); ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(r0[c]));
        VectorXd rp = r0, rm = r0;
        rp[c] += h;
        rm[c] -= h;
        fd.col(c) = (f(rp) - f(rm)) / (2 * h);
    }
    return fd;
}

void jacobian_suites(Outcome& o) {
    std::mt19937_64 rng(4);
    double inst = 0.0, full_g = 0.0, full_p = 0.0, rigid = 0.0, sub_g = 0.0, sub_p = 0.0;
    for (int t = 0; t < 50; ++t) inst = std::max(inst, instrument_fd_error(rng));
    for (auto damping : {DampingModel::general, DampingModel::proportional}) {
        double& worst = damping == DampingModel::general ? full_g : full_p;
        for (int t = 0; t < 50; ++t) {
            const ModalParameters rho = random_modal(rng, damping, 3, 2, 1 + t % 2, 2, t % 2 == 1);
            const ModalLayout lay = rho.layout();
            const MatrixXd j = jacobian_f(rho);
            const MatrixXd fd = fd_columns(rho.to_vector(), [&](const VectorXd& r) {
                return map_f(ModalParameters::from_vector(lay, r)).to_vector();
            });
            worst = std::max(worst, rel_err(j, fd));
            // Rigid-body block S.
            const JacobianBlock b = jacobian_blocks(lay).front();
            rigid = std::max(rigid, rel_err(MatrixXd(j.block(b.row_offset, b.col_offset, b.rows, b.cols)),
                                            MatrixXd(fd.block(b.row_offset, b.col_offset, b.rows, b.cols))));
        }
    }
    const Index ny = 3, nu = 2, q = ny * nu;
    for (int t = 0; t < 50; ++t) {
        const ModalParameters rho = random_modal(rng, DampingModel::general, ny, nu, 0, 1);
        const MatrixXd x = monic_mode_jacobian(rho, 0);
        const MatrixXd fd = fd_columns(rho.to_vector(), [&](const VectorXd& r) {
            return monic_mode_map(ModalParameters::from_vector(rho.layout(), r), 0);
        });
        const Index cols[] = {2, 2 + ny, 2 + 2 * ny, 2 + 2 * ny + nu};
        const Index widths[] = {ny, ny, nu, nu};
        for (Index rb : {Index(2), 2 + q})
            for (int cb = 0; cb < 4; ++cb)
                sub_g = std::max(sub_g, rel_err(MatrixXd(x.block(rb, cols[cb], q, widths[cb])),
                                                MatrixXd(fd.block(rb, cols[cb], q, widths[cb]))));
        sub_g = std::max(sub_g, rel_err(MatrixXd(x.topRows(2)), MatrixXd(fd.topRows(2))));

        const ModalParameters pr = random_modal(rng, DampingModel::proportional, ny, nu, 0, 1);
        const MatrixXd xp = monic_mode_jacobian(pr, 0);
        const MatrixXd fdp = fd_columns(pr.to_vector(), [&](const VectorXd& r) {
            return monic_mode_map(ModalParameters::from_vector(pr.layout(), r), 0);
        });
        sub_p = std::max(sub_p, rel_err(xp, fdp));
    }
    o.detail << "max rel err: instrument " << inst << ", jacobian_f general " << full_g << ", proportional " << full_p
             << ", rigid block " << rigid << ", general X submatrices " << sub_g << ", proportional X " << sub_p;
    for (double e : {inst, full_g, full_p, rigid, sub_g, sub_p}) o.require(e < 1e-6, "finite-difference error < 1e-6");
}

void pseudolinear_identity(Outcome& o) {
    std::mt19937_64 rng(5);
    double worst = 0.0;
    const AdditiveStructure st(2, 3, {{0, 0, 2}, {2, 1, 0}, {2, 2, 0}});
    for (int t = 0; t < 50; ++t) {
        const AdditiveParameters p = random_additive(rng, st);
        const FrfDataset d = random_dataset(rng, 2, 3, 20);
        const VectorXd beta = p.to_vector();
        for (std::size_t k = 0; k < d.size(); ++k) {
            const VectorXcd e = vec(residual_matrix(d, p, k));
            const RegressorPhi r = regressor_phi(p, d, k);
            for (std::size_t i = 0; i < st.size(); ++i) {
                const VectorXd theta = beta.segment(st.offset(i), st.submodel_size(i));
                const MatrixXcd phi_i = r.phi.middleRows(st.offset(i), st.submodel_size(i));
                const VectorXcd pseudo = r.upsilon.row(Index(i)).transpose() - phi_i.transpose() * theta.cast<Complex>();
                worst = std::max(worst, rel_err(MatrixXcd(pseudo), MatrixXcd(e)));
            }
        }
    }
    o.detail << "max rel difference " << worst;
    o.require(worst < 1e-12, "relative difference < 1e-12");
}

void eckart_young(Outcome& o) {
    std::mt19937_64 rng(6);
    int losses = 0;
    double min_margin = 1e300;
    for (auto [r, c] : {std::pair<Index, Index>{2, 2}, {3, 2}, {4, 13}}) {
        for (int t = 0; t < 100; ++t) {
            const MatrixXcd a = random_complex(rng, r, c);
            const RankOne ro = rank_one_approx(a);
            const double err = (a - ro.u * ro.v.transpose()).norm();
            double best = 1e300;
            for (int k = 0; k < 1000; ++k) {
                const VectorXcd x = random_unit(rng, r), y = random_unit(rng, c);
                const Complex s = (x.adjoint() * a * y.conjugate())(0, 0);
                best = std::min(best, (a - s * x * y.transpose()).norm());
            }
            if (!(err < best)) ++losses;
            min_margin = std::min(min_margin, best - err);
        }
    }
    o.detail << "losses " << losses << " of 300, smallest margin " << min_margin;
    o.require(losses == 0, "beats every candidate");
}

void covariance_calibration(Outcome& o) {
    ModalParameters truth;
    truth.n_outputs = truth.n_inputs = 1;
    const double w = 2 * kPi * 10.0, z = 0.02;
    truth.general.push_back({eigenvalue_from(w, z), VectorXcd::Ones(1), VectorXcd::Constant(1, Complex(0.4 * w, -1.5 * w))});
    const FrequencyGrid grid = FrequencyGrid::log_spaced_hz(1.0, 100.0, 400);
    const AdditiveParameters beta0 = map_f(truth);
    const AdditiveStructure& st = beta0.structure;
    const Index dim = st.parameter_count();
    const int draws = 200;
    std::vector<VectorXd> est;
    VectorXd predicted_var = VectorXd::Zero(dim);
    int not_converged = 0;
    for (int t = 0; t < draws; ++t) {
        const FrfDataset d = simulate_frf(truth, grid, 0.05, 1000 + t);
        const HermitianSequence wts = build_weighting(d, {WeightingKind::inverse_variance, std::nullopt});
        const VectorXd a0 = denominator_from_roots({truth.eigenvalue(0) * 1.05, std::conj(truth.eigenvalue(0)) * 1.05});
        const AdditiveParameters init = init_numerators(d, st, {a0}, wts);
        RivOptions opts;
        opts.max_iterations = 50;
        opts.relative_tolerance = 1e-12;
        const RivResult r = riv_iterate(d, init, wts, opts);
        if (!r.converged) ++not_converged;
        est.push_back(r.params.to_vector());
        predicted_var += covariance(d, r.params, d.covariance()).matrix.diagonal() / draws;
    }
    VectorXd mean = VectorXd::Zero(dim);
    for (const auto& e : est) mean += e / draws;
    double lo = 1e300, hi = 0.0;
    for (Index j = 0; j < dim; ++j) {
        double v = 0.0;
        for (const auto& e : est) v += (e[j] - mean[j]) * (e[j] - mean[j]);
        const double ratio = std::sqrt(v / (draws - 1) / predicted_var[j]);
        o.detail << st.parameter_name(j) << " " << ratio << "; ";
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    o.detail << "unconverged " << not_converged;
    o.require(lo >= 0.5 && hi <= 2.0, "std ratio in [0.5, 2]");
}

void realization_equivalence(Outcome& o) {
    std::mt19937_64 rng(8);
    double worst = 0.0;
    bool real_ok = true;
    for (auto damping : {DampingModel::general, DampingModel::proportional}) {
        for (int t = 0; t < 20; ++t) {
            const ModalParameters rho = random_modal(rng, damping, 3, 2, t % 3, 1 + t % 5, t % 2 == 0);
            const StateSpace ss = realize(rho);
            real_ok = real_ok && ss.a.allFinite() && ss.b.allFinite() && ss.c.allFinite() && ss.d.allFinite();
            for (int k = 0; k < 200; ++k) {
                const Complex s(0.0, std::exp(uniform(rng, std::log(0.05), std::log(50.0))));
                worst = std::max(worst, rel_err(eval_ss(ss, s), eval_modal(rho, s)));
            }
        }
    }
    o.detail << "max rel err " << worst << " over 40 models";
    o.require(worst < 1e-8, "relative error < 1e-8");
    o.require(real_ok, "finite real matrices");
}

void mech_equivalence(Outcome& o) {
    std::mt19937_64 rng(9);
    double worst = 0.0;
    for (auto damping : {DampingModel::proportional, DampingModel::general}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            MechanicalSpec spec;
            spec.n_dof = Index(2 + 2 * seed);
            spec.n_outputs = 2;
            spec.n_inputs = 3;
            spec.damping = damping;
            spec.free_free = seed % 3 == 2;
            spec.seed = 50 + seed;
            const MechanicalSystem sys = random_mechanical_system(spec);
            const ModalParameters rho = mech_to_modal(sys, damping);
            for (int k = 0; k < 50; ++k) {
                const Complex s(uniform(rng, -5, 5), uniform(rng, -300, 300));
                worst = std::max(worst, rel_err(eval_modal(rho, s), sys.transfer(s)));
            }
        }
    }
    MatrixXd k(3, 3);
    k << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    const MechanicalSystem chain{MatrixXd::Identity(3, 3), 0.01 * k, k, MatrixXd::Identity(3, 1), MatrixXd::Identity(2, 3)};
    std::size_t rigid_p = mech_to_modal(chain, DampingModel::proportional).rigid.size();
    std::size_t rigid_g = mech_to_modal(chain, DampingModel::general).rigid.size();
    o.detail << "max rel err " << worst << ", free-free chain rigid modes " << rigid_p << "/" << rigid_g;
    o.require(worst < 1e-8, "relative error < 1e-8");
    o.require(rigid_p == 1 && rigid_g == 1, "exactly one rigid-body mode");
}

void cmif_peaks(Outcome& o) {
    std::mt19937_64 rng(10);
    const FrequencyGrid grid = FrequencyGrid::linear_spaced_hz(5.0, 250.0, 2451);
    const double bin = grid.hz(1) - grid.hz(0);
    int missed = 0, spurious = 0;
    for (int sys = 0; sys < 5; ++sys) {
        ModalParameters rho;
        rho.damping = DampingModel::proportional;
        rho.n_outputs = 3;
        rho.n_inputs = 2;
        std::vector<double> f;
        for (double base : {15.0, 30.0, 60.0, 110.0, 200.0}) f.push_back(base * (1.0 + uniform(rng, -0.1, 0.1)));
        for (double fi : f) {
            const double wi = 2 * kPi * fi;
            const double zi = uniform(rng, 0.002, 0.01);
            VectorXd l = random_real(rng, 3, 1), r = random_real(rng, 2, 1);
            // Unit resonance peak for every mode.
            const double scale = 2 * zi * wi * wi / (l.norm() * r.norm());
            rho.proportional.push_back({wi, zi, l, scale * r});
        }
        const auto peaks = pick_modes(cmif(simulate_frf(rho, grid, 0.0, 0)));
        for (double fi : f) {
            bool hit = false;
            for (const auto& p : peaks) hit = hit || std::abs(p.omega / (2 * kPi) - fi) <= bin * (1 + 1e-9);
            if (!hit) {
                ++missed;
                o.detail << "missed " << fi << " Hz; ";
            }
        }
        for (const auto& p : peaks) {
            bool near = false;
            for (double fi : f) near = near || std::abs(p.omega / (2 * kPi) - fi) <= bin * (1 + 1e-9);
            if (!near) {
                ++spurious;
                o.detail << "spurious " << p.omega / (2 * kPi) << " Hz; ";
            }
        }
    }
    o.detail << "5 systems x 5 modes: missed " << missed << ", spurious " << spurious;
    o.require(missed == 0, "every mode detected within one bin");
    o.require(spurious == 0, "no spurious peaks");
}

void large_system(Outcome& o) {
    SynthSpec spec;
    spec.n_outputs = 4;
    spec.n_inputs = 13;
    spec.n_rbm = 3;
    spec.n_flex = 17;
    spec.f_lo_hz = 20.0;
    spec.f_hi_hz = 1000.0;
    spec.zeta_lo = 0.005;
    spec.zeta_hi = 0.05;
    spec.damping = DampingModel::general;
    spec.seed = 3;
    spec.peak_height = 1.0;
    const ModalParameters truth = random_modal_system(spec);
    const FrfDataset data = simulate_frf(truth, FrequencyGrid::log_spaced_hz(5.0, 2000.0, 2000), 0.01, 4);

    FitConfig cfg;
    cfg.damping = DampingModel::general;
    cfg.n_rbm = 3;
    cfg.flexible.use_cmif = true;
    cfg.flexible.max_modes = 17;
    cfg.riv.max_iterations = 10;
    cfg.ipem.max_iterations = 40;
    const auto t0 = Clock::now();
    const FitState st = run_fit(data, cfg);
    const double elapsed = seconds_since(t0);
    g_traces.push_back({"large system", st.ipem->trace});

    const double c1 = st.riv->cost_trace.back(), c2 = st.modal_cost_trace.back();
    double worst_ratio = 0.0;
    std::size_t n_flex_diag = 0;
    double rigid_ratio = 0.0;
    for (const auto& d : st.init->diagnostics) {
        if (d.singular_values.size() < 2) continue;
        const double ratio = d.singular_values[1] / d.singular_values[0];
        if (d.label.find("rigid") != std::string::npos) {
            rigid_ratio = d.singular_values.size() > 2 ? d.singular_values[2] / d.singular_values[0] : ratio;
            continue;
        }
        ++n_flex_diag;
        worst_ratio = std::max(worst_ratio, ratio);
    }
    o.detail << "runtime " << elapsed << " s, states " << st.ss->n_states() << ", stage1 cost " << c1
             << ", stage2 modal cost " << c2 << " (ratio " << c2 / c1 << "), worst flexible sigma2/sigma1 "
             << worst_ratio << " over " << n_flex_diag << " modes, rigid sigma3/sigma1 " << rigid_ratio;
    o.require(elapsed < 120.0, "runtime < 120 s");
    o.require(st.ss->n_states() == 40, "40 states");
    o.require(c2 <= 2.0 * c1, "stage-2 within 2x stage-1");
    o.require(n_flex_diag == 17 && worst_ratio < 0.1, "dominant first singular value on flexible modes");
}

void descent(Outcome& o) {
    int violations = 0;
    for (const auto& [name, trace] : g_traces) {
        for (std::size_t k = 1; k < trace.size(); ++k)
            if (trace[k].objective > trace[k - 1].objective) {
                ++violations;
                o.detail << name << " step " << k << "; ";
            }
    }
    o.detail << g_traces.size() << " runs, violations " << violations;
    o.require(!g_traces.empty() && violations == 0, "non-increasing objective");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"noiseless round trip, proportional damping", [](Outcome& o) { noiseless_round_trip(o, DampingModel::proportional); }},
        {"noiseless round trip, general damping", [](Outcome& o) { noiseless_round_trip(o, DampingModel::general); }},
        {"noisy consistency", noisy_consistency},
        {"jacobian suites", jacobian_suites},
        {"pseudolinear identity", pseudolinear_identity},
        {"eckart-young", eckart_young},
        {"covariance calibration", covariance_calibration},
        {"realization equivalence", realization_equivalence},
        {"mech_to_modal equivalence", mech_equivalence},
        {"cmif peaks", cmif_peaks},
        {"4x13 pipeline, 40 states", large_system},
        {"descent property", descent},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        if (!o.pass) ++failures;
        std::printf("%s %2zu %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    seconds_since(t0), o.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
