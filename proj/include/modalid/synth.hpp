#pragma once

#include <cstdint>
#include <optional>

#include "modalid/frf.hpp"
#include "modalid/modal_model.hpp"
#include "modalid/types.hpp"

namespace modalid {

/// M q'' + D q' + K q = F u, y = Q q.
struct MechanicalSystem {
    MatrixXd m;
    MatrixXd d;
    MatrixXd k;
    MatrixXd f;
    MatrixXd q;

    Index n_dof() const { return m.rows(); }
    /// Throws ConfigError unless M is symmetric positive definite and K symmetric PSD.
    void validate() const;
    /// Q (M s^2 + D s + K)^-1 F.
    MatrixXcd transfer(Complex s) const;
};

struct SynthSpec {
    Index n_outputs = 1;
    Index n_inputs = 1;
    std::size_t n_rbm = 0;
    std::size_t n_flex = 1;
    double f_lo_hz = 1.0;
    double f_hi_hz = 100.0;
    double zeta_lo = 0.01;
    double zeta_hi = 0.05;
    DampingModel damping = DampingModel::general;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    /// When set, every flexible residue is scaled so that the resonance peak
    /// magnitude of its mode equals this value.
    std::optional<double> peak_height;

    void validate() const;
};

/// Natural frequencies log-uniform in the band with at least 5% relative separation.
ModalParameters random_modal_system(const SynthSpec& spec);

/// Eigenpairs of the first-order descriptor pencil (A - lambda E) v = 0 with
/// E = [[D, M], [M, 0]], A = [[-K, 0], [0, M]], scaled so v^T E v = 1.
struct DescriptorModes {
    MatrixXd e;
    MatrixXd a;
    VectorXcd eigenvalues;
    MatrixXcd vectors;
};

/// Requires K nonsingular.
DescriptorModes descriptor_modes(const MechanicalSystem& sys);

ModalParameters mech_to_modal(const MechanicalSystem& sys, DampingModel damping);

struct MechanicalSpec {
    Index n_dof = 4;
    Index n_outputs = 1;
    Index n_inputs = 1;
    DampingModel damping = DampingModel::general;
    /// Free-free chain (one rigid-body mode) instead of a grounded one.
    bool free_free = false;
    std::uint64_t seed = 0;
};

/// Random lightly damped spring-mass-damper chain.
MechanicalSystem random_mechanical_system(const MechanicalSpec& spec);

/// eval_modal on the grid plus element-wise relative circular Gaussian noise of
/// standard deviation gamma |G|; the covariance holds the exact variances.
FrfDataset simulate_frf(const ModalParameters& rho, const FrequencyGrid& grid, double gamma, std::uint64_t seed);

}  // namespace modalid
