#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modalid/additive_model.hpp"
#include "modalid/types.hpp"

namespace modalid {

enum class DampingModel { general, proportional };

DampingModel parse_damping_model(const std::string& name);
std::string to_string(DampingModel model);

/// Rigid-body mode with residue R = left * right^T over s^2.
struct RigidMode {
    VectorXd left;
    VectorXd right;
};

/// General viscous damping: residue L = left * right^T at the upper-half-plane eigenvalue.
struct GeneralMode {
    Complex lambda;
    VectorXcd left;
    VectorXcd right;
};

struct ProportionalMode {
    double omega = 0.0;
    double zeta = 0.0;
    VectorXd left;
    VectorXd right;
};

/// Sizes that fix the flat parameter layout of a modal model.
struct ModalLayout {
    DampingModel damping = DampingModel::general;
    Index n_outputs = 0;
    Index n_inputs = 0;
    std::size_t n_rbm = 0;
    std::size_t n_flex = 0;
    bool has_dc = false;

    /// Flat size per rigid mode, per flexible mode, and of the DC block.
    Index rigid_size() const { return n_outputs + n_inputs; }
    Index flex_size() const {
        return damping == DampingModel::general ? 2 + 2 * (n_outputs + n_inputs) : 2 + n_outputs + n_inputs;
    }
    Index dc_size() const { return has_dc ? n_outputs * n_inputs : 0; }
    Index parameter_count() const { return Index(n_rbm) * rigid_size() + Index(n_flex) * flex_size() + dc_size(); }
    Index flex_offset(std::size_t i) const { return Index(n_rbm) * rigid_size() + Index(i) * flex_size(); }
    Index dc_offset() const { return Index(n_rbm) * rigid_size() + Index(n_flex) * flex_size(); }

    bool operator==(const ModalLayout&) const = default;
};

struct ModalParameters {
    DampingModel damping = DampingModel::general;
    Index n_outputs = 0;
    Index n_inputs = 0;
    std::vector<RigidMode> rigid;
    /// Filled for general damping.
    std::vector<GeneralMode> general;
    /// Filled for proportional damping.
    std::vector<ProportionalMode> proportional;
    std::optional<MatrixXd> dc_gain;

    std::size_t n_flex() const { return damping == DampingModel::general ? general.size() : proportional.size(); }
    ModalLayout layout() const;

    /// Throws ConfigError on shape mismatches or eigenvalues outside the admissible region.
    void validate() const;

    /// Layout per rigid mode [phi_l; phi_r]; general flexible mode
    /// [Re lambda, Im lambda, Re psi_l, Im psi_l, Re psi_r, Im psi_r];
    /// proportional flexible mode [omega, zeta, phi_l, phi_r]; then vec(dc_gain).
    VectorXd to_vector() const;
    static ModalParameters from_vector(const ModalLayout& layout, const VectorXd& rho);

    /// Flexible-mode eigenvalue (upper half plane), natural frequency, damping ratio, residue.
    Complex eigenvalue(std::size_t i) const;
    double natural_frequency(std::size_t i) const { return std::abs(eigenvalue(i)); }
    double damping_ratio(std::size_t i) const { return -eigenvalue(i).real() / std::abs(eigenvalue(i)); }
    MatrixXcd flex_residue(std::size_t i) const;
};

/// lambda = -zeta*omega + j*omega*sqrt(1 - zeta^2).
Complex eigenvalue_from(double omega, double zeta);

MatrixXcd eval_modal(const ModalParameters& rho, Complex s);

/// Additive structure produced by map_f: optional rigid-body submodel (l = 2),
/// one second-order submodel per flexible mode, optional constant DC submodel.
AdditiveStructure modal_structure(const ModalLayout& layout);

/// Modal parameters to additive parameters, denominators normalized to a unit constant term.
AdditiveParameters map_f(const ModalParameters& rho);

/// Monic second-order data [a1, a2, vec(N0), vec(N1)] of flexible mode i,
/// i.e. s^2 + a1 s + a2 over N1 s + N0.
VectorXd monic_mode_map(const ModalParameters& rho, std::size_t i);
/// Jacobian of monic_mode_map with respect to the flat parameters of mode i.
MatrixXd monic_mode_jacobian(const ModalParameters& rho, std::size_t i);

/// Block position of one submodel inside the Jacobian of map_f.
struct JacobianBlock {
    Index row_offset;
    Index rows;
    Index col_offset;
    Index cols;
};

std::vector<JacobianBlock> jacobian_blocks(const ModalLayout& layout);

/// d beta / d rho^T, dim(beta) x dim(rho); zero outside jacobian_blocks().
MatrixXd jacobian_f(const ModalParameters& rho);

/// Unit-norm left shapes with a real positive largest-magnitude entry.
ModalParameters normalize_gauge(const ModalParameters& rho);

}  // namespace modalid
