#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modalid/additive_model.hpp"
#include "modalid/frf.hpp"
#include "modalid/hermitian_sequence.hpp"

namespace modalid {

enum class Stabilization { reflect, positivity };

Stabilization parse_stabilization(const std::string& name);
std::string to_string(Stabilization mode);

struct RivOptions {
    int max_iterations = 10;
    double relative_tolerance = 1e-9;
    Stabilization stabilization = Stabilization::reflect;

    void validate() const;
};

/// Parameter covariance of the additive estimate together with the
/// information matrix it was inverted from.
struct CovarianceEstimate {
    MatrixXd matrix;
    MatrixXd information;
    AdditiveStructure structure;
    /// Built from an identity FRF covariance: only the geometry is meaningful.
    bool relative_only = false;

    std::vector<std::string> parameter_names() const;
};

struct RivResult {
    AdditiveParameters params;
    /// Weighted cost at the initial estimate and after every iteration.
    std::vector<double> cost_trace;
    /// Relative parameter change of every iteration.
    std::vector<double> relative_changes;
    bool converged = false;
};

/// Weighted LS fit of every numerator with the denominators held fixed.
/// `denominators[i]` holds a_{i,1..n_i}.
AdditiveParameters init_numerators(const FrfDataset& data, const AdditiveStructure& structure,
                                   const std::vector<VectorXd>& denominators, const HermitianSequence& weights);

RivResult riv_iterate(const FrfDataset& data, const AdditiveParameters& initial, const HermitianSequence& weights,
                      const RivOptions& opts = {});

/// Enforces stable denominators; parameters already stable pass through unchanged.
AdditiveParameters stabilize(const AdditiveParameters& params, Stabilization mode = Stabilization::reflect);

/// Covariance of the estimate from the FRF covariance; without one (or with a
/// singular one) an identity FRF covariance is used and the result is flagged.
CovarianceEstimate covariance(const FrfDataset& data, const AdditiveParameters& estimate,
                              const std::optional<HermitianSequence>& frf_covariance);

/// Gradient sum_k Re{Phi_hat W vec(E)} of the weighted cost and the norm of its
/// largest single-frequency term.
struct OptimalityResidual {
    VectorXd gradient;
    double largest_term = 0.0;
};

OptimalityResidual optimality_residual(const FrfDataset& data, const AdditiveParameters& params,
                                       const HermitianSequence& weights);

}  // namespace modalid
