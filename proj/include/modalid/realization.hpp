#pragma once

#include "modalid/modal_model.hpp"
#include "modalid/types.hpp"

namespace modalid {

struct StateSpace {
    MatrixXd a;
    MatrixXd b;
    MatrixXd c;
    MatrixXd d;

    Index n_states() const { return a.rows(); }
    /// Throws ConfigError on inconsistent dimensions or non-finite entries.
    void validate() const;
};

/// Real block-diagonal realization with one 2x2 block per rigid-body and flexible mode.
StateSpace realize(const ModalParameters& rho);

/// C (sI - A)^-1 B + D.
MatrixXcd eval_ss(const StateSpace& ss, Complex s);

}  // namespace modalid
