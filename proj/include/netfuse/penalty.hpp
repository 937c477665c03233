#pragma once

#include <Eigen/Dense>

#include "netfuse/operators.hpp"
#include "netfuse/params.hpp"

namespace netfuse {

// Penalty weights and the ADMM step size.
struct PenaltyConfig {
    double lambda = 0.0;    // l1 on the interaction parameters
    double lambda_n = 0.0;  // network fusion weight
    double lambda_h = 0.0;  // hourly fusion weight
    double rho = 1.0;       // ADMM penalty parameter

    void validate() const
    {
        if (lambda < 0 || lambda_n < 0 || lambda_h < 0)
            throw ValidationError("penalty weights must be non-negative");
        if (!(rho > 0)) throw ValidationError("rho must be positive");
    }
};

// Group soft-threshold: (1 - kappa/||v||)_+ v, with 0 mapped to 0.
Eigen::VectorXd group_soft_threshold(const Eigen::VectorXd& v, double kappa);

// Scalar case: sign(x) max(|x| - kappa, 0).
inline double scalar_soft_threshold(double x, double kappa)
{
    if (x > kappa) return x - kappa;
    if (x < -kappa) return x + kappa;
    return 0.0;
}

// Network fusion penalty: per station, sqrt(|N(s)| * sum over neighbors of
// [2 (theta_s - theta_s')^2 + hour and day interaction differences squared]).
double eval_p_n(const ParamState& p, const ProximityGraph& graph);

// The same value computed from the phi parameterization; the two agree to
// rounding because the shared effects cancel in between-station differences.
double eval_p_n_phi_form(const ParamState& p, const ProximityGraph& graph);

// Hourly fusion penalty: sum over stations of the cyclic total variation of the
// hourly profile phi_hod(s, .), with hour H wrapping to hour 0.
double eval_p_h(const ParamState& p);

// Flat-vector forms used by the solver (interaction blocks may carry all S rows).
double eval_p_n_flat(const Eigen::VectorXd& beta, const ConstraintOps& ops);
double eval_p_h_flat(const Eigen::VectorXd& beta, const ConstraintOps& ops);
double eval_l1_interactions(const Eigen::VectorXd& beta, const FlatLayout& layout);

// Per-station group soft-threshold of (S_gamma - T_gamma) with threshold
// lambda_n sqrt(|N(s)|) / rho. This is the exact minimizer of the gamma
// subproblem in ADMM step 1.
Eigen::VectorXd update_gamma(const Eigen::VectorXd& s_gamma, const Eigen::VectorXd& t_gamma,
                             const PenaltyConfig& cfg, const ConstraintOps& ops);

// Entrywise soft-threshold of (S_psi - T_psi) with threshold lambda_h / rho.
Eigen::VectorXd update_psi(const Eigen::VectorXd& s_psi, const Eigen::VectorXd& t_psi,
                           const PenaltyConfig& cfg);

}  // namespace netfuse
