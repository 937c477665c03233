#pragma once

#include <Eigen/Dense>

#include "netfuse/panel.hpp"
#include "netfuse/params.hpp"

namespace netfuse {

// Linear predictors are clamped to this range before exponentiation; at
// realistic parameter scales the clamp is inactive.
inline constexpr double kEtaClamp = 40.0;
// Fitted means are floored here when used as IRLS weights or divisors.
inline constexpr double kMuFloor = 1e-10;

struct ModelOptions {
    double time_scale = 1.0;  // multiplier applied to the raw day index t
    int threads = 1;
};

// Offsets log C_s per observation cell are implied by the registry capacities.
// The offset enters the mean but never the penalized design.
struct Offsets {
    Eigen::VectorXd log_capacity;  // per station

    static Offsets from(const StationRegistry& reg);
};

double linear_predictor(const ParamState& p, const RentalPanel& panel, int s, int t, int h,
                        double time_scale = 1.0);

// mu = C_s * exp(eta), with eta clamped to +-kEtaClamp.
double mean_at(const ParamState& p, const RentalPanel& panel, const Offsets& off, int s, int t,
               int h, double time_scale = 1.0);

// Sum_i mu_i - sum_i y_i log mu_i (the additive constant is dropped).
double neg_loglik(const ParamState& p, const RentalPanel& panel, const Offsets& off,
                  const ModelOptions& opt = {});

// Per-observation IRLS working set: weights w_i = mu_i (floored) and working
// response z_i = eta_i + y_i / mu_i - 1, with eta excluding the offset.
struct IrlsWorkingSet {
    Eigen::VectorXd weights;
    Eigen::VectorXd response;
    Eigen::VectorXd eta;
};

IrlsWorkingSet irls_working_set(const ParamState& p, const RentalPanel& panel,
                                const Offsets& off, const ModelOptions& opt = {});

enum class ModelKind { no_interaction, full_interaction };

struct FitOptions {
    double tol = 1e-7;       // max absolute score component at convergence
    int max_iter = 100;
    double ridge = 1e-8;     // jitter on the normal equations (separation guard)
    double time_scale = 1.0;
    int threads = 1;
};

struct FitReport {
    int iterations = 0;
    double max_score = 0.0;
    double neg_loglik = 0.0;
    bool converged = false;
};

// Unpenalized maximum-likelihood fit by iteratively reweighted least squares.
// The design uses the identifiable parameterization: baselines and the first
// station's interactions are structural zeros.
ParamState fit_unpenalized(const RentalPanel& panel, const StationRegistry& reg, ModelKind kind,
                           const FitOptions& opt = {}, FitReport* report = nullptr);

// Gradient of neg_loglik with respect to the free parameters of `kind`, in the
// order used by fit_unpenalized. Exposed for the finite-difference checks.
Eigen::VectorXd neg_loglik_gradient(const ParamState& p, const RentalPanel& panel,
                                    const StationRegistry& reg, ModelKind kind,
                                    double time_scale = 1.0);
int free_param_count(const RentalPanel& panel, ModelKind kind);
ParamState state_from_free(const Eigen::VectorXd& free, const RentalPanel& panel, ModelKind kind);
Eigen::VectorXd free_from_state(const ParamState& p, const RentalPanel& panel, ModelKind kind);

}  // namespace netfuse
