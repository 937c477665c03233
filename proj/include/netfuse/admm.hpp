#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "netfuse/model.hpp"
#include "netfuse/penalty.hpp"
#include "netfuse/projection.hpp"

namespace netfuse {

// Sparse design over the complete panel grid in the flat coordinate layout.
// Interaction blocks carry all S stations; identifiability is restored on
// reporting by shifting the first station's interactions into the shared
// effects, which leaves the mean surface and fusion structure unchanged.
class PanelDesign {
public:
    PanelDesign(const RentalPanel& panel, const StationRegistry& reg, const FlatLayout& layout,
                double time_scale);

    const FlatLayout& layout() const { return layout_; }
    std::int64_t n_obs() const { return n_; }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXd& offset() const { return offset_; }

    // eta = X beta (offset excluded)
    Eigen::VectorXd predictor(const Eigen::VectorXd& beta) const;
    // out += X^T v
    void add_xt(const Eigen::VectorXd& v, Eigen::Ref<Eigen::VectorXd> out) const;

    // column support iteration
    template <typename F>
    void for_column(int c, F&& fn) const
    {
        for (std::int64_t k = col_ptr_[c]; k < col_ptr_[c + 1]; ++k) fn(row_idx_[k], val_[k]);
    }
    std::int64_t col_nnz(int c) const { return col_ptr_[c + 1] - col_ptr_[c]; }

    double neg_loglik(const Eigen::VectorXd& eta) const;
    // weights w = exp(eta + offset) floored, working response z = eta + y/w - 1
    void working_set(const Eigen::VectorXd& eta, Eigen::VectorXd& w, Eigen::VectorXd& z) const;

private:
    FlatLayout layout_;
    std::int64_t n_;
    Eigen::VectorXd y_;
    Eigen::VectorXd offset_;  // per observation log capacity
    std::vector<std::int64_t> col_ptr_;
    std::vector<std::int32_t> row_idx_;
    std::vector<double> val_;
};

struct AdmmOptions {
    double eps_abs = 1e-5;
    double eps_rel = 1e-4;
    int max_iter = 2000;
    int irls_passes = 3;       // working-response refreshes per primal update
    double inner_tol = 1e-7;   // KKT violation target of the coordinate descent
    int inner_max_passes = 60;
    bool adapt_rho = true;     // residual balancing, factor 2 at ratio 10
    int log_every = 0;         // 0 silences iteration logging
    double time_scale = 1.0;
    int threads = 1;
    std::function<void(int iter, double r_primal, double r_dual, double rho, double objective)>
        log_callback;
};

struct SolveReport {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double step1_kkt = 0.0;  // optimality violation of the last primal update
    double objective = 0.0;  // penalized objective at the returned feasible point
    double rho = 0.0;
    bool converged = false;
};

// Full iterate of the solver; kept between grid points for warm starts.
struct AdmmState {
    Eigen::VectorXd beta;     // primal parameters (flat layout incl. delta)
    Eigen::VectorXd gamma;    // fusion auxiliaries
    Eigen::VectorXd psi;
    Eigen::VectorXd z;        // consensus copies of the penalized parameters
    Eigen::VectorXd u;        // scaled duals for beta - z
    Eigen::VectorXd s_gamma;  // projected auxiliaries
    Eigen::VectorXd t_gamma;
    Eigen::VectorXd s_psi;
    Eigen::VectorXd t_psi;
    double rho = 1.0;
    int iterations = 0;

    static AdmmState cold(const ConstraintOps& ops, double rho);
};

// One problem instance: panel data bound to a graph and a reusable projection
// plan (the plan may be shared across folds and penalty configurations).
class AdmmProblem {
public:
    AdmmProblem(const RentalPanel& panel, const StationRegistry& reg, const ProjectionPlan& plan,
                double time_scale = 1.0);

    const ProjectionPlan& plan() const { return *plan_; }
    const ConstraintOps& ops() const { return plan_->ops(); }
    const PanelDesign& design() const { return design_; }

    // Penalized objective at an arbitrary flat beta.
    double objective(const Eigen::VectorXd& beta, const PenaltyConfig& cfg) const;

    // Primal update (step 1): IRLS with an l1-penalized, proximally damped
    // weighted least-squares inner problem solved by coordinate descent, then
    // the closed-form gamma and psi proximal updates. Returns the remaining
    // optimality violation of the parameter subproblem.
    double step1_primal(AdmmState& st, const PenaltyConfig& cfg, const AdmmOptions& opt) const;
    // Projection (step 2).
    void step2_project(AdmmState& st) const;
    // Dual ascent (step 3); returns (primal residual, dual residual).
    std::pair<double, double> step3_dual(AdmmState& st, const Eigen::VectorXd& z_prev,
                                         const Eigen::VectorXd& sg_prev,
                                         const Eigen::VectorXd& sp_prev) const;

    SolveReport solve(const PenaltyConfig& cfg, const AdmmOptions& opt, AdmmState& st) const;

    // Feasible estimate: consensus blocks mapped back to a parameter state
    // (gauge-normalized), delta taken from the primal block.
    ParamState extract_params(const AdmmState& st) const;
    // Same point without gauge normalization, as a flat vector (objective checks).
    Eigen::VectorXd feasible_flat(const AdmmState& st) const;

private:
    double step1_kkt_violation(const AdmmState& st, const PenaltyConfig& cfg,
                               const Eigen::VectorXd& eta, const Eigen::VectorXd& m) const;

    const RentalPanel* panel_;
    const ProjectionPlan* plan_;
    PanelDesign design_;
    double time_scale_;
};

// Convenience wrapper: builds plan + problem, runs a cold-started solve.
std::pair<ParamState, SolveReport> solve_penalized(const RentalPanel& panel,
                                                   const StationRegistry& reg,
                                                   const ProximityGraph& graph,
                                                   const PenaltyConfig& cfg,
                                                   const AdmmOptions& opt = {});

}  // namespace netfuse
