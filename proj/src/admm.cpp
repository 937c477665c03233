#include "netfuse/admm.hpp"

#include <algorithm>
#include <cmath>

namespace netfuse {

PanelDesign::PanelDesign(const RentalPanel& panel, const StationRegistry& reg,
                         const FlatLayout& layout, double time_scale)
    : layout_(layout), n_(panel.n_obs())
{
    if (reg.size() != panel.n_stations())
        throw ValidationError("registry and panel station counts differ");
    if (n_ > std::numeric_limits<std::int32_t>::max())
        throw ValidationError("panel too large for the design index type");
    const int S = panel.n_stations(), T = panel.n_days(), H = panel.n_hours();

    y_.resize(n_);
    offset_.resize(n_);
    const Offsets off = Offsets::from(reg);
    for (int s = 0; s < S; ++s)
        for (int t = 0; t < T; ++t)
            for (int h = 0; h < H; ++h) {
                const auto i = panel.cell(s, t, h);
                y_[i] = panel.counts[i];
                offset_[i] = off.log_capacity[s];
            }

    col_ptr_.assign(layout_.beta_dim() + 1, 0);
    auto cell = [&](int s, int t, int h) { return std::int32_t(panel.cell(s, t, h)); };
    auto push = [&](std::int32_t i, double v) {
        row_idx_.push_back(i);
        val_.push_back(v);
    };

    for (int c = 0; c < layout_.beta_dim(); ++c) {
        if (c < S * layout_.Do) {  // day-of-week interactions, category-major
            const int d = c / S, s = c % S;
            for (int t = 0; t < T; ++t)
                if (panel.day_of_week[t] == d + 1)
                    for (int h = 0; h < H; ++h) push(cell(s, t, h), 1.0);
        } else if (c < S * layout_.Do + S) {  // station intercepts
            const int s = c - S * layout_.Do;
            for (int t = 0; t < T; ++t)
                for (int h = 0; h < H; ++h) push(cell(s, t, h), 1.0);
        } else if (c < S * layout_.Do + S + S * layout_.Ho) {  // hourly interactions
            const int k = c - S * layout_.Do - S;
            const int h = k / S, s = k % S;
            for (int t = 0; t < T; ++t) push(cell(s, t, h + 1), 1.0);
        } else if (c < layout_.proj_dim()) {  // shared hourly effects
            const int h = c - (S * layout_.Do + S + S * layout_.Ho);
            for (int s = 0; s < S; ++s)
                for (int t = 0; t < T; ++t) push(cell(s, t, h + 1), 1.0);
        } else if (c < layout_.consensus_dim()) {  // shared day effects
            const int d = c - layout_.proj_dim();
            for (int s = 0; s < S; ++s)
                for (int t = 0; t < T; ++t)
                    if (panel.day_of_week[t] == d + 1)
                        for (int h = 0; h < H; ++h) push(cell(s, t, h), 1.0);
        } else {  // delta block
            const int k = c - layout_.consensus_dim();
            if (k == 0) {
                for (int s = 0; s < S; ++s)
                    for (int t = 0; t < T; ++t) {
                        const double tv = panel.time_index[t] * time_scale;
                        if (tv == 0.0) continue;
                        for (int h = 0; h < H; ++h) push(cell(s, t, h), tv);
                    }
            } else if (k == 1) {
                for (int s = 0; s < S; ++s)
                    for (int t = 0; t < T; ++t)
                        if (panel.rain[t])
                            for (int h = 0; h < H; ++h) push(cell(s, t, h), 1.0);
            } else {
                for (int s = 0; s < S; ++s)
                    for (int t = 0; t < T; ++t)
                        if (static_cast<int>(panel.air[t]) == k - 1)
                            for (int h = 0; h < H; ++h) push(cell(s, t, h), 1.0);
            }
        }
        col_ptr_[c + 1] = static_cast<std::int64_t>(row_idx_.size());
    }
}

Eigen::VectorXd PanelDesign::predictor(const Eigen::VectorXd& beta) const
{
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n_);
    for (int c = 0; c < layout_.beta_dim(); ++c) {
        const double b = beta[c];
        if (b == 0.0) continue;
        for_column(c, [&](std::int32_t i, double v) { eta[i] += v * b; });
    }
    return eta;
}

void PanelDesign::add_xt(const Eigen::VectorXd& v, Eigen::Ref<Eigen::VectorXd> out) const
{
    for (int c = 0; c < layout_.beta_dim(); ++c) {
        double acc = 0.0;
        for_column(c, [&](std::int32_t i, double x) { acc += x * v[i]; });
        out[c] += acc;
    }
}

double PanelDesign::neg_loglik(const Eigen::VectorXd& eta) const
{
    return ChunkedSum::sum(std::size_t(n_), [&](std::size_t i) {
        const double lp = std::clamp(eta[i] + offset_[i], -kEtaClamp, kEtaClamp);
        return std::exp(lp) - y_[i] * lp;
    });
}

void PanelDesign::working_set(const Eigen::VectorXd& eta, Eigen::VectorXd& w,
                              Eigen::VectorXd& z) const
{
    w.resize(n_);
    z.resize(n_);
    for (std::int64_t i = 0; i < n_; ++i) {
        const double mu =
            std::exp(std::clamp(eta[i] + offset_[i], -kEtaClamp, kEtaClamp));
        w[i] = std::max(mu, kMuFloor);
        z[i] = eta[i] + y_[i] / w[i] - 1.0;
    }
}

AdmmState AdmmState::cold(const ConstraintOps& ops, double rho)
{
    const FlatLayout& L = ops.layout();
    AdmmState st;
    st.beta = Eigen::VectorXd::Zero(L.beta_dim());
    st.gamma = Eigen::VectorXd::Zero(ops.gamma_dim());
    st.psi = Eigen::VectorXd::Zero(ops.psi_dim());
    st.z = Eigen::VectorXd::Zero(L.consensus_dim());
    st.u = Eigen::VectorXd::Zero(L.consensus_dim());
    st.s_gamma = Eigen::VectorXd::Zero(ops.gamma_dim());
    st.t_gamma = Eigen::VectorXd::Zero(ops.gamma_dim());
    st.s_psi = Eigen::VectorXd::Zero(ops.psi_dim());
    st.t_psi = Eigen::VectorXd::Zero(ops.psi_dim());
    st.rho = rho;
    return st;
}

AdmmProblem::AdmmProblem(const RentalPanel& panel, const StationRegistry& reg,
                         const ProjectionPlan& plan, double time_scale)
    : panel_(&panel),
      plan_(&plan),
      design_(panel, reg, plan.ops().layout(), time_scale),
      time_scale_(time_scale)
{
    if (plan.ops().layout().S != panel.n_stations())
        throw ValidationError("projection plan and panel station counts differ");
    if (plan.ops().layout().Ho != panel.dims.hours_free() ||
        plan.ops().layout().Do != panel.dims.dows_free())
        throw ValidationError("projection plan and panel calendar dimensions differ");
}

double AdmmProblem::objective(const Eigen::VectorXd& beta, const PenaltyConfig& cfg) const
{
    const ConstraintOps& co = ops();
    double obj = design_.neg_loglik(design_.predictor(beta));
    if (cfg.lambda > 0) obj += cfg.lambda * eval_l1_interactions(beta, co.layout());
    if (cfg.lambda_n > 0) obj += cfg.lambda_n * eval_p_n_flat(beta, co);
    if (cfg.lambda_h > 0) obj += cfg.lambda_h * eval_p_h_flat(beta, co);
    return obj;
}

namespace {

// Inner objective of the primal update: the exact Poisson negative
// log-likelihood plus the l1 term and the proximal damping toward z - u.
double step1_objective(const PanelDesign& design, const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& eta, double lambda, double rho,
                       const Eigen::VectorXd& m)
{
    const FlatLayout& L = design.layout();
    double obj = design.neg_loglik(eta);
    if (lambda > 0) obj += lambda * eval_l1_interactions(beta, L);
    double prox = 0.0;
    for (int c = 0; c < L.consensus_dim(); ++c) {
        const double d = beta[c] - m[c];
        prox += d * d;
    }
    return obj + 0.5 * rho * prox;
}

}  // namespace

double AdmmProblem::step1_kkt_violation(const AdmmState& st, const PenaltyConfig& cfg,
                                        const Eigen::VectorXd& eta,
                                        const Eigen::VectorXd& m) const
{
    const FlatLayout& L = design_.layout();
    Eigen::VectorXd mu(design_.n_obs());
    for (std::int64_t i = 0; i < design_.n_obs(); ++i)
        mu[i] = std::exp(std::clamp(eta[i] + design_.offset()[i], -kEtaClamp, kEtaClamp));
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(L.beta_dim());
    design_.add_xt(mu - design_.y(), grad);
    grad.head(L.consensus_dim()) += st.rho * (st.beta.head(L.consensus_dim()) - m);
    double viol = 0.0;
    for (int c = 0; c < L.beta_dim(); ++c) {
        double v;
        if (cfg.lambda > 0 && L.is_interaction(c)) {
            if (st.beta[c] != 0.0)
                v = std::abs(grad[c] + cfg.lambda * (st.beta[c] > 0 ? 1.0 : -1.0));
            else
                v = std::max(0.0, std::abs(grad[c]) - cfg.lambda);
        } else {
            v = std::abs(grad[c]);
        }
        viol = std::max(viol, v);
    }
    return viol;
}

double AdmmProblem::step1_primal(AdmmState& st, const PenaltyConfig& cfg,
                                 const AdmmOptions& opt) const
{
    const FlatLayout& L = design_.layout();
    const int p = L.beta_dim();
    const int cons = L.consensus_dim();
    const double rho = st.rho;
    const Eigen::VectorXd m = st.z - st.u;

    Eigen::VectorXd eta = design_.predictor(st.beta);
    Eigen::VectorXd w, zw, acol(p);
    double best_obj = step1_objective(design_, st.beta, eta, cfg.lambda, rho, m);

    // gradient entries are sums of (mu - y) over column supports, so the total
    // count is the natural magnitude for the optimality tolerance
    const double kkt_tol = opt.inner_tol * std::max(1.0, design_.y().sum());
    double kkt = std::numeric_limits<double>::infinity();
    const int max_refresh = 2 * opt.irls_passes + 6;

    for (int pass = 0; pass < max_refresh; ++pass) {
        if (pass >= opt.irls_passes) {
            // nominal refresh budget spent: keep going only while the
            // subproblem optimality is genuinely unmet
            kkt = step1_kkt_violation(st, cfg, eta, m);
            if (kkt <= kkt_tol) break;
        }
        design_.working_set(eta, w, zw);
        // curvature per column under the current weights
        for (int c = 0; c < p; ++c) {
            double acc = 0.0;
            design_.for_column(c, [&](std::int32_t i, double x) { acc += w[i] * x * x; });
            acol[c] = acc + (c < cons ? rho : 0.0);
        }
        const double scale =
            std::max(1.0, w.dot(zw.cwiseProduct(zw)) / double(design_.n_obs()));

        const Eigen::VectorXd beta_prev = st.beta;
        Eigen::VectorXd r = eta - zw;  // residual of the quadratic model

        for (int sweep = 0; sweep < opt.inner_max_passes; ++sweep) {
            double max_change = 0.0;
            for (int c = 0; c < p; ++c) {
                if (acol[c] <= 0.0) continue;
                double g = 0.0;
                design_.for_column(c, [&](std::int32_t i, double x) { g += w[i] * x * r[i]; });
                const double old = st.beta[c];
                double grad = g;
                if (c < cons) grad += rho * (old - m[c]);
                double next;
                if (cfg.lambda > 0 && L.is_interaction(c))
                    next = scalar_soft_threshold(acol[c] * old - grad, cfg.lambda) / acol[c];
                else
                    next = old - grad / acol[c];
                const double diff = next - old;
                if (diff != 0.0) {
                    st.beta[c] = next;
                    design_.for_column(c, [&](std::int32_t i, double x) { r[i] += x * diff; });
                    max_change = std::max(max_change, acol[c] * diff * diff);
                }
            }
            if (max_change <= opt.inner_tol * scale) break;
        }

        eta = r + zw;
        double obj = step1_objective(design_, st.beta, eta, cfg.lambda, rho, m);
        // the quadratic model can overshoot the Poisson likelihood; halve back
        int halvings = 0;
        while (obj > best_obj + 1e-12 * std::abs(best_obj) && halvings < 8) {
            st.beta = 0.5 * (st.beta + beta_prev);
            eta = design_.predictor(st.beta);
            obj = step1_objective(design_, st.beta, eta, cfg.lambda, rho, m);
            ++halvings;
        }
        if (obj > best_obj) {  // no improvement at all: restore and stop refreshing
            st.beta = beta_prev;
            eta = design_.predictor(st.beta);
            break;
        }
        best_obj = obj;
    }
    if (!std::isfinite(kkt)) kkt = step1_kkt_violation(st, cfg, eta, m);

    // the proximal thresholds follow the live (possibly adapted) step size
    PenaltyConfig live = cfg;
    live.rho = st.rho;
    st.gamma = update_gamma(st.s_gamma, st.t_gamma, live, ops());
    st.psi = update_psi(st.s_psi, st.t_psi, live);
    return kkt;
}

void AdmmProblem::step2_project(AdmmState& st) const
{
    const FlatLayout& L = design_.layout();
    const int pd = L.proj_dim();
    const Eigen::VectorXd x_target = st.beta.head(pd) + st.u.head(pd);
    const auto res = plan_->project(x_target, st.gamma + st.t_gamma, st.psi + st.t_psi);
    st.z.head(pd) = res.z;
    // shared day effects are untouched by the constraints and pass through
    st.z.segment(pd, L.Do) = st.beta.segment(pd, L.Do) + st.u.segment(pd, L.Do);
    st.s_gamma = res.s_gamma;
    st.s_psi = res.s_psi;
}

std::pair<double, double> AdmmProblem::step3_dual(AdmmState& st, const Eigen::VectorXd& z_prev,
                                                  const Eigen::VectorXd& sg_prev,
                                                  const Eigen::VectorXd& sp_prev) const
{
    const FlatLayout& L = design_.layout();
    const int cons = L.consensus_dim();
    const Eigen::VectorXd pr_beta = st.beta.head(cons) - st.z;
    const Eigen::VectorXd pr_gamma = st.gamma - st.s_gamma;
    const Eigen::VectorXd pr_psi = st.psi - st.s_psi;
    st.u += pr_beta;
    st.t_gamma += pr_gamma;
    st.t_psi += pr_psi;
    const double r_pri = std::sqrt(pr_beta.squaredNorm() + pr_gamma.squaredNorm() +
                                   pr_psi.squaredNorm());
    const double r_dual =
        st.rho * std::sqrt((st.z - z_prev).squaredNorm() + (st.s_gamma - sg_prev).squaredNorm() +
                           (st.s_psi - sp_prev).squaredNorm());
    return {r_pri, r_dual};
}

SolveReport AdmmProblem::solve(const PenaltyConfig& cfg, const AdmmOptions& opt,
                               AdmmState& st) const
{
    cfg.validate();
    const FlatLayout& L = design_.layout();
    const double dim = double(L.consensus_dim() + ops().gamma_dim() + ops().psi_dim());
    const double sqrt_dim = std::sqrt(dim);

    const double kkt_tol = opt.inner_tol * std::max(1.0, design_.y().sum());

    SolveReport rep;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Eigen::VectorXd z_prev = st.z, sg_prev = st.s_gamma, sp_prev = st.s_psi;
        const double kkt = step1_primal(st, cfg, opt);
        step2_project(st);
        const auto [r_pri, r_dual] = step3_dual(st, z_prev, sg_prev, sp_prev);
        ++st.iterations;

        const double primal_scale =
            std::max(std::sqrt(st.beta.head(L.consensus_dim()).squaredNorm() +
                               st.gamma.squaredNorm() + st.psi.squaredNorm()),
                     std::sqrt(st.z.squaredNorm() + st.s_gamma.squaredNorm() +
                               st.s_psi.squaredNorm()));
        const double dual_scale = st.rho * std::sqrt(st.u.squaredNorm() +
                                                     st.t_gamma.squaredNorm() +
                                                     st.t_psi.squaredNorm());
        const double eps_pri = sqrt_dim * opt.eps_abs + opt.eps_rel * primal_scale;
        const double eps_dual = sqrt_dim * opt.eps_abs + opt.eps_rel * dual_scale;

        rep.iterations = it;
        rep.primal_residual = r_pri;
        rep.dual_residual = r_dual;
        rep.step1_kkt = kkt;

        if (opt.log_callback && opt.log_every > 0 &&
            (it % opt.log_every == 0 || (r_pri <= eps_pri && r_dual <= eps_dual)))
            opt.log_callback(it, r_pri, r_dual, st.rho, objective(feasible_flat(st), cfg));

        // consensus residuals can dip while the primal subproblem is still off
        // its optimum, so convergence also requires the step-1 check
        if (r_pri <= eps_pri && r_dual <= eps_dual && kkt <= 10.0 * kkt_tol) {
            rep.converged = true;
            break;
        }

        if (opt.adapt_rho && it % 10 == 0) {
            if (r_pri > 10.0 * r_dual && st.rho < 1e6) {
                st.rho *= 2.0;
                st.u *= 0.5;
                st.t_gamma *= 0.5;
                st.t_psi *= 0.5;
            } else if (r_dual > 10.0 * r_pri && st.rho > 1e-6) {
                st.rho *= 0.5;
                st.u *= 2.0;
                st.t_gamma *= 2.0;
                st.t_psi *= 2.0;
            }
        }
    }

    rep.rho = st.rho;
    rep.objective = objective(feasible_flat(st), cfg);
    return rep;
}

Eigen::VectorXd AdmmProblem::feasible_flat(const AdmmState& st) const
{
    const FlatLayout& L = design_.layout();
    Eigen::VectorXd beta = st.beta;
    beta.head(L.consensus_dim()) = st.z;
    return beta;
}

ParamState AdmmProblem::extract_params(const AdmmState& st) const
{
    ParamState p = design_.layout().from_flat(feasible_flat(st));
    p.normalize_gauge();
    return p;
}

std::pair<ParamState, SolveReport> solve_penalized(const RentalPanel& panel,
                                                   const StationRegistry& reg,
                                                   const ProximityGraph& graph,
                                                   const PenaltyConfig& cfg,
                                                   const AdmmOptions& opt)
{
    const ProjectionPlan plan(graph, panel.dims);
    const AdmmProblem prob(panel, reg, plan, opt.time_scale);
    AdmmState st = AdmmState::cold(prob.ops(), cfg.rho);
    const SolveReport rep = prob.solve(cfg, opt, st);
    return {prob.extract_params(st), rep};
}

}  // namespace netfuse
