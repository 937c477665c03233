#include "netfuse/penalty.hpp"

#include <cmath>

namespace netfuse {

Eigen::VectorXd group_soft_threshold(const Eigen::VectorXd& v, double kappa)
{
    const double norm = v.norm();
    if (norm <= kappa || norm == 0.0) return Eigen::VectorXd::Zero(v.size());
    return (1.0 - kappa / norm) * v;
}

double eval_p_n(const ParamState& p, const ProximityGraph& graph)
{
    // Between-station differences of the phi surfaces: the shared temporal
    // effects cancel, the hour-0 and baseline-day terms contribute the
    // intercept difference twice, and every other term carries the intercept
    // difference plus the interaction difference.
    double total = 0.0;
    for (int s = 0; s < graph.n_stations; ++s) {
        const auto& nbrs = graph.neighbors[s];
        if (nbrs.empty()) continue;
        double acc = 0.0;
        for (int sp : nbrs) {
            const double dt = p.theta[s] - p.theta[sp];
            acc += 2.0 * dt * dt;
            for (int h = 0; h < p.hours_free(); ++h) {
                const double dv = dt + p.hod_int(s, h) - p.hod_int(sp, h);
                acc += dv * dv;
            }
            for (int d = 0; d < p.dows_free(); ++d) {
                const double dv = dt + p.dow_int(s, d) - p.dow_int(sp, d);
                acc += dv * dv;
            }
        }
        total += std::sqrt(double(nbrs.size()) * acc);
    }
    return total;
}

double eval_p_n_phi_form(const ParamState& p, const ProximityGraph& graph)
{
    double total = 0.0;
    for (int s = 0; s < graph.n_stations; ++s) {
        const auto& nbrs = graph.neighbors[s];
        if (nbrs.empty()) continue;
        double acc = 0.0;
        for (int sp : nbrs) {
            for (int h = 0; h <= p.hours_free(); ++h) {
                const double dv = p.phi_hod(s, h) - p.phi_hod(sp, h);
                acc += dv * dv;
            }
            for (int d = 0; d <= p.dows_free(); ++d) {
                const double dv = p.phi_dow(s, d) - p.phi_dow(sp, d);
                acc += dv * dv;
            }
        }
        total += std::sqrt(double(nbrs.size()) * acc);
    }
    return total;
}

double eval_p_h(const ParamState& p)
{
    const int H = p.hours_free() + 1;
    double total = 0.0;
    for (int s = 0; s < p.n_stations(); ++s)
        for (int h = 0; h < H; ++h) {
            const double a = p.phi_hod(s, h);
            const double b = p.phi_hod(s, (h + 1) % H);
            total += std::abs(a - b);
        }
    return total;
}

double eval_p_n_flat(const Eigen::VectorXd& beta, const ConstraintOps& ops)
{
    const auto& L = ops.layout();
    const auto& g = ops.graph();
    double total = 0.0;
    for (int s = 0; s < L.S; ++s) {
        const int deg = g.degree(s);
        if (deg == 0) continue;
        double acc = 0.0;
        for (int e = g.row_start[s]; e < g.row_start[s + 1]; ++e) {
            const int sp = g.pair_neighbor[e];
            const double dt = beta[L.theta(s)] - beta[L.theta(sp)];
            acc += 2.0 * dt * dt;
            for (int h = 0; h < L.Ho; ++h) {
                const double dv = dt + beta[L.hod_int(h, s)] - beta[L.hod_int(h, sp)];
                acc += dv * dv;
            }
            for (int d = 0; d < L.Do; ++d) {
                const double dv = dt + beta[L.dow_int(d, s)] - beta[L.dow_int(d, sp)];
                acc += dv * dv;
            }
        }
        total += std::sqrt(double(deg) * acc);
    }
    return total;
}

double eval_p_h_flat(const Eigen::VectorXd& beta, const ConstraintOps& ops)
{
    const auto& L = ops.layout();
    auto eta = [&](int s, int h) {  // deviation of hour h from hour 0; h in 0..Ho
        return h == 0 ? 0.0 : beta[L.shared_hod(h - 1)] + beta[L.hod_int(h - 1, s)];
    };
    const int H = L.Ho + 1;
    double total = 0.0;
    for (int s = 0; s < L.S; ++s)
        for (int h = 0; h < H; ++h) total += std::abs(eta(s, h) - eta(s, (h + 1) % H));
    return total;
}

double eval_l1_interactions(const Eigen::VectorXd& beta, const FlatLayout& layout)
{
    double total = 0.0;
    for (int c = 0; c < layout.proj_dim(); ++c)
        if (layout.is_interaction(c)) total += std::abs(beta[c]);
    return total;
}

Eigen::VectorXd update_gamma(const Eigen::VectorXd& s_gamma, const Eigen::VectorXd& t_gamma,
                             const PenaltyConfig& cfg, const ConstraintOps& ops)
{
    if (s_gamma.size() != ops.gamma_dim() || t_gamma.size() != ops.gamma_dim())
        throw ValidationError("update_gamma: block shapes do not match the graph");
    Eigen::VectorXd gamma = s_gamma - t_gamma;
    const auto& g = ops.graph();
    for (int s = 0; s < g.n_stations; ++s) {
        const int deg = g.degree(s);
        if (deg == 0) continue;
        const double kappa = cfg.lambda_n * std::sqrt(double(deg)) / cfg.rho;
        if (kappa == 0.0) continue;
        const double norm = std::sqrt(ops.group_squared_norm(gamma, s));
        const double factor = (norm <= kappa || norm == 0.0) ? 0.0 : (1.0 - kappa / norm);
        ops.scale_group(gamma, s, factor);
    }
    return gamma;
}

Eigen::VectorXd update_psi(const Eigen::VectorXd& s_psi, const Eigen::VectorXd& t_psi,
                           const PenaltyConfig& cfg)
{
    if (s_psi.size() != t_psi.size()) throw ValidationError("update_psi: shape mismatch");
    Eigen::VectorXd psi = s_psi - t_psi;
    const double kappa = cfg.lambda_h / cfg.rho;
    if (kappa > 0.0)
        for (int i = 0; i < psi.size(); ++i) psi[i] = scalar_soft_threshold(psi[i], kappa);
    return psi;
}

}  // namespace netfuse
