#include "netfuse/operators.hpp"

#include <cmath>

namespace netfuse {

ConstraintOps::ConstraintOps(const ProximityGraph& graph, const CalendarDims& dims)
    : graph_(&graph), layout_(graph.n_stations, dims), M_(graph.n_pairs())
{
    dims.validate();
}

Eigen::VectorXd ConstraintOps::apply_dtheta(const Eigen::VectorXd& x) const
{
    if (x.size() != layout_.proj_dim()) throw ValidationError("apply_dtheta: wrong input length");
    const auto& g = *graph_;
    Eigen::VectorXd out(gamma_dim());
    const int S = layout_.S;
    for (int d = 0; d < layout_.Do; ++d) {
        const int off = gamma_dow_offset(d);
        const int blk = d * S;
        for (int e = 0; e < M_; ++e) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            out[off + e] = (x[layout_.theta(s)] - x[layout_.theta(sp)]) +
                           (x[blk + s] - x[blk + sp]);
        }
    }
    for (int h = 0; h < layout_.Ho; ++h) {
        const int off = gamma_hod_offset(h);
        const int blk = S * layout_.Do + S + h * S;
        for (int e = 0; e < M_; ++e) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            out[off + e] = (x[layout_.theta(s)] - x[layout_.theta(sp)]) +
                           (x[blk + s] - x[blk + sp]);
        }
    }
    {
        const int off = gamma_s2_offset();
        const double r2 = std::sqrt(2.0);
        for (int e = 0; e < M_; ++e) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            out[off + e] = r2 * (x[layout_.theta(s)] - x[layout_.theta(sp)]);
        }
    }
    return out;
}

void ConstraintOps::apply_dtheta_t(const Eigen::VectorXd& gvec, Eigen::Ref<Eigen::VectorXd> out) const
{
    if (gvec.size() != gamma_dim() || out.size() != layout_.proj_dim())
        throw ValidationError("apply_dtheta_t: wrong vector length");
    const auto& g = *graph_;
    const int S = layout_.S;
    for (int d = 0; d < layout_.Do; ++d) {
        const int off = gamma_dow_offset(d);
        const int blk = d * S;
        for (int e = 0; e < M_; ++e) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            const double v = gvec[off + e];
            out[layout_.theta(s)] += v;
            out[layout_.theta(sp)] -= v;
            out[blk + s] += v;
            out[blk + sp] -= v;
        }
    }
    for (int h = 0; h < layout_.Ho; ++h) {
        const int off = gamma_hod_offset(h);
        const int blk = S * layout_.Do + S + h * S;
        for (int e = 0; e < M_; ++e) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            const double v = gvec[off + e];
            out[layout_.theta(s)] += v;
            out[layout_.theta(sp)] -= v;
            out[blk + s] += v;
            out[blk + sp] -= v;
        }
    }
    {
        const int off = gamma_s2_offset();
        const double r2 = std::sqrt(2.0);
        for (int e = 0; e < M_; ++e) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            const double v = r2 * gvec[off + e];
            out[layout_.theta(s)] += v;
            out[layout_.theta(sp)] -= v;
        }
    }
}

Eigen::VectorXd ConstraintOps::apply_dh(const Eigen::VectorXd& x) const
{
    if (x.size() != layout_.proj_dim()) throw ValidationError("apply_dh: wrong input length");
    const int S = layout_.S, Ho = layout_.Ho;
    Eigen::VectorXd out(psi_dim());
    auto eta = [&](int s, int h) {  // deviation of hour h (1-based free index h) from hour 0
        return x[layout_.shared_hod(h - 1)] + x[layout_.hod_int(h - 1, s)];
    };
    for (int s = 0; s < S; ++s) {
        out[psi_index(s, 0)] = eta(s, 1);
        for (int h = 1; h < Ho; ++h)
            out[psi_index(s, h)] = eta(s, h + 1) - eta(s, h);
        out[psi_index(s, Ho)] = -eta(s, Ho);
    }
    return out;
}

void ConstraintOps::apply_dh_t(const Eigen::VectorXd& p, Eigen::Ref<Eigen::VectorXd> out) const
{
    if (p.size() != psi_dim() || out.size() != layout_.proj_dim())
        throw ValidationError("apply_dh_t: wrong vector length");
    const int S = layout_.S, Ho = layout_.Ho;
    auto add_eta = [&](int s, int h, double v) {
        out[layout_.shared_hod(h - 1)] += v;
        out[layout_.hod_int(h - 1, s)] += v;
    };
    for (int s = 0; s < S; ++s) {
        add_eta(s, 1, p[psi_index(s, 0)]);
        for (int h = 1; h < Ho; ++h) {
            const double v = p[psi_index(s, h)];
            add_eta(s, h + 1, v);
            add_eta(s, h, -v);
        }
        add_eta(s, Ho, -p[psi_index(s, Ho)]);
    }
}

Eigen::MatrixXd ConstraintOps::dtheta_dense() const
{
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(gamma_dim(), layout_.proj_dim());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout_.proj_dim());
    for (int c = 0; c < layout_.proj_dim(); ++c) {
        x[c] = 1.0;
        D.col(c) = apply_dtheta(x);
        x[c] = 0.0;
    }
    return D;
}

Eigen::MatrixXd ConstraintOps::dh_dense() const
{
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(psi_dim(), layout_.proj_dim());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout_.proj_dim());
    for (int c = 0; c < layout_.proj_dim(); ++c) {
        x[c] = 1.0;
        D.col(c) = apply_dh(x);
        x[c] = 0.0;
    }
    return D;
}

double ConstraintOps::group_squared_norm(const Eigen::VectorXd& gamma, int s) const
{
    const auto& g = *graph_;
    double acc = 0.0;
    for (int e = g.row_start[s]; e < g.row_start[s + 1]; ++e) {
        const double v = gamma[gamma_s2_offset() + e];
        acc += v * v;
        for (int h = 0; h < layout_.Ho; ++h) {
            const double u = gamma[gamma_hod_offset(h) + e];
            acc += u * u;
        }
        for (int d = 0; d < layout_.Do; ++d) {
            const double u = gamma[gamma_dow_offset(d) + e];
            acc += u * u;
        }
    }
    return acc;
}

void ConstraintOps::scale_group(Eigen::VectorXd& gamma, int s, double factor) const
{
    const auto& g = *graph_;
    for (int e = g.row_start[s]; e < g.row_start[s + 1]; ++e) {
        gamma[gamma_s2_offset() + e] *= factor;
        for (int h = 0; h < layout_.Ho; ++h) gamma[gamma_hod_offset(h) + e] *= factor;
        for (int d = 0; d < layout_.Do; ++d) gamma[gamma_dow_offset(d) + e] *= factor;
    }
}

}  // namespace netfuse
