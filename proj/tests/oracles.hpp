#pragma once

// Test-only reference implementations. Everything here recomputes expected
// values through routes independent of the solver paths under test: direct
// loops over the constraint definitions, finite differences, first-order
// reference optimizers and breadth-first component search.

#include <Eigen/Dense>
#include <cmath>
#include <queue>
#include <random>
#include <vector>

#include "netfuse/admm.hpp"
#include "netfuse/components.hpp"
#include "netfuse/operators.hpp"

namespace oracles {

using namespace netfuse;

// --- instance builders -----------------------------------------------------

// Registry with stations placed on a line, `spacing_m` apart.
inline StationRegistry line_registry(int S, double spacing_m, int capacity = 1)
{
    StationRegistry reg;
    for (int s = 0; s < S; ++s) {
        reg.ids.push_back("S" + std::to_string(s));
        reg.latitude.push_back(37.5 + s * (spacing_m / 111194.92664455873));
        reg.longitude.push_back(127.0);
        reg.capacity.push_back(capacity);
    }
    return reg;
}

// Registry with `n_clusters` tight clusters far apart: stations within a
// cluster are ~120 m apart, clusters are ~50 km apart.
inline StationRegistry clustered_registry(int S, int n_clusters, std::uint64_t seed,
                                          int capacity = 1)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-5e-4, 5e-4);
    StationRegistry reg;
    for (int s = 0; s < S; ++s) {
        const int c = s % n_clusters;
        reg.ids.push_back("S" + std::to_string(s));
        reg.latitude.push_back(37.0 + c * 0.5 + jitter(rng));
        reg.longitude.push_back(127.0 + jitter(rng));
        reg.capacity.push_back(capacity);
    }
    return reg;
}

inline StationRegistry random_registry(int S, double box_m, std::uint64_t seed, int capacity = 1)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, box_m / 111194.92664455873);
    StationRegistry reg;
    for (int s = 0; s < S; ++s) {
        reg.ids.push_back("S" + std::to_string(s));
        reg.latitude.push_back(37.0 + u(rng));
        reg.longitude.push_back(127.0 + u(rng));
        reg.capacity.push_back(capacity);
    }
    return reg;
}

inline ParamState random_params(int S, const CalendarDims& dims, std::uint64_t seed,
                                double scale = 0.5)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    ParamState p = ParamState::zeros(S, dims);
    for (int s = 0; s < S; ++s) p.theta[s] = g(rng);
    for (int h = 0; h < p.hours_free(); ++h) p.shared_hod[h] = g(rng);
    for (int d = 0; d < p.dows_free(); ++d) p.shared_dow[d] = g(rng);
    for (int s = 0; s < S; ++s) {
        for (int h = 0; h < p.hours_free(); ++h) p.hod_int(s, h) = g(rng);
        for (int d = 0; d < p.dows_free(); ++d) p.dow_int(s, d) = g(rng);
    }
    p.delta.alpha = 0.05 * g(rng);
    p.delta.beta_rain = g(rng);
    for (int k = 0; k < 3; ++k) p.delta.beta_air[k] = 0.3 * g(rng);
    return p;
}

// --- constraint operators by direct evaluation ------------------------------

// gamma entries straight from the constraint equations, same layout as
// ConstraintOps but computed with nothing shared.
inline Eigen::VectorXd gamma_direct(const ProximityGraph& g, const FlatLayout& L,
                                    const Eigen::VectorXd& x)
{
    const int M = g.n_pairs();
    Eigen::VectorXd out(M * (L.Do + L.Ho + 1));
    int row = 0;
    for (int d = 0; d < L.Do; ++d)
        for (int e = 0; e < M; ++e, ++row) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            out[row] = x[L.theta(s)] - x[L.theta(sp)] + x[L.dow_int(d, s)] - x[L.dow_int(d, sp)];
        }
    for (int h = 0; h < L.Ho; ++h)
        for (int e = 0; e < M; ++e, ++row) {
            const int s = g.pair_station[e], sp = g.pair_neighbor[e];
            out[row] = x[L.theta(s)] - x[L.theta(sp)] + x[L.hod_int(h, s)] - x[L.hod_int(h, sp)];
        }
    for (int e = 0; e < M; ++e, ++row) {
        const int s = g.pair_station[e], sp = g.pair_neighbor[e];
        out[row] = std::sqrt(2.0) * (x[L.theta(s)] - x[L.theta(sp)]);
    }
    return out;
}

inline Eigen::VectorXd psi_direct(const FlatLayout& L, const Eigen::VectorXd& x)
{
    const int H = L.Ho + 1;
    Eigen::VectorXd out(L.S * H);
    auto dev = [&](int s, int h) {  // deviation of hour h from hour 0
        return h == 0 ? 0.0 : x[L.shared_hod(h - 1)] + x[L.hod_int(h - 1, s)];
    };
    for (int s = 0; s < L.S; ++s) {
        out[s * H + 0] = dev(s, 1);
        for (int h = 1; h < H - 1; ++h) out[s * H + h] = dev(s, h + 1) - dev(s, h);
        out[s * H + H - 1] = -dev(s, H - 1);
    }
    return out;
}

// --- finite differences ------------------------------------------------------

template <typename F>
Eigen::VectorXd central_difference(F&& f, const Eigen::VectorXd& x, double step = 1e-6)
{
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (int i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// --- reference optimizers ----------------------------------------------------

// FISTA with backtracking for  nll(beta) + (rho/2)||beta_c - m||^2 + lambda*l1(ints).
// Reference for the ADMM primal update.
inline Eigen::VectorXd fista_step1(const PanelDesign& design, const Eigen::VectorXd& m,
                                   double lambda, double rho, int iters)
{
    const FlatLayout& L = design.layout();
    const int p = L.beta_dim();
    const int cons = L.consensus_dim();
    auto smooth = [&](const Eigen::VectorXd& b) {
        double v = design.neg_loglik(design.predictor(b));
        v += 0.5 * rho * (b.head(cons) - m).squaredNorm();
        return v;
    };
    auto grad = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd eta = design.predictor(b);
        Eigen::VectorXd mu(design.n_obs());
        for (std::int64_t i = 0; i < design.n_obs(); ++i)
            mu[i] = std::exp(std::clamp(eta[i] + design.offset()[i], -kEtaClamp, kEtaClamp));
        Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
        design.add_xt(mu - design.y(), g);
        g.head(cons) += rho * (b.head(cons) - m);
        return g;
    };
    auto prox = [&](Eigen::VectorXd b, double step) {
        for (int c = 0; c < p; ++c)
            if (L.is_interaction(c)) b[c] = scalar_soft_threshold(b[c], step * lambda);
        return b;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(p), v = x;
    double tk = 1.0, Lhat = std::max(rho, 1.0);
    for (int it = 0; it < iters; ++it) {
        const Eigen::VectorXd g = grad(v);
        const double fv = smooth(v);
        Eigen::VectorXd xn;
        for (;;) {
            xn = prox(v - g / Lhat, 1.0 / Lhat);
            const Eigen::VectorXd d = xn - v;
            if (smooth(xn) <= fv + g.dot(d) + 0.5 * Lhat * d.squaredNorm() + 1e-12) break;
            Lhat *= 2.0;
            if (Lhat > 1e14) break;
        }
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        v = xn + ((tk - 1.0) / tn) * (xn - x);
        x = xn;
        tk = tn;
    }
    return x;
}

// Primal-dual splitting reference for the full penalized objective: smooth
// Poisson likelihood, prox-friendly l1 on the interactions, dual prox for the
// fusion terms composed with the constraint operators. Step sizes adapt to the
// local likelihood curvature through a doubling backtick on the descent bound.
struct PrimalDualResult {
    Eigen::VectorXd beta;
    double best_objective = std::numeric_limits<double>::infinity();
};

inline PrimalDualResult primal_dual_reference(const AdmmProblem& prob, const PenaltyConfig& cfg,
                                              int iters)
{
    const PanelDesign& design = prob.design();
    const ConstraintOps& ops = prob.ops();
    const FlatLayout& L = design.layout();
    const int p = L.beta_dim();
    const int pd = L.proj_dim();
    const int gdim = ops.gamma_dim(), sdim = ops.psi_dim();

    auto apply_k = [&](const Eigen::VectorXd& b, Eigen::VectorXd& gam, Eigen::VectorXd& psi) {
        gam = ops.apply_dtheta(b.head(pd));
        psi = ops.apply_dh(b.head(pd));
    };
    auto apply_kt = [&](const Eigen::VectorXd& gam, const Eigen::VectorXd& psi) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
        auto head = out.head(pd);
        ops.apply_dtheta_t(gam, head);
        ops.apply_dh_t(psi, head);
        return out;
    };
    auto nll_grad = [&](const Eigen::VectorXd& b, double* val) {
        const Eigen::VectorXd eta = design.predictor(b);
        Eigen::VectorXd mu(design.n_obs());
        double f = 0.0;
        for (std::int64_t i = 0; i < design.n_obs(); ++i) {
            const double lp = std::clamp(eta[i] + design.offset()[i], -kEtaClamp, kEtaClamp);
            mu[i] = std::exp(lp);
            f += mu[i] - design.y()[i] * lp;
        }
        if (val) *val = f;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
        design.add_xt(mu - design.y(), g);
        return g;
    };

    // operator norm of K by power iteration
    Eigen::VectorXd v = Eigen::VectorXd::Random(p);
    v.tail(p - pd).setZero();
    double knorm = 1.0;
    for (int it = 0; it < 60; ++it) {
        Eigen::VectorXd gam, psi;
        apply_k(v, gam, psi);
        Eigen::VectorXd w = apply_kt(gam, psi);
        knorm = std::sqrt(w.norm());
        if (w.norm() == 0.0) break;
        v = w / w.norm();
    }
    knorm = std::max(knorm, 1e-6);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd yg = Eigen::VectorXd::Zero(gdim), yp = Eigen::VectorXd::Zero(sdim);
    double Lhat = 1.0;
    PrimalDualResult res;
    res.beta = x;

    auto objective = [&](const Eigen::VectorXd& b) { return prob.objective(b, cfg); };

    for (int it = 0; it < iters; ++it) {
        const double tau = 1.0 / (Lhat / 2.0 + knorm);
        const double sigma = 1.0 / knorm;

        double fx;
        const Eigen::VectorXd g = nll_grad(x, &fx);
        Eigen::VectorXd xn = x - tau * (g + apply_kt(yg, yp));
        for (int c = 0; c < p; ++c)
            if (L.is_interaction(c)) xn[c] = scalar_soft_threshold(xn[c], tau * cfg.lambda);

        // descent check on the smooth part; tighten the step on violation
        double fxn;
        nll_grad(xn, &fxn);
        const Eigen::VectorXd d = xn - x;
        if (fxn > fx + g.dot(d) + 0.5 * Lhat * d.squaredNorm() + 1e-10 && Lhat < 1e12) {
            Lhat *= 2.0;
            continue;  // redo the iteration with the smaller step
        }

        // dual prox via Moreau: prox of the conjugate of the fusion penalties
        Eigen::VectorXd gam_bar, psi_bar;
        apply_k(2.0 * xn - x, gam_bar, psi_bar);
        Eigen::VectorXd ag = yg + sigma * gam_bar;
        Eigen::VectorXd ap = yp + sigma * psi_bar;
        {
            Eigen::VectorXd scaled = ag / sigma;
            const auto& g2 = ops.graph();
            for (int s = 0; s < g2.n_stations; ++s) {
                const int deg = g2.degree(s);
                if (deg == 0) continue;
                const double kappa = cfg.lambda_n * std::sqrt(double(deg)) / sigma;
                const double norm = std::sqrt(ops.group_squared_norm(scaled, s));
                const double factor = (norm <= kappa || norm == 0.0) ? 0.0 : 1.0 - kappa / norm;
                ops.scale_group(scaled, s, factor);
            }
            yg = ag - sigma * scaled;
        }
        for (int i = 0; i < sdim; ++i)
            yp[i] = ap[i] - sigma * scalar_soft_threshold(ap[i] / sigma, cfg.lambda_h / sigma);

        x = xn;
        if (it % 25 == 0 || it + 1 == iters) {
            const double obj = objective(x);
            if (obj < res.best_objective) {
                res.best_objective = obj;
                res.beta = x;
            }
        }
    }
    const double obj = objective(x);
    if (obj < res.best_objective) {
        res.best_objective = obj;
        res.beta = x;
    }
    return res;
}

// --- multilayer components by breadth-first search ---------------------------

// Explicit node-layer graph: intra-layer edges where neighbors share a value,
// cyclic same-station edges where consecutive hours share a value. Equality is
// exact (callers use well separated values).
inline int multilayer_components_bfs(const ProximityGraph& g, const Eigen::MatrixXd& phi)
{
    const int S = g.n_stations, H = static_cast<int>(phi.cols());
    const int n = S * H;
    auto node = [&](int s, int h) { return s * H + h; };
    std::vector<std::vector<int>> adj(n);
    auto connect = [&](int a, int b) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    };
    for (auto [u, v] : g.undirected_edges())
        for (int h = 0; h < H; ++h)
            if (phi(u, h) == phi(v, h)) connect(node(u, h), node(v, h));
    for (int s = 0; s < S; ++s)
        for (int h = 0; h < H; ++h)
            if (phi(s, h) == phi(s, (h + 1) % H) && H > 1) connect(node(s, h), node(s, (h + 1) % H));
    std::vector<char> seen(n, 0);
    int comps = 0;
    for (int start = 0; start < n; ++start) {
        if (seen[start]) continue;
        ++comps;
        std::queue<int> q;
        q.push(start);
        seen[start] = 1;
        while (!q.empty()) {
            const int cur = q.front();
            q.pop();
            for (int nb : adj[cur])
                if (!seen[nb]) {
                    seen[nb] = 1;
                    q.push(nb);
                }
        }
    }
    return comps;
}

}  // namespace oracles
