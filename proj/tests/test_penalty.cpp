#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "netfuse/penalty.hpp"
#include "oracles.hpp"

using namespace netfuse;

TEST_CASE("soft threshold operators")
{
    SUBCASE("group operator")
    {
        Eigen::VectorXd v(2);
        v << 3.0, 4.0;
        const Eigen::VectorXd a = group_soft_threshold(v, 1.0);
        CHECK(a[0] == doctest::Approx(2.4));
        CHECK(a[1] == doctest::Approx(3.2));
        CHECK(group_soft_threshold(v, 6.0).norm() == 0.0);
        CHECK(group_soft_threshold(Eigen::VectorXd::Zero(3), 0.5).norm() == 0.0);
    }
    SUBCASE("scalar operator")
    {
        CHECK(scalar_soft_threshold(5.0, 2.0) == doctest::Approx(3.0));
        CHECK(scalar_soft_threshold(-1.0, 2.0) == 0.0);
        CHECK(scalar_soft_threshold(-5.0, 2.0) == doctest::Approx(-3.0));
    }
}

TEST_CASE("network penalty closed forms")
{
    const CalendarDims dims{24, 7};
    SUBCASE("identical stations give zero")
    {
        const ProximityGraph g = graph_from_edges(3, {{0, 1}, {1, 2}});
        ParamState p = oracles::random_params(3, dims, 1);
        for (int s = 1; s < 3; ++s) {
            p.theta[s] = p.theta[0];
            p.hod_int.row(s) = p.hod_int.row(0);
            p.dow_int.row(s) = p.dow_int.row(0);
        }
        CHECK(eval_p_n(p, g) == doctest::Approx(0.0));
    }
    SUBCASE("two stations, single edge")
    {
        const ProximityGraph g = graph_from_edges(2, {{0, 1}});
        ParamState p = ParamState::zeros(2, dims);
        p.theta << 0.0, 1.0;
        // intercepts differ by 1 but every interaction is zero: each phi
        // difference is 1, so the bracket is 2 + 23 + 6 = 31 per station
        CHECK(eval_p_n(p, g) == doctest::Approx(2.0 * std::sqrt(31.0)));
        // cancelling interactions leave only the doubled intercept term:
        // each station contributes sqrt(1 * 2 * 1) = sqrt(2)
        p.hod_int.row(1).setConstant(-1.0);
        p.dow_int.row(1).setConstant(-1.0);
        CHECK(eval_p_n(p, g) == doctest::Approx(2.0 * std::sqrt(2.0)));
    }
    SUBCASE("phi form equals theta form on random parameters")
    {
        const StationRegistry reg = oracles::random_registry(5, 1500.0, 2);
        const ProximityGraph g = build_proximity(reg, 1000.0);
        for (std::uint64_t seed : {3, 4, 5}) {
            const ParamState p = oracles::random_params(5, dims, seed);
            CHECK(eval_p_n(p, g) ==
                  doctest::Approx(eval_p_n_phi_form(p, g)).epsilon(1e-12));
        }
    }
}

TEST_CASE("hourly penalty closed forms")
{
    const CalendarDims dims{24, 7};
    SUBCASE("constant profile gives zero")
    {
        ParamState p = ParamState::zeros(2, dims);
        p.theta << 0.5, -0.5;  // pure intercepts leave the profile flat
        CHECK(eval_p_h(p) == doctest::Approx(0.0));
    }
    SUBCASE("single spike crosses two jumps")
    {
        ParamState p = ParamState::zeros(1, dims);
        p.shared_hod[0] = 1.0;  // phi profile (0, 1, 0, ..., 0)
        CHECK(eval_p_h(p) == doctest::Approx(2.0));
    }
    SUBCASE("matches the psi parameterization through the constraint operator")
    {
        const ProximityGraph g = graph_from_edges(3, {{0, 1}});
        const CalendarDims dims2{6, 3};
        const ConstraintOps ops(g, dims2);
        for (std::uint64_t seed : {7, 8}) {
            const ParamState p = oracles::random_params(3, dims2, seed);
            const Eigen::VectorXd beta = ops.layout().to_flat(p);
            const Eigen::VectorXd psi = ops.apply_dh(beta.head(ops.layout().proj_dim()));
            CHECK(eval_p_h(p) == doctest::Approx(psi.lpNorm<1>()).epsilon(1e-12));
            CHECK(eval_p_h_flat(beta, ops) == doctest::Approx(eval_p_h(p)).epsilon(1e-12));
            CHECK(eval_p_n_flat(beta, ops) == doctest::Approx(eval_p_n(p, g)).epsilon(1e-12));
        }
    }
}

TEST_CASE("gamma update is the per-station group soft threshold")
{
    const StationRegistry reg = oracles::random_registry(4, 1500.0, 10);
    const ProximityGraph g = build_proximity(reg, 1200.0);
    const CalendarDims dims{4, 3};
    const ConstraintOps ops(g, dims);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd sg(ops.gamma_dim()), tg(ops.gamma_dim());
    for (int i = 0; i < sg.size(); ++i) {
        sg[i] = gauss(rng);
        tg[i] = gauss(rng);
    }

    PenaltyConfig cfg;
    cfg.rho = 1.7;
    SUBCASE("zero weight is the identity on the difference")
    {
        cfg.lambda_n = 0.0;
        CHECK((update_gamma(sg, tg, cfg, ops) - (sg - tg)).norm() == 0.0);
    }
    SUBCASE("matches a one-shot group soft threshold per station")
    {
        cfg.lambda_n = 0.8;
        const Eigen::VectorXd out = update_gamma(sg, tg, cfg, ops);
        const Eigen::VectorXd diff = sg - tg;
        for (int s = 0; s < g.n_stations; ++s) {
            // gather the station's block, apply the reference operator, compare
            std::vector<int> idx;
            for (int e = g.row_start[s]; e < g.row_start[s + 1]; ++e) {
                idx.push_back(ops.gamma_s2_offset() + e);
                for (int h = 0; h < dims.hours_free(); ++h)
                    idx.push_back(ops.gamma_hod_offset(h) + e);
                for (int d = 0; d < dims.dows_free(); ++d)
                    idx.push_back(ops.gamma_dow_offset(d) + e);
            }
            Eigen::VectorXd block(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) block[k] = diff[idx[k]];
            const double kappa = cfg.lambda_n * std::sqrt(double(g.degree(s))) / cfg.rho;
            const Eigen::VectorXd ref = group_soft_threshold(block, kappa);
            for (std::size_t k = 0; k < idx.size(); ++k)
                CHECK(out[idx[k]] == doctest::Approx(ref[k]).epsilon(1e-12));
        }
    }
    SUBCASE("small blocks collapse to zero")
    {
        cfg.lambda_n = 1e3;
        CHECK(update_gamma(sg, tg, cfg, ops).norm() == 0.0);
    }
    SUBCASE("shape mismatch is rejected")
    {
        cfg.lambda_n = 1.0;
        CHECK_THROWS_AS(update_gamma(sg.head(3), tg, cfg, ops), ValidationError);
    }
}

TEST_CASE("proximal optimality of the gamma update")
{
    // the update minimizes lambda_n sqrt(deg) ||u|| + (rho/2)||u - v||^2 per
    // station; scan random rays for a lower objective
    const ProximityGraph g = graph_from_edges(3, {{0, 1}, {1, 2}});
    const CalendarDims dims{3, 2};
    const ConstraintOps ops(g, dims);
    PenaltyConfig cfg;
    cfg.lambda_n = 0.6;
    cfg.rho = 1.3;

    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd sg(ops.gamma_dim()), tg = Eigen::VectorXd::Zero(ops.gamma_dim());
    for (int i = 0; i < sg.size(); ++i) sg[i] = gauss(rng);
    const Eigen::VectorXd u = update_gamma(sg, tg, cfg, ops);

    auto objective = [&](const Eigen::VectorXd& cand) {
        double val = 0.0;
        for (int s = 0; s < g.n_stations; ++s)
            val += cfg.lambda_n * std::sqrt(double(g.degree(s))) *
                   std::sqrt(ops.group_squared_norm(cand, s));
        val += 0.5 * cfg.rho * (cand - sg).squaredNorm();
        return val;
    };
    const double at_opt = objective(u);
    for (int rep = 0; rep < 40; ++rep) {
        Eigen::VectorXd dir(u.size());
        for (int i = 0; i < dir.size(); ++i) dir[i] = gauss(rng);
        dir.normalize();
        for (double step : {1e-3, 1e-2, 0.1, 0.5})
            CHECK(objective(u + step * dir) >= at_opt - 1e-10);
    }
}

TEST_CASE("psi update applies the scalar threshold entrywise")
{
    const ProximityGraph g = graph_from_edges(2, {{0, 1}});
    const ConstraintOps ops(g, CalendarDims{4, 2});
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd sp(ops.psi_dim()), tp(ops.psi_dim());
    for (int i = 0; i < sp.size(); ++i) {
        sp[i] = gauss(rng);
        tp[i] = gauss(rng);
    }
    PenaltyConfig cfg;
    cfg.lambda_h = 0.9;
    cfg.rho = 2.0;
    const Eigen::VectorXd out = update_psi(sp, tp, cfg);
    for (int i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(scalar_soft_threshold(sp[i] - tp[i], 0.45)));
}

TEST_CASE("penalties are non-negative and vanish only on fused differences")
{
    const ProximityGraph g = graph_from_edges(4, {{0, 1}, {2, 3}});
    const CalendarDims dims{5, 3};
    for (std::uint64_t seed : {41, 42, 43}) {
        const ParamState p = oracles::random_params(4, dims, seed);
        CHECK(eval_p_n(p, g) >= 0.0);
        CHECK(eval_p_h(p) >= 0.0);
    }
}
