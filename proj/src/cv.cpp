#include "netfuse/cv.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "netfuse/csv.hpp"

namespace netfuse {

std::vector<int> FoldPlan::complement(int fold, int n_days) const
{
    std::vector<bool> held(n_days, false);
    for (int d : fold_days.at(fold)) held[d] = true;
    std::vector<int> out;
    for (int d = 0; d < n_days; ++d)
        if (!held[d]) out.push_back(d);
    return out;
}

FoldPlan make_folds(const RentalPanel& panel, int n_folds, std::uint64_t seed)
{
    const int T = panel.n_days();
    if (n_folds < 1 || n_folds > T)
        throw ValidationError("fold count must be between 1 and the number of days");
    std::vector<std::vector<int>> by_dow(panel.dims.n_days_of_week);
    for (int t = 0; t < T; ++t) by_dow[panel.day_of_week[t]].push_back(t);

    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.fold_days.assign(n_folds, {});
    std::mt19937_64 rng(seed);
    int assigned = 0;
    for (auto& group : by_dow) {
        if (group.empty()) continue;
        std::shuffle(group.begin(), group.end(), rng);
        // continue the round-robin where the previous group left off so the
        // leftover days spread over different folds
        for (std::size_t i = 0; i < group.size(); ++i, ++assigned)
            plan.fold_days[assigned % n_folds].push_back(group[i]);
    }
    for (auto& f : plan.fold_days) std::sort(f.begin(), f.end());
    return plan;
}

double mspr(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted)
{
    if (observed.size() != predicted.size())
        throw ValidationError("mspr: observed and predicted lengths differ");
    if (observed.size() == 0) throw ValidationError("mspr: empty input");
    return ChunkedSum::sum(std::size_t(observed.size()), [&](std::size_t i) {
        if (!(predicted[i] > 0.0)) throw ValidationError("mspr: non-positive predicted mean");
        const double d = observed[i] - predicted[i];
        return d * d / predicted[i];
    }) / double(observed.size());
}

double mspr_on_days(const ParamState& p, const RentalPanel& panel, const StationRegistry& reg,
                    const std::vector<int>& days, double time_scale)
{
    const Offsets off = Offsets::from(reg);
    const std::size_t n = std::size_t(panel.n_stations()) * days.size() * panel.n_hours();
    Eigen::VectorXd obs(n), pred(n);
    std::size_t i = 0;
    for (int s = 0; s < panel.n_stations(); ++s)
        for (int t : days)
            for (int h = 0; h < panel.n_hours(); ++h, ++i) {
                obs[i] = panel.count(s, t, h);
                pred[i] = mean_at(p, panel, off, s, t, h, time_scale);
            }
    return mspr(obs, pred);
}

void GridSpec::validate() const
{
    auto check = [](const std::vector<double>& v, const char* name) {
        if (v.empty()) throw ValidationError(std::string(name) + " grid is empty");
        for (double x : v)
            if (x < 0.0) throw ValidationError(std::string(name) + " grid has a negative entry");
    };
    check(lambda, "lambda");
    check(lambda_n, "lambda_n");
    check(lambda_h, "lambda_h");
    if (radius.empty()) throw ValidationError("radius grid is empty");
    for (double r : radius)
        if (!(r > 0.0)) throw ValidationError("radius grid entries must be positive");
}

std::vector<PenaltyConfig> GridSpec::penalty_points(double rho) const
{
    std::vector<PenaltyConfig> pts;
    for (double ln : lambda_n)
        for (double lh : lambda_h)
            for (double l : lambda) {
                PenaltyConfig c;
                c.lambda = l;
                c.lambda_n = ln;
                c.lambda_h = lh;
                c.rho = rho;
                pts.push_back(c);
            }
    std::sort(pts.begin(), pts.end(), [](const PenaltyConfig& a, const PenaltyConfig& b) {
        if (a.lambda_n != b.lambda_n) return a.lambda_n > b.lambda_n;
        if (a.lambda_h != b.lambda_h) return a.lambda_h > b.lambda_h;
        return a.lambda > b.lambda;
    });
    return pts;
}

namespace {

struct TaskResult {
    std::vector<double> mspr;      // per grid point
    std::vector<bool> converged;
};

}  // namespace

CvResult grid_search(const RentalPanel& panel, const StationRegistry& reg, const GridSpec& grid,
                     const FoldPlan& folds, const CvOptions& opt)
{
    grid.validate();
    const auto points = grid.penalty_points(opt.rho);
    const int K = folds.n_folds;

    CvResult res;
    if (opt.dry_run) {
        for (double r : grid.radius)
            for (const auto& cfg : points)
                for (int k = 0; k < K; ++k) {
                    CvEntry e;
                    e.radius = r;
                    e.cfg = cfg;
                    e.fold = k;
                    res.table.push_back(e);
                }
        return res;
    }

    for (double r : grid.radius) {
        const ProximityGraph graph = build_proximity(reg, r);
        const ProjectionPlan plan(graph, panel.dims);

        // one warm-start chain per fold, folds run concurrently
        std::vector<TaskResult> results(K);
        auto run_fold = [&](int k) {
            const std::vector<int> train_days = folds.complement(k, panel.n_days());
            const std::vector<int>& test_days = folds.fold_days[k];
            const RentalPanel train = panel.restrict_days(train_days);
            const AdmmProblem prob(train, reg, plan, opt.solver.time_scale);
            AdmmState st = AdmmState::cold(prob.ops(), opt.rho);
            TaskResult tr;
            for (const auto& cfg : points) {
                st.rho = std::max(st.rho, 1e-6);
                const SolveReport rep = prob.solve(cfg, opt.solver, st);
                const ParamState fit = prob.extract_params(st);
                tr.mspr.push_back(test_days.empty()
                                      ? mspr_on_days(fit, train, reg, train_days,
                                                     opt.solver.time_scale)
                                      : mspr_on_days(fit, panel, reg, test_days,
                                                     opt.solver.time_scale));
                tr.converged.push_back(rep.converged);
            }
            results[k] = std::move(tr);
        };

        const int workers = std::max(1, std::min(opt.threads, K));
        if (workers <= 1) {
            for (int k = 0; k < K; ++k) run_fold(k);
        } else {
            std::vector<std::thread> pool;
            std::atomic<int> next{0};
            for (int wkr = 0; wkr < workers; ++wkr)
                pool.emplace_back([&]() {
                    for (int k = next.fetch_add(1); k < K; k = next.fetch_add(1)) run_fold(k);
                });
            for (auto& th : pool) th.join();
        }

        for (std::size_t pi = 0; pi < points.size(); ++pi) {
            double avg = 0.0;
            bool all_ok = true;
            for (int k = 0; k < K; ++k) {
                CvEntry e;
                e.radius = r;
                e.cfg = points[pi];
                e.fold = k;
                e.mspr = results[k].mspr[pi];
                e.converged = results[k].converged[pi];
                res.table.push_back(e);
                avg += e.mspr;
                all_ok = all_ok && e.converged;
            }
            CvEntry mean_row;
            mean_row.radius = r;
            mean_row.cfg = points[pi];
            mean_row.fold = -1;
            mean_row.mspr = avg / K;
            mean_row.converged = all_ok;
            res.table.push_back(mean_row);

            // winner: smallest averaged score among converged points; ties go to
            // the larger penalties (the more fused model)
            if (all_ok) {
                bool better = !res.has_winner || mean_row.mspr < res.best_mspr;
                if (res.has_winner && mean_row.mspr == res.best_mspr) {
                    const auto key = [](const PenaltyConfig& c) {
                        return std::array<double, 3>{c.lambda_n, c.lambda_h, c.lambda};
                    };
                    better = key(mean_row.cfg) > key(res.best_cfg);
                }
                if (better) {
                    res.has_winner = true;
                    res.best_mspr = mean_row.mspr;
                    res.best_cfg = mean_row.cfg;
                    res.best_radius = r;
                }
            }
        }
    }
    return res;
}

void write_cv_table(const std::string& path, const CvResult& res)
{
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : res.table)
        rows.push_back({format_double(e.radius), format_double(e.cfg.lambda),
                        format_double(e.cfg.lambda_n), format_double(e.cfg.lambda_h),
                        e.fold < 0 ? std::string("avg") : std::to_string(e.fold + 1),
                        format_double(e.mspr), e.converged ? "1" : "0"});
    write_csv(path, {"r", "lambda", "lambda_N", "lambda_H", "fold", "mspr", "converged"}, rows);
}

}  // namespace netfuse
