#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "netfuse/cv.hpp"
#include "oracles.hpp"

using namespace netfuse;

namespace {

// the 57-day two-month calendar: April 1 through May 30 2019 minus three
// public holidays, matching a balanced seven-week span
std::vector<Date> two_month_calendar()
{
    std::vector<Date> days;
    const std::set<std::string> holidays{"2019-05-01", "2019-05-06", "2019-05-12"};
    for (int m = 4; m <= 5; ++m)
        for (int d = 1; d <= 31; ++d) {
            const Date date{2019, m, d};
            if (!date.valid()) continue;
            if (m == 5 && d == 31) continue;
            if (holidays.count(date.to_string())) continue;
            days.push_back(date);
        }
    return days;
}

RentalPanel panel_with_dates(const std::vector<Date>& dates)
{
    RentalPanel p;
    p.station_ids = {"A"};
    p.dims = CalendarDims{24, 7};
    p.dates = dates;
    for (std::size_t t = 0; t < dates.size(); ++t) {
        p.day_of_week.push_back(dates[t].day_of_week());
        p.rain.push_back(0);
        p.air.push_back(AirCategory::good);
        p.time_index.push_back(int(t));
    }
    p.counts.assign(dates.size() * 24, 0);
    return p;
}

}  // namespace

TEST_CASE("seven folds balance the two-month calendar")
{
    const auto days = two_month_calendar();
    REQUIRE(days.size() == 57);
    const RentalPanel panel = panel_with_dates(days);
    const FoldPlan plan = make_folds(panel, 7, 11);

    std::vector<int> sizes;
    for (const auto& fold : plan.fold_days) {
        sizes.push_back(int(fold.size()));
        // each weekday appears at most twice per fold
        std::map<int, int> per_dow;
        for (int t : fold) ++per_dow[panel.day_of_week[t]];
        for (auto [dow, count] : per_dow) CHECK(count <= 2);
    }
    for (int s : sizes) {
        CHECK(s >= 8);
        CHECK(s <= 9);
    }

    // the folds partition the days
    std::set<int> all;
    for (const auto& fold : plan.fold_days) all.insert(fold.begin(), fold.end());
    CHECK(all.size() == 57);

    // weekday counts differ by at most one across folds
    for (int dow = 0; dow < 7; ++dow) {
        int lo = 1 << 20, hi = 0;
        for (const auto& fold : plan.fold_days) {
            int c = 0;
            for (int t : fold)
                if (panel.day_of_week[t] == dow) ++c;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("fold plans are deterministic per seed and degenerate K works")
{
    const auto days = two_month_calendar();
    const RentalPanel panel = panel_with_dates(days);
    const FoldPlan a = make_folds(panel, 7, 3), b = make_folds(panel, 7, 3);
    for (int k = 0; k < 7; ++k) CHECK(a.fold_days[k] == b.fold_days[k]);

    const FoldPlan one = make_folds(panel, 1, 5);
    CHECK(one.fold_days[0].size() == 57);

    CHECK_THROWS_AS(make_folds(panel, 58, 1), ValidationError);
}

TEST_CASE("mean squared Pearson residuals")
{
    Eigen::VectorXd y(2), mu(2);
    y << 2, 0;
    mu << 1, 1;
    CHECK(mspr(y, mu) == doctest::Approx(1.0));

    y << 3, 5;
    mu << 3, 5;
    CHECK(mspr(y, mu) == doctest::Approx(0.0));

    mu << 1, 0;
    CHECK_THROWS_AS(mspr(y, mu), ValidationError);
    Eigen::VectorXd y3(3);
    y3.setOnes();
    Eigen::VectorXd mu1(1);
    mu1.setOnes();
    CHECK_THROWS_AS(mspr(y3, mu1), ValidationError);
}

TEST_CASE("single-point grid search runs end to end")
{
    const StationRegistry reg = oracles::clustered_registry(6, 2, 21);
    const CalendarDims dims{4, 3};
    const ParamState truth = oracles::random_params(6, dims, 22, 0.3);
    const RentalPanel panel = synth_panel(23, reg, 9, dims, truth);

    GridSpec grid;
    grid.lambda = {0.3};
    grid.lambda_n = {0.5};
    grid.lambda_h = {0.1};
    grid.radius = {400.0};

    const FoldPlan folds = make_folds(panel, 3, 7);
    CvOptions opt;
    opt.solver.max_iter = 600;
    const CvResult res = grid_search(panel, reg, grid, folds, opt);

    // 3 fold rows + 1 average row
    CHECK(res.table.size() == 4);
    CHECK(res.has_winner);
    CHECK(res.best_cfg.lambda == 0.3);
    CHECK(res.best_radius == 400.0);
    double avg = 0.0;
    for (const auto& e : res.table)
        if (e.fold >= 0) avg += e.mspr / 3.0;
    CHECK(res.best_mspr == doctest::Approx(avg));

    // dry run enumerates without fitting
    CvOptions dry;
    dry.dry_run = true;
    const CvResult enumerated = grid_search(panel, reg, grid, folds, dry);
    CHECK(enumerated.table.size() == 3);
    CHECK_FALSE(enumerated.has_winner);
}

TEST_CASE("grid ordering and tie-breaking prefer stronger penalties")
{
    GridSpec grid;
    grid.lambda = {0.1, 1.0};
    grid.lambda_n = {0.2, 2.0};
    grid.lambda_h = {0.0};
    grid.radius = {750.0};
    const auto pts = grid.penalty_points(1.0);
    REQUIRE(pts.size() == 4);
    CHECK(pts[0].lambda_n == 2.0);
    CHECK(pts[0].lambda == 1.0);
    CHECK(pts[3].lambda_n == 0.2);
    CHECK(pts[3].lambda == 0.1);
}

TEST_CASE("fold scores do not depend on the warm-start path")
{
    const StationRegistry reg = oracles::clustered_registry(5, 2, 31);
    const CalendarDims dims{3, 3};
    const ParamState truth = oracles::random_params(5, dims, 32, 0.3);
    RentalPanel panel = synth_panel(33, reg, 18, dims, truth);
    // deterministic weather with periods that do not align with the day-of-week
    // cycle keeps the covariate design full rank on every training split
    for (int t = 0; t < panel.n_days(); ++t) {
        panel.rain[t] = (t % 5 == 0) ? 1 : 0;
        panel.air[t] = static_cast<AirCategory>(t % 4);
    }
    const FoldPlan folds = make_folds(panel, 2, 9);

    GridSpec both;
    both.lambda = {0.2};
    both.lambda_n = {1.0, 0.1};
    both.lambda_h = {0.0};
    both.radius = {400.0};

    GridSpec single = both;
    single.lambda_n = {0.1};

    CvOptions opt;
    opt.solver.eps_abs = 1e-7;
    opt.solver.eps_rel = 1e-6;
    opt.solver.max_iter = 4000;

    const CvResult chained = grid_search(panel, reg, both, folds, opt);
    const CvResult direct = grid_search(panel, reg, single, folds, opt);

    // compare the averaged row at lambda_n = 0.1
    double chained_avg = -1.0, direct_avg = -1.0;
    for (const auto& e : chained.table)
        if (e.fold < 0 && e.cfg.lambda_n == 0.1) chained_avg = e.mspr;
    for (const auto& e : direct.table)
        if (e.fold < 0 && e.cfg.lambda_n == 0.1) direct_avg = e.mspr;
    CHECK(chained_avg == doctest::Approx(direct_avg).epsilon(1e-4));
}

TEST_CASE("mspr is invariant to observation order within folds")
{
    const StationRegistry reg = oracles::clustered_registry(4, 2, 41);
    const CalendarDims dims{3, 2};
    const ParamState truth = oracles::random_params(4, dims, 42, 0.3);
    const RentalPanel panel = synth_panel(43, reg, 6, dims, truth);
    const std::vector<int> days{0, 2, 4};
    const std::vector<int> days_shuffled{4, 0, 2};
    const double a = mspr_on_days(truth, panel, reg, days);
    const double b = mspr_on_days(truth, panel, reg, days_shuffled);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}
