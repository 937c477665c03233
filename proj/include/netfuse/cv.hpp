#pragma once

#include <optional>
#include <string>
#include <vector>

#include "netfuse/admm.hpp"

namespace netfuse {

// Day-of-week balanced fold plan: days are grouped by weekday and dealt
// round-robin over the folds, so each weekday's count differs by at most one
// across folds. Assignment order within a group is a seeded shuffle.
struct FoldPlan {
    int n_folds = 0;
    std::vector<std::vector<int>> fold_days;  // day indices per fold, sorted

    std::vector<int> complement(int fold, int n_days) const;
};

FoldPlan make_folds(const RentalPanel& panel, int n_folds, std::uint64_t seed);

// Mean squared Pearson residual.
double mspr(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted);

// Held-out MSPR of a fitted state over the listed days of the full panel.
double mspr_on_days(const ParamState& p, const RentalPanel& panel, const StationRegistry& reg,
                    const std::vector<int>& days, double time_scale = 1.0);

struct GridSpec {
    std::vector<double> lambda{0.0};
    std::vector<double> lambda_n{0.0};
    std::vector<double> lambda_h{0.0};
    std::vector<double> radius;  // meters

    void validate() const;
    // All penalty combinations, ordered from the largest to the smallest
    // (lambda_n, lambda_h, lambda) so grid traversal can warm start.
    std::vector<PenaltyConfig> penalty_points(double rho) const;
};

struct CvEntry {
    double radius = 0.0;
    PenaltyConfig cfg;
    int fold = -1;  // -1 marks the averaged row
    double mspr = 0.0;
    bool converged = true;
};

struct CvResult {
    std::vector<CvEntry> table;  // fold rows then one averaged row per point
    double best_radius = 0.0;
    PenaltyConfig best_cfg;
    double best_mspr = 0.0;
    bool has_winner = false;
};

struct CvOptions {
    AdmmOptions solver;
    double rho = 1.0;
    int threads = 1;
    bool dry_run = false;  // enumerate the task matrix without fitting
};

CvResult grid_search(const RentalPanel& panel, const StationRegistry& reg, const GridSpec& grid,
                     const FoldPlan& folds, const CvOptions& opt);

void write_cv_table(const std::string& path, const CvResult& res);

}  // namespace netfuse
