#pragma once

#include <Eigen/Dense>
#include <string>

#include "netfuse/calendar.hpp"
#include "netfuse/common.hpp"

namespace netfuse {

// Covariate coefficients: overall trend, precipitation, and the three non-baseline
// air-quality categories.
struct DeltaBlock {
    double alpha = 0.0;
    double beta_rain = 0.0;
    Eigen::Vector3d beta_air = Eigen::Vector3d::Zero();  // bad, average, good
};

// The parameter blocks of the full-interaction model. Baselines (hour 0, the first
// day-of-week category, and the air baseline) are structural zeros and are not
// stored; interaction matrices keep a row per station, and fitted results are
// normalized so the first station's interaction rows are zero.
struct ParamState {
    Eigen::VectorXd theta;       // S
    Eigen::VectorXd shared_hod;  // H-1, hours 1..H-1
    Eigen::VectorXd shared_dow;  // D-1, categories 1..D-1
    Eigen::MatrixXd hod_int;     // S x (H-1)
    Eigen::MatrixXd dow_int;     // S x (D-1)
    DeltaBlock delta;

    static ParamState zeros(int n_stations, const CalendarDims& dims);

    int n_stations() const { return static_cast<int>(theta.size()); }
    int hours_free() const { return static_cast<int>(shared_hod.size()); }
    int dows_free() const { return static_cast<int>(shared_dow.size()); }

    // phi_hod(s, h) = theta_s + shared hour effect + interaction; column 0 equals theta.
    double phi_hod(int s, int h) const
    {
        return theta[s] + (h > 0 ? shared_hod[h - 1] + hod_int(s, h - 1) : 0.0);
    }
    double phi_dow(int s, int d) const
    {
        return theta[s] + (d > 0 ? shared_dow[d - 1] + dow_int(s, d - 1) : 0.0);
    }

    // Moves any first-station interaction mass into the shared effects. Leaves
    // every phi value (and hence the fitted mean surface) unchanged.
    void normalize_gauge();

    void validate_dims(int n_stations, const CalendarDims& dims) const;
};

// Derived station-by-time effect matrices phi_hod (S x H) and phi_dow (S x D).
struct PhiView {
    Eigen::MatrixXd hod;  // S x H
    Eigen::MatrixXd dow;  // S x D

    static PhiView from(const ParamState& p);
};

// Flat coordinate layout shared by the solver, the constraint operators and the
// projection. Interaction blocks keep all S stations; shared day effects sit
// outside the projected part because no constraint touches them.
//
//   [dow interactions, category-major] [theta] [hod interactions, hour-major]
//   [shared hod] | [shared dow] | [delta]
struct FlatLayout {
    int S = 0;
    int Ho = 0;  // free hours, |H| - 1
    int Do = 0;  // free day categories, |D| - 1

    FlatLayout() = default;
    FlatLayout(int stations, const CalendarDims& dims)
        : S(stations), Ho(dims.hours_free()), Do(dims.dows_free())
    {
    }

    int dow_int(int d, int s) const { return d * S + s; }
    int theta(int s) const { return S * Do + s; }
    int hod_int(int h, int s) const { return S * Do + S + h * S + s; }
    int shared_hod(int h) const { return S * Do + S + S * Ho + h; }
    int shared_dow(int d) const { return proj_dim() + d; }
    int delta(int k) const { return proj_dim() + Do + k; }

    int proj_dim() const { return S * Do + S + S * Ho + Ho; }
    int consensus_dim() const { return proj_dim() + Do; }
    int beta_dim() const { return consensus_dim() + 5; }

    int n_hours() const { return Ho + 1; }
    int n_dows() const { return Do + 1; }

    bool is_interaction(int c) const
    {
        return c < S * Do || (c >= S * Do + S && c < S * Do + S + S * Ho);
    }

    Eigen::VectorXd to_flat(const ParamState& p) const;
    // Reads a flat vector back into a ParamState (no gauge normalization).
    ParamState from_flat(const Eigen::VectorXd& beta) const;
};

// One file per parameter block plus a meta file carrying the dimensions.
void write_param_bundle(const std::string& dir, const ParamState& p,
                        const std::vector<std::string>& station_ids);
ParamState read_param_bundle(const std::string& dir, std::vector<std::string>* station_ids = nullptr);

}  // namespace netfuse
