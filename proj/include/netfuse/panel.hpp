#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "netfuse/calendar.hpp"
#include "netfuse/common.hpp"

namespace netfuse {

// Station registry: id, position in decimal degrees, and dock capacity.
// The capacity enters the model as a multiplicative exposure.
struct StationRegistry {
    std::vector<std::string> ids;
    std::vector<double> latitude;
    std::vector<double> longitude;
    std::vector<int> capacity;

    int size() const { return static_cast<int>(ids.size()); }
    int index_of(const std::string& id) const;  // -1 when absent
    void validate() const;
};

StationRegistry load_stations(const std::string& path);
void write_stations(const std::string& path, const StationRegistry& reg);

enum class AirCategory : std::uint8_t { very_bad = 0, bad = 1, average = 2, good = 3 };

AirCategory parse_air(const std::string& s);
const char* air_name(AirCategory c);

// One-hot encoding over (very_bad, bad, average, good); index 0 is the baseline
// category whose coefficient is fixed at zero.
std::array<double, 4> encode_air(AirCategory c);

// Complete station x day x hour grid of rental counts with per-day covariates.
// Cells absent from the rentals file are explicit zeros.
struct RentalPanel {
    std::vector<std::string> station_ids;  // size S
    std::vector<Date> dates;               // size T (synthetic panels may leave these defaulted)
    std::vector<int> day_of_week;          // size T, 0 = first day category
    std::vector<std::uint8_t> rain;        // size T
    std::vector<AirCategory> air;          // size T
    std::vector<int> time_index;           // size T, the raw time index t of each day
    CalendarDims dims;                     // hours per day, day-of-week categories
    std::vector<std::int32_t> counts;      // size S*T*n_hours, layout (s, t, h)

    int n_stations() const { return static_cast<int>(station_ids.size()); }
    int n_days() const { return static_cast<int>(dates.size()); }
    int n_hours() const { return dims.n_hours; }
    std::int64_t n_obs() const
    {
        return std::int64_t(n_stations()) * n_days() * n_hours();
    }

    std::int64_t cell(int s, int t, int h) const
    {
        return (std::int64_t(s) * n_days() + t) * n_hours() + h;
    }
    std::int32_t count(int s, int t, int h) const { return counts[cell(s, t, h)]; }

    // Panel containing only the listed days; time indices are preserved so the
    // trend term keeps its original calendar position.
    RentalPanel restrict_days(const std::vector<int>& day_indices) const;

    void validate() const;
};

RentalPanel load_panel(const std::string& rentals_path, const std::string& stations_path,
                       const std::string& weather_path);

// Writes the panel back out in the same three-file layout. Zero-count cells are
// omitted from the rentals file; the loader restores them.
void write_panel(const std::string& rentals_path, const std::string& stations_path,
                 const std::string& weather_path, const RentalPanel& panel,
                 const StationRegistry& reg);

struct ParamState;  // params.hpp

// Draws a complete panel from the model given true parameters. Counts are
// Poisson with the model mean; rain/air covariates are drawn per day. The
// generator is fully determined by the seed.
RentalPanel synth_panel(std::uint64_t seed, const StationRegistry& reg, int n_days,
                        const CalendarDims& dims, const ParamState& truth,
                        double rain_prob = 0.2);

}  // namespace netfuse
