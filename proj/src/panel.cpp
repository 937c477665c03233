#include "netfuse/panel.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "netfuse/csv.hpp"
#include "netfuse/model.hpp"

namespace netfuse {

int StationRegistry::index_of(const std::string& id) const
{
    for (int i = 0; i < size(); ++i)
        if (ids[i] == id) return i;
    return -1;
}

void StationRegistry::validate() const
{
    const int S = size();
    if (static_cast<int>(latitude.size()) != S || static_cast<int>(longitude.size()) != S ||
        static_cast<int>(capacity.size()) != S)
        throw ValidationError("station registry column lengths differ");
    std::unordered_map<std::string, int> seen;
    for (int i = 0; i < S; ++i) {
        if (!seen.emplace(ids[i], i).second)
            throw SchemaError("duplicate station id: " + ids[i]);
        if (capacity[i] < 1)
            throw SchemaError("station " + ids[i] + " has capacity < 1");
        if (latitude[i] < -90.0 || latitude[i] > 90.0 || longitude[i] < -180.0 ||
            longitude[i] > 180.0)
            throw SchemaError("station " + ids[i] + " has coordinates out of range");
    }
}

StationRegistry load_stations(const std::string& path)
{
    const CsvTable t = read_csv(path);
    const int c_id = t.column("station_id");
    const int c_lat = t.column("latitude");
    const int c_lon = t.column("longitude");
    const int c_cap = t.column("capacity");
    StationRegistry reg;
    for (const auto& row : t.rows) {
        reg.ids.push_back(row[c_id]);
        reg.latitude.push_back(parse_double(row[c_lat], "latitude"));
        reg.longitude.push_back(parse_double(row[c_lon], "longitude"));
        reg.capacity.push_back(static_cast<int>(parse_long(row[c_cap], "capacity")));
    }
    reg.validate();
    return reg;
}

void write_stations(const std::string& path, const StationRegistry& reg)
{
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < reg.size(); ++i)
        rows.push_back({reg.ids[i], format_double(reg.latitude[i]),
                        format_double(reg.longitude[i]), std::to_string(reg.capacity[i])});
    write_csv(path, {"station_id", "latitude", "longitude", "capacity"}, rows);
}

AirCategory parse_air(const std::string& s)
{
    if (s == "very_bad") return AirCategory::very_bad;
    if (s == "bad") return AirCategory::bad;
    if (s == "average") return AirCategory::average;
    if (s == "good") return AirCategory::good;
    throw SchemaError("unknown air category '" + s + "'");
}

const char* air_name(AirCategory c)
{
    switch (c) {
        case AirCategory::very_bad: return "very_bad";
        case AirCategory::bad: return "bad";
        case AirCategory::average: return "average";
        case AirCategory::good: return "good";
    }
    throw ValidationError("invalid air category value");
}

std::array<double, 4> encode_air(AirCategory c)
{
    std::array<double, 4> v{0.0, 0.0, 0.0, 0.0};
    v[static_cast<int>(c)] = 1.0;
    return v;
}

void RentalPanel::validate() const
{
    dims.validate();
    const int T = n_days();
    if (static_cast<int>(day_of_week.size()) != T || static_cast<int>(rain.size()) != T ||
        static_cast<int>(air.size()) != T || static_cast<int>(time_index.size()) != T)
        throw ValidationError("per-day vectors do not match the number of days");
    if (static_cast<std::int64_t>(counts.size()) != n_obs())
        throw ValidationError("count grid is not complete over stations x days x hours");
    for (int t = 0; t < T; ++t)
        if (day_of_week[t] < 0 || day_of_week[t] >= dims.n_days_of_week)
            throw ValidationError("day-of-week index out of range");
    for (auto c : counts)
        if (c < 0) throw ValidationError("negative count in panel");
}

RentalPanel RentalPanel::restrict_days(const std::vector<int>& day_indices) const
{
    RentalPanel out;
    out.station_ids = station_ids;
    out.dims = dims;
    for (int t : day_indices) {
        if (t < 0 || t >= n_days()) throw ValidationError("day index out of range");
        out.dates.push_back(dates[t]);
        out.day_of_week.push_back(day_of_week[t]);
        out.rain.push_back(rain[t]);
        out.air.push_back(air[t]);
        out.time_index.push_back(time_index[t]);
    }
    const int Tn = out.n_days();
    out.counts.resize(std::size_t(n_stations()) * Tn * n_hours());
    for (int s = 0; s < n_stations(); ++s)
        for (int tn = 0; tn < Tn; ++tn)
            for (int h = 0; h < n_hours(); ++h)
                out.counts[out.cell(s, tn, h)] = count(s, day_indices[tn], h);
    return out;
}

RentalPanel load_panel(const std::string& rentals_path, const std::string& stations_path,
                       const std::string& weather_path)
{
    const StationRegistry reg = load_stations(stations_path);
    std::unordered_map<std::string, int> station_index;
    for (int i = 0; i < reg.size(); ++i) station_index[reg.ids[i]] = i;

    // Weather defines the set of days; dates absent from it are excluded.
    const CsvTable wt = read_csv(weather_path);
    const int wc_date = wt.column("date");
    const int wc_rain = wt.column("rain");
    const int wc_air = wt.column("air");
    std::map<Date, std::pair<std::uint8_t, AirCategory>> weather;
    for (const auto& row : wt.rows) {
        const Date d = Date::parse(row[wc_date]);
        const long r = parse_long(row[wc_rain], "rain");
        if (r != 0 && r != 1) throw SchemaError("rain flag must be 0 or 1");
        if (!weather.emplace(d, std::make_pair(std::uint8_t(r), parse_air(row[wc_air]))).second)
            throw SchemaError("duplicate weather row for " + d.to_string());
    }
    if (weather.empty()) throw SchemaError("weather file has no rows");

    RentalPanel panel;
    panel.station_ids = reg.ids;
    panel.dims = CalendarDims{24, 7};
    std::map<Date, int> day_index;
    int t = 0;
    for (const auto& [date, wa] : weather) {
        day_index[date] = t++;
        panel.dates.push_back(date);
        panel.day_of_week.push_back(date.day_of_week());
        panel.rain.push_back(wa.first);
        panel.air.push_back(wa.second);
        panel.time_index.push_back(static_cast<int>(panel.time_index.size()));
    }

    panel.counts.assign(std::size_t(panel.n_stations()) * panel.n_days() * panel.n_hours(), 0);

    const CsvTable rt = read_csv(rentals_path);
    const int rc_station = rt.column("station_id");
    const int rc_date = rt.column("date");
    const int rc_hour = rt.column("hour");
    const int rc_count = rt.column("count");
    for (const auto& row : rt.rows) {
        const auto it = station_index.find(row[rc_station]);
        if (it == station_index.end())
            throw SchemaError("rentals reference unknown station '" + row[rc_station] + "'");
        const Date d = Date::parse(row[rc_date]);
        const auto dt = day_index.find(d);
        if (dt == day_index.end())
            throw SchemaError("missing weather row for day " + d.to_string());
        const long hour = parse_long(row[rc_hour], "hour");
        if (hour < 0 || hour > 23) throw SchemaError("hour out of range in rentals file");
        const long c = parse_long(row[rc_count], "count");
        if (c < 0) throw ValidationError("negative count in rentals file");
        panel.counts[panel.cell(it->second, dt->second, static_cast<int>(hour))] +=
            static_cast<std::int32_t>(c);
    }

    panel.validate();
    return panel;
}

void write_panel(const std::string& rentals_path, const std::string& stations_path,
                 const std::string& weather_path, const RentalPanel& panel,
                 const StationRegistry& reg)
{
    write_stations(stations_path, reg);
    {
        std::vector<std::vector<std::string>> rows;
        for (int t = 0; t < panel.n_days(); ++t)
            rows.push_back({panel.dates[t].to_string(), std::to_string(int(panel.rain[t])),
                            air_name(panel.air[t])});
        write_csv(weather_path, {"date", "rain", "air"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (int s = 0; s < panel.n_stations(); ++s)
            for (int t = 0; t < panel.n_days(); ++t)
                for (int h = 0; h < panel.n_hours(); ++h) {
                    const auto c = panel.count(s, t, h);
                    if (c == 0) continue;
                    rows.push_back({panel.station_ids[s], panel.dates[t].to_string(),
                                    std::to_string(h), std::to_string(c)});
                }
        write_csv(rentals_path, {"station_id", "date", "hour", "count"}, rows);
    }
}

RentalPanel synth_panel(std::uint64_t seed, const StationRegistry& reg, int n_days,
                        const CalendarDims& dims, const ParamState& truth, double rain_prob)
{
    dims.validate();
    if (n_days < 1) throw ValidationError("n_days must be >= 1");
    truth.validate_dims(reg.size(), dims);

    RentalPanel panel;
    panel.station_ids = reg.ids;
    panel.dims = dims;
    panel.dates.resize(n_days);  // synthetic calendar: day t has category t mod n_days_of_week
    for (int t = 0; t < n_days; ++t) {
        // nominal dates anchored at a Monday so a 7-day week matches real weekdays
        Date d{2019, 4, 1};
        using namespace std::chrono;
        const sys_days base = sys_days(year_month_day{year{d.year}, month{unsigned(d.month)},
                                                      std::chrono::day{unsigned(d.day)}});
        const year_month_day ymd{base + days{t}};
        panel.dates[t] = Date{int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day()))};
        panel.day_of_week.push_back(t % dims.n_days_of_week);
        panel.time_index.push_back(t);
    }

    PoissonSampler sampler(seed);
    for (int t = 0; t < n_days; ++t) {
        panel.rain.push_back(sampler.uniform() < rain_prob ? 1 : 0);
        panel.air.push_back(static_cast<AirCategory>(sampler.raw() % 4));
    }

    const Offsets off = Offsets::from(reg);
    panel.counts.resize(std::size_t(reg.size()) * n_days * dims.n_hours);
    for (int s = 0; s < reg.size(); ++s)
        for (int t = 0; t < n_days; ++t)
            for (int h = 0; h < dims.n_hours; ++h) {
                const double mu = mean_at(truth, panel, off, s, t, h);
                panel.counts[panel.cell(s, t, h)] = static_cast<std::int32_t>(sampler.draw(mu));
            }

    panel.validate();
    return panel;
}

}  // namespace netfuse
