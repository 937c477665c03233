#include "netfuse/params.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "netfuse/csv.hpp"

namespace netfuse {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

ParamState ParamState::zeros(int n_stations, const CalendarDims& dims)
{
    dims.validate();
    ParamState p;
    p.theta = Eigen::VectorXd::Zero(n_stations);
    p.shared_hod = Eigen::VectorXd::Zero(dims.hours_free());
    p.shared_dow = Eigen::VectorXd::Zero(dims.dows_free());
    p.hod_int = Eigen::MatrixXd::Zero(n_stations, dims.hours_free());
    p.dow_int = Eigen::MatrixXd::Zero(n_stations, dims.dows_free());
    return p;
}

void ParamState::normalize_gauge()
{
    if (n_stations() == 0) return;
    for (int h = 0; h < hours_free(); ++h) {
        const double c = hod_int(0, h);
        shared_hod[h] += c;
        hod_int.col(h).array() -= c;
    }
    for (int d = 0; d < dows_free(); ++d) {
        const double c = dow_int(0, d);
        shared_dow[d] += c;
        dow_int.col(d).array() -= c;
    }
}

void ParamState::validate_dims(int n_stations, const CalendarDims& dims) const
{
    if (theta.size() != n_stations || shared_hod.size() != dims.hours_free() ||
        shared_dow.size() != dims.dows_free() || hod_int.rows() != n_stations ||
        hod_int.cols() != dims.hours_free() || dow_int.rows() != n_stations ||
        dow_int.cols() != dims.dows_free())
        throw ValidationError("parameter state dimensions do not match panel dimensions");
}

PhiView PhiView::from(const ParamState& p)
{
    const int S = p.n_stations();
    PhiView v;
    v.hod.resize(S, p.hours_free() + 1);
    v.dow.resize(S, p.dows_free() + 1);
    for (int s = 0; s < S; ++s) {
        for (int h = 0; h <= p.hours_free(); ++h) v.hod(s, h) = p.phi_hod(s, h);
        for (int d = 0; d <= p.dows_free(); ++d) v.dow(s, d) = p.phi_dow(s, d);
    }
    return v;
}

Eigen::VectorXd FlatLayout::to_flat(const ParamState& p) const
{
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(beta_dim());
    for (int d = 0; d < Do; ++d)
        for (int s = 0; s < S; ++s) beta[dow_int(d, s)] = p.dow_int(s, d);
    for (int s = 0; s < S; ++s) beta[theta(s)] = p.theta[s];
    for (int h = 0; h < Ho; ++h)
        for (int s = 0; s < S; ++s) beta[hod_int(h, s)] = p.hod_int(s, h);
    for (int h = 0; h < Ho; ++h) beta[shared_hod(h)] = p.shared_hod[h];
    for (int d = 0; d < Do; ++d) beta[shared_dow(d)] = p.shared_dow[d];
    beta[delta(0)] = p.delta.alpha;
    beta[delta(1)] = p.delta.beta_rain;
    for (int k = 0; k < 3; ++k) beta[delta(2 + k)] = p.delta.beta_air[k];
    return beta;
}

ParamState FlatLayout::from_flat(const Eigen::VectorXd& beta) const
{
    if (beta.size() != beta_dim()) throw ValidationError("flat vector has wrong length");
    CalendarDims dims{Ho + 1, Do + 1};
    ParamState p = ParamState::zeros(S, dims);
    for (int d = 0; d < Do; ++d)
        for (int s = 0; s < S; ++s) p.dow_int(s, d) = beta[dow_int(d, s)];
    for (int s = 0; s < S; ++s) p.theta[s] = beta[theta(s)];
    for (int h = 0; h < Ho; ++h)
        for (int s = 0; s < S; ++s) p.hod_int(s, h) = beta[hod_int(h, s)];
    for (int h = 0; h < Ho; ++h) p.shared_hod[h] = beta[shared_hod(h)];
    for (int d = 0; d < Do; ++d) p.shared_dow[d] = beta[shared_dow(d)];
    p.delta.alpha = beta[delta(0)];
    p.delta.beta_rain = beta[delta(1)];
    for (int k = 0; k < 3; ++k) p.delta.beta_air[k] = beta[delta(2 + k)];
    return p;
}

namespace {

void write_vector_csv(const fs::path& path, const std::string& key_name,
                      const std::vector<std::string>& keys, const Eigen::VectorXd& v)
{
    std::vector<std::vector<std::string>> rows;
    rows.reserve(v.size());
    for (int i = 0; i < v.size(); ++i) rows.push_back({keys[i], format_double(v[i])});
    write_csv(path.string(), {key_name, "value"}, rows);
}

void write_matrix_csv(const fs::path& path, const std::string& col_name,
                      const std::vector<std::string>& station_ids,
                      const std::vector<std::string>& col_keys, const Eigen::MatrixXd& m)
{
    std::vector<std::vector<std::string>> rows;
    rows.reserve(std::size_t(m.rows()) * m.cols());
    for (int s = 0; s < m.rows(); ++s)
        for (int j = 0; j < m.cols(); ++j)
            rows.push_back({station_ids[s], col_keys[j], format_double(m(s, j))});
    write_csv(path.string(), {"station_id", col_name, "value"}, rows);
}

std::vector<std::string> hour_keys(int Ho)
{
    std::vector<std::string> k;
    for (int h = 1; h <= Ho; ++h) k.push_back(std::to_string(h));
    return k;
}

std::vector<std::string> dow_keys(int Do)
{
    std::vector<std::string> k;
    for (int d = 1; d <= Do; ++d) k.push_back(Do == 6 ? dow_name(d) : std::to_string(d));
    return k;
}

}  // namespace

void write_param_bundle(const std::string& dir, const ParamState& p,
                        const std::vector<std::string>& station_ids)
{
    if (static_cast<int>(station_ids.size()) != p.n_stations())
        throw ValidationError("station id list does not match parameter state");
    fs::create_directories(dir);
    const fs::path base(dir);

    ordered_json meta;
    meta["n_stations"] = p.n_stations();
    meta["n_hours"] = p.hours_free() + 1;
    meta["n_days_of_week"] = p.dows_free() + 1;
    std::ofstream mf(base / "meta.json");
    mf << meta.dump(2) << '\n';

    write_vector_csv(base / "theta.csv", "station_id", station_ids, p.theta);
    {
        std::vector<std::vector<std::string>> rows;
        const auto hk = hour_keys(p.hours_free());
        for (int h = 0; h < p.hours_free(); ++h)
            rows.push_back({hk[h], format_double(p.shared_hod[h])});
        write_csv((base / "shared_hod.csv").string(), {"hour", "value"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        const auto dk = dow_keys(p.dows_free());
        for (int d = 0; d < p.dows_free(); ++d)
            rows.push_back({dk[d], format_double(p.shared_dow[d])});
        write_csv((base / "shared_dow.csv").string(), {"dow", "value"}, rows);
    }
    write_matrix_csv(base / "hod_int.csv", "hour", station_ids, hour_keys(p.hours_free()),
                     p.hod_int);
    write_matrix_csv(base / "dow_int.csv", "dow", station_ids, dow_keys(p.dows_free()),
                     p.dow_int);
    {
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"alpha", format_double(p.delta.alpha)});
        rows.push_back({"beta_rain", format_double(p.delta.beta_rain)});
        rows.push_back({"beta_air_bad", format_double(p.delta.beta_air[0])});
        rows.push_back({"beta_air_average", format_double(p.delta.beta_air[1])});
        rows.push_back({"beta_air_good", format_double(p.delta.beta_air[2])});
        write_csv((base / "delta.csv").string(), {"name", "value"}, rows);
    }
}

ParamState read_param_bundle(const std::string& dir, std::vector<std::string>* station_ids)
{
    const fs::path base(dir);
    std::ifstream mf(base / "meta.json");
    if (!mf) throw SchemaError("cannot open " + (base / "meta.json").string());
    ordered_json meta = ordered_json::parse(mf);
    const int S = meta.at("n_stations").get<int>();
    CalendarDims dims{meta.at("n_hours").get<int>(), meta.at("n_days_of_week").get<int>()};
    dims.validate();

    ParamState p = ParamState::zeros(S, dims);

    auto theta_tab = read_csv((base / "theta.csv").string());
    if (static_cast<int>(theta_tab.rows.size()) != S)
        throw SchemaError("theta.csv row count does not match meta.json");
    std::vector<std::string> ids(S);
    std::unordered_map<std::string, int> id_index;
    for (int s = 0; s < S; ++s) {
        ids[s] = theta_tab.rows[s][0];
        id_index[ids[s]] = s;
        p.theta[s] = parse_double(theta_tab.rows[s][1], "theta");
    }

    auto hod_keys_map = [&](const std::string& key) {
        const long h = parse_long(key, "hour");
        if (h < 1 || h > dims.hours_free()) throw SchemaError("hour key out of range: " + key);
        return static_cast<int>(h - 1);
    };
    auto dow_keys_map = [&](const std::string& key) -> int {
        if (dims.dows_free() == 6)
            for (int d = 1; d <= 6; ++d)
                if (key == dow_name(d)) return d - 1;
        const long d = parse_long(key, "dow");
        if (d < 1 || d > dims.dows_free()) throw SchemaError("dow key out of range: " + key);
        return static_cast<int>(d - 1);
    };

    auto sh = read_csv((base / "shared_hod.csv").string());
    for (const auto& row : sh.rows) p.shared_hod[hod_keys_map(row[0])] = parse_double(row[1], "shared_hod");
    auto sd = read_csv((base / "shared_dow.csv").string());
    for (const auto& row : sd.rows) p.shared_dow[dow_keys_map(row[0])] = parse_double(row[1], "shared_dow");

    auto hi = read_csv((base / "hod_int.csv").string());
    for (const auto& row : hi.rows) {
        auto it = id_index.find(row[0]);
        if (it == id_index.end()) throw SchemaError("hod_int.csv references unknown station " + row[0]);
        p.hod_int(it->second, hod_keys_map(row[1])) = parse_double(row[2], "hod_int");
    }
    auto di = read_csv((base / "dow_int.csv").string());
    for (const auto& row : di.rows) {
        auto it = id_index.find(row[0]);
        if (it == id_index.end()) throw SchemaError("dow_int.csv references unknown station " + row[0]);
        p.dow_int(it->second, dow_keys_map(row[1])) = parse_double(row[2], "dow_int");
    }

    auto dl = read_csv((base / "delta.csv").string());
    for (const auto& row : dl.rows) {
        const double v = parse_double(row[1], "delta");
        if (row[0] == "alpha") p.delta.alpha = v;
        else if (row[0] == "beta_rain") p.delta.beta_rain = v;
        else if (row[0] == "beta_air_bad") p.delta.beta_air[0] = v;
        else if (row[0] == "beta_air_average") p.delta.beta_air[1] = v;
        else if (row[0] == "beta_air_good") p.delta.beta_air[2] = v;
        else throw SchemaError("unknown delta entry: " + row[0]);
    }

    if (station_ids) *station_ids = std::move(ids);
    return p;
}

}  // namespace netfuse
