#include "netfuse/model.hpp"

#include <algorithm>
#include <cmath>

namespace netfuse {

Offsets Offsets::from(const StationRegistry& reg)
{
    Offsets o;
    o.log_capacity.resize(reg.size());
    for (int s = 0; s < reg.size(); ++s) o.log_capacity[s] = std::log(double(reg.capacity[s]));
    return o;
}

double linear_predictor(const ParamState& p, const RentalPanel& panel, int s, int t, int h,
                        double time_scale)
{
    double eta = p.theta[s] + p.delta.alpha * (panel.time_index[t] * time_scale);
    if (panel.rain[t]) eta += p.delta.beta_rain;
    const int cat = static_cast<int>(panel.air[t]);
    if (cat > 0) eta += p.delta.beta_air[cat - 1];
    if (h > 0) eta += p.shared_hod[h - 1] + p.hod_int(s, h - 1);
    const int d = panel.day_of_week[t];
    if (d > 0) eta += p.shared_dow[d - 1] + p.dow_int(s, d - 1);
    return eta;
}

double mean_at(const ParamState& p, const RentalPanel& panel, const Offsets& off, int s, int t,
               int h, double time_scale)
{
    const double eta = linear_predictor(p, panel, s, t, h, time_scale) + off.log_capacity[s];
    return std::exp(std::clamp(eta, -kEtaClamp, kEtaClamp));
}

double neg_loglik(const ParamState& p, const RentalPanel& panel, const Offsets& off,
                  const ModelOptions& opt)
{
    const int S = panel.n_stations(), T = panel.n_days(), H = panel.n_hours();
    return ChunkedSum::sum(std::size_t(S) * T * H, [&](std::size_t i) {
        const int h = static_cast<int>(i % H);
        const int t = static_cast<int>((i / H) % T);
        const int s = static_cast<int>(i / (std::size_t(H) * T));
        const double mu = mean_at(p, panel, off, s, t, h, opt.time_scale);
        const double y = panel.counts[i];
        return mu - (y > 0 ? y * std::log(mu) : 0.0);
    });
}

IrlsWorkingSet irls_working_set(const ParamState& p, const RentalPanel& panel,
                                const Offsets& off, const ModelOptions& opt)
{
    const int S = panel.n_stations(), T = panel.n_days(), H = panel.n_hours();
    const std::int64_t n = panel.n_obs();
    IrlsWorkingSet ws;
    ws.weights.resize(n);
    ws.response.resize(n);
    ws.eta.resize(n);
    std::int64_t i = 0;
    for (int s = 0; s < S; ++s)
        for (int t = 0; t < T; ++t)
            for (int h = 0; h < H; ++h, ++i) {
                const double eta = linear_predictor(p, panel, s, t, h, opt.time_scale);
                const double mu = std::max(
                    std::exp(std::clamp(eta + off.log_capacity[s], -kEtaClamp, kEtaClamp)),
                    kMuFloor);
                ws.eta[i] = eta;
                ws.weights[i] = mu;
                ws.response[i] = eta + panel.counts[i] / mu - 1.0;
            }
    return ws;
}

namespace {

// Free-parameter layout for the unpenalized fits:
//   [theta (S)] [shared_hod (Ho)] [shared_dow (Do)] [delta (5)]
//   [hod_int s=1..S-1 row-major (full model only)] [dow_int s=1..S-1]
struct FreeLayout {
    int S, Ho, Do;
    bool full;

    int theta(int s) const { return s; }
    int shared_hod(int h) const { return S + h; }
    int shared_dow(int d) const { return S + Ho + d; }
    int delta(int k) const { return S + Ho + Do + k; }
    int hod_int(int s, int h) const { return S + Ho + Do + 5 + (s - 1) * Ho + h; }
    int dow_int(int s, int d) const
    {
        return S + Ho + Do + 5 + (S - 1) * Ho + (s - 1) * Do + d;
    }
    int dim() const { return S + Ho + Do + 5 + (full ? (S - 1) * (Ho + Do) : 0); }
};

FreeLayout make_layout(const RentalPanel& panel, ModelKind kind)
{
    return FreeLayout{panel.n_stations(), panel.dims.hours_free(), panel.dims.dows_free(),
                      kind == ModelKind::full_interaction};
}

// Collects the (column, value) pairs of one design row.
template <typename F>
void design_row(const FreeLayout& L, const RentalPanel& panel, double time_scale, int s, int t,
                int h, F&& emit)
{
    emit(L.theta(s), 1.0);
    const double tv = panel.time_index[t] * time_scale;
    if (tv != 0.0) emit(L.delta(0), tv);
    if (panel.rain[t]) emit(L.delta(1), 1.0);
    const int cat = static_cast<int>(panel.air[t]);
    if (cat > 0) emit(L.delta(2 + cat - 1), 1.0);
    if (h > 0) {
        emit(L.shared_hod(h - 1), 1.0);
        if (L.full && s > 0) emit(L.hod_int(s, h - 1), 1.0);
    }
    const int d = panel.day_of_week[t];
    if (d > 0) {
        emit(L.shared_dow(d - 1), 1.0);
        if (L.full && s > 0) emit(L.dow_int(s, d - 1), 1.0);
    }
}

}  // namespace

int free_param_count(const RentalPanel& panel, ModelKind kind)
{
    return make_layout(panel, kind).dim();
}

ParamState state_from_free(const Eigen::VectorXd& fv, const RentalPanel& panel, ModelKind kind)
{
    const FreeLayout L = make_layout(panel, kind);
    if (fv.size() != L.dim()) throw ValidationError("free vector has wrong length");
    ParamState p = ParamState::zeros(L.S, panel.dims);
    for (int s = 0; s < L.S; ++s) p.theta[s] = fv[L.theta(s)];
    for (int h = 0; h < L.Ho; ++h) p.shared_hod[h] = fv[L.shared_hod(h)];
    for (int d = 0; d < L.Do; ++d) p.shared_dow[d] = fv[L.shared_dow(d)];
    p.delta.alpha = fv[L.delta(0)];
    p.delta.beta_rain = fv[L.delta(1)];
    for (int k = 0; k < 3; ++k) p.delta.beta_air[k] = fv[L.delta(2 + k)];
    if (L.full)
        for (int s = 1; s < L.S; ++s) {
            for (int h = 0; h < L.Ho; ++h) p.hod_int(s, h) = fv[L.hod_int(s, h)];
            for (int d = 0; d < L.Do; ++d) p.dow_int(s, d) = fv[L.dow_int(s, d)];
        }
    return p;
}

Eigen::VectorXd free_from_state(const ParamState& p, const RentalPanel& panel, ModelKind kind)
{
    const FreeLayout L = make_layout(panel, kind);
    Eigen::VectorXd fv = Eigen::VectorXd::Zero(L.dim());
    for (int s = 0; s < L.S; ++s) fv[L.theta(s)] = p.theta[s];
    for (int h = 0; h < L.Ho; ++h) fv[L.shared_hod(h)] = p.shared_hod[h];
    for (int d = 0; d < L.Do; ++d) fv[L.shared_dow(d)] = p.shared_dow[d];
    fv[L.delta(0)] = p.delta.alpha;
    fv[L.delta(1)] = p.delta.beta_rain;
    for (int k = 0; k < 3; ++k) fv[L.delta(2 + k)] = p.delta.beta_air[k];
    if (L.full)
        for (int s = 1; s < L.S; ++s) {
            for (int h = 0; h < L.Ho; ++h) fv[L.hod_int(s, h)] = p.hod_int(s, h);
            for (int d = 0; d < L.Do; ++d) fv[L.dow_int(s, d)] = p.dow_int(s, d);
        }
    return fv;
}

Eigen::VectorXd neg_loglik_gradient(const ParamState& p, const RentalPanel& panel,
                                    const StationRegistry& reg, ModelKind kind,
                                    double time_scale)
{
    const FreeLayout L = make_layout(panel, kind);
    const Offsets off = Offsets::from(reg);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(L.dim());
    for (int s = 0; s < L.S; ++s)
        for (int t = 0; t < panel.n_days(); ++t)
            for (int h = 0; h < panel.n_hours(); ++h) {
                const double mu = mean_at(p, panel, off, s, t, h, time_scale);
                const double r = mu - panel.count(s, t, h);
                design_row(L, panel, time_scale, s, t, h,
                           [&](int c, double v) { grad[c] += v * r; });
            }
    return grad;
}

ParamState fit_unpenalized(const RentalPanel& panel, const StationRegistry& reg, ModelKind kind,
                           const FitOptions& opt, FitReport* report)
{
    panel.validate();
    if (reg.size() != panel.n_stations())
        throw ValidationError("registry and panel station counts differ");
    const FreeLayout L = make_layout(panel, kind);
    const Offsets off = Offsets::from(reg);
    const int P = L.dim();

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(P);
    ParamState state = state_from_free(beta, panel, kind);
    ModelOptions mopt;
    mopt.time_scale = opt.time_scale;
    mopt.threads = opt.threads;
    double nll = neg_loglik(state, panel, off, mopt);

    std::vector<std::pair<int, double>> row;
    row.reserve(8);
    Eigen::MatrixXd XtWX(P, P);
    Eigen::VectorXd XtWz(P), score(P);

    FitReport rep;
    for (rep.iterations = 1; rep.iterations <= opt.max_iter; ++rep.iterations) {
        XtWX.setZero();
        XtWz.setZero();
        score.setZero();
        for (int s = 0; s < L.S; ++s)
            for (int t = 0; t < panel.n_days(); ++t)
                for (int h = 0; h < panel.n_hours(); ++h) {
                    const double eta =
                        linear_predictor(state, panel, s, t, h, opt.time_scale);
                    const double mu = std::max(
                        std::exp(std::clamp(eta + off.log_capacity[s], -kEtaClamp, kEtaClamp)),
                        kMuFloor);
                    const double y = panel.count(s, t, h);
                    const double z = eta + y / mu - 1.0;
                    row.clear();
                    design_row(L, panel, opt.time_scale, s, t, h,
                               [&](int c, double v) { row.emplace_back(c, v); });
                    for (std::size_t a = 0; a < row.size(); ++a) {
                        XtWz[row[a].first] += mu * row[a].second * z;
                        score[row[a].first] += row[a].second * (y - mu);
                        for (std::size_t b = a; b < row.size(); ++b) {
                            const int i = std::min(row[a].first, row[b].first);
                            const int j = std::max(row[a].first, row[b].first);
                            XtWX(i, j) += mu * row[a].second * row[b].second;
                        }
                    }
                }
        rep.max_score = score.cwiseAbs().maxCoeff();
        if (rep.max_score <= opt.tol) {
            rep.converged = true;
            break;
        }
        XtWX.diagonal().array() += opt.ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(XtWX.selfadjointView<Eigen::Upper>());
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("IRLS normal equations factorization failed");
        const Eigen::VectorXd beta_new = ldlt.solve(XtWz);

        // Step-halving keeps the likelihood monotone when a full Newton step overshoots.
        double step = 1.0;
        double nll_new = nll;
        Eigen::VectorXd cand = beta;
        for (int half = 0; half < 30; ++half) {
            cand = beta + step * (beta_new - beta);
            state = state_from_free(cand, panel, kind);
            nll_new = neg_loglik(state, panel, off, mopt);
            if (std::isfinite(nll_new) && nll_new <= nll + 1e-12 * std::abs(nll) + 1e-12) break;
            step *= 0.5;
        }
        const double change = (cand - beta).cwiseAbs().maxCoeff();
        beta = cand;
        nll = nll_new;
        if (change < 1e-13) break;  // stalled; score check below decides convergence
    }

    state = state_from_free(beta, panel, kind);
    rep.neg_loglik = nll;
    if (!rep.converged) {
        const Eigen::VectorXd g = neg_loglik_gradient(state, panel, reg, kind, opt.time_scale);
        rep.max_score = g.cwiseAbs().maxCoeff();
        rep.converged = rep.max_score <= opt.tol;
    }
    if (report) *report = rep;
    if (!rep.converged && !report)
        throw NumericalError("IRLS did not converge: max |score| = " +
                             std::to_string(rep.max_score) + " after " +
                             std::to_string(rep.iterations) + " iterations");
    return state;
}

}  // namespace netfuse
