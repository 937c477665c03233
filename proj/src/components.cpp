#include "netfuse/components.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace netfuse {

std::vector<int> value_classes(const Eigen::VectorXd& values, double eps)
{
    const int n = static_cast<int>(values.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<int> cls(n, 0);
    int next = -1;
    double prev = 0.0;
    std::vector<int> first_seen;  // class id by sorted rank -> id by first appearance
    for (int k = 0; k < n; ++k) {
        const int i = order[k];
        if (next < 0 || values[i] - prev > eps) ++next;
        cls[i] = next;
        prev = values[i];
    }
    // renumber by first appearance so ids are independent of value magnitudes
    std::vector<int> remap(next + 1, -1);
    int fresh = 0;
    for (int i = 0; i < n; ++i) {
        if (remap[cls[i]] < 0) remap[cls[i]] = fresh++;
        cls[i] = remap[cls[i]];
    }
    return cls;
}

namespace {

LayerComponents components_union_find(const ProximityGraph& graph, const std::vector<int>& cls)
{
    DisjointSet dsu(graph.n_stations);
    for (auto [u, v] : graph.undirected_edges())
        if (cls[u] == cls[v]) dsu.unite(u, v);
    LayerComponents out;
    out.labels = dsu.compressed_labels();
    out.count = dsu.component_count();
    return out;
}

// Labels components from the null space of the intersected graph's Laplacian:
// stations belong to the same component exactly when they agree, entrywise, on
// every zero-eigenvalue eigenvector.
LayerComponents components_spectral(const ProximityGraph& graph, const std::vector<int>& cls)
{
    const int S = graph.n_stations;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(S, S);
    for (auto [u, v] : graph.undirected_edges())
        if (cls[u] == cls[v]) {
            L(u, u) += 1.0;
            L(v, v) += 1.0;
            L(u, v) -= 1.0;
            L(v, u) -= 1.0;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    if (es.info() != Eigen::Success) {
        LayerComponents out = components_union_find(graph, cls);
        out.spectral_fallback = true;
        return out;
    }
    const double zero_tol = 1e-9 * std::max(es.eigenvalues().maxCoeff(), 1.0);
    int n_zero = 0;
    while (n_zero < S && es.eigenvalues()[n_zero] < zero_tol) ++n_zero;

    // intersect per-eigenvector value classes
    std::vector<int> key(S, 0);
    const double entry_tol = 1e-7;
    for (int i = 0; i < n_zero; ++i) {
        const std::vector<int> ci = value_classes(es.eigenvectors().col(i), entry_tol);
        std::map<std::pair<int, int>, int> combine;
        for (int s = 0; s < S; ++s) {
            const auto k = std::make_pair(key[s], ci[s]);
            auto it = combine.find(k);
            if (it == combine.end())
                it = combine.emplace(k, static_cast<int>(combine.size())).first;
            key[s] = it->second;
        }
    }
    LayerComponents out;
    out.labels.assign(S, 0);
    int count = 0;
    std::vector<int> remap;
    for (int s = 0; s < S; ++s) {
        while (static_cast<int>(remap.size()) <= key[s]) remap.push_back(-1);
        if (remap[key[s]] < 0) remap[key[s]] = count++;
        out.labels[s] = remap[key[s]];
    }
    out.count = count;
    if (out.count != n_zero) {
        // ambiguity between the zero-eigenvalue threshold and the eigenvector
        // value classes; the combinatorial count is exact
        out = components_union_find(graph, cls);
        out.spectral_fallback = true;
    }
    return out;
}

}  // namespace

LayerComponents layer_components(const ProximityGraph& graph, const Eigen::VectorXd& values,
                                 const FusionTolerance& tol, ComponentEngine engine)
{
    if (values.size() != graph.n_stations)
        throw ValidationError("layer values do not match the station count");
    const std::vector<int> cls = value_classes(values, tol.resolve(values));
    return engine == ComponentEngine::union_find ? components_union_find(graph, cls)
                                                 : components_spectral(graph, cls);
}

int ClusterLabelMatrix::total_labels() const
{
    std::vector<int> seen;
    for (int h = 0; h < labels.rows(); ++h)
        for (int s = 0; s < labels.cols(); ++s) seen.push_back(labels(h, s));
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    return static_cast<int>(seen.size());
}

namespace {

// Class ids over all (station, hour) values at once, so intra-layer equality and
// the cross-layer links of the linking sweeps use one consistent relation.
std::vector<int> flat_value_classes(const Eigen::MatrixXd& phi_hod, const FusionTolerance& tol)
{
    const int S = static_cast<int>(phi_hod.rows());
    const int H = static_cast<int>(phi_hod.cols());
    Eigen::VectorXd flat(S * H);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s) flat[h * S + s] = phi_hod(s, h);
    return value_classes(flat, tol.resolve(flat));
}

}  // namespace

ClusterLabelMatrix initial_labels(const ProximityGraph& graph, const Eigen::MatrixXd& phi_hod,
                                  const FusionTolerance& tol, ComponentEngine engine)
{
    const int S = graph.n_stations;
    const int H = static_cast<int>(phi_hod.cols());
    if (phi_hod.rows() != S) throw ValidationError("phi matrix does not match the station count");
    const std::vector<int> cls = flat_value_classes(phi_hod, tol);
    ClusterLabelMatrix m;
    m.labels.resize(H, S);
    int next = 0;
    for (int h = 0; h < H; ++h) {
        std::vector<int> layer_cls(S);
        for (int s = 0; s < S; ++s) layer_cls[s] = cls[h * S + s];
        const LayerComponents lc = engine == ComponentEngine::union_find
                                       ? components_union_find(graph, layer_cls)
                                       : components_spectral(graph, layer_cls);
        for (int s = 0; s < S; ++s) m.labels(h, s) = next + lc.labels[s];
        next += lc.count;
        m.layer_counts.push_back(lc.count);
    }
    return m;
}

namespace {

// Station lists of the label classes present in one row.
std::vector<std::vector<int>> row_clusters(const Eigen::MatrixXi& labels, int row)
{
    std::map<int, std::vector<int>> by_label;
    for (int s = 0; s < labels.cols(); ++s) by_label[labels(row, s)].push_back(s);
    std::vector<std::vector<int>> out;
    out.reserve(by_label.size());
    for (auto& [lab, members] : by_label) out.push_back(std::move(members));
    return out;
}

}  // namespace

bool link_layers(ClusterLabelMatrix& m, const Eigen::MatrixXd& phi_hod,
                 const std::vector<int>& order, const FusionTolerance& tol)
{
    const int S = static_cast<int>(phi_hod.rows());
    const int H = static_cast<int>(phi_hod.cols());
    if (m.labels.rows() != H || m.labels.cols() != S)
        throw ValidationError("label matrix does not match the estimates");

    // one transitive class id per (station, hour) value, shared across layers
    const std::vector<int> cls = flat_value_classes(phi_hod, tol);
    auto value_class = [&](int s, int h) { return cls[h * S + s]; };

    bool changed = false;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const int cur = order[i];
        const int nxt = order[i + 1];
        for (const auto& members : row_clusters(m.labels, cur)) {
            for (int station : members) {
                if (value_class(station, cur) != value_class(station, nxt)) continue;
                const int m1 = m.labels(cur, station);
                const int m2 = m.labels(nxt, station);
                if (m1 == m2) continue;  // this member is already linked; try the next
                const int keep = std::min(m1, m2);
                // relabel both components (label classes within their rows)
                for (int s = 0; s < S; ++s) {
                    if (m.labels(cur, s) == m1) m.labels(cur, s) = keep;
                    if (m.labels(nxt, s) == m2) m.labels(nxt, s) = keep;
                }
                changed = true;
                break;  // at most one link per component per sweep
            }
        }
    }
    return changed;
}

int count_multilayer_components(const ProximityGraph& graph, const Eigen::MatrixXd& phi_hod,
                                const FusionTolerance& tol, MultilayerEngine engine,
                                ComponentEngine layer_engine)
{
    const int S = graph.n_stations;
    const int H = static_cast<int>(phi_hod.cols());
    if (phi_hod.rows() != S) throw ValidationError("phi matrix does not match the station count");

    if (engine == MultilayerEngine::union_find) {
        const std::vector<int> cls = flat_value_classes(phi_hod, tol);
        auto value_class = [&](int s, int h) { return cls[h * S + s]; };
        MultilayerGraph ml{S, H};
        DisjointSet dsu(static_cast<int>(ml.n_nodes()));
        for (auto [u, v] : graph.undirected_edges())
            for (int h = 0; h < H; ++h)
                if (value_class(u, h) == value_class(v, h))
                    dsu.unite(ml.node(u, h), ml.node(v, h));
        for (int s = 0; s < S; ++s)
            for (int h = 0; h < H; ++h)
                if (value_class(s, h) == value_class(s, (h + 1) % H))
                    dsu.unite(ml.node(s, h), ml.node(s, (h + 1) % H));
        return dsu.component_count();
    }

    ClusterLabelMatrix m = initial_labels(graph, phi_hod, tol, layer_engine);
    std::vector<int> forward(H), wrapped(H);
    std::iota(forward.begin(), forward.end(), 0);
    wrapped[0] = H - 1;
    std::iota(wrapped.begin() + 1, wrapped.end(), 0);

    bool changed = true;
    int guard = S * H + 8;
    while (changed && guard-- > 0) {
        changed = false;
        if (link_layers(m, phi_hod, forward, tol)) changed = true;
        if (link_layers(m, phi_hod, wrapped, tol)) changed = true;
    }
    return m.total_labels();
}

ComplexityReport model_complexity(const ProximityGraph& graph, const PhiView& phi,
                                  const FusionTolerance& tol, MultilayerEngine engine,
                                  ComponentEngine layer_engine)
{
    const int S = graph.n_stations;
    const int H = static_cast<int>(phi.hod.cols());
    const int D = static_cast<int>(phi.dow.cols());
    ComplexityReport rep;
    rep.unpenalized = 5 + (H - 1) + (D - 1);
    rep.multilayer_components =
        count_multilayer_components(graph, phi.hod, tol, engine, layer_engine);
    for (int d = 1; d < D; ++d)
        rep.day_components.push_back(
            layer_components(graph, phi.dow.col(d), tol, layer_engine).count);
    rep.numerator = rep.unpenalized + rep.multilayer_components;
    for (int c : rep.day_components) rep.numerator += c;
    rep.total_params = rep.unpenalized + S + std::int64_t(S - 1) * ((H - 1) + (D - 1));
    rep.mc = double(rep.numerator) / double(rep.total_params);
    return rep;
}

}  // namespace netfuse
