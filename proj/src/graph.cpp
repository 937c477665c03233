#include "netfuse/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace netfuse {

double haversine_m(double lat1, double lon1, double lat2, double lon2)
{
    constexpr double kEarthRadius = 6371000.0;
    constexpr double kDeg = M_PI / 180.0;
    const double p1 = lat1 * kDeg, p2 = lat2 * kDeg;
    const double dp = (lat2 - lat1) * kDeg, dl = (lon2 - lon1) * kDeg;
    const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                     std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
    return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(a)));
}

namespace {

ProximityGraph finalize(int S, double radius, std::vector<std::vector<int>> neighbors)
{
    ProximityGraph g;
    g.n_stations = S;
    g.radius_m = radius;
    g.neighbors = std::move(neighbors);
    g.row_start.assign(S + 1, 0);
    for (int s = 0; s < S; ++s) {
        std::sort(g.neighbors[s].begin(), g.neighbors[s].end());
        g.row_start[s + 1] = g.row_start[s] + static_cast<int>(g.neighbors[s].size());
    }
    g.pair_station.reserve(g.row_start[S]);
    g.pair_neighbor.reserve(g.row_start[S]);
    for (int s = 0; s < S; ++s)
        for (int nb : g.neighbors[s]) {
            g.pair_station.push_back(s);
            g.pair_neighbor.push_back(nb);
        }
    return g;
}

}  // namespace

ProximityGraph build_proximity(const StationRegistry& reg, double radius_m)
{
    if (reg.size() < 1) throw ValidationError("station registry is empty");
    if (!(radius_m > 0.0)) throw ValidationError("radius must be positive");
    const int S = reg.size();
    std::vector<std::vector<int>> neighbors(S);
    for (int a = 0; a < S; ++a)
        for (int b = a + 1; b < S; ++b) {
            const double d = haversine_m(reg.latitude[a], reg.longitude[a], reg.latitude[b],
                                         reg.longitude[b]);
            if (d < radius_m) {
                neighbors[a].push_back(b);
                neighbors[b].push_back(a);
            }
        }
    return finalize(S, radius_m, std::move(neighbors));
}

ProximityGraph graph_from_edges(int n_stations, const std::vector<std::pair<int, int>>& edges)
{
    std::vector<std::set<int>> nb(n_stations);
    for (auto [u, v] : edges) {
        if (u == v) throw ValidationError("self loop in edge list");
        if (u < 0 || v < 0 || u >= n_stations || v >= n_stations)
            throw ValidationError("edge endpoint out of range");
        nb[u].insert(v);
        nb[v].insert(u);
    }
    std::vector<std::vector<int>> neighbors(n_stations);
    for (int s = 0; s < n_stations; ++s) neighbors[s].assign(nb[s].begin(), nb[s].end());
    return finalize(n_stations, 0.0, std::move(neighbors));
}

int ProximityGraph::row_index(int s, int s_prime) const
{
    const auto& list = neighbors[s];
    const auto it = std::lower_bound(list.begin(), list.end(), s_prime);
    if (it == list.end() || *it != s_prime)
        throw ValidationError("requested pair is not an edge");
    return row_start[s] + static_cast<int>(it - list.begin());
}

std::vector<std::pair<int, int>> ProximityGraph::undirected_edges() const
{
    std::vector<std::pair<int, int>> out;
    for (int e = 0; e < n_pairs(); ++e)
        if (pair_station[e] < pair_neighbor[e]) out.emplace_back(pair_station[e], pair_neighbor[e]);
    return out;
}

std::vector<int> ProximityGraph::component_labels() const
{
    DisjointSet dsu(n_stations);
    for (int e = 0; e < n_pairs(); ++e) dsu.unite(pair_station[e], pair_neighbor[e]);
    return dsu.compressed_labels();
}

int ProximityGraph::component_count() const
{
    DisjointSet dsu(n_stations);
    for (int e = 0; e < n_pairs(); ++e) dsu.unite(pair_station[e], pair_neighbor[e]);
    return dsu.component_count();
}

void ProximityGraph::apply_incidence(const Eigen::VectorXd& v, Eigen::Ref<Eigen::VectorXd> out) const
{
    for (int e = 0; e < n_pairs(); ++e) out[e] = v[pair_station[e]] - v[pair_neighbor[e]];
}

void ProximityGraph::apply_incidence_t(const Eigen::Ref<const Eigen::VectorXd>& u,
                                       Eigen::Ref<Eigen::VectorXd> out, double scale) const
{
    for (int e = 0; e < n_pairs(); ++e) {
        const double w = scale * u[e];
        out[pair_station[e]] += w;
        out[pair_neighbor[e]] -= w;
    }
}

Eigen::MatrixXd ProximityGraph::incidence_dense() const
{
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n_pairs(), n_stations);
    for (int e = 0; e < n_pairs(); ++e) {
        D(e, pair_station[e]) = 1.0;
        D(e, pair_neighbor[e]) = -1.0;
    }
    return D;
}

Eigen::MatrixXd ProximityGraph::laplacian() const
{
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n_stations, n_stations);
    for (int s = 0; s < n_stations; ++s) L(s, s) = degree(s);
    for (int e = 0; e < n_pairs(); ++e) L(pair_station[e], pair_neighbor[e]) -= 1.0;
    return L;
}

double NetLaplacian::zero_tolerance() const
{
    const double max_eig = eigenvalues.size() ? std::abs(eigenvalues[0]) : 0.0;
    return 1e-9 * std::max(max_eig, 1.0);
}

NetLaplacian laplacian_eig(const ProximityGraph& graph)
{
    NetLaplacian out;
    out.ltilde = 0.5 * graph.laplacian();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.ltilde);
    if (es.info() != Eigen::Success)
        throw NumericalError("Laplacian eigendecomposition failed (matrix size " +
                             std::to_string(graph.n_stations) + ")");
    // Eigen returns increasing order; store non-increasing.
    const int S = graph.n_stations;
    out.eigenvalues.resize(S);
    out.eigenvectors.resize(S, S);
    for (int j = 0; j < S; ++j) {
        out.eigenvalues[j] = es.eigenvalues()[S - 1 - j];
        out.eigenvectors.col(j) = es.eigenvectors().col(S - 1 - j);
    }
    out.col_sums = out.eigenvectors.transpose() * Eigen::VectorXd::Ones(S);
    const double tol = out.zero_tolerance();
    out.n_zero_eigenvalues = 0;
    for (int j = 0; j < S; ++j)
        if (std::abs(out.eigenvalues[j]) < tol) ++out.n_zero_eigenvalues;
    out.n_components = graph.component_count();
    return out;
}

std::vector<std::pair<int, int>> multilayer_edges(const ProximityGraph& graph, int n_layers)
{
    MultilayerGraph ml{graph.n_stations, n_layers};
    std::vector<std::pair<int, int>> edges;
    for (auto [u, v] : graph.undirected_edges())
        for (int h = 0; h < n_layers; ++h) edges.emplace_back(ml.node(u, h), ml.node(v, h));
    for (int s = 0; s < graph.n_stations; ++s)
        for (int h = 0; h < n_layers; ++h)
            edges.emplace_back(ml.node(s, h), ml.node(s, (h + 1) % n_layers));
    return edges;
}

void export_edge_list(const std::string& path, const ProximityGraph& graph,
                      const std::vector<std::string>& station_ids)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << "station_a,station_b\n";
    for (auto [u, v] : graph.undirected_edges())
        out << station_ids[u] << ',' << station_ids[v] << '\n';
}

void export_graphml(const std::string& path, const ProximityGraph& graph,
                    const std::vector<std::string>& station_ids)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
        << "  <graph id=\"proximity\" edgedefault=\"undirected\">\n";
    for (int s = 0; s < graph.n_stations; ++s)
        out << "    <node id=\"" << station_ids[s] << "\"/>\n";
    for (auto [u, v] : graph.undirected_edges())
        out << "    <edge source=\"" << station_ids[u] << "\" target=\"" << station_ids[v]
            << "\"/>\n";
    out << "  </graph>\n</graphml>\n";
}

}  // namespace netfuse
