#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "netfuse/panel.hpp"

namespace netfuse {

// Great-circle distance in meters (haversine, mean Earth radius 6,371,000 m).
double haversine_m(double lat1, double lon1, double lat2, double lon2);

// Proximity network: stations are adjacent when their distance is strictly
// below the radius. Directed pairs store both orientations of every edge, so
// M = sum_s |N_r(s)|; row e holds (station, neighbor).
struct ProximityGraph {
    int n_stations = 0;
    double radius_m = 0.0;
    std::vector<std::vector<int>> neighbors;  // sorted neighbor lists
    std::vector<int> pair_station;            // size M
    std::vector<int> pair_neighbor;           // size M
    std::vector<int> row_start;               // size S+1, pairs of station s are [row_start[s], row_start[s+1])

    int n_pairs() const { return static_cast<int>(pair_station.size()); }
    int degree(int s) const { return row_start[s + 1] - row_start[s]; }

    // Row index of the (s, s') pair; s' must be a neighbor of s.
    int row_index(int s, int s_prime) const;

    // Undirected edge list (u < v), each edge once.
    std::vector<std::pair<int, int>> undirected_edges() const;

    int component_count() const;
    std::vector<int> component_labels() const;

    // Applies the incidence operator: (D v)_e = v[s_e] - v[s'_e].
    void apply_incidence(const Eigen::VectorXd& v, Eigen::Ref<Eigen::VectorXd> out) const;
    // Accumulates the transpose: out += scale * D^T u.
    void apply_incidence_t(const Eigen::Ref<const Eigen::VectorXd>& u,
                           Eigen::Ref<Eigen::VectorXd> out, double scale = 1.0) const;

    // Dense M x S incidence matrix (small instances / tests).
    Eigen::MatrixXd incidence_dense() const;
    // Graph Laplacian L = (1/2) D^T D, computed combinatorially.
    Eigen::MatrixXd laplacian() const;
};

ProximityGraph build_proximity(const StationRegistry& reg, double radius_m);

// Builds a proximity graph from an explicit undirected edge list (tests and
// synthetic truths). Edges are deduplicated; self loops are rejected.
ProximityGraph graph_from_edges(int n_stations, const std::vector<std::pair<int, int>>& edges);

// Eigendecomposition of L~ = (1/2) L = (1/4) D^T D. Eigenvalues are stored in
// non-increasing order; zero eigenvalues (within tolerance) sit at the tail and
// their count equals the number of connected components.
struct NetLaplacian {
    Eigen::MatrixXd ltilde;       // S x S
    Eigen::VectorXd eigenvalues;  // non-increasing
    Eigen::MatrixXd eigenvectors; // columns aligned with eigenvalues
    Eigen::VectorXd col_sums;     // E^T 1
    int n_zero_eigenvalues = 0;
    int n_components = 0;         // exact count from union-find

    double zero_tolerance() const;
};

NetLaplacian laplacian_eig(const ProximityGraph& graph);

// Multilayer network: one proximity layer per hour plus the cyclic chain of
// same-station edges between consecutive layers. Node (s, h) has index s*H + h.
struct MultilayerGraph {
    int n_stations = 0;
    int n_layers = 0;

    int node(int s, int h) const { return s * n_layers + h; }
    std::int64_t n_nodes() const { return std::int64_t(n_stations) * n_layers; }
};

// Edge list of the full multilayer proximity network (for export and oracles).
std::vector<std::pair<int, int>> multilayer_edges(const ProximityGraph& graph, int n_layers);

void export_edge_list(const std::string& path, const ProximityGraph& graph,
                      const std::vector<std::string>& station_ids);
void export_graphml(const std::string& path, const ProximityGraph& graph,
                    const std::vector<std::string>& station_ids);

}  // namespace netfuse
