#pragma once

#include <Eigen/Dense>
#include <vector>

#include "netfuse/graph.hpp"
#include "netfuse/params.hpp"

namespace netfuse {

// Tolerance for declaring two coefficient estimates fused. Projected estimates
// are exactly equal when fused, so this is a safety net for rounding.
struct FusionTolerance {
    double eps = 1e-6;
    bool relative = false;  // scale eps by the spread of the values

    double resolve(const Eigen::VectorXd& values) const
    {
        if (!relative || values.size() == 0) return eps;
        const double spread = values.maxCoeff() - values.minCoeff();
        return eps * std::max(spread, 1.0);
    }
};

// Transitive equality classes of values: sorts and splits where consecutive
// values differ by more than eps. Classes are numbered by first appearance.
std::vector<int> value_classes(const Eigen::VectorXd& values, double eps);

enum class ComponentEngine {
    union_find,  // merge intersected edges directly
    spectral,    // label components from the Laplacian null space
};

struct LayerComponents {
    std::vector<int> labels;  // per station, 0-based
    int count = 0;
    bool spectral_fallback = false;  // spectral path disagreed internally and fell back
};

// Connected components of the intersection of the proximity graph with the
// estimate-equality relation at one layer (one hour's phi_hod column or one
// day's phi_dow column).
LayerComponents layer_components(const ProximityGraph& graph, const Eigen::VectorXd& values,
                                 const FusionTolerance& tol,
                                 ComponentEngine engine = ComponentEngine::union_find);

// Per-layer component labels of the whole multilayer intersection network, one
// row per hour, with labels unique across the matrix. Row h partitions stations
// by the layer-h components.
struct ClusterLabelMatrix {
    Eigen::MatrixXi labels;  // |H| x S
    std::vector<int> layer_counts;

    int total_labels() const;
};

ClusterLabelMatrix initial_labels(const ProximityGraph& graph, const Eigen::MatrixXd& phi_hod,
                                  const FusionTolerance& tol, ComponentEngine engine);

// One linking sweep over consecutive layers in the given order: whenever a
// station keeps the same estimate across the layer boundary and its two
// components carry different labels, both are relabeled to the smaller one.
// Returns true when any relabeling occurred.
bool link_layers(ClusterLabelMatrix& m, const Eigen::MatrixXd& phi_hod,
                 const std::vector<int>& order, const FusionTolerance& tol);

enum class MultilayerEngine {
    union_find,     // explicit union-find over the node-layer graph
    label_linking,  // layer labels + iterated linking sweeps (with wraparound)
};

// Number of connected components of the intersection of the multilayer
// proximity network with the estimate-equality network over phi_hod.
int count_multilayer_components(const ProximityGraph& graph, const Eigen::MatrixXd& phi_hod,
                                const FusionTolerance& tol,
                                MultilayerEngine engine = MultilayerEngine::union_find,
                                ComponentEngine layer_engine = ComponentEngine::union_find);

struct ComplexityReport {
    int unpenalized = 0;              // covariates plus shared temporal effects
    int multilayer_components = 0;    // hour-of-day intersection network
    std::vector<int> day_components;  // one per non-baseline day category
    long numerator = 0;
    long total_params = 0;  // p
    double mc = 0.0;
};

// Model complexity: the share of coefficient estimates left distinct by the
// fusion penalties. The baseline day's network is excluded because its phi
// values coincide with the station intercepts, already counted at hour 0.
ComplexityReport model_complexity(const ProximityGraph& graph, const PhiView& phi,
                                  const FusionTolerance& tol,
                                  MultilayerEngine engine = MultilayerEngine::union_find,
                                  ComponentEngine layer_engine = ComponentEngine::union_find);

}  // namespace netfuse
