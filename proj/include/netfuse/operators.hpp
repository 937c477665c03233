#pragma once

#include <Eigen/Dense>

#include "netfuse/graph.hpp"
#include "netfuse/params.hpp"

namespace netfuse {

// Constraint operators tying the auxiliary fusion variables to the parameters.
//
// The gamma vector stacks, in order, one M-block per free day category, one
// M-block per free hour, and the sqrt(2)-weighted station block:
//   gamma_dow[d](e) = (theta_s - theta_s') + (w_{s,d} - w_{s',d})
//   gamma_hod[h](e) = (theta_s - theta_s') + (v_{s,h} - v_{s',h})
//   gamma_s2(e)     = sqrt(2) (theta_s - theta_s')
// where e runs over the directed pairs of the proximity graph.
//
// The psi vector has one entry per station and hour, laid out station-major:
//   psi(s, 0)   =  eta_1(s)
//   psi(s, h)   =  eta_{h+1}(s) - eta_h(s)      for 0 < h < H-1
//   psi(s, H-1) = -eta_{H-1}(s)
// with eta_h(s) = shared_hod[h] + hod_int(s, h), the deviation of hour h from
// the hour-0 baseline. Shared day-category columns are identically zero in both
// operators.
class ConstraintOps {
public:
    ConstraintOps(const ProximityGraph& graph, const CalendarDims& dims);

    const FlatLayout& layout() const { return layout_; }
    const ProximityGraph& graph() const { return *graph_; }

    int gamma_dim() const { return M_ * (layout_.Do + layout_.Ho + 1); }
    int psi_dim() const { return layout_.S * (layout_.Ho + 1); }

    int gamma_dow_offset(int d) const { return d * M_; }
    int gamma_hod_offset(int h) const { return (layout_.Do + h) * M_; }
    int gamma_s2_offset() const { return (layout_.Do + layout_.Ho) * M_; }
    int psi_index(int s, int h) const { return s * (layout_.Ho + 1) + h; }

    // gamma = D_Theta x, for x of length layout().proj_dim().
    Eigen::VectorXd apply_dtheta(const Eigen::VectorXd& x) const;
    // out += D_Theta^T g
    void apply_dtheta_t(const Eigen::VectorXd& g, Eigen::Ref<Eigen::VectorXd> out) const;

    // psi = D_H x
    Eigen::VectorXd apply_dh(const Eigen::VectorXd& x) const;
    // out += D_H^T p
    void apply_dh_t(const Eigen::VectorXd& p, Eigen::Ref<Eigen::VectorXd> out) const;

    // Dense operator matrices (tests and the dense projection fallback).
    Eigen::MatrixXd dtheta_dense() const;
    Eigen::MatrixXd dh_dense() const;

    // Per-station group view of a gamma-shaped vector: the group of station s
    // collects, for each of its pairs e, the sqrt(2) entry and all hour/day
    // entries at e. Used by the group proximal update.
    double group_squared_norm(const Eigen::VectorXd& gamma, int s) const;
    void scale_group(Eigen::VectorXd& gamma, int s, double factor) const;

private:
    const ProximityGraph* graph_;
    FlatLayout layout_;
    int M_;
};

}  // namespace netfuse
