#pragma once

#include <Eigen/Dense>
#include <vector>

#include "netfuse/operators.hpp"

namespace netfuse {

// Precomputed factorization for projecting onto the constraint set. The normal
// matrix I + D_Theta^T D_Theta + D_H^T D_H is block-diagonalized by rotating
// every station-sized block into the eigenbasis of the network Laplacian; in
// that basis each eigencoordinate carries a small banded-plus-arrow matrix that
// is factorized once, and the shared hourly effects couple to the station
// blocks only through the Laplacian null space, handled by a Schur complement.
// The plan depends on the graph and calendar dimensions only, never on iterate
// values, so one plan serves every iteration, fold and penalty configuration.
class ProjectionPlan {
public:
    ProjectionPlan(const ProximityGraph& graph, const CalendarDims& dims);

    const ConstraintOps& ops() const { return ops_; }
    const NetLaplacian& eig() const { return eig_; }
    int q() const { return q_; }

    struct Result {
        Eigen::VectorXd z;        // projected [dow ints, theta, hod ints, shared hod]
        Eigen::VectorXd s_gamma;  // D_Theta z
        Eigen::VectorXd s_psi;    // D_H z
    };

    // Projects (x_target, gamma_target, psi_target) onto the constraint set;
    // x_target is laid out like the projected part of FlatLayout.
    Result project(const Eigen::VectorXd& x_target, const Eigen::VectorXd& gamma_target,
                   const Eigen::VectorXd& psi_target) const;

    // Reference path: dense assembly of the normal equations and a direct
    // solve. Used for cross-validation of the structured path.
    Result project_dense(const Eigen::VectorXd& x_target, const Eigen::VectorXd& gamma_target,
                         const Eigen::VectorXd& psi_target) const;

    // Residual of the factorization against a dense assembly of the rotated
    // normal matrix (feasible only at small sizes; test hook).
    double factorization_residual() const;

private:
    Eigen::VectorXd assemble_rhs(const Eigen::VectorXd& x_target,
                                 const Eigen::VectorXd& gamma_target,
                                 const Eigen::VectorXd& psi_target) const;
    Eigen::VectorXd solve_normal(const Eigen::VectorXd& b) const;
    void solve_rotated(Eigen::MatrixXd& V, Eigen::VectorXd& b_shared) const;
    Eigen::MatrixXd dense_normal_matrix() const;

    // forward/backward substitution with the per-eigencoordinate factor
    void factor_solve(int j, Eigen::Ref<Eigen::VectorXd> v) const;

    ConstraintOps ops_;
    NetLaplacian eig_;
    int S_, Ho_, Do_, q_;

    // per-eigencoordinate Cholesky pieces; the day-block and coupling entries
    // repeat, so only one scalar of each is kept per coordinate
    Eigen::VectorXd l11_, l21_, l22_, l32_;
    std::vector<Eigen::MatrixXd> hour_factor_;  // lower factors, Ho x Ho

    std::vector<std::pair<int, double>> coupled_;  // (eigencoordinate, E^T 1 weight)
    Eigen::LLT<Eigen::MatrixXd> schur_;            // shared hourly block
};

// Applies the tridiagonal pattern tridiag(-1, 2, -1).
void apply_second_difference(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace netfuse
