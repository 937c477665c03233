#include "netfuse/projection.hpp"

#include <cmath>

namespace netfuse {

void apply_second_difference(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out)
{
    const int n = static_cast<int>(x.size());
    for (int i = 0; i < n; ++i) {
        double v = 2.0 * x[i];
        if (i > 0) v -= x[i - 1];
        if (i + 1 < n) v -= x[i + 1];
        out[i] = v;
    }
}

ProjectionPlan::ProjectionPlan(const ProximityGraph& graph, const CalendarDims& dims)
    : ops_(graph, dims), eig_(laplacian_eig(graph))
{
    const FlatLayout& L = ops_.layout();
    S_ = L.S;
    Ho_ = L.Ho;
    Do_ = L.Do;
    q_ = Do_ + 1 + Ho_;

    l11_.resize(S_);
    l21_.resize(S_);
    l22_.resize(S_);
    l32_.resize(S_);
    hour_factor_.resize(S_);

    for (int j = 0; j < S_; ++j) {
        const double kappa = 4.0 * std::max(eig_.eigenvalues[j], 0.0);
        l11_[j] = std::sqrt(1.0 + kappa);
        l21_[j] = kappa / l11_[j];
        const double theta_diag = 1.0 + (Do_ + Ho_ + 2) * kappa - Do_ * l21_[j] * l21_[j];
        if (theta_diag <= 0.0) throw NumericalError("projection factorization breakdown");
        l22_[j] = std::sqrt(theta_diag);
        l32_[j] = kappa / l22_[j];

        Eigen::MatrixXd B = Eigen::MatrixXd::Constant(Ho_, Ho_, -l32_[j] * l32_[j]);
        for (int k = 0; k < Ho_; ++k) {
            B(k, k) += 3.0 + kappa;
            if (k + 1 < Ho_) {
                B(k, k + 1) += -1.0;
                B(k + 1, k) += -1.0;
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(B);
        if (llt.info() != Eigen::Success)
            throw NumericalError("projection factorization breakdown in hour block");
        hour_factor_[j] = llt.matrixL();
    }

    // Shared hourly block and its Schur complement over the coupled coordinates.
    const double w_tol = 1e-12 * std::max(1.0, std::sqrt(double(S_)));
    Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(Ho_, Ho_);
    for (int k = 0; k < Ho_; ++k) {
        schur(k, k) = 1.0 + 2.0 * S_;
        if (k + 1 < Ho_) schur(k, k + 1) = schur(k + 1, k) = -double(S_);
    }
    for (int j = 0; j < S_; ++j) {
        const double w = eig_.col_sums[j];
        if (std::abs(w) <= w_tol) continue;
        coupled_.emplace_back(j, w);
        // columns of the coupling pattern: zeros except tridiag(-1,2,-1) on hours
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(q_, Ho_);
        for (int c = 0; c < Ho_; ++c) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(Ho_);
            e[c] = 1.0;
            apply_second_difference(e, X.col(c).segment(Do_ + 1, Ho_));
            factor_solve(j, X.col(c));
        }
        // subtract w^2 * C^T A^{-1} C
        Eigen::MatrixXd hod_part = X.middleRows(Do_ + 1, Ho_);
        Eigen::MatrixXd term(Ho_, Ho_);
        for (int c = 0; c < Ho_; ++c) apply_second_difference(hod_part.col(c), term.col(c));
        schur -= (w * w) * term;
    }
    schur_.compute(schur);
    if (schur_.info() != Eigen::Success)
        throw NumericalError("projection Schur complement factorization failed");
}

void ProjectionPlan::factor_solve(int j, Eigen::Ref<Eigen::VectorXd> v) const
{
    // forward: L y = v
    double day_sum = 0.0;
    for (int d = 0; d < Do_; ++d) {
        v[d] /= l11_[j];
        day_sum += v[d];
    }
    v[Do_] = (v[Do_] - l21_[j] * day_sum) / l22_[j];
    auto hours = v.segment(Do_ + 1, Ho_);
    hours.array() -= l32_[j] * v[Do_];
    hour_factor_[j].triangularView<Eigen::Lower>().solveInPlace(hours);
    // backward: L^T x = y
    hour_factor_[j].triangularView<Eigen::Lower>().transpose().solveInPlace(hours);
    v[Do_] = (v[Do_] - l32_[j] * hours.sum()) / l22_[j];
    for (int d = 0; d < Do_; ++d) v[d] = (v[d] - l21_[j] * v[Do_]) / l11_[j];
}

Eigen::VectorXd ProjectionPlan::assemble_rhs(const Eigen::VectorXd& x_target,
                                             const Eigen::VectorXd& gamma_target,
                                             const Eigen::VectorXd& psi_target) const
{
    const FlatLayout& L = ops_.layout();
    if (x_target.size() != L.proj_dim()) throw ValidationError("project: x block has wrong length");
    Eigen::VectorXd b = x_target;
    ops_.apply_dtheta_t(gamma_target, b);
    ops_.apply_dh_t(psi_target, b);
    return b;
}

void ProjectionPlan::solve_rotated(Eigen::MatrixXd& V, Eigen::VectorXd& b_shared) const
{
    for (int j = 0; j < S_; ++j) factor_solve(j, V.col(j));

    // Schur solve for the shared hourly effects
    Eigen::VectorXd tmp(Ho_);
    for (const auto& [j, w] : coupled_) {
        apply_second_difference(V.col(j).segment(Do_ + 1, Ho_), tmp);
        b_shared -= w * tmp;
    }
    b_shared = schur_.solve(b_shared).eval();

    // back-substitute the coupling
    apply_second_difference(b_shared, tmp);
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(q_);
    for (const auto& [j, w] : coupled_) {
        corr.setZero();
        corr.segment(Do_ + 1, Ho_) = tmp;
        factor_solve(j, corr);
        V.col(j) -= w * corr;
    }
}

Eigen::VectorXd ProjectionPlan::solve_normal(const Eigen::VectorXd& b) const
{
    const FlatLayout& L = ops_.layout();
    const auto& E = eig_.eigenvectors;
    const int nblocks = Do_ + 1 + Ho_;

    // rotate station blocks into the eigenbasis; rows of V are the small-system
    // coordinates, columns are eigencoordinates
    Eigen::MatrixXd V(q_, S_);
    for (int blk = 0; blk < nblocks; ++blk)
        V.row(blk) = (E.transpose() * b.segment(blk * S_, S_)).transpose();
    Eigen::VectorXd b_shared = b.segment(nblocks * S_, Ho_);

    solve_rotated(V, b_shared);

    // rotate back
    Eigen::VectorXd z(L.proj_dim());
    for (int blk = 0; blk < nblocks; ++blk)
        z.segment(blk * S_, S_) = E * V.row(blk).transpose();
    z.segment(nblocks * S_, Ho_) = b_shared;
    return z;
}

ProjectionPlan::Result ProjectionPlan::project(const Eigen::VectorXd& x_target,
                                               const Eigen::VectorXd& gamma_target,
                                               const Eigen::VectorXd& psi_target) const
{
    Result res;
    res.z = solve_normal(assemble_rhs(x_target, gamma_target, psi_target));
    res.s_gamma = ops_.apply_dtheta(res.z);
    res.s_psi = ops_.apply_dh(res.z);
    return res;
}

Eigen::MatrixXd ProjectionPlan::dense_normal_matrix() const
{
    const FlatLayout& L = ops_.layout();
    const Eigen::MatrixXd Dt = ops_.dtheta_dense();
    const Eigen::MatrixXd Dh = ops_.dh_dense();
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(L.proj_dim(), L.proj_dim());
    P += Dt.transpose() * Dt;
    P += Dh.transpose() * Dh;
    return P;
}

ProjectionPlan::Result ProjectionPlan::project_dense(const Eigen::VectorXd& x_target,
                                                     const Eigen::VectorXd& gamma_target,
                                                     const Eigen::VectorXd& psi_target) const
{
    const Eigen::VectorXd b = assemble_rhs(x_target, gamma_target, psi_target);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(dense_normal_matrix());
    if (ldlt.info() != Eigen::Success) throw NumericalError("dense projection solve failed");
    Result res;
    res.z = ldlt.solve(b);
    res.s_gamma = ops_.apply_dtheta(res.z);
    res.s_psi = ops_.apply_dh(res.z);
    return res;
}

double ProjectionPlan::factorization_residual() const
{
    // verifies that the stored factors invert the rotated normal matrix: applies
    // the structured solve to each column of W^T P W and measures the distance
    // from the identity (relative Frobenius norm)
    const int n = ops_.layout().proj_dim();
    const auto& E = eig_.eigenvectors;
    const int nblocks = Do_ + 1 + Ho_;

    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
    for (int blk = 0; blk < nblocks; ++blk) W.block(blk * S_, blk * S_, S_, S_) = E;
    W.block(nblocks * S_, nblocks * S_, Ho_, Ho_).setIdentity();
    const Eigen::MatrixXd rotated = W.transpose() * dense_normal_matrix() * W;

    double err2 = 0.0;
    for (int c = 0; c < n; ++c) {
        Eigen::MatrixXd V(q_, S_);
        for (int blk = 0; blk < nblocks; ++blk)
            V.row(blk) = rotated.col(c).segment(blk * S_, S_).transpose();
        Eigen::VectorXd b_shared = rotated.col(c).segment(nblocks * S_, Ho_);
        solve_rotated(V, b_shared);
        for (int blk = 0; blk < nblocks; ++blk) {
            Eigen::VectorXd seg = V.row(blk).transpose();
            for (int j = 0; j < S_; ++j) {
                const double expect = (blk * S_ + j == c) ? 1.0 : 0.0;
                err2 += (seg[j] - expect) * (seg[j] - expect);
            }
        }
        for (int k = 0; k < Ho_; ++k) {
            const double expect = (nblocks * S_ + k == c) ? 1.0 : 0.0;
            err2 += (b_shared[k] - expect) * (b_shared[k] - expect);
        }
    }
    return std::sqrt(err2 / n);
}

}  // namespace netfuse
