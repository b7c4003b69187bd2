#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

namespace ipw {

struct LsqSolution {
    Eigen::VectorXcd weights;
    double residual = 0.0;  // ||A weights - b||_2
};

/// Minimum-norm least squares, factored once by SVD (relative singular-value
/// cutoff) and applied to many right-hand sides. Solutions live in the span of
/// the retained right singular vectors, so callers combining solution weights
/// with large vectors can work in the rank-dimensional projected space:
/// weights = V * project(b).
class MinNormLsq {
  public:
    explicit MinNormLsq(const Eigen::MatrixXcd& A, double rel_cutoff = 1e-10) {
        if (A.size() == 0) throw std::invalid_argument("MinNormLsq: empty matrix");
        if (!(rel_cutoff >= 0.0)) throw std::invalid_argument("MinNormLsq: bad cutoff");
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sv = svd.singularValues();
        const double cut = sv.size() > 0 ? rel_cutoff * sv[0] : 0.0;
        Eigen::Index r = 0;
        while (r < sv.size() && sv[r] > cut && sv[r] > 0.0) ++r;
        rank_ = r;
        u_ = svd.matrixU().leftCols(r);
        v_ = svd.matrixV().leftCols(r);
        inv_sigma_ = sv.head(r).cwiseInverse().cast<Complexd>();
        cols_ = A.cols();
    }

    Eigen::Index rank() const { return rank_; }
    Eigen::Index cols() const { return cols_; }
    /// Retained right singular vectors (cols() x rank()).
    const Eigen::MatrixXcd& range_basis() const { return v_; }

    /// c with weights = V c; one column per right-hand side.
    Eigen::MatrixXcd project(const Eigen::MatrixXcd& B) const {
        return inv_sigma_.asDiagonal() * (u_.adjoint() * B).eval();
    }

    /// Batched projection with Pythagoras residuals ||b||^2 - ||U^H b||^2 (U
    /// the retained left singular vectors). Cancellation floors these at about
    /// sqrt(machine eps) * ||b||, far below any flagging threshold; solve()
    /// reports the exact residual instead.
    void project_batch(const Eigen::MatrixXcd& B, Eigen::MatrixXcd& coeffs,
                       Eigen::VectorXd& residuals, Eigen::VectorXd& rhs_norms) const {
        const Eigen::MatrixXcd P = u_.adjoint() * B;
        residuals.resize(B.cols());
        rhs_norms.resize(B.cols());
        for (Eigen::Index k = 0; k < B.cols(); ++k) {
            const double b2 = B.col(k).squaredNorm();
            residuals[k] = std::sqrt(std::max(0.0, b2 - P.col(k).squaredNorm()));
            rhs_norms[k] = std::sqrt(b2);
        }
        coeffs = inv_sigma_.asDiagonal() * P;
    }

    LsqSolution solve(const Eigen::VectorXcd& b) const {
        const Eigen::VectorXcd p = u_.adjoint() * b;
        LsqSolution out;
        out.weights = v_ * (inv_sigma_.asDiagonal() * p).eval();
        // A w = U U^H b for the truncated factorization, so the residual
        // vector is formed explicitly (no cancellation at small residuals).
        out.residual = (b - u_ * p).norm();
        return out;
    }

  private:
    using Complexd = std::complex<double>;
    Eigen::MatrixXcd u_, v_;
    Eigen::VectorXcd inv_sigma_;
    Eigen::Index rank_ = 0;
    Eigen::Index cols_ = 0;
};

}  // namespace ipw
