#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "ipw/exactref.hpp"
#include "ipw/orbitals.hpp"

namespace ipw {

/// Two-particle state expanded over a product orbital basis:
///   Psi(x, y) = sum_ij coeffs(i, j) phi_i(x) phi_j(y).
/// Validation-side companion of the ensemble representation: the steppers never
/// form this matrix, but exact states projected into the ansatz span make
/// slice-level cross-checks cheap.
struct OrbitalExpansion2D {
    OrbitalBasis basis;
    Eigen::MatrixXcd coeffs;  // (first-particle orbital, second-particle orbital)

    /// Orthonormal orbitals make this the squared L2 norm of the state.
    double squared_norm() const { return coeffs.squaredNorm(); }

    /// Shape, finiteness, and unit norm to 1e-8 (normalized states only).
    void validate() const {
        const int m = basis.size();
        if (coeffs.rows() != m || coeffs.cols() != m)
            throw std::invalid_argument("OrbitalExpansion2D: coefficient shape mismatch");
        if (!coeffs.allFinite())
            throw std::invalid_argument("OrbitalExpansion2D: non-finite coefficients");
        if (std::abs(squared_norm() - 1.0) > 1e-8)
            throw std::invalid_argument("OrbitalExpansion2D: coefficients are not normalized");
    }

    /// Dense two-particle field on the basis grid (both axes).
    Field2D to_field2d() const {
        return Field2D(basis.grid, basis.grid, basis.values * coeffs * basis.values.transpose());
    }

    /// Conditional slice, same convention as the dense form: axis 0 gives
    /// x -> d^order/dY^order Psi(x, Y), axis 1 gives y -> d^order/dX^order
    /// Psi(X, y). The derivative falls on the evaluated (partner) factor.
    ComplexField slice(int axis, double partner_pos, int order = 0) const {
        if (axis != 0 && axis != 1)
            throw std::invalid_argument("OrbitalExpansion2D::slice: axis must be 0 or 1");
        if (order < 0 || order > 2)
            throw std::invalid_argument("OrbitalExpansion2D::slice: order must be 0, 1 or 2");
        const OrbitalEval ev = basis.eval(partner_pos);
        const Eigen::VectorXcd& f = order == 0 ? ev.value : (order == 1 ? ev.d1 : ev.d2);
        const Eigen::VectorXcd a = axis == 0 ? (coeffs * f).eval() : (coeffs.transpose() * f).eval();
        return ComplexField(basis.grid, basis.values * a);
    }
};

/// Least-squares projection of a dense two-particle field onto the product
/// span: c_ij = <phi_i phi_j | f>. Off-span content is dropped, so the result
/// is only normalized when the input effectively lives in the span.
inline OrbitalExpansion2D project_expansion(const OrbitalBasis& basis, const Field2D& f) {
    if (!(f.gx == basis.grid) || !(f.gy == basis.grid))
        throw std::invalid_argument("project_expansion: field grids must match the basis grid");
    Eigen::MatrixXcd c =
        basis.values.adjoint() * f.values * basis.values.conjugate() * (f.gx.dx * f.gy.dx);
    return OrbitalExpansion2D{basis, std::move(c)};
}

}  // namespace ipw
