#pragma once

#include <Eigen/Dense>

#include <vector>

namespace hamlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Standard Darboux matrix [[0,-I],[I,0]] of size 2n, so that
// omega(u, v) = u^T J v equals dp^dx.
Mat standard_symplectic(int n);

inline double omega(const Mat& form, const Vec& u, const Vec& v) { return u.dot(form * v); }

// M^{-1} for a matrix satisfying M^T form_to M = form_from.
Mat symplectic_inverse(const Mat& m, const Mat& form_from, const Mat& form_to);

inline Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }
inline double asymmetry(const Mat& a) { return (a - a.transpose()).cwiseAbs().maxCoeff(); }
inline double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

// True when the smallest singular value is below rel times the largest, so
// the test does not depend on the overall scale of a.
bool numerically_singular(const Mat& a, double rel = 1e-10);

double min_eigenvalue(const Mat& symmetric);
double max_eigenvalue(const Mat& symmetric);

// Nearest orthogonal matrix (polar factor).
Mat polar_orthogonalize(const Mat& a);

// Orthonormal basis (Euclidean) of the column span.
Mat orthonormal_basis(const Mat& a);

// Principal angles in radians, ascending, between the column spans of a and b
// with respect to the Euclidean inner product.
std::vector<double> principal_angles(const Mat& a, const Mat& b);

inline double smallest_principal_angle(const Mat& a, const Mat& b) {
  auto angles = principal_angles(a, b);
  return angles.empty() ? 0.0 : angles.front();
}
inline double largest_principal_angle(const Mat& a, const Mat& b) {
  auto angles = principal_angles(a, b);
  return angles.empty() ? 0.0 : angles.back();
}

// Orthonormal basis of the null space of a single row vector r (length m),
// built by projecting the coordinate vectors other than `pivot`.
Mat null_basis_of_row(const Vec& r, int pivot);

Vec flatten(const Mat& m);
Mat unflatten(const Vec& v, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols);

}  // namespace hamlab
