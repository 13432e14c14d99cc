#include "hamlab/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace hamlab {

Mat standard_symplectic(int n) {
  Mat j = Mat::Zero(2 * n, 2 * n);
  j.block(0, n, n, n) = -Mat::Identity(n, n);
  j.block(n, 0, n, n) = Mat::Identity(n, n);
  return j;
}

Mat symplectic_inverse(const Mat& m, const Mat& form_from, const Mat& form_to) {
  // M^T W_to M = W_from  =>  M^{-1} = W_from^{-1} M^T W_to
  return form_from.partialPivLu().solve(m.transpose() * form_to);
}

bool numerically_singular(const Mat& a, double rel) {
  if (a.size() == 0) return false;
  if (!a.allFinite()) return true;
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec& s = svd.singularValues();
  return s(s.size() - 1) <= rel * s(0);
}

double min_eigenvalue(const Mat& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Mat& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

Mat polar_orthogonalize(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Mat orthonormal_basis(const Mat& a) {
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
  return q;
}

std::vector<double> principal_angles(const Mat& a, const Mat& b) {
  Mat qa = orthonormal_basis(a);
  Mat qb = orthonormal_basis(b);
  if (qa.cols() < qb.cols()) std::swap(qa, qb);
  const Eigen::Index k = qb.cols();
  std::vector<double> out;
  if (k == 0) return out;

  Eigen::JacobiSVD<Mat> cs(qa.transpose() * qb);
  Vec cosv = cs.singularValues();  // descending: smallest angle first
  Mat residual = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Mat> ss(residual);
  Vec sinv = ss.singularValues();  // descending: largest angle first

  out.resize(static_cast<size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    const double c = std::min(1.0, cosv(i));
    const double s = std::min(1.0, sinv(k - 1 - i));
    out[static_cast<size_t>(i)] = (c * c > 0.5) ? std::asin(s) : std::acos(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Mat null_basis_of_row(const Vec& r, int pivot) {
  const Eigen::Index m = r.size();
  const double nr = r.norm();
  Vec rhat = nr > 0 ? Vec(r / nr) : Vec::Zero(m);
  Mat cols(m, m - 1);
  Eigen::Index c = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (k == pivot) continue;
    Vec e = Vec::Unit(m, k);
    cols.col(c++) = e - rhat * rhat(k);
  }
  // modified Gram-Schmidt keeps the order fixed
  for (Eigen::Index i = 0; i < cols.cols(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) cols.col(i) -= cols.col(j).dot(cols.col(i)) * cols.col(j);
    cols.col(i).normalize();
  }
  return cols;
}

Vec flatten(const Mat& m) {
  return Eigen::Map<const Vec>(m.data(), m.size());
}

Mat unflatten(const Vec& v, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Mat>(v.data() + offset, rows, cols);
}

}  // namespace hamlab
