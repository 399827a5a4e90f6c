#include "gxplain/linalg.hpp"

#include <cmath>

#include "gxplain/errors.hpp"

namespace gxplain {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), long(v.size()));
}

std::vector<double> from_eigen(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

RidgeFit weighted_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, double lambda) {
  const long n = X.rows();
  const long d = X.cols();
  if (n < 2) throw SingularRegressionError("fewer than two samples in regression");

  // Augment with the intercept column.
  Eigen::MatrixXd A(n, d + 1);
  A.col(0).setOnes();
  A.rightCols(d) = X;

  const Eigen::MatrixXd AtW = A.transpose() * w.asDiagonal();
  const Eigen::MatrixXd G = AtW * A;
  const Eigen::VectorXd b = AtW * y;

  double lam = lambda;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::MatrixXd Greg = G;
    for (long j = 1; j <= d; ++j) Greg(j, j) += lam;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Greg);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd sol = ldlt.solve(b);
      if (sol.allFinite()) {
        const double rel = (Greg * sol - b).norm() / std::max(1e-12, b.norm());
        if (rel < 1e-6 || lam > 0.0) {
          RidgeFit fit;
          fit.intercept = sol(0);
          fit.coef = sol.tail(d);
          fit.lambda_used = lam;
          return fit;
        }
      }
    }
    lam = std::max(lam, 1e-6) * 10.0;
  }
  throw SingularRegressionError("rank-deficient design matrix");
}

Eigen::VectorXd constrained_wls(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, double total) {
  const long n = Z.rows();
  const long d = Z.cols();
  if (d == 1) {
    Eigen::VectorXd phi(1);
    phi(0) = total;
    return phi;
  }
  // Substitute coef_d = total - sum(others).
  Eigen::MatrixXd A(n, d - 1);
  Eigen::VectorXd t(n);
  for (long r = 0; r < n; ++r) {
    const double zlast = Z(r, d - 1);
    for (long c = 0; c < d - 1; ++c) A(r, c) = Z(r, c) - zlast;
    t(r) = y(r) - zlast * total;
  }
  const Eigen::VectorXd sw = w.array().sqrt();
  const Eigen::MatrixXd Aw = sw.asDiagonal() * A;
  const Eigen::VectorXd tw = sw.asDiagonal() * t;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Aw);
  qr.setThreshold(1e-10);
  if (qr.rank() < d - 1) {
    throw SingularRegressionError("coalition design is rank deficient");
  }
  const Eigen::VectorXd head = qr.solve(tw);
  Eigen::VectorXd phi(d);
  phi.head(d - 1) = head;
  phi(d - 1) = total - head.sum();
  return phi;
}

Eigen::VectorXd Pca::project2(const Eigen::VectorXd& x) const {
  return components.topRows(2) * (x - mean);
}

Pca fit_pca(const std::vector<std::vector<double>>& rows, int k) {
  const long n = long(rows.size());
  const long d = n ? long(rows[0].size()) : 0;
  Eigen::MatrixXd X(n, d);
  for (long i = 0; i < n; ++i) {
    X.row(i) = Eigen::Map<const Eigen::VectorXd>(rows[i].data(), d).transpose();
  }
  Pca p;
  p.mean = X.colwise().mean();
  X.rowwise() -= p.mean.transpose();
  const Eigen::MatrixXd cov = (X.transpose() * X) / std::max<long>(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // Eigenvalues ascend; take the top k in descending order.
  const int kk = int(std::min<long>(k, d));
  p.components.resize(kk, d);
  p.eigenvalues.resize(kk);
  for (int j = 0; j < kk; ++j) {
    const long src = d - 1 - j;
    Eigen::VectorXd v = es.eigenvectors().col(src);
    long arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.row(j) = v.transpose();
    p.eigenvalues(j) = es.eigenvalues()(src);
  }
  return p;
}

}  // namespace gxplain
