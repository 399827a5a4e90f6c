#pragma once

#include <vector>

#include <Eigen/Dense>

namespace gxplain {

// Weighted ridge regression with an unpenalized intercept. Returns
// {intercept, coefficients}. Throws SingularRegressionError when the system
// cannot be solved even after escalating lambda three times by 10x.
struct RidgeFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  double lambda_used = 0.0;
};

RidgeFit weighted_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, double lambda);

// Weighted least squares of y on binary rows Z subject to sum(coef) = total.
// Solved by eliminating the last coefficient. Throws
// SingularRegressionError on rank deficiency.
Eigen::VectorXd constrained_wls(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, double total);

// Principal components of the rows of X (columns centered by mu). Components
// are unit-norm with a deterministic sign (largest-magnitude loading
// positive), ordered by decreasing eigenvalue.
struct Pca {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;   // k x d
  Eigen::VectorXd eigenvalues;  // k
  Eigen::VectorXd project2(const Eigen::VectorXd& x) const;
};

Pca fit_pca(const std::vector<std::vector<double>>& rows, int k);

Eigen::VectorXd to_eigen(const std::vector<double>& v);
std::vector<double> from_eigen(const Eigen::VectorXd& v);

}  // namespace gxplain
