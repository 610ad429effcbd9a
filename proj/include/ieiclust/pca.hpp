#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

namespace ieiclust {

// Principal axes of the sample covariance (divisor n-1), descending by
// eigenvalue. Rows of `components` are the axes.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;        // k x p, orthonormal rows
  Eigen::VectorXd explained_variance;  // length k, non-increasing

  Eigen::MatrixXd transform(const Eigen::MatrixXd& data) const {
    return (data.rowwise() - mean.transpose()) * components.transpose();
  }

  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& scores) const {
    return (scores * components).rowwise() + mean.transpose();
  }
};

// Sign convention: within each axis the entry of largest magnitude is
// positive; on magnitude ties the earliest index decides.
inline std::pair<PcaModel, Eigen::MatrixXd> pca_fit_transform(
    const Eigen::MatrixXd& data, int n_components) {
  const int n = static_cast<int>(data.rows());
  const int p = static_cast<int>(data.cols());
  if (n_components < 1 || n_components > p)
    throw std::invalid_argument("pca: n_components out of range");
  if (n < n_components)
    throw std::invalid_argument("pca: need at least " +
                                std::to_string(n_components) + " rows, got " +
                                std::to_string(n));

  PcaModel model;
  model.mean = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  if (n > 1) cov = (centered.transpose() * centered) / double(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pca: eigendecomposition failed");

  // Eigen returns ascending eigenvalues; take the top n_components.
  model.components.resize(n_components, p);
  model.explained_variance.resize(n_components);
  for (int k = 0; k < n_components; ++k) {
    const int src = p - 1 - k;
    Eigen::VectorXd axis = solver.eigenvectors().col(src);
    int arg = 0;
    for (int i = 1; i < p; ++i)
      if (std::abs(axis(i)) > std::abs(axis(arg))) arg = i;
    if (axis(arg) < 0.0) axis = -axis;
    model.components.row(k) = axis.transpose();
    model.explained_variance(k) = std::max(solver.eigenvalues()(src), 0.0);
  }
  Eigen::MatrixXd scores = centered * model.components.transpose();
  return {std::move(model), std::move(scores)};
}

}  // namespace ieiclust
