#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ieiclust/pca.hpp"
#include "ieiclust/rng.hpp"

namespace ieiclust {

struct Embedding2D {
  Eigen::MatrixXd coords;  // n x 2
  double perplexity = 0.0;  // effective value used
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<std::pair<int, double>> kl_trace;  // (iteration, KL divergence)
};

inline constexpr double kMaxStepNorm = 5.0;

namespace detail {

// Conditional Gaussian row with the bandwidth solved by bisection so the row
// entropy matches log(perplexity). Distances are shifted by the row minimum
// before exponentiation so large precisions stay finite.
inline void gaussian_row(const Eigen::MatrixXd& sq_dist, int i,
                         double log_perplexity, Eigen::MatrixXd& p) {
  const int n = static_cast<int>(sq_dist.rows());
  double shift = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j)
    if (j != i) shift = std::min(shift, sq_dist(i, j));
  double beta = 1.0;
  double beta_lo = 0.0;
  double beta_hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 50; ++iter) {
    double sum = 0.0;
    double weighted = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = sq_dist(i, j) - shift;
      const double w = std::exp(-beta * d);
      sum += w;
      weighted += w * d;
    }
    // H = log(sum) + beta * E[d]; entropy of the shifted kernel equals the
    // unshifted one.
    const double entropy = std::log(sum) + beta * weighted / sum;
    const double diff = entropy - log_perplexity;
    if (std::abs(diff) < 1e-5) break;
    if (diff > 0.0) {
      beta_lo = beta;
      beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta_lo + beta_hi);
    } else {
      beta_hi = beta;
      beta = beta_lo <= 0.0 ? beta / 2.0 : 0.5 * (beta_lo + beta_hi);
    }
  }
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) {
      p(i, j) = 0.0;
      continue;
    }
    const double w = std::exp(-beta * (sq_dist(i, j) - shift));
    p(i, j) = w;
    sum += w;
  }
  for (int j = 0; j < n; ++j) p(i, j) /= sum;
}

}  // namespace detail

struct TsneAffinities {
  Eigen::MatrixXd conditional;  // rows sum to 1
  Eigen::MatrixXd joint;        // symmetrized, sums to 1 (then floored)
  double effective_perplexity = 0.0;
};

// Input affinities: per-row Gaussian kernels at the target perplexity,
// then symmetrized. Exact duplicate rows copy their representative's
// conditional row (with the two positions swapped) instead of re-running
// the bisection, whose summation order differs per row; this keeps
// duplicates on bitwise-identical trajectories downstream.
inline TsneAffinities tsne_affinities(const Eigen::MatrixXd& points,
                                      double perplexity) {
  const int n = static_cast<int>(points.rows());
  TsneAffinities out;
  out.effective_perplexity = std::min(perplexity, double(n - 1) / 3.0);

  Eigen::MatrixXd sq_dist(n, n);
  for (int i = 0; i < n; ++i) {
    sq_dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double d = (points.row(i) - points.row(j)).squaredNorm();
      sq_dist(i, j) = d;
      sq_dist(j, i) = d;
    }
  }

  std::vector<int> representative(n);
  {
    std::map<std::vector<double>, int> seen;
    for (int i = 0; i < n; ++i) {
      std::vector<double> key(points.cols());
      for (int c = 0; c < points.cols(); ++c) key[c] = points(i, c);
      auto [it, inserted] = seen.emplace(std::move(key), i);
      representative[i] = it->second;
    }
  }
  Eigen::MatrixXd& p_cond = out.conditional;
  p_cond.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const int r = representative[i];
    if (r == i) {
      detail::gaussian_row(sq_dist, i, std::log(out.effective_perplexity),
                           p_cond);
    } else {
      for (int j = 0; j < n; ++j) p_cond(i, j) = p_cond(r, j);
      p_cond(i, r) = p_cond(r, i);
      p_cond(i, i) = 0.0;
    }
  }
  out.joint = (p_cond + p_cond.transpose()) / (2.0 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) out.joint(i, j) = std::max(out.joint(i, j), 1e-12);
  return out;
}

// Exact (dense) t-SNE to 2 dimensions: early exaggeration x12 for the first
// 250 iterations, learning rate 200, momentum 0.5 switching to 0.8, PCA
// initialization scaled to std 1e-4. Deterministic for a given seed. The KL
// trace covers the final 120 iterations plus every 100th before that.
inline Embedding2D tsne_embed(const Eigen::MatrixXd& points,
                              double perplexity = 30.0, int iterations = 1000,
                              std::uint64_t seed = 0) {
  const int n = static_cast<int>(points.rows());
  if (n < 4) throw std::invalid_argument("tsne: need at least 4 points");
  if (iterations < 1) throw std::invalid_argument("tsne: iterations must be >= 1");
  const TsneAffinities affinities = tsne_affinities(points, perplexity);
  const double eff_perplexity = affinities.effective_perplexity;
  const Eigen::MatrixXd& p = affinities.joint;

  // PCA initialization; degenerate (zero-variance) input falls back to a
  // seeded jitter.
  Rng rng(seed);
  Eigen::MatrixXd y = pca_fit_transform(points, std::min(2, int(points.cols()))).second;
  if (y.cols() < 2) {
    Eigen::MatrixXd padded(n, 2);
    padded.col(0) = y.col(0);
    padded.col(1).setZero();
    y = padded;
  }
  const double s0 = y.rows() > 1
                        ? std::sqrt(y.col(0).squaredNorm() / double(n - 1))
                        : 0.0;
  if (s0 > 0.0) {
    y *= 1e-4 / s0;
  } else {
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 2; ++d) y(i, d) = rng.normal() * 1e-4;
  }

  Embedding2D out;
  out.perplexity = eff_perplexity;
  out.seed = seed;
  out.iterations = iterations;

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n);
  Eigen::MatrixXd grad(n, 2);
  const double learning_rate = 200.0;

  for (int iter = 0; iter < iterations; ++iter) {
    const double exaggeration = iter < 250 ? 12.0 : 1.0;
    const double momentum = iter < 250 ? 0.5 : 0.8;

    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double q = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = q;
        num(j, i) = q;
        z += 2.0 * q;
      }
    }
    z = std::max(z, 1e-12);

    const bool record_kl =
        iter >= iterations - 120 || iter % 100 == 99;
    double kl = 0.0;
    grad.setZero();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num(i, j) / z, 1e-12);
        const double mult = (exaggeration * p(i, j) - q) * num(i, j);
        grad.row(i) += 4.0 * mult * (y.row(i) - y.row(j));
        if (record_kl && p(i, j) > 0.0 && j > i)
          kl += 2.0 * p(i, j) * std::log(p(i, j) / q);
      }
    }
    if (record_kl) out.kl_trace.push_back({iter, kl});

    // Per-parameter gains (the classic exact-t-SNE stabilizer): grow when the
    // gradient keeps its direction, shrink when it flips.
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 2; ++d) {
        const bool same_sign = (grad(i, d) > 0.0) == (velocity(i, d) > 0.0);
        gains(i, d) = same_sign ? std::max(gains(i, d) * 0.8, 0.01)
                                : gains(i, d) + 0.2;
      }
    velocity = momentum * velocity -
               learning_rate * gains.cwiseProduct(grad);
    // Cap the per-point step so strong early kicks cannot slingshot points
    // (the openTSNE max_step_norm safeguard).
    for (int i = 0; i < n; ++i) {
      const double norm = velocity.row(i).norm();
      if (norm > kMaxStepNorm) velocity.row(i) *= kMaxStepNorm / norm;
    }
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }

  out.coords = y;
  return out;
}

}  // namespace ieiclust
