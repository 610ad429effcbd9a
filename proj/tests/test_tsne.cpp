#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "ieiclust/scatter_svg.hpp"
#include "ieiclust/tsne.hpp"

using namespace ieiclust;

TEST_CASE("tsne: two far pairs keep their pair structure") {
  // Pairs deliberately off the common line: a collinear input makes the PCA
  // initialization one-dimensional and the line has a trapping saddle.
  Eigen::MatrixXd points(4, 2);
  points << 0.0, 0.0, 0.1, 0.05, 10.0, 9.0, 10.1, 9.1;
  const auto embedding = tsne_embed(points, 30.0, 500, 1);
  const auto d = [&](int i, int j) {
    return (embedding.coords.row(i) - embedding.coords.row(j)).norm();
  };
  CHECK(d(0, 1) < d(0, 2));
  CHECK(d(0, 1) < d(0, 3));
  CHECK(d(2, 3) < d(2, 0));
  CHECK(d(2, 3) < d(2, 1));
}

TEST_CASE("tsne: duplicated rows embed together") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd base(12, 3);
  for (int i = 0; i < 12; ++i)
    base.row(i) << unit(rng), unit(rng), unit(rng);
  Eigen::MatrixXd doubled(24, 3);
  doubled.topRows(12) = base;
  doubled.bottomRows(12) = base;
  const auto embedding = tsne_embed(doubled, 5.0, 400, 7);
  for (int i = 0; i < 12; ++i)
    CHECK((embedding.coords.row(i) - embedding.coords.row(i + 12)).norm() <
          1e-3);
}

TEST_CASE("tsne: deterministic for a fixed seed") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd points(30, 4);
  for (int i = 0; i < 30; ++i)
    for (int d = 0; d < 4; ++d) points(i, d) = unit(rng);
  const auto a = tsne_embed(points, 10.0, 300, 11);
  const auto b = tsne_embed(points, 10.0, 300, 11);
  CHECK((a.coords - b.coords).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tsne: KL divergence non-increasing over the last 100 iterations") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 0.1);
  Eigen::MatrixXd points(60, 3);
  for (int i = 0; i < 60; ++i) {
    const double offset = i < 30 ? 0.0 : 3.0;
    points.row(i) << offset + gauss(rng), gauss(rng), gauss(rng);
  }
  // Run long enough to be past the optimization transient; the last-100
  // window then only wobbles at floating-point level around the minimum.
  const auto embedding = tsne_embed(points, 15.0, 1200, 13);
  std::vector<double> tail;
  for (const auto& [iter, kl] : embedding.kl_trace)
    if (iter >= 1200 - 100) tail.push_back(kl);
  REQUIRE(tail.size() >= 100);
  for (std::size_t i = 1; i < tail.size(); ++i)
    CHECK(tail[i] <= tail[i - 1] + 1e-6);
}

TEST_CASE("tsne: affinity rows sum to 1; joint sums to 1") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd points(40, 4);
  for (int i = 0; i < 40; ++i)
    for (int d = 0; d < 4; ++d) points(i, d) = unit(rng);
  const auto affinities = tsne_affinities(points, 10.0);
  for (int i = 0; i < 40; ++i)
    CHECK(affinities.conditional.row(i).sum() == Catch::Approx(1.0).margin(1e-8));
  CHECK(affinities.joint.sum() == Catch::Approx(1.0).margin(1e-8));
  // Symmetry of the joint distribution.
  CHECK((affinities.joint - affinities.joint.transpose()).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("tsne: row-order invariance") {
  // The map is permutation-equivariant; floating-point summation order makes
  // long runs diverge bitwise, so the affinities are compared tightly and
  // the embedding over a short horizon, before round-off can amplify.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 20;
  Eigen::MatrixXd points(n, 3);
  for (int i = 0; i < n; ++i)
    points.row(i) << unit(rng), unit(rng), unit(rng);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd shuffled(n, 3);
  for (int i = 0; i < n; ++i) shuffled.row(i) = points.row(perm[i]);

  const auto base_aff = tsne_affinities(points, 6.0);
  const auto perm_aff = tsne_affinities(shuffled, 6.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK(perm_aff.joint(i, j) ==
            Catch::Approx(base_aff.joint(perm[i], perm[j])).margin(1e-10));

  const auto base = tsne_embed(points, 6.0, 30, 3);
  const auto permuted = tsne_embed(shuffled, 6.0, 30, 3);
  for (int i = 0; i < n; ++i)
    CHECK((permuted.coords.row(i) - base.coords.row(perm[i])).norm() < 1e-4);
}

TEST_CASE("tsne: effective perplexity caps at (n-1)/3 and n>=4 enforced") {
  Eigen::MatrixXd points(4, 2);
  points << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto embedding = tsne_embed(points, 30.0, 50, 1);
  CHECK(embedding.perplexity == Catch::Approx(1.0));
  Eigen::MatrixXd tiny(3, 2);
  tiny.setZero();
  CHECK_THROWS_AS(tsne_embed(tiny, 30.0, 50, 1), std::invalid_argument);
}

TEST_CASE("emit_scatter: annotations and deterministic bytes") {
  Embedding2D embedding;
  embedding.coords.resize(12, 2);
  for (int i = 0; i < 12; ++i)
    embedding.coords.row(i) << double(i < 10 ? 0 : 5) + 0.01 * i, double(i % 3);
  std::vector<int> clusters(12, 0);
  clusters[10] = 1;
  clusters[11] = 1;
  std::vector<DiseaseLabel> diseases(12, DiseaseLabel::DGS);
  diseases[11] = DiseaseLabel::CVID;

  std::ostringstream svg1, csv1, svg2, csv2;
  emit_scatter(embedding, clusters, diseases, svg1, csv1);
  emit_scatter(embedding, clusters, diseases, svg2, csv2);
  CHECK(svg1.str() == svg2.str());
  CHECK(csv1.str() == csv2.str());

  // Cluster 0: 10 members, all DGS -> "DGS 1.00 (10)".
  CHECK(svg1.str().find("DGS 1.00 (10)") != std::string::npos);
  // Cluster 1: 2 members split DGS/CVID; tie resolves in enum order (CVID).
  CHECK(svg1.str().find("CVID 0.50 (2)") != std::string::npos);
  CHECK(csv1.str().rfind("x,y,cluster,disease\n", 0) == 0);
}

TEST_CASE("emit_scatter: noise-only input has points but no annotations") {
  Embedding2D embedding;
  embedding.coords.resize(4, 2);
  embedding.coords.setRandom();
  std::vector<int> clusters(4, -1);
  std::vector<DiseaseLabel> diseases(4, DiseaseLabel::WAS);
  std::ostringstream svg, csv;
  emit_scatter(embedding, clusters, diseases, svg, csv);
  CHECK(svg.str().find("<circle") != std::string::npos);
  CHECK(svg.str().find("<text") == std::string::npos);
}
