#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ieiclust/assignment.hpp"

namespace ieiclust {

// Condensed-tree node. Node 0 is the root (birth lambda 0); children are
// created by true splits (both sides >= min_cluster_size). Points that fall
// off in sub-threshold splits are recorded as point exits.
struct CondensedNode {
  int parent = -1;
  double birth_lambda = 0.0;
  double split_lambda = 0.0;  // 0 when the node never truly splits
  std::vector<int> children;
  std::vector<std::pair<int, double>> point_exits;  // (point, exit lambda)
  int size = 0;                                     // points in subtree
};

struct HdbscanTree {
  int n = 0;
  int min_cluster_size = 0;
  int min_samples = 0;
  std::vector<CondensedNode> nodes;
  std::vector<int> exit_node;  // per point: condensed node of its exit
};

namespace detail {

// Distances of 0 map to a large finite lambda so duplicate points stay
// representable in the stability sums.
inline double lambda_of(double distance) {
  return 1.0 / std::max(distance, 1e-12);
}

struct BinaryNode {
  int left = -1;
  int right = -1;
  double distance = 0.0;
  int size = 1;
};

}  // namespace detail

// Mutual-reachability single-linkage tree condensed at min_cluster_size.
// core_k(p) is the distance to the min_samples-th nearest neighbor counting
// the point itself.
inline HdbscanTree hdbscan_build_with_distances(const Eigen::MatrixXd& dist,
                                                int min_cluster_size,
                                                int min_samples) {
  const int n = static_cast<int>(dist.rows());
  if (min_cluster_size < 2)
    throw std::invalid_argument("hdbscan: min_cluster_size must be >= 2");
  if (min_samples < 1)
    throw std::invalid_argument("hdbscan: min_samples must be >= 1");
  if (n < min_cluster_size)
    throw std::invalid_argument("hdbscan: need at least min_cluster_size (" +
                                std::to_string(min_cluster_size) +
                                ") points, got " + std::to_string(n));

  // Core distances.
  const int k = std::min(min_samples, n);
  std::vector<double> core(n);
  {
    std::vector<double> row(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) row[j] = dist(i, j);
      std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
      core[i] = row[k - 1];
    }
  }
  auto mreach = [&](int a, int b) {
    return std::max({core[a], core[b], dist(a, b)});
  };

  // Prim MST over the complete mutual-reachability graph.
  std::vector<double> key(n, std::numeric_limits<double>::infinity());
  std::vector<int> link(n, -1);
  std::vector<bool> in_tree(n, false);
  key[0] = 0.0;
  struct Edge {
    int a, b;
    double w;
  };
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  for (int step = 0; step < n; ++step) {
    int u = -1;
    for (int i = 0; i < n; ++i)
      if (!in_tree[i] && (u < 0 || key[i] < key[u])) u = i;
    in_tree[u] = true;
    if (link[u] >= 0)
      edges.push_back({std::min(u, link[u]), std::max(u, link[u]), key[u]});
    for (int v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = mreach(u, v);
      if (w < key[v]) {
        key[v] = w;
        link[v] = u;
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  // Single-linkage dendrogram via union-find over the sorted MST edges.
  std::vector<detail::BinaryNode> binary(n);
  std::vector<int> root_of(n);  // union-find with path halving
  std::vector<int> node_of(n);  // component root -> dendrogram node
  for (int i = 0; i < n; ++i) {
    root_of[i] = i;
    node_of[i] = i;
  }
  auto find = [&](int x) {
    while (root_of[x] != x) {
      root_of[x] = root_of[root_of[x]];
      x = root_of[x];
    }
    return x;
  };
  for (const auto& e : edges) {
    const int ra = find(e.a);
    const int rb = find(e.b);
    detail::BinaryNode merged;
    merged.left = node_of[ra];
    merged.right = node_of[rb];
    merged.distance = e.w;
    merged.size = binary[node_of[ra]].size + binary[node_of[rb]].size;
    binary.push_back(merged);
    root_of[rb] = ra;
    node_of[ra] = static_cast<int>(binary.size()) - 1;
  }

  HdbscanTree tree;
  tree.n = n;
  tree.min_cluster_size = min_cluster_size;
  tree.min_samples = min_samples;
  tree.exit_node.assign(n, 0);

  auto collect_points = [&](int bnode, std::vector<int>& out) {
    std::vector<int> stack{bnode};
    while (!stack.empty()) {
      const int b = stack.back();
      stack.pop_back();
      if (b < n) {
        out.push_back(b);
      } else {
        stack.push_back(binary[b].left);
        stack.push_back(binary[b].right);
      }
    }
  };

  tree.nodes.push_back({});  // root, birth lambda 0
  tree.nodes[0].size = n;
  struct WalkItem {
    int bnode;
    int cid;
  };
  std::vector<WalkItem> walk{{static_cast<int>(binary.size()) - 1, 0}};
  while (!walk.empty()) {
    auto [bnode, cid] = walk.back();
    walk.pop_back();
    int current = bnode;
    while (true) {
      if (current < n) {
        // Single point left in this cluster chain; it exits when reached.
        // Only possible for the root of a 1-point dataset, which the
        // preconditions exclude, so treat defensively as an exit at birth.
        tree.nodes[cid].point_exits.push_back(
            {current, tree.nodes[cid].birth_lambda});
        tree.exit_node[current] = cid;
        break;
      }
      const auto& b = binary[current];
      const double lambda = detail::lambda_of(b.distance);
      const int left_size = binary[b.left].size;
      const int right_size = binary[b.right].size;
      const bool left_big = left_size >= min_cluster_size;
      const bool right_big = right_size >= min_cluster_size;
      if (left_big && right_big) {
        tree.nodes[cid].split_lambda = lambda;
        for (int child_bnode : {b.left, b.right}) {
          CondensedNode child;
          child.parent = cid;
          child.birth_lambda = lambda;
          child.size = binary[child_bnode].size;
          tree.nodes.push_back(child);
          const int child_cid = static_cast<int>(tree.nodes.size()) - 1;
          tree.nodes[cid].children.push_back(child_cid);
          walk.push_back({child_bnode, child_cid});
        }
        break;
      }
      if (!left_big && !right_big) {
        std::vector<int> pts;
        collect_points(current, pts);
        std::sort(pts.begin(), pts.end());
        for (int p : pts) {
          tree.nodes[cid].point_exits.push_back({p, lambda});
          tree.exit_node[p] = cid;
        }
        break;
      }
      const int small = left_big ? b.right : b.left;
      std::vector<int> pts;
      collect_points(small, pts);
      std::sort(pts.begin(), pts.end());
      for (int p : pts) {
        tree.nodes[cid].point_exits.push_back({p, lambda});
        tree.exit_node[p] = cid;
      }
      current = left_big ? b.left : b.right;
    }
  }
  return tree;
}

inline HdbscanTree hdbscan_build(const Eigen::MatrixXd& points,
                                 int min_cluster_size, int min_samples) {
  return hdbscan_build_with_distances(pairwise_distances(points),
                                      min_cluster_size, min_samples);
}

namespace detail {

inline double node_stability(const CondensedNode& node) {
  double s = 0.0;
  for (const auto& [p, lambda] : node.point_exits)
    s += lambda - node.birth_lambda;
  if (!node.children.empty()) {
    int passed = 0;
    // Children sizes were recorded at the split.
    passed = node.size - static_cast<int>(node.point_exits.size());
    s += passed * (node.split_lambda - node.birth_lambda);
  }
  return s;
}

}  // namespace detail

// Flat clustering from the condensed tree: excess-of-mass selection, then
// clusters born below selection_epsilon are merged upward into the first
// ancestor spanning at least that distance. Unclaimed points are noise.
inline ClusterAssignment hdbscan_select(const HdbscanTree& tree,
                                        double selection_epsilon) {
  if (selection_epsilon < 0.0)
    throw std::invalid_argument("hdbscan: selection_epsilon must be >= 0");
  const int m = static_cast<int>(tree.nodes.size());
  std::vector<double> score(m, 0.0);
  std::vector<bool> selected(m, false);

  // Children always carry higher ids than their parent, so a reverse pass is
  // a bottom-up pass.
  for (int i = m - 1; i >= 0; --i) {
    const auto& node = tree.nodes[i];
    const double own = detail::node_stability(node);
    if (node.children.empty()) {
      score[i] = own;
      selected[i] = true;
      continue;
    }
    double child_sum = 0.0;
    for (int c : node.children) child_sum += score[c];
    // The root never competes with its children.
    if (node.parent >= 0 && own >= child_sum) {
      score[i] = own;
      selected[i] = true;
    } else {
      score[i] = child_sum;
      selected[i] = false;
    }
  }

  // Keep only the highest selected node on each root-to-leaf path.
  std::vector<char> in_set(m, 0);
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (selected[i]) {
      in_set[i] = 1;
      continue;
    }
    for (int c : tree.nodes[i].children) stack.push_back(c);
  }

  if (selection_epsilon > 0.0) {
    auto birth_distance = [&](int i) {
      return tree.nodes[i].birth_lambda <= 0.0
                 ? std::numeric_limits<double>::infinity()
                 : 1.0 / tree.nodes[i].birth_lambda;
    };
    std::vector<int> members;
    for (int i = 0; i < m; ++i)
      if (in_set[i]) members.push_back(i);
    for (int i : members) {
      if (birth_distance(i) >= selection_epsilon) continue;
      int up = i;
      while (tree.nodes[up].parent >= 0 &&
             birth_distance(up) < selection_epsilon)
        up = tree.nodes[up].parent;
      in_set[i] = 0;
      in_set[up] = 1;
    }
    // Drop members that gained a selected ancestor.
    for (int i = 0; i < m; ++i) {
      if (!in_set[i]) continue;
      int up = tree.nodes[i].parent;
      while (up >= 0) {
        if (in_set[up]) {
          in_set[i] = 0;
          break;
        }
        up = tree.nodes[up].parent;
      }
    }
  }

  ClusterAssignment result;
  result.algorithm = Algorithm::HDBSCAN;
  result.labels.assign(tree.n, -1);
  for (int p = 0; p < tree.n; ++p) {
    int node = tree.exit_node[p];
    while (node >= 0) {
      if (in_set[node]) {
        result.labels[p] = node;
        break;
      }
      node = tree.nodes[node].parent;
    }
  }
  relabel_by_lowest_member(result.labels);
  result.n_clusters = count_clusters(result.labels);
  return result;
}

inline ClusterAssignment hdbscan(const Eigen::MatrixXd& points,
                                 int min_cluster_size, int min_samples,
                                 double selection_epsilon) {
  return hdbscan_select(
      hdbscan_build(points, min_cluster_size, min_samples), selection_epsilon);
}

}  // namespace ieiclust
