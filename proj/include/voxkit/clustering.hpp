#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <vector>

#include "voxkit/common.hpp"
#include "voxkit/volume.hpp"

namespace voxkit {

// Undirected 6-neighborhood graph over the masked voxels, nodes in the
// canonical feature order.
struct VoxelGraph {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // i < j

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_nodes));
    for (const auto& [i, j] : edges) {
      adj[static_cast<std::size_t>(i)].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(i);
    }
    return adj;
  }

  int count_components() const {
    const auto adj = adjacency();
    std::vector<char> seen(static_cast<std::size_t>(n_nodes), 0);
    int components = 0;
    std::vector<int> stack;
    for (int s = 0; s < n_nodes; ++s) {
      if (seen[static_cast<std::size_t>(s)]) continue;
      ++components;
      stack.push_back(s);
      seen[static_cast<std::size_t>(s)] = 1;
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int u : adj[static_cast<std::size_t>(v)])
          if (!seen[static_cast<std::size_t>(u)]) {
            seen[static_cast<std::size_t>(u)] = 1;
            stack.push_back(u);
          }
      }
    }
    return components;
  }
};

inline VoxelGraph grid_to_graph(const BrainMask& mask) {
  std::vector<int> feature(mask.size(), -1);
  const auto idx = mask.voxel_indices();
  for (std::size_t j = 0; j < idx.size(); ++j) feature[idx[j]] = static_cast<int>(j);

  VoxelGraph graph;
  graph.n_nodes = static_cast<int>(mask.n_voxels());
  const auto coords = mask.voxel_coords();
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const auto [x, y, z] = coords[c];
    const int steps[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const auto& s : steps) {
      const int nx = x + s[0], ny = y + s[1], nz = z + s[2];
      if (nx >= mask.shape()[0] || ny >= mask.shape()[1] || nz >= mask.shape()[2]) continue;
      const int f = feature[mask.index(nx, ny, nz)];
      if (f >= 0) graph.edges.emplace_back(static_cast<int>(c), f);
    }
  }
  return graph;
}

enum class ClusterMethod { Ward, KMeans };

struct Parcellation {
  std::vector<int> labels;  // cluster id per voxel, 0..n_clusters-1
  int n_clusters = 0;
  ClusterMethod method = ClusterMethod::Ward;
  // set when the graph had more components than the requested cluster count
  // and the component labeling was returned instead
  bool infeasible = false;
};

struct WardMerge {
  double cost = 0.0;  // Ward variance increase of the merge
  int a = 0, b = 0;   // cluster ids at the time of the merge (a < b)
};

struct WardResult {
  Parcellation parcellation;
  std::vector<WardMerge> merges;
};

// Bottom-up agglomeration of voxels (columns of X) minimizing the Ward
// cost  |A||B|/(|A|+|B|) * |mu_A - mu_B|^2, restricted to graph-adjacent
// pairs. Costs come from per-cluster moments (size, coordinate sum), which
// reproduces the Lance-Williams Ward update exactly; stale heap entries are
// invalidated lazily through per-cluster version counters. A merged pair
// keeps the smaller id; ties pick the smallest (id, partner) pair.
inline WardResult ward_agglomerate(const DataMatrix& X, const VoxelGraph& graph, int n_clusters) {
  const int n = graph.n_nodes;
  require(static_cast<Eigen::Index>(n) == X.cols(), ErrorKind::LengthMismatch,
          "graph nodes must match the voxel count");
  require(n_clusters >= 1, ErrorKind::InvalidArgument, "n_clusters must be at least 1");
  require(n_clusters <= n, ErrorKind::TooManyClusters, "more clusters than voxels");

  struct Cluster {
    Vector sum;
    double size = 0.0;
    std::set<int> neighbors;
    int version = 0;
    bool alive = true;
  };
  std::vector<Cluster> clusters(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    clusters[static_cast<std::size_t>(v)].sum = X.col(v);
    clusters[static_cast<std::size_t>(v)].size = 1.0;
  }
  for (const auto& [i, j] : graph.edges) {
    clusters[static_cast<std::size_t>(i)].neighbors.insert(j);
    clusters[static_cast<std::size_t>(j)].neighbors.insert(i);
  }

  auto merge_cost = [&](int a, int b) {
    const Cluster& ca = clusters[static_cast<std::size_t>(a)];
    const Cluster& cb = clusters[static_cast<std::size_t>(b)];
    const double f = ca.size * cb.size / (ca.size + cb.size);
    return f * (ca.sum / ca.size - cb.sum / cb.size).squaredNorm();
  };

  struct Candidate {
    double cost;
    int a, b;          // a < b
    int va, vb;        // cluster versions when pushed
    bool operator>(const Candidate& o) const {
      if (cost != o.cost) return cost > o.cost;
      if (a != o.a) return a > o.a;
      return b > o.b;
    }
  };
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> heap;
  auto push_pair = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    heap.push({merge_cost(a, b), a, b, clusters[static_cast<std::size_t>(a)].version,
               clusters[static_cast<std::size_t>(b)].version});
  };
  for (const auto& [i, j] : graph.edges) push_pair(i, j);

  WardResult result;
  int alive = n;
  while (alive > n_clusters && !heap.empty()) {
    const Candidate top = heap.top();
    heap.pop();
    Cluster& ca = clusters[static_cast<std::size_t>(top.a)];
    Cluster& cb = clusters[static_cast<std::size_t>(top.b)];
    if (!ca.alive || !cb.alive || ca.version != top.va || cb.version != top.vb) continue;

    result.merges.push_back({top.cost, top.a, top.b});
    ca.sum += cb.sum;
    ca.size += cb.size;
    ca.version++;
    cb.alive = false;
    ca.neighbors.erase(top.b);
    cb.neighbors.erase(top.a);
    for (int nb : cb.neighbors) {
      clusters[static_cast<std::size_t>(nb)].neighbors.erase(top.b);
      clusters[static_cast<std::size_t>(nb)].neighbors.insert(top.a);
      ca.neighbors.insert(nb);
    }
    cb.neighbors.clear();
    for (int nb : ca.neighbors) push_pair(top.a, nb);
    --alive;
  }

  // assign ids 0..k-1 ordered by each cluster's smallest voxel
  std::vector<int> root(static_cast<std::size_t>(n), -1);
  {
    // roots resolved by replaying the merges over a union map
    std::vector<int> to(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) to[static_cast<std::size_t>(v)] = v;
    for (const auto& m : result.merges)
      for (int v = 0; v < n; ++v)
        if (to[static_cast<std::size_t>(v)] == m.b) to[static_cast<std::size_t>(v)] = m.a;
    root = to;
  }
  std::vector<int> relabel(static_cast<std::size_t>(n), -1);
  int next = 0;
  Parcellation& p = result.parcellation;
  p.labels.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    const int r = root[static_cast<std::size_t>(v)];
    if (relabel[static_cast<std::size_t>(r)] < 0) relabel[static_cast<std::size_t>(r)] = next++;
    p.labels[static_cast<std::size_t>(v)] = relabel[static_cast<std::size_t>(r)];
  }
  p.n_clusters = next;
  p.method = ClusterMethod::Ward;
  p.infeasible = next > n_clusters;  // disconnected graph: components are the floor
  return result;
}

// per-cluster mean of member columns
inline DataMatrix agglomeration_transform(const Parcellation& p, const DataMatrix& X) {
  require(static_cast<std::size_t>(X.cols()) == p.labels.size(), ErrorKind::LengthMismatch,
          "voxel count does not match the parcellation");
  DataMatrix out = DataMatrix::Zero(X.rows(), p.n_clusters);
  std::vector<double> count(static_cast<std::size_t>(p.n_clusters), 0.0);
  for (std::size_t v = 0; v < p.labels.size(); ++v) {
    out.col(p.labels[v]) += X.col(static_cast<Eigen::Index>(v));
    count[static_cast<std::size_t>(p.labels[v])] += 1.0;
  }
  for (int c = 0; c < p.n_clusters; ++c) out.col(c) /= count[static_cast<std::size_t>(c)];
  return out;
}

// broadcast each cluster value back to its member voxels
inline DataMatrix agglomeration_inverse(const Parcellation& p, const DataMatrix& reduced) {
  require(reduced.cols() == p.n_clusters, ErrorKind::LengthMismatch,
          "column count does not match the cluster count");
  DataMatrix out(reduced.rows(), static_cast<Eigen::Index>(p.labels.size()));
  for (std::size_t v = 0; v < p.labels.size(); ++v)
    out.col(static_cast<Eigen::Index>(v)) = reduced.col(p.labels[v]);
  return out;
}

struct KMeansResult {
  Parcellation parcellation;
  Matrix centers;  // k x n_dims
  double inertia = 0.0;
  std::vector<double> inertia_log;  // per Lloyd iteration of the winning restart
  int n_iter = 0;
};

namespace detail {

struct LloydRun {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
  std::vector<double> inertia_log;
  int n_iter = 0;
};

inline LloydRun kmeans_single(const Matrix& items, int k, std::uint64_t seed, int max_iter,
                              double tol) {
  const Eigen::Index n = items.rows();
  Rng rng(seed);

  // k-means++ seeding
  Matrix centers(k, items.cols());
  centers.row(0) = items.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Vector d2 = (items.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = items.row(pick);
    d2 = d2.cwiseMin((items.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> counts(static_cast<std::size_t>(k));
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    // assignment (ties to the lower center index)
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (items.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (items.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      run.labels[static_cast<std::size_t>(i)] = best;
      inertia += best_d;
    }
    run.inertia_log.push_back(inertia);

    Matrix new_centers = Matrix::Zero(k, items.cols());
    std::fill(counts.begin(), counts.end(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      new_centers.row(run.labels[static_cast<std::size_t>(i)]) += items.row(i);
      counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0.0) {
        new_centers.row(c) /= counts[static_cast<std::size_t>(c)];
      } else {
        // re-seed an empty cluster with the point farthest from its center
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d =
              (items.row(i) - centers.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        new_centers.row(c) = items.row(far);
        run.labels[static_cast<std::size_t>(far)] = c;
      }
    }

    const double shift = (new_centers - centers).rowwise().norm().maxCoeff();
    centers = new_centers;
    if (shift < tol) {
      ++iter;
      break;
    }
  }

  // final assignment + inertia for the converged centers
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (items.row(i) - centers.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double d = (items.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    run.labels[static_cast<std::size_t>(i)] = best;
    inertia += best_d;
  }
  run.inertia_log.push_back(inertia);
  run.centers = centers;
  run.inertia = inertia;
  run.n_iter = iter;
  return run;
}

}  // namespace detail

// k-means++ seeding, Lloyd iterations, best inertia over n_init seeded
// restarts (ties keep the lowest restart index). Empty clusters re-seed
// with the point farthest from its assigned center.
inline KMeansResult kmeans(const Matrix& items, int k, std::uint64_t seed, int n_init = 10,
                           int max_iter = 300, double tol = 1e-6) {
  require(k >= 1, ErrorKind::BadK, "k must be at least 1");
  require(static_cast<Eigen::Index>(k) <= items.rows(), ErrorKind::BadK,
          "k exceeds the item count");
  require(n_init >= 1, ErrorKind::InvalidArgument, "n_init must be at least 1");

  std::vector<detail::LloydRun> runs(static_cast<std::size_t>(n_init));
  parallel_for(static_cast<std::size_t>(n_init), [&](std::size_t r) {
    runs[r] = detail::kmeans_single(items, k, seed + r, max_iter, tol);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;

  // relabel so cluster ids follow each cluster's smallest item index
  std::vector<int> relabel(static_cast<std::size_t>(k), -1);
  int next = 0;
  KMeansResult out;
  out.parcellation.labels.resize(runs[best].labels.size());
  for (std::size_t i = 0; i < runs[best].labels.size(); ++i) {
    const int c = runs[best].labels[i];
    if (relabel[static_cast<std::size_t>(c)] < 0) relabel[static_cast<std::size_t>(c)] = next++;
    out.parcellation.labels[i] = relabel[static_cast<std::size_t>(c)];
  }
  out.parcellation.n_clusters = next;
  out.parcellation.method = ClusterMethod::KMeans;
  out.centers = Matrix(next, items.cols());
  for (int c = 0; c < k; ++c)
    if (relabel[static_cast<std::size_t>(c)] >= 0)
      out.centers.row(relabel[static_cast<std::size_t>(c)]) = runs[best].centers.row(c);
  out.inertia = runs[best].inertia;
  out.inertia_log = runs[best].inertia_log;
  out.n_iter = runs[best].n_iter;
  return out;
}

// Connected components of equal-label voxels under the graph; K-means
// parcels may split into several spatial regions.
inline std::vector<int> connected_component_relabel(const Parcellation& p,
                                                    const VoxelGraph& graph) {
  const auto adj = graph.adjacency();
  std::vector<int> region(p.labels.size(), -1);
  int next = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < p.labels.size(); ++s) {
    if (region[s] >= 0) continue;
    region[s] = next;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int u : adj[static_cast<std::size_t>(v)])
        if (region[static_cast<std::size_t>(u)] < 0 &&
            p.labels[static_cast<std::size_t>(u)] == p.labels[static_cast<std::size_t>(v)]) {
          region[static_cast<std::size_t>(u)] = next;
          stack.push_back(u);
        }
    }
    ++next;
  }
  return region;
}

// 3x3x3 box blur inside the volume bounds, one pass per frame; optional
// smoothing ahead of K-means.
inline Volume4D box_blur3(const Volume4D& vol) {
  Volume4D out({vol.nx(), vol.ny(), vol.nz(), vol.nt()}, vol.affine(), vol.element_kind());
  for (int t = 0; t < vol.nt(); ++t)
    for (int z = 0; z < vol.nz(); ++z)
      for (int y = 0; y < vol.ny(); ++y)
        for (int x = 0; x < vol.nx(); ++x) {
          double acc = 0.0;
          int count = 0;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int xx = x + dx, yy = y + dy, zz = z + dz;
                if (!vol.in_bounds(xx, yy, zz)) continue;
                acc += vol.at(xx, yy, zz, t);
                ++count;
              }
          out.at(x, y, z, t) = acc / static_cast<double>(count);
        }
  return out;
}

}  // namespace voxkit
