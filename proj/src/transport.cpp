#include "dcsr/transport.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace dcsr {

std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.cols() != cost.rows()) throw std::invalid_argument("solve_assignment: cost matrix must be square");
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual row/column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

double uniform_transport_cost(const Eigen::MatrixXd& cost) {
  const auto N = static_cast<std::size_t>(cost.rows());
  const auto M = static_cast<std::size_t>(cost.cols());
  if (N == 0 || M == 0) throw std::invalid_argument("uniform_transport_cost: empty marginal");
  if (N == M) {
    const auto a = solve_assignment(cost);
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a[i]));
    return total / static_cast<double>(N);
  }

  // Successive shortest paths on the bipartite residual graph. Nodes: S, rows
  // 0..N-1, columns 0..M-1, T. Row->column arcs are uncapacitated.
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t V = N + M + 2;
  const std::size_t S = N + M, T = N + M + 1;
  auto col_node = [N](std::size_t j) { return N + j; };
  std::vector<long long> supply(N, static_cast<long long>(M)), demand(M, static_cast<long long>(N));
  std::vector<long long> flow(N * M, 0);
  std::vector<double> pot(V, 0.0), dist(V);
  std::vector<std::size_t> prev(V);
  std::vector<char> done(V);
  long long remaining = static_cast<long long>(N) * static_cast<long long>(M);
  auto c = [&](std::size_t i, std::size_t j) {
    return cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };
  // Costs may be shifted so every forward arc starts nonnegative.
  const double shift = std::min(0.0, cost.minCoeff());

  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    dist[S] = 0.0;
    for (;;) {
      std::size_t u = V;
      double best = inf;
      for (std::size_t k = 0; k < V; ++k)
        if (!done[k] && dist[k] < best) {
          best = dist[k];
          u = k;
        }
      if (u == V) break;
      done[u] = 1;
      auto relax = [&](std::size_t w, double reduced) {
        const double nd = dist[u] + std::max(0.0, reduced);
        if (nd < dist[w]) {
          dist[w] = nd;
          prev[w] = u;
        }
      };
      if (u == S) {
        for (std::size_t i = 0; i < N; ++i)
          if (supply[i] > 0) relax(i, pot[S] - pot[i]);
      } else if (u < N) {
        for (std::size_t j = 0; j < M; ++j) relax(col_node(j), (c(u, j) - shift) + pot[u] - pot[col_node(j)]);
      } else if (u < N + M) {
        const std::size_t j = u - N;
        for (std::size_t i = 0; i < N; ++i)
          if (flow[i * M + j] > 0) relax(i, -(c(i, j) - shift) + pot[u] - pot[i]);
        if (demand[j] > 0) relax(T, pot[u] - pot[T]);
      }
    }
    if (!(dist[T] < inf)) throw std::runtime_error("uniform_transport_cost: no augmenting path");
    for (std::size_t k = 0; k < V; ++k) pot[k] += std::min(dist[k], dist[T]);

    // Bottleneck along the path T <- col <- row <- ... <- S.
    long long push = remaining;
    for (std::size_t w = T; w != S; w = prev[w]) {
      const std::size_t u = prev[w];
      if (u == S) push = std::min(push, supply[w]);
      else if (w == T) push = std::min(push, demand[u - N]);
      else if (u >= N) push = std::min(push, flow[w * M + (u - N)]);
    }
    for (std::size_t w = T; w != S; w = prev[w]) {
      const std::size_t u = prev[w];
      if (u == S) supply[w] -= push;
      else if (w == T) demand[u - N] -= push;
      else if (u < N) flow[u * M + (w - N)] += push;
      else flow[w * M + (u - N)] -= push;
    }
    remaining -= push;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j)
      if (flow[i * M + j] > 0) total += static_cast<double>(flow[i * M + j]) * c(i, j);
  return total / (static_cast<double>(N) * static_cast<double>(M));
}

}  // namespace dcsr
