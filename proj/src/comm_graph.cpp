#include "evcoord/comm_graph.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>

namespace evcoord {

namespace {

CommGraph from_edge_set(int n, const std::set<std::pair<int, int>>& edges) {
  CommGraph g;
  g.n = n;
  g.neighbors.assign(n, {});
  for (const auto& [u, v] : edges) {
    g.neighbors[u].push_back(v);
    g.neighbors[v].push_back(u);
  }
  for (auto& adj : g.neighbors) std::sort(adj.begin(), adj.end());
  return g;
}

}  // namespace

CommGraph CommGraph::complete(int n) {
  if (n < 0) throw ValidationError("graph size must be nonnegative");
  CommGraph g;
  g.n = n;
  g.neighbors.assign(n, {});
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (v != u) g.neighbors[u].push_back(v);
    }
  }
  return g;
}

CommGraph CommGraph::k_regular_random(int n, int k, std::uint64_t seed) {
  if (k < 1 || k >= n) throw ValidationError("regular degree must satisfy 1 <= k < n");
  if ((static_cast<long>(n) * k) % 2 != 0) {
    throw ValidationError("n*k must be even for a k-regular graph");
  }

  // circulant base: offsets 1..k/2 both ways, plus the antipode when k is odd
  std::set<std::pair<int, int>> edges;
  auto add = [&](int u, int v) {
    if (u > v) std::swap(u, v);
    edges.insert({u, v});
  };
  for (int u = 0; u < n; ++u) {
    for (int o = 1; o <= k / 2; ++o) add(u, (u + o) % n);
    if (k % 2 == 1) add(u, (u + n / 2) % n);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> list(edges.begin(), edges.end());
  std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);

  // double-edge swaps preserve all degrees
  const std::size_t swaps = 12 * list.size();
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (std::size_t s = 0; s < swaps; ++s) {
      const std::size_t i = pick(rng);
      const std::size_t j = pick(rng);
      if (i == j) continue;
      auto [a, b] = list[i];
      auto [c, d] = list[j];
      if (rng() & 1) std::swap(c, d);
      if (a == c || a == d || b == c || b == d) continue;
      auto e1 = std::minmax(a, d);
      auto e2 = std::minmax(c, b);
      const std::pair<int, int> n1{e1.first, e1.second}, n2{e2.first, e2.second};
      if (edges.count(n1) || edges.count(n2)) continue;
      edges.erase({std::min(a, b), std::max(a, b)});
      edges.erase({std::min(c, d), std::max(c, d)});
      edges.insert(n1);
      edges.insert(n2);
      list[i] = n1;
      list[j] = n2;
    }
    CommGraph g = from_edge_set(n, edges);
    if (g.connected()) return g;
  }
  throw ValidationError("could not produce a connected " + std::to_string(k) +
                        "-regular graph on " + std::to_string(n) + " vertices");
}

CommGraph CommGraph::from_edges(int n, const std::vector<std::pair<int, int>>& in) {
  std::set<std::pair<int, int>> edges;
  for (const auto& [u, v] : in) {
    if (u < 0 || u >= n || v < 0 || v >= n) {
      throw ValidationError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ") out of range");
    }
    if (u == v) throw ValidationError("self loop at agent " + std::to_string(u));
    edges.insert({std::min(u, v), std::max(u, v)});
  }
  return from_edge_set(n, edges);
}

bool CommGraph::connected() const {
  if (n <= 1) return n == 1;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : neighbors[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

std::vector<std::pair<int, int>> CommGraph::edge_list() const {
  std::vector<std::pair<int, int>> out;
  for (int u = 0; u < n; ++u) {
    for (int v : neighbors[u]) {
      if (u < v) out.push_back({u, v});
    }
  }
  return out;
}

void CommGraph::validate() const {
  std::vector<std::string> problems;
  if (static_cast<int>(neighbors.size()) != n) {
    problems.push_back("adjacency list size does not match n");
    throw ValidationError(std::move(problems));
  }
  for (int u = 0; u < n; ++u) {
    for (int v : neighbors[u]) {
      if (v < 0 || v >= n) {
        problems.push_back("agent " + std::to_string(u) + " has out-of-range neighbor");
        continue;
      }
      if (v == u) problems.push_back("self loop at agent " + std::to_string(u));
      if (!std::binary_search(neighbors[v].begin(), neighbors[v].end(), u)) {
        problems.push_back("edge (" + std::to_string(u) + "," + std::to_string(v) +
                           ") is not symmetric");
      }
    }
  }
  if (n > 1 && !connected()) problems.push_back("communication graph is not connected");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

}  // namespace evcoord
