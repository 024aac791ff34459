#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evcoord/common.hpp"

namespace evcoord {

/// Symmetric peer-to-peer communication graph over the N agents.
struct CommGraph {
  int n = 0;
  std::vector<std::vector<int>> neighbors;  // sorted adjacency lists

  static CommGraph complete(int n);

  /// Random k-regular graph: circulant base randomized by seeded degree-
  /// preserving edge swaps. Deterministic for a fixed seed; the result is
  /// rejected (and reshuffled) until connected.
  static CommGraph k_regular_random(int n, int k, std::uint64_t seed);

  static CommGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges);

  bool connected() const;
  std::vector<std::pair<int, int>> edge_list() const;  // u < v

  /// Symmetry, bounds, no self loops, connectivity. Throws ValidationError.
  void validate() const;
};

}  // namespace evcoord
