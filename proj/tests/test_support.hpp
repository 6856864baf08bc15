// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ppgpr/topology.hpp"

namespace ppgpr::testing {

/// Connected graph in which every edge has a common neighbour. Grown from a
/// triangle by attaching each new agent to both ends of a random edge, then
/// densified with random chords that close a triangle.
inline Topology random_triangulated_graph(std::size_t m, std::mt19937_64& gen,
                                          double chord_probability = 0.3) {
  std::vector<Edge> edges{{0, 1}, {0, 2}, {1, 2}};
  for (AgentId v = 3; v < m; ++v) {
    const Edge e = edges[std::uniform_int_distribution<std::size_t>(
        0, edges.size() - 1)(gen)];
    edges.push_back({e.first, v});
    edges.push_back({e.second, v});
  }
  Topology g(m, edges);
  std::bernoulli_distribution coin(chord_probability);
  for (AgentId i = 0; i < m; ++i) {
    for (AgentId j = i + 1; j < m; ++j) {
      if (g.adjacent(i, j)) continue;
      if (sorted_intersection(g.neighbors(i), g.neighbors(j)).empty()) continue;
      if (coin(gen)) g = g.with_edge(i, j);
    }
  }
  return g;
}

/// Upper-tail p-value of Pearson's statistic against a uniform law.
inline double chi_square_uniform_p(std::span<const std::size_t> counts) {
  double total = 0;
  for (std::size_t c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace ppgpr::testing
