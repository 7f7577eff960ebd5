// Copyright 2026 The privex Authors.
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

// Influence graphs: node i has an edge to every point in the top-k
// explanation of training point i. Adaptive reconstruction can only ever
// reach what the graph reaches.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "privex/influence.hpp"

namespace privex {

struct InfluenceGraph {
  std::vector<std::vector<std::size_t>> out;

  std::size_t size() const { return out.size(); }

  std::vector<std::size_t> in_degrees() const {
    std::vector<std::size_t> deg(out.size(), 0);
    for (const auto& edges : out)
      for (std::size_t v : edges) ++deg.at(v);
    return deg;
  }
};

inline InfluenceGraph build_influence_graph(const InfluenceExplainer& e, std::size_t k) {
  InfluenceGraph g;
  g.out.resize(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) g.out[i] = topk_explain(e, e.training.point(i), 0, k).indices;
  return g;
}

struct SccDecomposition {
  std::vector<std::size_t> component;              // component id per node
  std::vector<std::vector<std::size_t>> members;   // nodes per component
};

// Tarjan's algorithm with an explicit stack. Components are numbered in the
// order they are completed (reverse topological order of the condensation).
inline SccDecomposition strongly_connected_components(const InfluenceGraph& g) {
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  const std::size_t n = g.size();
  SccDecomposition d;
  d.component.assign(n, kUnvisited);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
  std::vector<std::uint8_t> on_stack(n, 0);
  std::vector<std::size_t> stack;
  struct Frame {
    std::size_t node;
    std::size_t next_edge;
  };
  std::vector<Frame> call;
  std::size_t counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto& edges = g.out[f.node];
      if (f.next_edge < edges.size()) {
        const std::size_t w = edges[f.next_edge++];
        if (w >= n) throw std::out_of_range("strongly_connected_components: edge target out of range");
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      const std::size_t v = f.node;
      call.pop_back();
      if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          d.component[w] = d.members.size();
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        d.members.push_back(std::move(comp));
      }
    }
  }
  return d;
}

struct GraphMetrics {
  std::size_t scc_count = 0;
  std::size_t singleton_scc_count = 0;
  std::size_t largest_scc_size = 0;
  std::size_t max_in_degree = 0;
  std::size_t zero_in_degree_count = 0;
};

inline GraphMetrics scc_metrics(const InfluenceGraph& g) {
  GraphMetrics m;
  const auto d = strongly_connected_components(g);
  m.scc_count = d.members.size();
  for (const auto& c : d.members) {
    if (c.size() == 1) ++m.singleton_scc_count;
    m.largest_scc_size = std::max(m.largest_scc_size, c.size());
  }
  for (std::size_t deg : g.in_degrees()) {
    m.max_in_degree = std::max(m.max_in_degree, deg);
    if (deg == 0) ++m.zero_in_degree_count;
  }
  return m;
}

// Nodes of the largest SCC (lowest component id on ties).
inline std::vector<std::size_t> largest_scc(const InfluenceGraph& g) {
  const auto d = strongly_connected_components(g);
  const std::vector<std::size_t>* best = nullptr;
  for (const auto& c : d.members)
    if (!best || c.size() > best->size()) best = &c;
  return best ? *best : std::vector<std::size_t>{};
}

// Every node reachable from `sources` (the sources included), as a sorted
// list.
inline std::vector<std::size_t> reachable_from(const InfluenceGraph& g, const std::vector<std::size_t>& sources) {
  std::vector<std::uint8_t> seen(g.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t s : sources)
    if (!seen.at(s)) {
      seen[s] = 1;
      queue.push_back(s);
    }
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t w : g.out[v])
      if (!seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (seen[i]) out.push_back(i);
  return out;
}

enum class Schedule { kBfs, kDfs };

struct TraversalResult {
  std::vector<std::size_t> recovered;  // sorted
  std::vector<std::size_t> reveal_order;
  std::size_t query_count = 0;
};

// Adaptive attack: query `start`, then query every revealed training point
// exactly once, in BFS or DFS order, until nothing new appears.
inline TraversalResult traverse_attack(const InfluenceExplainer& e, const Vec& start, std::size_t k,
                                       Schedule schedule = Schedule::kBfs) {
  TraversalResult r;
  std::vector<std::uint8_t> seen(e.size(), 0);
  std::deque<std::size_t> frontier;
  auto absorb = [&](const RevealResult& rev) {
    for (std::size_t idx : rev.indices)
      if (!seen[idx]) {
        seen[idx] = 1;
        r.reveal_order.push_back(idx);
        frontier.push_back(idx);
      }
  };
  absorb(topk_explain(e, start, 0, k));
  r.query_count = 1;
  while (!frontier.empty()) {
    std::size_t next;
    if (schedule == Schedule::kBfs) {
      next = frontier.front();
      frontier.pop_front();
    } else {
      next = frontier.back();
      frontier.pop_back();
    }
    absorb(topk_explain(e, e.training.point(next), 0, k));
    ++r.query_count;
  }
  r.recovered = r.reveal_order;
  std::sort(r.recovered.begin(), r.recovered.end());
  return r;
}

struct GreedyCoverResult {
  std::vector<std::size_t> seeds;
  std::size_t covered = 0;
  std::size_t coverable = 0;  // nodes with at least one incoming edge
};

// Omniscient baseline: repeatedly seed the node whose strict descendants
// (nodes reachable through at least one edge) cover the most still-unrecovered
// coverable nodes, until every node with an incoming edge is covered.
inline GreedyCoverResult greedy_omniscient_baseline(const InfluenceGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> descendants(n);
  for (std::size_t v = 0; v < n; ++v) descendants[v] = reachable_from(g, g.out[v]);
  const auto in_deg = g.in_degrees();
  std::vector<std::uint8_t> uncovered(n, 0);
  GreedyCoverResult r;
  for (std::size_t v = 0; v < n; ++v)
    if (in_deg[v] > 0) {
      uncovered[v] = 1;
      ++r.coverable;
    }
  std::size_t remaining = r.coverable;
  while (remaining > 0) {
    std::size_t best = n, best_gain = 0;
    for (std::size_t v = 0; v < n; ++v) {
      std::size_t gain = 0;
      for (std::size_t w : descendants[v]) gain += uncovered[w];
      if (gain > best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    if (best == n) break;
    r.seeds.push_back(best);
    for (std::size_t w : descendants[best])
      if (uncovered[w]) {
        uncovered[w] = 0;
        --remaining;
      }
  }
  r.covered = r.coverable - remaining;
  return r;
}

// CSV: scc_count,singleton_scc_count,largest_scc_size,max_in_degree,zero_in_degree_count
inline void write_graph_metrics_csv(std::ostream& os, const GraphMetrics& m, bool header = true) {
  if (header) os << "scc_count,singleton_scc_count,largest_scc_size,max_in_degree,zero_in_degree_count\n";
  os << m.scc_count << ',' << m.singleton_scc_count << ',' << m.largest_scc_size << ',' << m.max_in_degree
     << ',' << m.zero_in_degree_count << '\n';
}

}  // namespace privex
