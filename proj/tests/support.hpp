#pragma once

// Test-only generators and reference implementations.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "evedge/aer.hpp"
#include "evedge/nmp.hpp"
#include "evedge/platform.hpp"
#include "evedge/rng.hpp"
#include "evedge/scheduler.hpp"
#include "evedge/sparse_frame.hpp"

namespace evedge::testing {

inline std::int64_t uniform(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

inline std::vector<Event> random_events(Rng& rng, SensorDims dims, std::size_t n,
                                        std::int64_t t_lo, std::int64_t t_hi) {
  std::vector<Event> ev(n);
  for (Event& e : ev) {
    e.x = static_cast<std::uint32_t>(rng.below(dims.width));
    e.y = static_cast<std::uint32_t>(rng.below(dims.height));
    e.t = uniform(rng, t_lo, t_hi);
    e.p = rng.coin() ? 1 : -1;
  }
  std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return ev;
}

inline SparseFrame random_frame(Rng& rng, SensorDims dims, std::size_t entries,
                                std::int64_t t_ref, std::int64_t max_value = 5) {
  std::vector<RawEntry> raw;
  for (std::size_t i = 0; i < entries; ++i)
    raw.push_back({static_cast<std::uint32_t>(rng.below(dims.height)),
                   static_cast<std::uint32_t>(rng.below(dims.width)),
                   rng.coin() ? Channel::pos : Channel::neg,
                   Rational(uniform(rng, 1, max_value))});
  return SparseFrame::from_entries(raw, dims, t_ref);
}

// Dense scatter-add of raw entries, bypassing canonicalization.
inline DenseGrid dense_scatter(std::span<const RawEntry> raw, SensorDims dims) {
  DenseGrid g{dims, std::vector<PixelValues>(dims.area())};
  for (const RawEntry& e : raw) {
    PixelValues& px = g.at(e.row, e.col);
    (e.channel == Channel::pos ? px.pos : px.neg) += e.value;
  }
  return g;
}

// Bin of t by exact rational comparison: the largest i with
// t - t_start >= i * (t_end - t_start) / bins.
inline std::uint32_t rational_bin(std::int64_t t, std::int64_t t_start, std::int64_t t_end,
                                  std::uint32_t bins) {
  const Rational offset(t - t_start);
  std::uint32_t best = 0;
  for (std::uint32_t i = 0; i < bins; ++i)
    if (Rational(static_cast<std::int64_t>(i) * (t_end - t_start), bins) <= offset) best = i;
  return best;
}

inline std::vector<DenseGrid> dense_bins_oracle(const EventWindow& w, std::uint32_t bins,
                                                SensorDims dims) {
  std::vector<DenseGrid> out(bins, DenseGrid{dims, std::vector<PixelValues>(dims.area())});
  for (const Event& e : w.events) {
    if (e.t < w.t_start || e.t >= w.t_end) continue;
    PixelValues& px = out[rational_bin(e.t, w.t_start, w.t_end, bins)].at(e.y, e.x);
    (e.p > 0 ? px.pos : px.neg) += Rational(1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution graphs

/// Random DAG on up to max_nodes nodes across `devices` device queues plus a
/// memory queue. Memory-queue nodes play the role of transfers.
inline ExecutionGraph random_exec_graph(Rng& rng, std::size_t max_nodes, std::size_t devices) {
  ExecutionGraph g;
  const std::size_t n = static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(max_nodes)));
  g.queue_count = devices + 1;
  g.memory_queue = devices;
  g.task_count = static_cast<std::size_t>(uniform(rng, 1, 4));
  g.nodes.resize(n);
  g.parents.resize(n);
  g.children.resize(n);
  // Node ids are shuffled relative to the dependency order so that id order
  // does not coincide with a topological order.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::size_t> layer_counter(g.task_count, 0);
  for (std::size_t k = 0; k < n; ++k) {
    ExecNode& node = g.nodes[perm[k]];
    const bool transfer = rng.below(4) == 0;
    node.kind = transfer ? ExecKind::transfer : ExecKind::compute;
    node.queue = transfer ? g.memory_queue : static_cast<std::size_t>(rng.below(devices));
    node.exec_us = uniform(rng, 0, 50);
    node.task = static_cast<std::size_t>(rng.below(g.task_count));
    node.layer_index = layer_counter[node.task]++;
    for (std::size_t j = 0; j < k; ++j)
      if (rng.below(5) == 0) g.add_edge(perm[j], perm[k]);
  }
  g.compute_count = n;
  return g;
}

/// Event-driven reference: a priority queue of completion events; a node
/// starts when all parents and its queue predecessor have completed.
inline std::vector<std::int64_t> reference_simulation(const ExecutionGraph& g,
                                                      const QueueOrders& orders) {
  const std::size_t n = g.size();
  std::vector<std::size_t> queue_of(n);
  for (std::size_t q = 0; q < orders.size(); ++q)
    for (std::size_t node : orders[q]) queue_of[node] = q;
  std::vector<std::size_t> parents_left(n);
  for (std::size_t i = 0; i < n; ++i) parents_left[i] = g.parents[i].size();
  std::vector<std::size_t> head(orders.size(), 0);
  std::vector<bool> queue_busy(orders.size(), false);
  std::vector<std::int64_t> end(n, -1);
  using Ev = std::pair<std::int64_t, std::size_t>;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<>> events;

  std::function<void(std::size_t, std::int64_t)> try_queue = [&](std::size_t q, std::int64_t now) {
    if (queue_busy[q] || head[q] >= orders[q].size()) return;
    const std::size_t node = orders[q][head[q]];
    if (parents_left[node] != 0) return;
    queue_busy[q] = true;
    events.push({now + g.nodes[node].exec_us, node});
  };
  for (std::size_t q = 0; q < orders.size(); ++q) try_queue(q, 0);
  while (!events.empty()) {
    const auto [t, node] = events.top();
    events.pop();
    end[node] = t;
    const std::size_t q = queue_of[node];
    queue_busy[q] = false;
    ++head[q];
    for (std::size_t c : g.children[node]) --parents_left[c];
    // Zero-length nodes complete at the same instant; revisit every queue.
    for (std::size_t k = 0; k < orders.size(); ++k) try_queue(k, t);
  }
  return end;
}

/// Longest path to each node over dependency edges plus queue-successor
/// edges, weighted by node exec time (memoized recursion).
inline std::vector<std::int64_t> longest_path_oracle(const ExecutionGraph& g,
                                                     const QueueOrders& orders) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> preds = g.parents;
  for (const auto& q : orders)
    for (std::size_t i = 1; i < q.size(); ++i) preds[q[i]].push_back(q[i - 1]);
  std::vector<std::int64_t> memo(n, -1);
  std::function<std::int64_t(std::size_t)> f = [&](std::size_t v) -> std::int64_t {
    if (memo[v] >= 0) return memo[v];
    std::int64_t best = 0;
    for (std::size_t p : preds[v]) best = std::max(best, f(p));
    return memo[v] = best + g.nodes[v].exec_us;
  };
  std::vector<std::int64_t> out(n);
  for (std::size_t v = 0; v < n; ++v) out[v] = f(v);
  return out;
}

/// reach[u][v]: v reachable from u through dependency edges.
inline std::vector<std::vector<bool>> transitive_closure(
    const std::vector<std::vector<std::size_t>>& children) {
  const std::size_t n = children.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack{s};
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t c : children[v])
        if (!reach[s][c]) {
          reach[s][c] = true;
          stack.push_back(c);
        }
    }
  }
  return reach;
}

// ---------------------------------------------------------------------------
// Multi-task mapping instances

struct Instance {
  MultiTaskGraph graph;
  PlatformProfile profile;
  std::map<std::string, std::map<std::string, double>> degradation;  // layer -> prec -> dA
};

struct InstanceShape {
  std::size_t tasks_min = 1, tasks_max = 1;
  std::size_t layers_min = 2, layers_max = 6;
  std::size_t devices = 2;
  std::vector<std::string> precisions{"fp32", "int8"};
  double cross_edge_prob = 0.3;
  double unsupported_prob = 0.0;  // per (layer, device, non-FP precision)
  double max_degradation = 0.04;  // per-layer dA drawn from [0, max]
  std::size_t max_total_layers = 1000;
};

inline Instance random_instance(Rng& rng, const InstanceShape& shape) {
  Instance inst;
  const std::size_t tasks = static_cast<std::size_t>(
      uniform(rng, static_cast<std::int64_t>(shape.tasks_min), static_cast<std::int64_t>(shape.tasks_max)));
  std::vector<TaskSpec> specs;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> all_layers;
  std::size_t total = 0;
  for (std::size_t t = 0; t < tasks && total < shape.max_total_layers; ++t) {
    TaskSpec spec{"t" + std::to_string(t), {}};
    std::size_t layers = static_cast<std::size_t>(uniform(
        rng, static_cast<std::int64_t>(shape.layers_min), static_cast<std::int64_t>(shape.layers_max)));
    layers = std::max<std::size_t>(1, std::min(layers, shape.max_total_layers - total));
    total += layers;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string id = spec.id + "_l" + std::to_string(l);
      spec.layers.emplace_back(id, static_cast<std::uint64_t>(uniform(rng, 1'000, 4'000'000)));
      if (l > 0) edges.emplace_back(spec.layers[l - 1].first, id);
      all_layers.push_back(id);
    }
    specs.push_back(std::move(spec));
  }
  // Forward cross-task edges from an earlier task's layer to a later task's.
  for (std::size_t t = 1; t < specs.size(); ++t)
    if (rng.bernoulli(shape.cross_edge_prob)) {
      const auto& src = specs[rng.below(t)].layers;
      const auto& dst = specs[t].layers;
      edges.emplace_back(src[rng.below(src.size())].first, dst[rng.below(dst.size())].first);
    }
  inst.graph = MultiTaskGraph::build(specs, edges);

  inst.profile.full_precision = shape.precisions.front();
  for (std::size_t d = 0; d < shape.devices; ++d) {
    DeviceProfile dev;
    dev.id = "d" + std::to_string(d);
    dev.precisions = shape.precisions;
    dev.power_mw_active = static_cast<double>(uniform(rng, 1000, 10000));
    dev.power_mw_idle = static_cast<double>(uniform(rng, 50, 800));
    const double speed = static_cast<double>(uniform(rng, 5, 20)) / 10.0;
    for (const std::string& layer : all_layers) {
      const std::int64_t base = uniform(rng, 100, 3000);
      for (std::size_t p = 0; p < shape.precisions.size(); ++p) {
        if (p > 0 && rng.bernoulli(shape.unsupported_prob)) continue;
        // Lower precisions run faster by a random factor in [0.3, 0.9].
        const double factor = p == 0 ? 1.0 : static_cast<double>(uniform(rng, 3, 9)) / 10.0;
        dev.exec_us[layer][shape.precisions[p]] =
            std::max<std::int64_t>(1, static_cast<std::int64_t>(static_cast<double>(base) * speed * factor));
      }
    }
    inst.profile.devices.push_back(std::move(dev));
  }
  for (std::size_t a = 0; a < shape.devices; ++a)
    for (std::size_t b = a + 1; b < shape.devices; ++b)
      inst.profile.links.push_back({"d" + std::to_string(a), "d" + std::to_string(b),
                                    static_cast<std::uint64_t>(uniform(rng, 1, 16)) * 1'000'000'000ULL,
                                    uniform(rng, 0, 50)});
  for (const std::string& layer : all_layers)
    for (std::size_t p = 1; p < shape.precisions.size(); ++p)
      inst.degradation[layer][shape.precisions[p]] =
          shape.max_degradation * static_cast<double>(uniform(rng, 0, 1000)) / 1000.0;
  return inst;
}

inline std::unique_ptr<AdditiveAccuracyModel> accuracy_for(const Instance& inst,
                                                           const CostModel& cost) {
  auto model = std::make_unique<AdditiveAccuracyModel>(inst.graph, cost);
  for (const auto& [layer, per] : inst.degradation)
    for (const auto& [prec, v] : per)
      model->set(*inst.graph.find(layer), *cost.precision_index(prec), v);
  return model;
}

/// Every valid candidate by odometer enumeration over each node's options.
inline std::vector<MappingCandidate> enumerate_candidates(const CostModel& cost) {
  std::vector<MappingCandidate> out;
  const std::size_t n = cost.node_count();
  std::vector<std::size_t> digit(n, 0);
  while (true) {
    MappingCandidate c;
    for (std::size_t i = 0; i < n; ++i) c.genes.push_back(cost.options(i)[digit[i]]);
    out.push_back(std::move(c));
    std::size_t i = 0;
    while (i < n && ++digit[i] == cost.options(i).size()) digit[i++] = 0;
    if (i == n) break;
  }
  return out;
}

/// Independent evaluation of one candidate: lower with the
/// library, order with the library, then end times by the longest-path
/// oracle. Returns per-task max end.
inline std::vector<std::int64_t> oracle_task_latency(const MultiTaskGraph& graph,
                                                     const MappingCandidate& cand,
                                                     const CostModel& cost) {
  const ExecutionGraph exec = lower(graph, cand, cost);
  const auto end = longest_path_oracle(exec, order_queues(exec));
  std::vector<std::int64_t> lat(graph.task_count(), 0);
  for (std::size_t i = 0; i < exec.size(); ++i)
    lat[exec.nodes[i].task] = std::max(lat[exec.nodes[i].task], end[i]);
  return lat;
}

}  // namespace evedge::testing
