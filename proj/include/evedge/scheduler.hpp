#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evedge/platform.hpp"

namespace evedge {

/// One total order of node ids per queue (devices, then the memory queue).
using QueueOrders = std::vector<std::vector<std::size_t>>;

/// Earliest start of every node ignoring queue contention.
std::vector<std::int64_t> asap_ready_times(const ExecutionGraph& graph);

/// Serializes each queue by a list-scheduling pass over the whole graph:
/// the next node is the ready one with the smallest
/// (ASAP ready time, task, layer index, node id). Each queue order is the
/// projection of that global topological order. Throws CycleError.
QueueOrders order_queues(const ExecutionGraph& graph);

/// End_T(n) = max(End_T(parents), End_T(queue predecessor)) + Exec_T(n).
/// Throws CycleError if the orders contradict the dependencies and
/// ValidationError if they do not cover every node exactly once.
std::vector<std::int64_t> end_times(const ExecutionGraph& graph, const QueueOrders& orders);

/// Event-driven reference: a node starts once its parents and its queue
/// predecessor have finished and runs for Exec_T.
std::vector<std::int64_t> simulate_discrete(const ExecutionGraph& graph,
                                            const QueueOrders& orders);

struct LatencyReport {
  std::vector<std::int64_t> task_latency;
  std::int64_t makespan = 0;
};

LatencyReport critical_path_latency(std::span<const std::int64_t> end,
                                    const ExecutionGraph& graph);

struct Schedule {
  QueueOrders queues;
  std::vector<std::int64_t> end;
  LatencyReport latency;

  std::int64_t start(const ExecutionGraph& g, std::size_t node) const {
    return end[node] - g.nodes[node].exec_us;
  }
};

Schedule schedule(const ExecutionGraph& graph);

struct EnergyReport {
  std::vector<double> active_mj;
  std::vector<double> idle_mj;
  double total_active_mj = 0.0;
  double total_idle_mj = 0.0;
  double total_mj = 0.0;
};

/// Active energy: busy time x active power; idle energy: (makespan - busy
/// time) x idle power; per device.
EnergyReport estimate_energy(const Schedule& sched, const ExecutionGraph& graph,
                             std::span<const DevicePower> powers);

}  // namespace evedge
