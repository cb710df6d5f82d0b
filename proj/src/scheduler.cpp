#include "evedge/scheduler.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

#include "evedge/error.hpp"

namespace evedge {

namespace {

std::vector<std::size_t> topo_any(const ExecutionGraph& g) {
  std::vector<std::size_t> indeg(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) indeg[i] = g.parents[i].size();
  std::vector<std::size_t> stack;
  for (std::size_t i = g.size(); i-- > 0;)
    if (indeg[i] == 0) stack.push_back(i);
  std::vector<std::size_t> order;
  order.reserve(g.size());
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (std::size_t c : g.children[n])
      if (--indeg[c] == 0) stack.push_back(c);
  }
  if (order.size() != g.size()) throw CycleError("execution graph contains a cycle");
  return order;
}

// Queue predecessor of every node; throws unless orders partition the nodes.
std::vector<std::ptrdiff_t> queue_predecessors(const ExecutionGraph& g,
                                               const QueueOrders& orders) {
  std::vector<std::ptrdiff_t> pred(g.size(), -2);
  for (const auto& q : orders)
    for (std::size_t i = 0; i < q.size(); ++i) {
      const std::size_t n = q[i];
      if (n >= g.size() || pred[n] != -2)
        throw ValidationError("queue orders must list every node exactly once");
      pred[n] = i == 0 ? -1 : static_cast<std::ptrdiff_t>(q[i - 1]);
    }
  if (std::find(pred.begin(), pred.end(), -2) != pred.end())
    throw ValidationError("queue orders must list every node exactly once");
  return pred;
}

}  // namespace

std::vector<std::int64_t> asap_ready_times(const ExecutionGraph& g) {
  std::vector<std::int64_t> ready(g.size(), 0);
  for (std::size_t n : topo_any(g))
    for (std::size_t p : g.parents[n])
      ready[n] = std::max(ready[n], ready[p] + g.nodes[p].exec_us);
  return ready;
}

QueueOrders order_queues(const ExecutionGraph& g) {
  const auto ready = asap_ready_times(g);
  auto key = [&](std::size_t n) {
    return std::make_tuple(ready[n], g.nodes[n].task, g.nodes[n].layer_index, n);
  };
  auto later = [&](std::size_t a, std::size_t b) { return key(a) > key(b); };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> heap(later);

  std::vector<std::size_t> indeg(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    indeg[i] = g.parents[i].size();
    if (indeg[i] == 0) heap.push(i);
  }
  QueueOrders orders(g.queue_count);
  std::size_t emitted = 0;
  while (!heap.empty()) {
    const std::size_t n = heap.top();
    heap.pop();
    orders.at(g.nodes[n].queue).push_back(n);
    ++emitted;
    for (std::size_t c : g.children[n])
      if (--indeg[c] == 0) heap.push(c);
  }
  if (emitted != g.size()) throw CycleError("execution graph contains a cycle");
  return orders;
}

std::vector<std::int64_t> end_times(const ExecutionGraph& g, const QueueOrders& orders) {
  const auto pred = queue_predecessors(g, orders);

  // Kahn over dependency edges plus queue edges.
  std::vector<std::size_t> waiting(g.size());
  std::vector<std::ptrdiff_t> succ(g.size(), -1);
  for (std::size_t n = 0; n < g.size(); ++n) {
    waiting[n] = g.parents[n].size() + (pred[n] >= 0 ? 1 : 0);
    if (pred[n] >= 0) succ[static_cast<std::size_t>(pred[n])] = static_cast<std::ptrdiff_t>(n);
  }
  std::vector<std::size_t> stack;
  for (std::size_t n = 0; n < g.size(); ++n)
    if (waiting[n] == 0) stack.push_back(n);

  std::vector<std::int64_t> end(g.size(), 0);
  std::size_t done = 0;
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    std::int64_t start = pred[n] >= 0 ? end[static_cast<std::size_t>(pred[n])] : 0;
    for (std::size_t p : g.parents[n]) start = std::max(start, end[p]);
    end[n] = start + g.nodes[n].exec_us;
    ++done;
    for (std::size_t c : g.children[n])
      if (--waiting[c] == 0) stack.push_back(c);
    if (succ[n] >= 0) {
      const auto s = static_cast<std::size_t>(succ[n]);
      if (--waiting[s] == 0) stack.push_back(s);
    }
  }
  if (done != g.size())
    throw CycleError("queue orders contradict the dependency order");
  return end;
}

std::vector<std::int64_t> simulate_discrete(const ExecutionGraph& g,
                                            const QueueOrders& orders) {
  queue_predecessors(g, orders);

  std::vector<std::int64_t> end(g.size(), 0);
  std::vector<char> finished(g.size(), 0);
  std::vector<char> started(g.size(), 0);
  std::vector<std::size_t> head(orders.size(), 0);  // next position per queue
  std::vector<std::size_t> queue_of(g.size());
  for (std::size_t q = 0; q < orders.size(); ++q)
    for (std::size_t n : orders[q]) queue_of[n] = q;

  using Completion = std::pair<std::int64_t, std::size_t>;
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> events;

  // A queue's head may start when the queue is free and all parents are done.
  std::vector<char> busy(orders.size(), 0);
  auto try_start = [&](std::size_t q, std::int64_t now) {
    if (busy[q] || head[q] >= orders[q].size()) return;
    const std::size_t n = orders[q][head[q]];
    for (std::size_t p : g.parents[n])
      if (!finished[p]) return;
    busy[q] = 1;
    started[n] = 1;
    events.emplace(now + g.nodes[n].exec_us, n);
  };

  for (std::size_t q = 0; q < orders.size(); ++q) try_start(q, 0);
  std::size_t done = 0;
  while (!events.empty()) {
    const auto [t, n] = events.top();
    events.pop();
    finished[n] = 1;
    end[n] = t;
    ++done;
    const std::size_t q = queue_of[n];
    busy[q] = 0;
    ++head[q];
    try_start(q, t);
    for (std::size_t c : g.children[n]) try_start(queue_of[c], t);
  }
  if (done != g.size())
    throw CycleError("simulation deadlocked: queue orders contradict dependencies");
  return end;
}

LatencyReport critical_path_latency(std::span<const std::int64_t> end,
                                    const ExecutionGraph& g) {
  LatencyReport r;
  r.task_latency.assign(g.task_count, 0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    r.task_latency.at(g.nodes[n].task) = std::max(r.task_latency[g.nodes[n].task], end[n]);
    r.makespan = std::max(r.makespan, end[n]);
  }
  return r;
}

Schedule schedule(const ExecutionGraph& graph) {
  Schedule s;
  s.queues = order_queues(graph);
  s.end = end_times(graph, s.queues);
  s.latency = critical_path_latency(s.end, graph);
  return s;
}

EnergyReport estimate_energy(const Schedule& sched, const ExecutionGraph& g,
                             std::span<const DevicePower> powers) {
  EnergyReport r;
  r.active_mj.assign(powers.size(), 0.0);
  r.idle_mj.assign(powers.size(), 0.0);
  std::vector<std::int64_t> busy(powers.size(), 0);
  for (const ExecNode& n : g.nodes)
    if (n.kind == ExecKind::compute && n.queue < powers.size()) busy[n.queue] += n.exec_us;
  // us * mW = nJ
  for (std::size_t d = 0; d < powers.size(); ++d) {
    const std::int64_t idle = std::max<std::int64_t>(0, sched.latency.makespan - busy[d]);
    r.active_mj[d] = static_cast<double>(busy[d]) * powers[d].active_mw / 1e6;
    r.idle_mj[d] = static_cast<double>(idle) * powers[d].idle_mw / 1e6;
    r.total_active_mj += r.active_mj[d];
    r.total_idle_mj += r.idle_mj[d];
  }
  r.total_mj = r.total_active_mj + r.total_idle_mj;
  return r;
}

}  // namespace evedge
