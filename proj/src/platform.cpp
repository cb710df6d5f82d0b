#include "evedge/platform.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "evedge/error.hpp"

namespace evedge {

std::int64_t comm_time(std::uint64_t bytes, const Link& link) {
  if (link.bandwidth_bps == 0) throw LinkError("link bandwidth must be positive");
  const unsigned __int128 scaled = static_cast<unsigned __int128>(bytes) * 1'000'000u;
  const unsigned __int128 us = (scaled + link.bandwidth_bps - 1) / link.bandwidth_bps;
  return link.latency_us + static_cast<std::int64_t>(us);
}

void PlatformProfile::validate() const {
  if (devices.empty()) throw ValidationError("platform has no devices");
  std::set<std::string> ids;
  for (const DeviceProfile& d : devices) {
    if (d.id.empty()) throw ValidationError("device with empty id");
    if (!ids.insert(d.id).second) throw ValidationError("duplicate device id '" + d.id + "'");
    if (d.precisions.empty())
      throw ValidationError("device '" + d.id + "' lists no precisions");
    const std::set<std::string> precs(d.precisions.begin(), d.precisions.end());
    if (precs.size() != d.precisions.size())
      throw ValidationError("device '" + d.id + "' lists a precision twice");
    if (d.power_mw_active < 0.0 || d.power_mw_idle < 0.0)
      throw ValidationError("device '" + d.id + "' has negative power");
    for (const auto& [layer, times] : d.exec_us)
      for (const auto& [prec, us] : times) {
        if (!precs.contains(prec))
          throw ValidationError("device '" + d.id + "' has a time for unsupported precision '" +
                                prec + "' on layer '" + layer + "'");
        if (us <= 0)
          throw ValidationError("device '" + d.id + "' layer '" + layer +
                                "' has non-positive execution time");
      }
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const LinkProfile& l : links) {
    if (!ids.contains(l.src) || !ids.contains(l.dst))
      throw ValidationError("link references unknown device " + l.src + "->" + l.dst);
    if (l.src == l.dst) throw ValidationError("link from a device to itself: " + l.src);
    if (l.bandwidth_bps == 0)
      throw ValidationError("link " + l.src + "->" + l.dst + " has zero bandwidth");
    if (l.latency_us < 0)
      throw ValidationError("link " + l.src + "->" + l.dst + " has negative latency");
    if (!seen.insert({l.src, l.dst}).second)
      throw ValidationError("duplicate link " + l.src + "->" + l.dst);
  }
}

// ---------------------------------------------------------------------------

MultiTaskGraph MultiTaskGraph::build(
    std::vector<TaskSpec> tasks,
    const std::vector<std::pair<std::string, std::string>>& edges) {
  MultiTaskGraph g;
  std::set<std::string> task_names;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!task_names.insert(tasks[t].id).second)
      throw ValidationError("duplicate task id '" + tasks[t].id + "'");
    g.task_ids_.push_back(tasks[t].id);
    g.task_nodes_.emplace_back();
    for (std::size_t l = 0; l < tasks[t].layers.size(); ++l) {
      const auto& [id, bytes] = tasks[t].layers[l];
      if (id.empty()) throw ValidationError("layer with empty id");
      if (!g.index_.emplace(id, g.nodes_.size()).second)
        throw ValidationError("duplicate layer id '" + id + "'");
      g.task_nodes_.back().push_back(g.nodes_.size());
      g.nodes_.push_back(LayerNode{id, t, l, bytes});
    }
  }

  g.parents_.resize(g.nodes_.size());
  g.children_.resize(g.nodes_.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [from, to] : edges) {
    const auto a = g.find(from);
    const auto b = g.find(to);
    if (!a || !b)
      throw ValidationError("edge references unknown layer " + from + "->" + to);
    if (*a == *b) throw CycleError("self-dependency on layer '" + from + "'");
    const LayerNode& na = g.nodes_[*a];
    const LayerNode& nb = g.nodes_[*b];
    if (na.task == nb.task && na.layer_index >= nb.layer_index)
      throw ValidationError("intra-task edge " + from + "->" + to +
                            " goes against layer order");
    if (!seen.insert({*a, *b}).second)
      throw ValidationError("duplicate edge " + from + "->" + to);
    g.edges_.emplace_back(*a, *b);
    g.children_[*a].push_back(*b);
    g.parents_[*b].push_back(*a);
  }

  // Kahn's algorithm, smallest (task, layer index) first.
  std::vector<std::size_t> indeg(g.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) indeg[i] = g.parents_[i].size();
  auto later = [&g](std::size_t a, std::size_t b) {
    return std::tie(g.nodes_[a].task, g.nodes_[a].layer_index) >
           std::tie(g.nodes_[b].task, g.nodes_[b].layer_index);
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
  for (std::size_t i = 0; i < g.nodes_.size(); ++i)
    if (indeg[i] == 0) ready.push(i);
  while (!ready.empty()) {
    const std::size_t n = ready.top();
    ready.pop();
    g.topo_.push_back(n);
    for (std::size_t c : g.children_[n])
      if (--indeg[c] == 0) ready.push(c);
  }
  if (g.topo_.size() != g.nodes_.size())
    throw CycleError("task graph contains a dependency cycle");
  return g;
}

std::optional<std::size_t> MultiTaskGraph::find(const std::string& layer_id) const {
  const auto it = index_.find(layer_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TaskSpec> MultiTaskGraph::task_specs() const {
  std::vector<TaskSpec> out;
  for (std::size_t t = 0; t < task_ids_.size(); ++t) {
    TaskSpec spec{task_ids_[t], {}};
    for (std::size_t n : task_nodes_[t])
      spec.layers.emplace_back(nodes_[n].id, nodes_[n].out_bytes);
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> MultiTaskGraph::edge_ids() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [a, b] : edges_) out.emplace_back(nodes_[a].id, nodes_[b].id);
  return out;
}

// ---------------------------------------------------------------------------

std::string MappingCandidate::key() const {
  std::string k;
  k.reserve(genes.size() * 4);
  for (const Gene& g : genes) {
    k.push_back(static_cast<char>(g.device >> 8));
    k.push_back(static_cast<char>(g.device & 0xff));
    k.push_back(static_cast<char>(g.precision >> 8));
    k.push_back(static_cast<char>(g.precision & 0xff));
  }
  return k;
}

std::uint64_t MappingCandidate::hash() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Gene& g : genes) {
    for (std::uint16_t v : {g.device, g.precision}) {
      h ^= v;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------

CostModel::CostModel(const PlatformProfile& profile, const MultiTaskGraph& graph) {
  profile.validate();
  if (profile.devices.size() > 0xffff)
    throw ValidationError("too many devices");

  for (const DeviceProfile& d : profile.devices) {
    device_ids_.push_back(d.id);
    powers_.push_back({d.power_mw_active, d.power_mw_idle});
    for (const std::string& p : d.precisions)
      if (std::find(precision_names_.begin(), precision_names_.end(), p) ==
          precision_names_.end())
        precision_names_.push_back(p);
  }
  full_precision_ = precision_index(profile.full_precision);

  const std::size_t n = graph.node_count();
  exec_.assign(n * device_ids_.size() * precision_names_.size(), 0);
  options_.resize(n);
  fp_options_.resize(n);
  for (std::size_t node = 0; node < n; ++node) {
    const std::string& layer = graph.node(node).id;
    for (std::uint16_t d = 0; d < device_ids_.size(); ++d) {
      const DeviceProfile& dev = profile.devices[d];
      const auto it = dev.exec_us.find(layer);
      if (it == dev.exec_us.end()) continue;
      for (const auto& [prec, us] : it->second) {
        const Gene g{d, *precision_index(prec)};
        exec_[slot(node, g)] = us;
      }
    }
    for (std::uint16_t d = 0; d < device_ids_.size(); ++d)
      for (std::uint16_t p = 0; p < precision_names_.size(); ++p)
        if (exec_[slot(node, {d, p})] > 0) {
          options_[node].push_back({d, p});
          if (is_full_precision(p)) fp_options_[node].push_back({d, p});
        }
    if (options_[node].empty())
      throw ProfileIncompleteError("layer '" + layer +
                                   "' has no execution time on any device");
  }

  const std::size_t k = device_ids_.size();
  links_.assign(k * k, std::nullopt);
  for (const LinkProfile& l : profile.links) {
    const auto s = *device_index(l.src);
    const auto t = *device_index(l.dst);
    links_[s * k + t] = Link{l.bandwidth_bps, l.latency_us};
  }
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t t = 0; t < k; ++t) {
      if (s == t || links_[s * k + t]) continue;
      if (links_[t * k + s]) {
        links_[s * k + t] = links_[t * k + s];
      } else {
        throw ValidationError("no link between devices '" + device_ids_[s] + "' and '" +
                              device_ids_[t] + "'");
      }
    }
}

std::optional<std::uint16_t> CostModel::device_index(const std::string& id) const {
  for (std::uint16_t i = 0; i < device_ids_.size(); ++i)
    if (device_ids_[i] == id) return i;
  return std::nullopt;
}

std::optional<std::uint16_t> CostModel::precision_index(const std::string& name) const {
  for (std::uint16_t i = 0; i < precision_names_.size(); ++i)
    if (precision_names_[i] == name) return i;
  return std::nullopt;
}

std::optional<std::int64_t> CostModel::exec_us(std::size_t node, Gene gene) const {
  if (node >= options_.size() || gene.device >= device_ids_.size() ||
      gene.precision >= precision_names_.size())
    return std::nullopt;
  const std::int64_t us = exec_[slot(node, gene)];
  if (us <= 0) return std::nullopt;
  return us;
}

const Link& CostModel::link(std::uint16_t src, std::uint16_t dst) const {
  const std::size_t k = device_ids_.size();
  if (src >= k || dst >= k || src == dst || !links_[src * k + dst])
    throw LinkError("no link from device " + std::to_string(src) + " to " +
                    std::to_string(dst));
  return *links_[src * k + dst];
}

void CostModel::validate(const MappingCandidate& candidate) const {
  if (candidate.genes.size() != options_.size())
    throw CandidateInvalidError("candidate has " + std::to_string(candidate.genes.size()) +
                                " genes for " + std::to_string(options_.size()) + " layers");
  for (std::size_t i = 0; i < candidate.genes.size(); ++i) {
    const Gene g = candidate.genes[i];
    if (!exec_us(i, g)) {
      std::ostringstream msg;
      msg << "layer " << i << " cannot run on device "
          << (g.device < device_ids_.size() ? device_ids_[g.device] : std::to_string(g.device))
          << " at precision "
          << (g.precision < precision_names_.size() ? precision_names_[g.precision]
                                                     : std::to_string(g.precision));
      throw CandidateInvalidError(msg.str());
    }
  }
}

// ---------------------------------------------------------------------------

ExecutionGraph lower(const MultiTaskGraph& graph, const MappingCandidate& candidate,
                     const CostModel& cost) {
  cost.validate(candidate);

  ExecutionGraph eg;
  eg.compute_count = graph.node_count();
  eg.queue_count = cost.device_count() + 1;
  eg.memory_queue = cost.device_count();
  eg.task_count = graph.task_count();

  eg.nodes.reserve(graph.node_count() + graph.edges().size());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const LayerNode& ln = graph.node(i);
    const Gene g = candidate.genes[i];
    eg.nodes.push_back(ExecNode{ExecKind::compute, i, i, g.device, *cost.exec_us(i, g),
                                ln.task, ln.layer_index});
  }
  for (const auto& [u, v] : graph.edges()) {
    const Gene gu = candidate.genes[u];
    const Gene gv = candidate.genes[v];
    if (gu.device == gv.device) continue;
    const LayerNode& consumer = graph.node(v);
    eg.nodes.push_back(ExecNode{ExecKind::transfer, u, v, eg.memory_queue,
                                cost.transfer_us(graph.node(u).out_bytes, gu.device, gv.device),
                                consumer.task, consumer.layer_index});
  }
  eg.parents.resize(eg.nodes.size());
  eg.children.resize(eg.nodes.size());
  std::size_t next_transfer = graph.node_count();
  for (const auto& [u, v] : graph.edges()) {
    if (candidate.genes[u].device == candidate.genes[v].device) {
      eg.add_edge(u, v);
    } else {
      eg.add_edge(u, next_transfer);
      eg.add_edge(next_transfer, v);
      ++next_transfer;
    }
  }
  return eg;
}

}  // namespace evedge
