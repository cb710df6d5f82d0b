#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace evedge {

// ---------------------------------------------------------------------------
// Raw profile data as stored on disk.

struct DeviceProfile {
  std::string id;
  std::vector<std::string> precisions;
  double power_mw_active = 0.0;
  double power_mw_idle = 0.0;
  /// layer id -> precision -> execution time (us).
  std::map<std::string, std::map<std::string, std::int64_t>> exec_us;

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

struct LinkProfile {
  std::string src;
  std::string dst;
  std::uint64_t bandwidth_bps = 0;  // bytes per second
  std::int64_t latency_us = 0;

  friend bool operator==(const LinkProfile&, const LinkProfile&) = default;
};

struct PlatformProfile {
  std::vector<DeviceProfile> devices;
  std::vector<LinkProfile> links;
  std::string full_precision = "fp32";

  /// Structural checks that do not need a task graph.
  void validate() const;
  friend bool operator==(const PlatformProfile&, const PlatformProfile&) = default;
};

struct Link {
  std::uint64_t bandwidth_bps = 0;
  std::int64_t latency_us = 0;
};

/// latency + ceil(bytes * 1e6 / bandwidth) microseconds.
std::int64_t comm_time(std::uint64_t bytes, const Link& link);

// ---------------------------------------------------------------------------
// Multi-task layer graph

struct LayerNode {
  std::string id;
  std::size_t task = 0;
  std::size_t layer_index = 0;  // position within its task
  std::uint64_t out_bytes = 0;
};

struct TaskSpec {
  std::string id;
  std::vector<std::pair<std::string, std::uint64_t>> layers;  // (id, out_bytes)
};

class MultiTaskGraph {
 public:
  MultiTaskGraph() = default;

  /// Edges are given by layer id. Throws ValidationError for unknown or
  /// duplicate ids and intra-task edges against layer order, CycleError for
  /// a cyclic graph.
  static MultiTaskGraph build(std::vector<TaskSpec> tasks,
                              const std::vector<std::pair<std::string, std::string>>& edges);

  std::size_t task_count() const noexcept { return task_ids_.size(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const std::vector<std::string>& task_ids() const noexcept { return task_ids_; }
  const std::vector<LayerNode>& nodes() const noexcept { return nodes_; }
  const LayerNode& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept {
    return edges_;
  }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  const std::vector<std::size_t>& task_nodes(std::size_t task) const {
    return task_nodes_.at(task);
  }
  std::optional<std::size_t> find(const std::string& layer_id) const;

  /// Deterministic topological order; ties by (task, layer index).
  const std::vector<std::size_t>& topological_order() const noexcept { return topo_; }

  /// Original task specs and edges by id, for saving.
  std::vector<TaskSpec> task_specs() const;
  std::vector<std::pair<std::string, std::string>> edge_ids() const;

 private:
  std::vector<std::string> task_ids_;
  std::vector<LayerNode> nodes_;
  std::vector<std::vector<std::size_t>> task_nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::size_t> topo_;
};

// ---------------------------------------------------------------------------
// Candidates

struct Gene {
  std::uint16_t device = 0;
  std::uint16_t precision = 0;

  friend bool operator==(const Gene&, const Gene&) = default;
  friend auto operator<=>(const Gene&, const Gene&) = default;
};

struct MappingCandidate {
  std::vector<Gene> genes;  // one per graph node

  /// Canonical byte encoding; equal keys iff equal candidates.
  std::string key() const;
  std::uint64_t hash() const noexcept;

  friend bool operator==(const MappingCandidate&, const MappingCandidate&) = default;
  friend auto operator<=>(const MappingCandidate&, const MappingCandidate&) = default;
};

struct DevicePower {
  double active_mw = 0.0;
  double idle_mw = 0.0;
};

/// Platform profile resolved against one task graph: dense exec-time table,
/// per-node valid assignment options and a complete link matrix.
class CostModel {
 public:
  CostModel(const PlatformProfile& profile, const MultiTaskGraph& graph);

  std::size_t device_count() const noexcept { return device_ids_.size(); }
  std::size_t precision_count() const noexcept { return precision_names_.size(); }
  const std::vector<std::string>& device_ids() const noexcept { return device_ids_; }
  const std::vector<std::string>& precision_names() const noexcept {
    return precision_names_;
  }
  std::optional<std::uint16_t> device_index(const std::string& id) const;
  std::optional<std::uint16_t> precision_index(const std::string& name) const;
  /// Index of the full precision, if any device supports it.
  std::optional<std::uint16_t> full_precision() const noexcept { return full_precision_; }
  bool is_full_precision(std::uint16_t precision) const noexcept {
    return full_precision_ && *full_precision_ == precision;
  }

  std::optional<std::int64_t> exec_us(std::size_t node, Gene gene) const;
  /// Valid (device, precision) pairs of a node, ordered by (device, precision).
  const std::vector<Gene>& options(std::size_t node) const { return options_.at(node); }
  const std::vector<Gene>& full_precision_options(std::size_t node) const {
    return fp_options_.at(node);
  }

  const Link& link(std::uint16_t src, std::uint16_t dst) const;
  std::int64_t transfer_us(std::uint64_t bytes, std::uint16_t src,
                           std::uint16_t dst) const {
    return comm_time(bytes, link(src, dst));
  }
  const std::vector<DevicePower>& powers() const noexcept { return powers_; }

  /// Throws CandidateInvalidError unless every node has a supported
  /// assignment.
  void validate(const MappingCandidate& candidate) const;

  std::size_t node_count() const noexcept { return options_.size(); }

 private:
  std::size_t slot(std::size_t node, Gene g) const {
    return (node * device_ids_.size() + g.device) * precision_names_.size() + g.precision;
  }

  std::vector<std::string> device_ids_;
  std::vector<std::string> precision_names_;
  std::optional<std::uint16_t> full_precision_;
  std::vector<std::int64_t> exec_;  // 0 = unsupported
  std::vector<std::vector<Gene>> options_;
  std::vector<std::vector<Gene>> fp_options_;
  std::vector<std::optional<Link>> links_;  // device_count^2
  std::vector<DevicePower> powers_;
};

// ---------------------------------------------------------------------------
// Lowered execution graph

enum class ExecKind { compute, transfer };

struct ExecNode {
  ExecKind kind = ExecKind::compute;
  std::size_t layer = 0;     // compute: the layer; transfer: the producer
  std::size_t consumer = 0;  // transfer only
  std::size_t queue = 0;     // device index, or the memory queue
  std::int64_t exec_us = 0;
  std::size_t task = 0;      // compute: own task; transfer: consumer's task
  std::size_t layer_index = 0;
};

/// Compute nodes occupy ids [0, compute_count) in graph node order; transfer
/// nodes follow in edge order.
struct ExecutionGraph {
  std::vector<ExecNode> nodes;
  std::vector<std::vector<std::size_t>> parents;
  std::vector<std::vector<std::size_t>> children;
  std::size_t compute_count = 0;
  std::size_t queue_count = 0;
  std::size_t memory_queue = 0;
  std::size_t task_count = 0;

  std::size_t size() const noexcept { return nodes.size(); }
  void add_edge(std::size_t from, std::size_t to) {
    children[from].push_back(to);
    parents[to].push_back(from);
  }
};

ExecutionGraph lower(const MultiTaskGraph& graph, const MappingCandidate& candidate,
                     const CostModel& cost);

}  // namespace evedge
