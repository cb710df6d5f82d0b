#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evedge/rational.hpp"
#include "evedge/sparse_frame.hpp"

namespace evedge {

enum class MergeMode { add, average, batch };

std::string_view to_string(MergeMode mode) noexcept;
/// Accepts "cAdd", "cAverage", "cBatch" (case-insensitive, prefix optional).
MergeMode parse_merge_mode(std::string_view name);

struct DsfaConfig {
  std::size_t e_buf_size = 16;
  std::size_t mb_size = 4;
  MergeMode c_mode = MergeMode::add;
  std::int64_t mt_th_us = 50'000;
  double md_th = 0.5;
  std::size_t iq_depth = 4;

  void validate() const;
  std::size_t bucket_count() const noexcept { return e_buf_size / mb_size; }
};

/// Relative change condition |frame - merged| / merged <= md_th. A zero merged
/// density accepts only a zero frame density.
bool density_change_ok(double frame_density, double merged_density, double md_th);

enum class BucketStatus { available, full };

class MergeBucket {
 public:
  const std::vector<SparseFrame>& frames() const noexcept { return frames_; }
  std::size_t occupancy() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  BucketStatus status() const noexcept { return status_; }
  std::int64_t t_earliest() const noexcept { return t_earliest_; }
  std::size_t merged_active_pixels() const noexcept { return active_.size(); }
  double merged_density(SensorDims dims) const noexcept;

 private:
  friend class Aggregator;

  void add(SparseFrame frame);
  void reset();

  std::vector<SparseFrame> frames_;
  std::vector<std::uint32_t> active_;  // union of active pixel keys
  std::int64_t t_earliest_ = 0;
  BucketStatus status_ = BucketStatus::available;
};

/// One merged bucket as delivered to the inference queues. Shared by
/// reference between all task queues.
struct DispatchedFrame {
  SparseFrame frame;
  std::size_t source_frames = 0;
  Rational source_mass;
  std::vector<std::int64_t> source_t_refs;
  std::int64_t dispatch_time = 0;
  std::uint64_t sequence = 0;
};
using DispatchedPtr = std::shared_ptr<const DispatchedFrame>;

struct PlacementReport {
  std::optional<std::size_t> bucket;  // empty: no bucket accepted the frame
  std::vector<std::size_t> newly_full;
};

struct TaskCounters {
  std::uint64_t dispatched_frames = 0;  // merged frames entering the queue
  std::uint64_t consumed_frames = 0;    // merged frames drained by batching
  std::uint64_t discarded_frames = 0;
  std::uint64_t discarded_source_frames = 0;
  Rational consumed_mass;
  Rational discarded_mass;
};

struct DsfaCounters {
  std::uint64_t ingested_frames = 0;
  Rational ingested_mass;
  std::uint64_t dispatched = 0;  // merged frames produced by flushes
  std::uint64_t flushes = 0;
  std::uint64_t early_dispatches = 0;
  std::uint64_t discarded = 0;  // summed over tasks
};

/// Event buffer of merge buckets plus bounded per-task inference queues.
/// Single writer; not thread-safe.
class Aggregator {
 public:
  Aggregator(DsfaConfig config, SensorDims dims, std::size_t tasks = 1);

  /// Greedy placement into the first available bucket that satisfies the
  /// time and density conditions. Buckets that fail a condition are marked
  /// full. Throws CapacityError when the buffer needs a flush first.
  PlacementReport place_frame(SparseFrame frame);

  /// Merge every non-empty bucket per the merge mode, append the results to
  /// each task queue (discarding oldest beyond iq_depth) and reset buckets.
  std::vector<DispatchedPtr> flush(std::int64_t t_now);

  /// Hardware became available: dispatch whatever is buffered.
  std::vector<DispatchedPtr> on_hardware_idle(std::int64_t t_now);

  /// place_frame with automatic flushing when the buffer is saturated.
  std::vector<DispatchedPtr> push(SparseFrame frame, std::int64_t t_now);

  /// Concatenate and drain a task queue. Throws EmptyInputError if empty.
  BatchedFrames build_batch(std::size_t task);
  std::vector<DispatchedPtr> drain_queue(std::size_t task);

  bool needs_flush() const noexcept;
  std::size_t total_frames() const noexcept { return total_frames_; }
  Rational buffered_mass() const;

  const DsfaConfig& config() const noexcept { return config_; }
  SensorDims dims() const noexcept { return dims_; }
  std::size_t task_count() const noexcept { return queues_.size(); }
  const std::vector<MergeBucket>& buckets() const noexcept { return buckets_; }
  const std::deque<DispatchedPtr>& queue(std::size_t task) const {
    return queues_.at(task);
  }
  const TaskCounters& task_counters(std::size_t task) const {
    return task_counters_.at(task);
  }
  const DsfaCounters& counters() const noexcept { return counters_; }

  /// occupancy_histogram()[k] = number of flushed buckets holding k frames.
  const std::vector<std::uint64_t>& occupancy_histogram() const noexcept {
    return occupancy_hist_;
  }
  /// Age (dispatch time - t_ref) of every source frame at flush.
  const std::vector<std::int64_t>& dispatch_ages() const noexcept { return ages_; }

 private:
  DsfaConfig config_;
  SensorDims dims_;
  std::vector<MergeBucket> buckets_;
  std::size_t total_frames_ = 0;
  std::vector<std::deque<DispatchedPtr>> queues_;
  std::vector<TaskCounters> task_counters_;
  DsfaCounters counters_;
  std::vector<std::uint64_t> occupancy_hist_;
  std::vector<std::int64_t> ages_;
  std::uint64_t next_sequence_ = 0;
};

}  // namespace evedge
