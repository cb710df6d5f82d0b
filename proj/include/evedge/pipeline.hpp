#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evedge/aer.hpp"
#include "evedge/dsfa.hpp"
#include "evedge/e2sf.hpp"

namespace evedge {

/// Time the simulated inference hardware needs for one batch:
/// base_us + per_frame_us * frames.
struct ServiceModel {
  std::int64_t base_us = 1000;
  std::int64_t per_frame_us = 0;

  std::int64_t service_us(std::size_t frames) const noexcept {
    return base_us + per_frame_us * static_cast<std::int64_t>(frames);
  }
  void validate() const;
};

enum class StaticMode { interval, count };

struct PipelineConfig {
  SensorDims dims;
  std::int64_t frame_period_us = 50'000;  // spacing of window anchors
  std::uint32_t bins = 5;
  DsfaConfig dsfa;
  bool idle_dispatch = true;
  std::size_t tasks = 1;
  ServiceModel service;
  StaticMode static_mode = StaticMode::interval;
  std::size_t count_per_frame = 1000;  // static count mode

  void validate() const;
};

struct Invocation {
  std::size_t task = 0;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  std::size_t frames = 0;         // frames in the batch
  std::size_t source_frames = 0;  // E2SF frames they represent
};

struct RunReport {
  std::string mode;  // "dsfa" or "static-interval" / "static-count"
  std::uint64_t events_in = 0;
  std::uint64_t events_binned = 0;
  std::uint64_t frames_in = 0;
  std::uint64_t frames_processed = 0;  // source frames, summed over tasks
  std::uint64_t frames_discarded = 0;  // source frames, summed over tasks
  std::uint64_t invocations = 0;
  std::int64_t first_arrival_us = 0;
  std::int64_t makespan_us = 0;  // completion time of the last invocation
  double mean_age_us = 0.0;      // inference start - frame t_ref
  std::int64_t p95_age_us = 0;
  std::size_t max_backlog = 0;  // longest inference queue seen
  Rational processed_mass;
  Rational discarded_mass;
  DsfaCounters dsfa;
  std::vector<std::uint64_t> occupancy_histogram;
  double events_per_s = 0.0;
  double frames_per_s = 0.0;
  double inferred_frames_per_s = 0.0;
  std::vector<Invocation> timeline;
};

/// Consecutive windows [t0 + k*period, t0 + (k+1)*period) covering the
/// stream, t0 = first timestamp rounded down to the period.
std::vector<EventWindow> partition_windows(std::span<const Event> events,
                                           std::int64_t period_us);

/// Nearest-rank percentile of integer samples (0 for no samples).
std::int64_t percentile(std::vector<std::int64_t> samples, double q);

/// E2SF -> DSFA -> simulated hardware. Each bin's frame arrives at its bin
/// end; the server pulls a whole inference queue per invocation and, when
/// idle with empty queues, triggers an early dispatch of buffered buckets.
RunReport run_pipeline(const PipelineConfig& config, std::span<const Event> events);

/// Same stream, frames sent one per invocation with no merging.
RunReport baseline_static(const PipelineConfig& config, std::span<const Event> events);

}  // namespace evedge
