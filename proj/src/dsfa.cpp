#include "evedge/dsfa.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iterator>

#include "evedge/error.hpp"

namespace evedge {

std::string_view to_string(MergeMode mode) noexcept {
  switch (mode) {
    case MergeMode::add: return "cAdd";
    case MergeMode::average: return "cAverage";
    case MergeMode::batch: return "cBatch";
  }
  return "?";
}

MergeMode parse_merge_mode(std::string_view name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s.starts_with("c")) s.erase(0, 1);
  if (s == "add") return MergeMode::add;
  if (s == "average" || s == "avg") return MergeMode::average;
  if (s == "batch") return MergeMode::batch;
  throw ValidationError("unknown merge mode '" + std::string(name) + "'");
}

void DsfaConfig::validate() const {
  if (mb_size < 1) throw ValidationError("mb_size must be at least 1");
  if (e_buf_size < mb_size) throw ValidationError("e_buf_size must be >= mb_size");
  if (e_buf_size % mb_size != 0)
    throw ValidationError("e_buf_size must be divisible by mb_size");
  if (mt_th_us <= 0) throw ValidationError("mt_th_us must be positive");
  if (!(md_th >= 0.0)) throw ValidationError("md_th must be non-negative");
  if (iq_depth < 1) throw ValidationError("iq_depth must be at least 1");
}

bool density_change_ok(double frame_density, double merged_density, double md_th) {
  if (merged_density == 0.0) return frame_density == 0.0;
  return std::fabs(frame_density - merged_density) / merged_density <= md_th;
}

double MergeBucket::merged_density(SensorDims dims) const noexcept {
  const std::uint64_t area = dims.area();
  return area == 0 ? 0.0
                   : static_cast<double>(active_.size()) / static_cast<double>(area);
}

void MergeBucket::add(SparseFrame frame) {
  const auto keys = active_pixel_keys(frame);
  std::vector<std::uint32_t> merged;
  merged.reserve(active_.size() + keys.size());
  std::set_union(active_.begin(), active_.end(), keys.begin(), keys.end(),
                 std::back_inserter(merged));
  active_ = std::move(merged);
  t_earliest_ = frames_.empty() ? frame.t_ref() : std::min(t_earliest_, frame.t_ref());
  frames_.push_back(std::move(frame));
}

void MergeBucket::reset() {
  frames_.clear();
  active_.clear();
  t_earliest_ = 0;
  status_ = BucketStatus::available;
}

Aggregator::Aggregator(DsfaConfig config, SensorDims dims, std::size_t tasks)
    : config_(config), dims_(dims) {
  config_.validate();
  if (tasks < 1) throw ValidationError("aggregator needs at least one task");
  buckets_.resize(config_.bucket_count());
  queues_.resize(tasks);
  task_counters_.resize(tasks);
  occupancy_hist_.assign(config_.mb_size + 1, 0);
}

bool Aggregator::needs_flush() const noexcept {
  if (total_frames_ >= config_.e_buf_size) return true;
  return std::none_of(buckets_.begin(), buckets_.end(), [](const MergeBucket& b) {
    return b.status() == BucketStatus::available;
  });
}

Rational Aggregator::buffered_mass() const {
  Rational m;
  for (const MergeBucket& b : buckets_)
    for (const SparseFrame& f : b.frames()) m += f.mass();
  return m;
}

PlacementReport Aggregator::place_frame(SparseFrame frame) {
  if (frame.dims() != dims_)
    throw ShapeError("frame dims do not match the aggregator's sensor dims");
  if (needs_flush())
    throw CapacityError("event buffer is full; flush before placing more frames");

  PlacementReport report;
  const double density = spatial_density(frame);

  for (std::size_t i = 0; i < buckets_.size(); ++i) {
    MergeBucket& b = buckets_[i];
    if (b.status() == BucketStatus::full) continue;
    if (config_.c_mode == MergeMode::batch) {
      // cBatch: every frame opens a fresh bucket, which is then sealed.
      if (!b.empty()) continue;
    } else if (!b.empty()) {
      const bool in_time = frame.t_ref() - b.t_earliest() <= config_.mt_th_us;
      const bool in_density =
          density_change_ok(density, b.merged_density(dims_), config_.md_th);
      if (!in_time || !in_density) {
        b.status_ = BucketStatus::full;
        report.newly_full.push_back(i);
        continue;
      }
    }
    b.add(std::move(frame));
    ++total_frames_;
    ++counters_.ingested_frames;
    counters_.ingested_mass += b.frames_.back().mass();
    if (config_.c_mode == MergeMode::batch || b.occupancy() >= config_.mb_size) {
      b.status_ = BucketStatus::full;
      report.newly_full.push_back(i);
    }
    report.bucket = i;
    return report;
  }
  return report;
}

std::vector<DispatchedPtr> Aggregator::flush(std::int64_t t_now) {
  std::vector<DispatchedPtr> out;
  if (total_frames_ == 0) return out;
  ++counters_.flushes;

  for (MergeBucket& b : buckets_) {
    if (b.empty()) continue;
    auto item = std::make_shared<DispatchedFrame>();
    switch (config_.c_mode) {
      case MergeMode::add: item->frame = merge_add(b.frames()); break;
      case MergeMode::average: item->frame = merge_average(b.frames()); break;
      case MergeMode::batch: item->frame = concat(b.frames()).frames.front(); break;
    }
    item->source_frames = b.occupancy();
    for (const SparseFrame& f : b.frames()) {
      item->source_mass += f.mass();
      item->source_t_refs.push_back(f.t_ref());
      ages_.push_back(t_now - f.t_ref());
    }
    item->dispatch_time = t_now;
    item->sequence = next_sequence_++;
    occupancy_hist_[b.occupancy()] += 1;
    out.push_back(item);
    b.reset();
  }
  total_frames_ = 0;
  counters_.dispatched += out.size();

  for (std::size_t task = 0; task < queues_.size(); ++task) {
    auto& q = queues_[task];
    auto& tc = task_counters_[task];
    for (const DispatchedPtr& item : out) {
      q.push_back(item);
      ++tc.dispatched_frames;
      if (q.size() > config_.iq_depth) {
        const DispatchedPtr& old = q.front();
        ++tc.discarded_frames;
        tc.discarded_source_frames += old->source_frames;
        tc.discarded_mass += old->source_mass;
        ++counters_.discarded;
        q.pop_front();
      }
    }
  }
  return out;
}

std::vector<DispatchedPtr> Aggregator::on_hardware_idle(std::int64_t t_now) {
  if (total_frames_ == 0) return {};
  if (total_frames_ < config_.e_buf_size) ++counters_.early_dispatches;
  return flush(t_now);
}

std::vector<DispatchedPtr> Aggregator::push(SparseFrame frame, std::int64_t t_now) {
  std::vector<DispatchedPtr> out;
  auto append = [&out](std::vector<DispatchedPtr> v) {
    out.insert(out.end(), std::make_move_iterator(v.begin()),
               std::make_move_iterator(v.end()));
  };
  if (needs_flush()) append(flush(t_now));
  PlacementReport r = place_frame(frame);
  if (!r.bucket) {
    append(flush(t_now));
    r = place_frame(std::move(frame));
  }
  if (needs_flush()) append(flush(t_now));
  return out;
}

std::vector<DispatchedPtr> Aggregator::drain_queue(std::size_t task) {
  auto& q = queues_.at(task);
  if (q.empty()) throw EmptyInputError("inference queue is empty");
  std::vector<DispatchedPtr> items(q.begin(), q.end());
  q.clear();
  auto& tc = task_counters_[task];
  for (const DispatchedPtr& item : items) {
    ++tc.consumed_frames;
    tc.consumed_mass += item->source_mass;
  }
  return items;
}

BatchedFrames Aggregator::build_batch(std::size_t task) {
  const auto items = drain_queue(task);
  BatchedFrames batch;
  batch.frames.reserve(items.size());
  for (const DispatchedPtr& item : items) batch.frames.push_back(item->frame);
  return batch;
}

}  // namespace evedge
