#include "evedge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "evedge/error.hpp"

namespace evedge {

void ServiceModel::validate() const {
  if (base_us < 0 || per_frame_us < 0)
    throw ValidationError("service times must be non-negative");
  if (base_us == 0 && per_frame_us == 0)
    throw ValidationError("service model must take positive time");
}

void PipelineConfig::validate() const {
  if (dims.width == 0 || dims.height == 0)
    throw ValidationError("sensor dimensions must be positive");
  if (frame_period_us <= 0) throw ValidationError("frame period must be positive");
  if (bins < 1) throw ValidationError("bins must be at least 1");
  if (tasks < 1) throw ValidationError("tasks must be at least 1");
  if (count_per_frame < 1) throw ValidationError("count_per_frame must be at least 1");
  dsfa.validate();
  service.validate();
}

std::vector<EventWindow> partition_windows(std::span<const Event> events,
                                           std::int64_t period_us) {
  if (period_us <= 0) throw ValidationError("frame period must be positive");
  std::vector<EventWindow> out;
  if (events.empty()) return out;
  if (!is_time_sorted(events)) throw OrderingError("event stream is not sorted by time");
  const std::int64_t t0 = events.front().t / period_us * period_us;
  std::size_t i = 0;
  for (std::int64_t start = t0; i < events.size(); start += period_us) {
    EventWindow w;
    w.t_start = start;
    w.t_end = start + period_us;
    while (i < events.size() && events[i].t < w.t_end) w.events.push_back(events[i++]);
    w.dropped = events.size() - w.events.size();
    out.push_back(std::move(w));
  }
  return out;
}

std::int64_t percentile(std::vector<std::int64_t> samples, double q) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
  return samples[std::clamp<std::size_t>(rank, 1, samples.size()) - 1];
}

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

struct Arrival {
  std::int64_t t = 0;
  SparseFrame frame;
};

std::vector<Arrival> binned_arrivals(const PipelineConfig& cfg, std::span<const Event> events,
                                     std::uint64_t& binned) {
  std::vector<Arrival> out;
  binned = 0;
  const BinningSpec spec{cfg.bins, cfg.dims};
  for (const EventWindow& w : partition_windows(events, cfg.frame_period_us)) {
    binned += w.events.size();
    auto frames = convert(w, spec);
    for (std::uint32_t b = 0; b < frames.size(); ++b)
      out.push_back({bin_start(b + 1, w.t_start, w.t_end, cfg.bins), std::move(frames[b])});
  }
  return out;
}

std::vector<Arrival> counted_arrivals(const PipelineConfig& cfg, std::span<const Event> events) {
  std::vector<Arrival> out;
  std::vector<RawEntry> group;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& ev = events[i];
    if (!cfg.dims.contains(ev.x, ev.y)) throw BoundsError("event outside sensor dims");
    group.push_back({ev.y, ev.x, ev.p > 0 ? Channel::pos : Channel::neg, Rational(1)});
    const bool last = i + 1 == events.size();
    if (group.size() == cfg.count_per_frame || last) {
      const std::int64_t t_first = events[i + 1 - group.size()].t;
      out.push_back({ev.t, SparseFrame::from_entries(group, cfg.dims, t_first)});
      group.clear();
    }
  }
  return out;
}

void finish_report(RunReport& r, std::vector<std::int64_t>& ages, std::span<const Event> events) {
  r.events_in = events.size();
  if (!ages.empty()) {
    const double sum = std::accumulate(ages.begin(), ages.end(), 0.0);
    r.mean_age_us = sum / static_cast<double>(ages.size());
  }
  r.p95_age_us = percentile(ages, 0.95);
  r.invocations = r.timeline.size();
  r.makespan_us = 0;
  for (const Invocation& inv : r.timeline) r.makespan_us = std::max(r.makespan_us, inv.end_us);
  if (!events.empty()) {
    const double span_s =
        static_cast<double>(r.makespan_us - events.front().t) / 1e6;
    if (span_s > 0.0) {
      r.events_per_s = static_cast<double>(r.events_in) / span_s;
      r.frames_per_s = static_cast<double>(r.frames_in) / span_s;
      r.inferred_frames_per_s = static_cast<double>(r.frames_processed) / span_s;
    }
  }
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& cfg, std::span<const Event> events) {
  cfg.validate();
  RunReport r;
  r.mode = "dsfa";
  auto arrivals = binned_arrivals(cfg, events, r.events_binned);
  r.frames_in = arrivals.size();
  if (!arrivals.empty()) r.first_arrival_us = arrivals.front().t;

  Aggregator agg(cfg.dsfa, cfg.dims, cfg.tasks);
  std::vector<std::int64_t> ages;
  bool busy = false;
  std::int64_t busy_until = 0;
  std::size_t next_task = 0;

  auto pick_task = [&]() -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < cfg.tasks; ++k) {
      const std::size_t t = (next_task + k) % cfg.tasks;
      if (!agg.queue(t).empty()) return t;
    }
    return std::nullopt;
  };
  auto try_start = [&](std::int64_t now) {
    if (busy) return false;
    auto task = pick_task();
    if (!task && cfg.idle_dispatch && agg.total_frames() > 0) {
      agg.on_hardware_idle(now);
      task = pick_task();
    }
    if (!task) return false;
    const auto items = agg.drain_queue(*task);
    Invocation inv{*task, now, 0, items.size(), 0};
    for (const DispatchedPtr& item : items) {
      inv.source_frames += item->source_frames;
      r.processed_mass += item->source_mass;
      for (std::int64_t t_ref : item->source_t_refs) ages.push_back(now - t_ref);
    }
    inv.end_us = now + cfg.service.service_us(items.size());
    r.frames_processed += inv.source_frames;
    r.timeline.push_back(inv);
    busy = true;
    busy_until = inv.end_us;
    next_task = *task + 1;
    return true;
  };
  auto note_backlog = [&] {
    for (std::size_t t = 0; t < cfg.tasks; ++t)
      r.max_backlog = std::max(r.max_backlog, agg.queue(t).size());
  };

  std::size_t ai = 0;
  std::int64_t now = 0;
  while (true) {
    const std::int64_t next_arrival = ai < arrivals.size() ? arrivals[ai].t : kNever;
    if (ai < arrivals.size() && (!busy || next_arrival <= busy_until)) {
      now = next_arrival;
      while (ai < arrivals.size() && arrivals[ai].t == now) {
        agg.push(std::move(arrivals[ai].frame), now);
        ++ai;
      }
      note_backlog();
      try_start(now);
    } else if (busy) {
      now = busy_until;
      busy = false;
      try_start(now);
    } else {
      // End of stream with an idle server: drain what is left.
      if (try_start(now)) continue;
      if (agg.total_frames() == 0) break;
      agg.flush(now);
      note_backlog();
      if (!try_start(now)) break;
    }
  }

  r.dsfa = agg.counters();
  r.occupancy_histogram = agg.occupancy_histogram();
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    r.frames_discarded += agg.task_counters(t).discarded_source_frames;
    r.discarded_mass += agg.task_counters(t).discarded_mass;
  }
  finish_report(r, ages, events);
  return r;
}

RunReport baseline_static(const PipelineConfig& cfg, std::span<const Event> events) {
  cfg.validate();
  RunReport r;
  std::vector<Arrival> arrivals;
  if (cfg.static_mode == StaticMode::interval) {
    r.mode = "static-interval";
    arrivals = binned_arrivals(cfg, events, r.events_binned);
  } else {
    r.mode = "static-count";
    if (!is_time_sorted(events)) throw OrderingError("event stream is not sorted by time");
    arrivals = counted_arrivals(cfg, events);
    r.events_binned = events.size();
  }
  r.frames_in = arrivals.size();
  if (!arrivals.empty()) r.first_arrival_us = arrivals.front().t;

  std::vector<std::deque<const SparseFrame*>> queues(cfg.tasks);
  std::vector<std::int64_t> ages;
  bool busy = false;
  std::int64_t busy_until = 0;
  std::size_t next_task = 0;

  auto try_start = [&](std::int64_t now) {
    if (busy) return false;
    for (std::size_t k = 0; k < cfg.tasks; ++k) {
      const std::size_t t = (next_task + k) % cfg.tasks;
      if (queues[t].empty()) continue;
      const SparseFrame* f = queues[t].front();
      queues[t].pop_front();
      ages.push_back(now - f->t_ref());
      r.processed_mass += f->mass();
      ++r.frames_processed;
      const Invocation inv{t, now, now + cfg.service.service_us(1), 1, 1};
      r.timeline.push_back(inv);
      busy = true;
      busy_until = inv.end_us;
      next_task = t + 1;
      return true;
    }
    return false;
  };

  std::size_t ai = 0;
  while (true) {
    const std::int64_t next_arrival = ai < arrivals.size() ? arrivals[ai].t : kNever;
    if (ai < arrivals.size() && (!busy || next_arrival <= busy_until)) {
      const std::int64_t now = next_arrival;
      while (ai < arrivals.size() && arrivals[ai].t == now) {
        for (auto& q : queues) q.push_back(&arrivals[ai].frame);
        ++ai;
      }
      for (const auto& q : queues) r.max_backlog = std::max(r.max_backlog, q.size());
      try_start(now);
    } else if (busy) {
      busy = false;
      try_start(busy_until);
    } else {
      break;
    }
  }
  finish_report(r, ages, events);
  return r;
}

}  // namespace evedge
