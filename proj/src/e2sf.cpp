#include "evedge/e2sf.hpp"

#include <algorithm>
#include <sstream>

#include "evedge/error.hpp"

namespace evedge {

std::uint32_t bin_index(std::int64_t t_k, std::int64_t t_start, std::int64_t t_end,
                        std::uint32_t bins) {
  if (bins == 0) throw DomainError("bin count must be at least 1");
  if (t_start >= t_end) throw DomainError("empty binning window");
  if (t_k < t_start || t_k >= t_end) {
    std::ostringstream msg;
    msg << "timestamp " << t_k << " outside window [" << t_start << ", " << t_end
        << ")";
    throw DomainError(msg.str());
  }
  const __int128 scaled = static_cast<__int128>(t_k - t_start) * bins;
  const auto idx = static_cast<std::uint64_t>(scaled / (t_end - t_start));
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(idx, bins - 1));
}

std::int64_t bin_start(std::uint32_t i, std::int64_t t_start, std::int64_t t_end,
                       std::uint32_t bins) {
  const __int128 offset = static_cast<__int128>(t_end - t_start) * i / bins;
  return t_start + static_cast<std::int64_t>(offset);
}

std::vector<SparseFrame> convert(const EventWindow& window, const BinningSpec& spec,
                                 ConversionStats* stats) {
  if (spec.bins == 0) throw DomainError("bin count must be at least 1");
  const SensorDims dims = spec.dims;
  const std::int64_t t0 = window.t_start;
  const std::int64_t t1 = window.t_end;

  // Scatter events into bins in one pass; bins stay time-ordered because the
  // window is.
  std::vector<std::vector<const Event*>> per_bin(spec.bins);
  for (const Event& ev : window.events) {
    if (!dims.contains(ev.x, ev.y)) {
      std::ostringstream msg;
      msg << "event (x=" << ev.x << ", y=" << ev.y << ", t=" << ev.t
          << ") outside sensor " << dims.width << "x" << dims.height;
      throw BoundsError(msg.str());
    }
    per_bin[bin_index(ev.t, t0, t1, spec.bins)].push_back(&ev);
  }

  std::vector<std::int64_t> pos_count(dims.area(), 0);
  std::vector<std::int64_t> neg_count(dims.area(), 0);
  std::vector<std::uint32_t> touched;

  ConversionStats local;
  std::vector<SparseFrame> frames;
  frames.reserve(spec.bins);
  for (std::uint32_t b = 0; b < spec.bins; ++b) {
    const auto& evs = per_bin[b];
    if (evs.empty()) {
      frames.emplace_back(dims, bin_start(b, t0, t1, spec.bins));
      continue;
    }
    touched.clear();
    for (const Event* ev : evs) {
      const std::uint32_t key = ev->y * dims.width + ev->x;
      if (pos_count[key] == 0 && neg_count[key] == 0) touched.push_back(key);
      (ev->p > 0 ? pos_count : neg_count)[key] += 1;
      ++local.events_touched;
    }
    std::sort(touched.begin(), touched.end());

    std::vector<FrameEntry> pos;
    std::vector<FrameEntry> neg;
    for (const std::uint32_t key : touched) {
      const std::uint32_t row = key / dims.width;
      const std::uint32_t col = key % dims.width;
      if (pos_count[key] > 0) pos.push_back({row, col, Rational(pos_count[key])});
      if (neg_count[key] > 0) neg.push_back({row, col, Rational(neg_count[key])});
      pos_count[key] = 0;
      neg_count[key] = 0;
    }
    local.entries_emitted += pos.size() + neg.size();
    frames.push_back(SparseFrame::from_canonical(dims, evs.front()->t, std::move(pos),
                                                 std::move(neg)));
  }
  if (stats) *stats = local;
  return frames;
}

}  // namespace evedge
