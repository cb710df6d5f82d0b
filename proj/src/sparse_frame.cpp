#include "evedge/sparse_frame.hpp"

#include <algorithm>
#include <sstream>

#include "evedge/error.hpp"

namespace evedge {

namespace {

bool coord_less(const FrameEntry& a, const FrameEntry& b) {
  return a.row != b.row ? a.row < b.row : a.col < b.col;
}

bool same_coord(const FrameEntry& a, const FrameEntry& b) {
  return a.row == b.row && a.col == b.col;
}

// Sort by coordinate, sum duplicates, drop zeros.
std::vector<FrameEntry> canonicalize(std::vector<FrameEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(), coord_less);
  std::vector<FrameEntry> out;
  out.reserve(entries.size());
  for (FrameEntry& e : entries) {
    if (!out.empty() && same_coord(out.back(), e))
      out.back().value += e.value;
    else
      out.push_back(std::move(e));
  }
  std::erase_if(out, [](const FrameEntry& e) { return e.value.is_zero(); });
  return out;
}

void check_canonical(const std::vector<FrameEntry>& ch, SensorDims dims) {
  for (std::size_t i = 0; i < ch.size(); ++i) {
    if (ch[i].row >= dims.height || ch[i].col >= dims.width)
      throw DomainError("frame entry outside frame dimensions");
    if (!ch[i].value.is_positive())
      throw DomainError("frame entry values must be positive");
    if (i > 0 && !coord_less(ch[i - 1], ch[i]))
      throw DomainError("frame channel is not sorted and duplicate-free");
  }
}

void require_uniform(std::span<const SparseFrame> frames, const char* op) {
  if (frames.empty())
    throw EmptyInputError(std::string(op) + " requires at least one frame");
  for (const SparseFrame& f : frames)
    if (f.dims() != frames.front().dims()) {
      std::ostringstream msg;
      msg << op << ": frame dims " << f.width() << "x" << f.height()
          << " differ from " << frames.front().width() << "x"
          << frames.front().height();
      throw ShapeError(msg.str());
    }
}

}  // namespace

SparseFrame SparseFrame::from_entries(std::span<const RawEntry> entries,
                                      SensorDims dims, std::int64_t t_ref) {
  std::vector<FrameEntry> pos;
  std::vector<FrameEntry> neg;
  for (const RawEntry& e : entries) {
    if (e.row >= dims.height || e.col >= dims.width) {
      std::ostringstream msg;
      msg << "entry (row=" << e.row << ", col=" << e.col << ") outside frame "
          << dims.width << "x" << dims.height;
      throw BoundsError(msg.str());
    }
    if (e.value < Rational(0))
      throw DomainError("frame entry values must be non-negative");
    (e.channel == Channel::pos ? pos : neg).push_back({e.row, e.col, e.value});
  }
  SparseFrame f(dims, t_ref);
  f.pos_ = canonicalize(std::move(pos));
  f.neg_ = canonicalize(std::move(neg));
  return f;
}

SparseFrame SparseFrame::from_canonical(SensorDims dims, std::int64_t t_ref,
                                        std::vector<FrameEntry> pos,
                                        std::vector<FrameEntry> neg) {
  check_canonical(pos, dims);
  check_canonical(neg, dims);
  SparseFrame f(dims, t_ref);
  f.pos_ = std::move(pos);
  f.neg_ = std::move(neg);
  return f;
}

Rational SparseFrame::mass() const {
  Rational m;
  for (const FrameEntry& e : pos_) m += e.value;
  for (const FrameEntry& e : neg_) m += e.value;
  return m;
}

std::size_t SparseFrame::active_pixels() const {
  // Both channels are sorted, so count the size of their union.
  std::size_t i = 0, j = 0, n = 0;
  while (i < pos_.size() || j < neg_.size()) {
    if (j == neg_.size() || (i < pos_.size() && coord_less(pos_[i], neg_[j]))) {
      ++i;
    } else if (i == pos_.size() || coord_less(neg_[j], pos_[i])) {
      ++j;
    } else {
      ++i;
      ++j;
    }
    ++n;
  }
  return n;
}

DenseGrid to_dense(const SparseFrame& frame) {
  DenseGrid g;
  g.dims = frame.dims();
  g.cells.assign(frame.dims().area(), PixelValues{});
  for (const FrameEntry& e : frame.pos()) g.at(e.row, e.col).pos = e.value;
  for (const FrameEntry& e : frame.neg()) g.at(e.row, e.col).neg = e.value;
  return g;
}

SparseFrame merge_add(std::span<const SparseFrame> frames) {
  require_uniform(frames, "merge_add");
  if (frames.size() == 1) return frames.front();

  std::vector<FrameEntry> pos;
  std::vector<FrameEntry> neg;
  std::int64_t t_ref = frames.front().t_ref();
  for (const SparseFrame& f : frames) {
    pos.insert(pos.end(), f.pos().begin(), f.pos().end());
    neg.insert(neg.end(), f.neg().begin(), f.neg().end());
    t_ref = std::min(t_ref, f.t_ref());
  }
  return SparseFrame::from_canonical(frames.front().dims(), t_ref,
                                     canonicalize(std::move(pos)),
                                     canonicalize(std::move(neg)));
}

SparseFrame merge_average(std::span<const SparseFrame> frames) {
  const SparseFrame sum = merge_add(frames);
  const auto k = static_cast<std::int64_t>(frames.size());
  if (k == 1) return sum;
  auto scale = [k](std::vector<FrameEntry> ch) {
    for (FrameEntry& e : ch) e.value = e.value / k;
    return ch;
  };
  return SparseFrame::from_canonical(sum.dims(), sum.t_ref(), scale(sum.pos()),
                                     scale(sum.neg()));
}

BatchedFrames concat(std::span<const SparseFrame> frames) {
  require_uniform(frames, "concat");
  return BatchedFrames{std::vector<SparseFrame>(frames.begin(), frames.end())};
}

double spatial_density(const SparseFrame& frame) {
  const std::uint64_t area = frame.dims().area();
  if (area == 0) return 0.0;
  return static_cast<double>(frame.active_pixels()) / static_cast<double>(area);
}

std::vector<std::uint32_t> active_pixel_keys(const SparseFrame& frame) {
  std::vector<std::uint32_t> keys;
  keys.reserve(frame.entry_count());
  auto key = [&](const FrameEntry& e) { return e.row * frame.width() + e.col; };
  std::size_t i = 0, j = 0;
  const auto& p = frame.pos();
  const auto& n = frame.neg();
  while (i < p.size() || j < n.size()) {
    if (j == n.size() || (i < p.size() && coord_less(p[i], n[j]))) {
      keys.push_back(key(p[i++]));
    } else if (i == p.size() || coord_less(n[j], p[i])) {
      keys.push_back(key(n[j++]));
    } else {
      keys.push_back(key(p[i]));
      ++i;
      ++j;
    }
  }
  return keys;
}

}  // namespace evedge
