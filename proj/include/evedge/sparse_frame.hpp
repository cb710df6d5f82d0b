#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evedge/aer.hpp"
#include "evedge/rational.hpp"

namespace evedge {

enum class Channel : std::uint8_t { pos, neg };

struct FrameEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  Rational value;

  friend bool operator==(const FrameEntry&, const FrameEntry&) = default;
};

/// Uncanonicalized input to SparseFrame::from_entries.
struct RawEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  Channel channel = Channel::pos;
  Rational value;
};

/// Two-channel coordinate-list frame. Each channel is sorted by (row, col),
/// duplicate-free and holds strictly positive values, so equality of frames
/// is equality of their canonical forms.
class SparseFrame {
 public:
  SparseFrame() = default;
  explicit SparseFrame(SensorDims dims, std::int64_t t_ref = 0)
      : dims_(dims), t_ref_(t_ref) {}

  /// Sums duplicates, drops zeros and sorts. Throws BoundsError for
  /// coordinates outside dims and DomainError for negative values.
  static SparseFrame from_entries(std::span<const RawEntry> entries,
                                  SensorDims dims, std::int64_t t_ref = 0);

  /// Adopts channels that are already canonical; throws DomainError if not.
  static SparseFrame from_canonical(SensorDims dims, std::int64_t t_ref,
                                    std::vector<FrameEntry> pos,
                                    std::vector<FrameEntry> neg);

  SensorDims dims() const noexcept { return dims_; }
  std::uint32_t width() const noexcept { return dims_.width; }
  std::uint32_t height() const noexcept { return dims_.height; }
  std::int64_t t_ref() const noexcept { return t_ref_; }

  const std::vector<FrameEntry>& pos() const noexcept { return pos_; }
  const std::vector<FrameEntry>& neg() const noexcept { return neg_; }
  const std::vector<FrameEntry>& channel(Channel c) const noexcept {
    return c == Channel::pos ? pos_ : neg_;
  }

  bool empty() const noexcept { return pos_.empty() && neg_.empty(); }
  std::size_t entry_count() const noexcept { return pos_.size() + neg_.size(); }

  /// Sum of all values over both channels.
  Rational mass() const;

  /// Number of distinct pixels active in either channel.
  std::size_t active_pixels() const;

  friend bool operator==(const SparseFrame&, const SparseFrame&) = default;

 private:
  SensorDims dims_;
  std::int64_t t_ref_ = 0;
  std::vector<FrameEntry> pos_;
  std::vector<FrameEntry> neg_;
};

struct BatchedFrames {
  std::vector<SparseFrame> frames;

  std::size_t size() const noexcept { return frames.size(); }
};

struct PixelValues {
  Rational pos;
  Rational neg;

  friend bool operator==(const PixelValues&, const PixelValues&) = default;
};

struct DenseGrid {
  SensorDims dims;
  std::vector<PixelValues> cells;  // row-major

  const PixelValues& at(std::uint32_t row, std::uint32_t col) const {
    return cells[static_cast<std::size_t>(row) * dims.width + col];
  }
  PixelValues& at(std::uint32_t row, std::uint32_t col) {
    return cells[static_cast<std::size_t>(row) * dims.width + col];
  }
  friend bool operator==(const DenseGrid&, const DenseGrid&) = default;
};

DenseGrid to_dense(const SparseFrame& frame);

/// Pointwise per-channel sum; t_ref is the earliest input t_ref.
SparseFrame merge_add(std::span<const SparseFrame> frames);

/// merge_add divided exactly by the number of frames.
SparseFrame merge_average(std::span<const SparseFrame> frames);

BatchedFrames concat(std::span<const SparseFrame> frames);

/// Active pixels (union of channels) over width * height.
double spatial_density(const SparseFrame& frame);

/// Sorted row-major keys (row * width + col) of pixels active in either
/// channel.
std::vector<std::uint32_t> active_pixel_keys(const SparseFrame& frame);

}  // namespace evedge
