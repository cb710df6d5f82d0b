#pragma once

#include <cstdint>
#include <vector>

#include "evedge/aer.hpp"
#include "evedge/sparse_frame.hpp"

namespace evedge {

struct BinningSpec {
  std::uint32_t bins = 1;
  SensorDims dims;
};

/// Event bin of t_k inside [t_start, t_end):
/// floor((t_k - t_start) * bins / (t_end - t_start)), in integer arithmetic.
std::uint32_t bin_index(std::int64_t t_k, std::int64_t t_start, std::int64_t t_end,
                        std::uint32_t bins);

/// Start time of bin i, rounded down.
std::int64_t bin_start(std::uint32_t i, std::int64_t t_start, std::int64_t t_end,
                       std::uint32_t bins);

struct ConversionStats {
  std::uint64_t events_touched = 0;
  std::uint64_t entries_emitted = 0;
};

/// One two-channel frame per bin, always exactly spec.bins frames. Pixel
/// (row, col) = (y, x). Frame t_ref is its earliest event time, or the bin
/// start for an empty bin.
std::vector<SparseFrame> convert(const EventWindow& window, const BinningSpec& spec,
                                 ConversionStats* stats = nullptr);

}  // namespace evedge
