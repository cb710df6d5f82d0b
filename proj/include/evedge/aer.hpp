#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evedge {

struct SensorDims {
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  std::uint64_t area() const noexcept {
    return static_cast<std::uint64_t>(width) * height;
  }
  bool contains(std::uint32_t x, std::uint32_t y) const noexcept {
    return x < width && y < height;
  }
  friend bool operator==(const SensorDims&, const SensorDims&) = default;
};

/// One address-event: pixel column x, pixel row y, timestamp in
/// microseconds, polarity +1/-1.
struct Event {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::int64_t t = 0;
  std::int8_t p = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Events retained by a half-open window [t_start, t_end).
struct EventWindow {
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  std::vector<Event> events;
  std::size_t dropped = 0;
};

// ---------------------------------------------------------------------------
// Text format: one event per line, "<t> <x> <y> <p>". t is either integer
// microseconds or decimal seconds; p is 0/1 or -1/1. '#' starts a comment
// line. Blank lines are ignored.

/// Parse a timestamp field into microseconds. Decimal seconds are scaled
/// digit-by-digit; digits below one microsecond are truncated.
std::int64_t parse_timestamp_us(std::string_view field, std::size_t line = 0);

std::vector<Event> parse_aer(std::istream& in, SensorDims dims);
std::vector<Event> parse_aer(std::string_view text, SensorDims dims);
std::vector<Event> load_aer(const std::filesystem::path& path, SensorDims dims);

void write_aer(std::ostream& out, std::span<const Event> events);
std::string serialize_aer(std::span<const Event> events);
void save_aer(const std::filesystem::path& path, std::span<const Event> events);

/// Select events with t_start <= t < t_end. Input must be sorted by t.
EventWindow window(std::span<const Event> events, std::int64_t t_start,
                   std::int64_t t_end);

bool is_time_sorted(std::span<const Event> events) noexcept;

// ---------------------------------------------------------------------------
// Synthetic scenes

struct Rect {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  std::uint64_t area() const noexcept {
    return static_cast<std::uint64_t>(width) * height;
  }
};

struct SceneSegment {
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  double rate_eps = 0.0;  // mean events per second
  Rect region;
};

struct SyntheticSceneSpec {
  SensorDims dims;
  std::int64_t duration_us = 0;
  std::vector<SceneSegment> segments;
  double theta = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Pixels inside a segment's region receive signed log-intensity steps of
/// theta/2 at 4x the requested event rate; a pixel fires whenever its
/// accumulated change since its last event reaches theta. Each pixel starts
/// from the stationary distribution of that process, so the expected event
/// rate equals the segment rate from the first microsecond.
std::vector<Event> generate_synthetic(const SyntheticSceneSpec& spec);

}  // namespace evedge
