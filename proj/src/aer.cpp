#include "evedge/aer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "evedge/error.hpp"
#include "evedge/rng.hpp"

namespace evedge {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

template <typename T>
T parse_unsigned(std::string_view field, std::size_t line, const char* what) {
  if (!all_digits(field))
    throw ParseError(line, std::string("invalid ") + what + " '" +
                               std::string(field) + "'");
  T value{};
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError(line, std::string(what) + " out of range '" +
                               std::string(field) + "'");
  return value;
}

std::int8_t parse_polarity(std::string_view field, std::size_t line) {
  if (field == "1" || field == "+1") return 1;
  if (field == "0" || field == "-1") return -1;
  throw ParseError(line, "invalid polarity '" + std::string(field) + "'");
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
      ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::int64_t parse_timestamp_us(std::string_view field, std::size_t line) {
  const auto dot = field.find('.');
  if (dot == std::string_view::npos)
    return parse_unsigned<std::int64_t>(field, line, "timestamp");

  const std::string_view whole = field.substr(0, dot);
  const std::string_view frac = field.substr(dot + 1);
  if ((whole.empty() && frac.empty()) || (!whole.empty() && !all_digits(whole)) ||
      (!frac.empty() && !all_digits(frac)))
    throw ParseError(line, "invalid timestamp '" + std::string(field) + "'");

  const std::int64_t seconds =
      whole.empty() ? 0 : parse_unsigned<std::int64_t>(whole, line, "timestamp");
  if (seconds > std::numeric_limits<std::int64_t>::max() / 1'000'000)
    throw ParseError(line, "timestamp out of range '" + std::string(field) + "'");
  std::int64_t micros = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    micros *= 10;
    if (i < frac.size()) micros += frac[i] - '0';
  }
  return seconds * 1'000'000 + micros;
}

std::vector<Event> parse_aer(std::istream& in, SensorDims dims) {
  std::vector<Event> events;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view line(text);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;

    const auto fields = split_fields(line);
    if (fields.size() != 4)
      throw ParseError(line_no, "expected 4 fields '<t> <x> <y> <p>', got " +
                                    std::to_string(fields.size()));
    Event ev;
    ev.t = parse_timestamp_us(fields[0], line_no);
    ev.x = parse_unsigned<std::uint32_t>(fields[1], line_no, "x");
    ev.y = parse_unsigned<std::uint32_t>(fields[2], line_no, "y");
    ev.p = parse_polarity(fields[3], line_no);
    if (!dims.contains(ev.x, ev.y)) {
      std::ostringstream msg;
      msg << "line " << line_no << ": event (x=" << ev.x << ", y=" << ev.y
          << ", t=" << ev.t << ") outside sensor " << dims.width << "x"
          << dims.height;
      throw BoundsError(msg.str());
    }
    events.push_back(ev);
  }
  return events;
}

std::vector<Event> parse_aer(std::string_view text, SensorDims dims) {
  std::istringstream in{std::string(text)};
  return parse_aer(in, dims);
}

std::vector<Event> load_aer(const std::filesystem::path& path, SensorDims dims) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event file " + path.string());
  return parse_aer(in, dims);
}

void write_aer(std::ostream& out, std::span<const Event> events) {
  out << "# t x y p\n";
  for (const Event& ev : events)
    out << ev.t << ' ' << ev.x << ' ' << ev.y << ' ' << static_cast<int>(ev.p)
        << '\n';
}

std::string serialize_aer(std::span<const Event> events) {
  std::ostringstream out;
  write_aer(out, events);
  return out.str();
}

void save_aer(const std::filesystem::path& path, std::span<const Event> events) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write event file " + path.string());
  write_aer(out, events);
}

bool is_time_sorted(std::span<const Event> events) noexcept {
  return std::is_sorted(events.begin(), events.end(),
                        [](const Event& a, const Event& b) { return a.t < b.t; });
}

EventWindow window(std::span<const Event> events, std::int64_t t_start,
                   std::int64_t t_end) {
  if (t_start >= t_end)
    throw DomainError("window requires t_start < t_end (got " +
                      std::to_string(t_start) + ", " + std::to_string(t_end) + ")");
  if (!is_time_sorted(events))
    throw OrderingError("window input is not sorted by timestamp");

  const auto by_t = [](const Event& ev, std::int64_t t) { return ev.t < t; };
  const auto lo = std::lower_bound(events.begin(), events.end(), t_start, by_t);
  const auto hi = std::lower_bound(lo, events.end(), t_end, by_t);

  EventWindow w;
  w.t_start = t_start;
  w.t_end = t_end;
  w.events.assign(lo, hi);
  w.dropped = events.size() - w.events.size();
  return w;
}

void SyntheticSceneSpec::validate() const {
  if (dims.width == 0 || dims.height == 0)
    throw SpecError("scene sensor dimensions must be positive");
  if (duration_us <= 0) throw SpecError("scene duration must be positive");
  if (!(theta > 0.0)) throw SpecError("scene theta must be positive");

  std::vector<const SceneSegment*> order;
  for (const SceneSegment& s : segments) {
    if (s.start_us < 0 || s.end_us <= s.start_us || s.end_us > duration_us)
      throw SpecError("segment [" + std::to_string(s.start_us) + ", " +
                      std::to_string(s.end_us) + ") outside scene duration");
    if (!(s.rate_eps >= 0.0) || !std::isfinite(s.rate_eps))
      throw SpecError("segment rate must be a finite non-negative number");
    if (s.rate_eps > 0.0 && s.region.area() == 0)
      throw SpecError("segment with positive rate has a zero-area region");
    if (s.region.area() > 0 &&
        (static_cast<std::uint64_t>(s.region.x) + s.region.width > dims.width ||
         static_cast<std::uint64_t>(s.region.y) + s.region.height > dims.height))
      throw SpecError("segment region exceeds sensor bounds");
    order.push_back(&s);
  }
  std::sort(order.begin(), order.end(),
            [](const SceneSegment* a, const SceneSegment* b) {
              return a->start_us < b->start_us;
            });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i]->start_us < order[i - 1]->end_us)
      throw SpecError("scene segments overlap");
}

std::vector<Event> generate_synthetic(const SyntheticSceneSpec& spec) {
  spec.validate();

  std::vector<const SceneSegment*> order;
  for (const SceneSegment& s : spec.segments) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const SceneSegment* a, const SceneSegment* b) {
              return a->start_us < b->start_us;
            });

  Rng rng(spec.seed);

  // Accumulated change since the last event, in units of theta/2; firing
  // happens on reaching +-2. Stationary law of the kept states: P(0) = 1/2,
  // P(+1) = P(-1) = 1/4.
  std::vector<std::int8_t> level(spec.dims.area());
  for (auto& l : level) {
    const std::uint64_t r = rng.below(4);
    l = r < 2 ? 0 : (r == 2 ? 1 : -1);
  }

  constexpr double kStepsPerEvent = 4.0;
  std::vector<Event> events;
  for (const SceneSegment* seg : order) {
    if (seg->rate_eps <= 0.0) continue;
    const double steps_per_us = seg->rate_eps * kStepsPerEvent / 1e6;
    const double whole = std::floor(steps_per_us);
    const auto fixed_steps = static_cast<std::uint64_t>(whole);
    const double frac = steps_per_us - whole;
    const std::uint64_t area = seg->region.area();

    for (std::int64_t t = seg->start_us; t < seg->end_us; ++t) {
      std::uint64_t steps = fixed_steps + (rng.bernoulli(frac) ? 1 : 0);
      for (; steps > 0; --steps) {
        const std::uint64_t idx = rng.below(area);
        const auto x = seg->region.x + static_cast<std::uint32_t>(idx % seg->region.width);
        const auto y = seg->region.y + static_cast<std::uint32_t>(idx / seg->region.width);
        const std::int8_t dir = rng.coin() ? 1 : -1;
        std::int8_t& l = level[static_cast<std::size_t>(y) * spec.dims.width + x];
        l = static_cast<std::int8_t>(l + dir);
        if (l == 2 || l == -2) {
          events.push_back(Event{x, y, t, dir});
          l = 0;
        }
      }
    }
  }
  return events;
}

}  // namespace evedge
