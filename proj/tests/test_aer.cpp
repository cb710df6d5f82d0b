#include "doctest.h"

#include <sstream>

#include "evedge/aer.hpp"
#include "evedge/error.hpp"
#include "support.hpp"

using namespace evedge;

TEST_CASE("parse_aer maps fields directly") {
  const auto ev = parse_aer(std::string_view("100 3 5 1\n"), {8, 8});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0] == Event{3, 5, 100, 1});
}

TEST_CASE("parse_aer of empty input is empty") {
  CHECK(parse_aer(std::string_view(""), {8, 8}).empty());
  CHECK(parse_aer(std::string_view("# t x y p\n\n"), {8, 8}).empty());
}

TEST_CASE("parse_aer rejects out-of-bounds coordinates") {
  CHECK_THROWS_AS(parse_aer(std::string_view("100 9 5 1"), {8, 8}), BoundsError);
  CHECK_THROWS_AS(parse_aer(std::string_view("100 3 8 1"), {8, 8}), BoundsError);
}

TEST_CASE("parse_aer reports malformed lines with their number") {
  try {
    parse_aer(std::string_view("1 0 0 1\n2 0 0\n"), {8, 8});
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_aer(std::string_view("1 0 0 2"), {8, 8}), ParseError);
  CHECK_THROWS_AS(parse_aer(std::string_view("-1 0 0 1"), {8, 8}), ParseError);
  CHECK_THROWS_AS(parse_aer(std::string_view("1 a 0 1"), {8, 8}), ParseError);
}

TEST_CASE("polarity 0 maps to -1") {
  const auto ev = parse_aer(std::string_view("1 0 0 0\n2 0 0 -1\n3 0 0 1"), {1, 1});
  CHECK(ev[0].p == -1);
  CHECK(ev[1].p == -1);
  CHECK(ev[2].p == 1);
}

TEST_CASE("decimal-second timestamps scale exactly") {
  CHECK(parse_timestamp_us("0.000001") == 1);
  CHECK(parse_timestamp_us("1.5") == 1'500'000);
  CHECK(parse_timestamp_us("12.345678") == 12'345'678);
  CHECK(parse_timestamp_us("0.1") == 100'000);
  CHECK(parse_timestamp_us("3.0000019") == 3'000'001);  // sub-us digits truncated
  CHECK(parse_timestamp_us("250") == 250);
  CHECK_THROWS_AS(parse_timestamp_us("1.2.3"), ParseError);
  CHECK_THROWS_AS(parse_timestamp_us(""), ParseError);
}

TEST_CASE("parse after serialize is the identity") {
  Rng rng(11);
  const SensorDims dims{64, 32};
  for (int trial = 0; trial < 20; ++trial) {
    const auto ev = testing::random_events(rng, dims, 300, 0, 1'000'000);
    CHECK(parse_aer(serialize_aer(ev), dims) == ev);
  }
}

TEST_CASE("window keeps the half-open interval") {
  const std::vector<Event> ev{{0, 0, 5, 1}, {0, 0, 10, 1}, {0, 0, 20, 1}};
  const EventWindow w = window(ev, 10, 20);
  REQUIRE(w.events.size() == 1);
  CHECK(w.events[0].t == 10);
  CHECK(w.dropped == 2);
  CHECK(window(ev, 0, 100).dropped == 0);
}

TEST_CASE("window errors") {
  const std::vector<Event> unsorted{{0, 0, 5, 1}, {0, 0, 4, 1}};
  CHECK_THROWS_AS(window(unsorted, 0, 10), OrderingError);
  CHECK_THROWS_AS(window({}, 5, 5), DomainError);
}

TEST_CASE("window equals a brute-force filter and is idempotent") {
  Rng rng(3);
  const SensorDims dims{16, 16};
  for (int trial = 0; trial < 50; ++trial) {
    const auto ev = testing::random_events(rng, dims, 1000, 0, 10'000);
    const std::int64_t a = testing::uniform(rng, -100, 9'000);
    const std::int64_t b = a + testing::uniform(rng, 1, 3'000);
    std::vector<Event> expect;
    for (const Event& e : ev)
      if (e.t >= a && e.t < b) expect.push_back(e);
    const EventWindow w = window(ev, a, b);
    CHECK(w.events == expect);
    CHECK(w.dropped == ev.size() - expect.size());
    CHECK(window(w.events, a, b).events == w.events);
  }
}

namespace {

SyntheticSceneSpec one_segment(double rate, std::int64_t duration, std::uint64_t seed) {
  SyntheticSceneSpec s;
  s.dims = {32, 32};
  s.duration_us = duration;
  s.seed = seed;
  s.segments.push_back({0, duration, rate, Rect{0, 0, 32, 32}});
  return s;
}

}  // namespace

TEST_CASE("synthetic: zero rates give no events") {
  auto s = one_segment(0.0, 1'000'000, 1);
  CHECK(generate_synthetic(s).empty());
}

TEST_CASE("synthetic: deterministic and sorted") {
  const auto s = one_segment(20'000, 200'000, 5);
  const auto a = generate_synthetic(s);
  const auto b = generate_synthetic(s);
  CHECK(a == b);
  CHECK(is_time_sorted(a));
  auto other = s;
  other.seed = 6;
  CHECK(generate_synthetic(other) != a);
}

TEST_CASE("synthetic: 10000 ev/s over 1 s yields 10000 +- 1000 events") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto ev = generate_synthetic(one_segment(10'000, 1'000'000, seed));
    CHECK(ev.size() >= 9'000);
    CHECK(ev.size() <= 11'000);
  }
}

TEST_CASE("synthetic: per-segment rates and regions are honoured") {
  SyntheticSceneSpec s;
  s.dims = {40, 30};
  s.duration_us = 3'000'000;
  s.seed = 9;
  s.segments = {{0, 1'000'000, 2'000, Rect{0, 0, 40, 30}},
                {1'000'000, 2'000'000, 50'000, Rect{10, 5, 8, 6}},
                {2'000'000, 3'000'000, 1'200'000, Rect{0, 0, 20, 30}}};
  const auto ev = generate_synthetic(s);
  for (const SceneSegment& seg : s.segments) {
    std::size_t n = 0;
    for (const Event& e : ev)
      if (e.t >= seg.start_us && e.t < seg.end_us) {
        ++n;
        CHECK(e.x >= seg.region.x);
        CHECK(e.x < seg.region.x + seg.region.width);
        CHECK(e.y >= seg.region.y);
        CHECK(e.y < seg.region.y + seg.region.height);
      }
    const double expect = seg.rate_eps * static_cast<double>(seg.end_us - seg.start_us) / 1e6;
    CHECK(std::abs(static_cast<double>(n) - expect) <= 0.1 * expect);
  }
}

TEST_CASE("synthetic: invalid specs") {
  auto s = one_segment(100, 1000, 1);
  s.segments[0].region = Rect{0, 0, 0, 5};
  CHECK_THROWS_AS(generate_synthetic(s), SpecError);
  s = one_segment(100, 1000, 1);
  s.segments.push_back({500, 1000, 10, Rect{0, 0, 1, 1}});
  CHECK_THROWS_AS(generate_synthetic(s), SpecError);
  s = one_segment(100, 1000, 1);
  s.segments[0].end_us = 2000;
  CHECK_THROWS_AS(generate_synthetic(s), SpecError);
  s = one_segment(-1, 1000, 1);
  CHECK_THROWS_AS(generate_synthetic(s), SpecError);
}
