// Copyright 2026 The even authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "even/events.hpp"
#include "even/rng.hpp"

using namespace even;

namespace {

EventStream random_stream(int n, int w, int h, double t_end, Rng& rng) {
  EventStream s;
  s.width = w;
  s.height = h;
  s.t_start = 0.0;
  s.t_end = t_end;
  std::vector<double> times(n);
  for (auto& t : times) t = uniform(rng, 0.0, t_end);
  std::sort(times.begin(), times.end());
  for (double t : times) {
    Event e;
    e.x = static_cast<std::uint16_t>(uniform_int(rng, 0, w - 1));
    e.y = static_cast<std::uint16_t>(uniform_int(rng, 0, h - 1));
    e.t = t;
    e.p = uniform_int(rng, 0, 1) ? 1 : -1;
    s.events.push_back(e);
  }
  return s;
}

}  // namespace

TEST_CASE("one-second stream stacks to exactly 8 frames at 0.125 s") {
  Rng rng = make_rng(1);
  EventStream s = random_stream(200, 32, 24, 1.0, rng);
  const auto frames = stack_events(s, 0.125);
  REQUIRE(frames.size() == 8);
}

TEST_CASE("empty stream gives one all-zero frame") {
  EventStream s;
  s.width = 8;
  s.height = 8;
  s.t_start = 0.0;
  s.t_end = 0.1;
  const auto frames = stack_events(s, 0.125);
  REQUIRE(frames.size() == 1);
  REQUIRE(frames[0].raw.max_abs() == 0.0f);
  REQUIRE(frames[0].data.max_abs() == 0.0f);
}

TEST_CASE("three events at one pixel: +1 +1 -1 gives raw +1, normalized +1") {
  EventStream s;
  s.width = 8;
  s.height = 8;
  s.t_start = 0.0;
  s.t_end = 0.125;
  for (std::int8_t p : {+1, +1, -1}) {
    Event e;
    e.x = 3;  // column
    e.y = 2;  // row
    e.t = 0.05;
    e.p = p;
    s.events.push_back(e);
  }
  const auto frames = stack_events(s, 0.125);
  REQUIRE(frames.size() == 1);
  REQUIRE(frames[0].raw(2, 3) == 1.0f);
  REQUIRE(frames[0].data(2, 3) == 1.0f);
  double sum = 0.0;
  for (std::int64_t i = 0; i < frames[0].raw.numel(); ++i)
    sum += std::abs(frames[0].raw[i]);
  REQUIRE(sum == 1.0);
}

TEST_CASE("stacking matches brute-force assignment on 10,000 random events") {
  Rng rng = make_rng(77);
  const int w = 40, h = 30;
  EventStream s = random_stream(10000, w, h, 1.0, rng);
  const double dt = 0.125;
  const auto frames = stack_events(s, dt);

  // independent oracle: half-open windows (t0, t1], t == t_start in frame 0
  std::vector<Tensor<float>> ref(frames.size(), Tensor<float>({h, w}));
  std::size_t assigned = 0;
  for (const Event& e : s.events) {
    std::size_t idx = 0;
    bool found = false;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const double t0 = s.t_start + f * dt;
      const double t1 = s.t_start + (f + 1) * dt;
      const bool in = (f == 0) ? (e.t >= t0 && e.t <= t1) : (e.t > t0 && e.t <= t1);
      if (in) {
        REQUIRE_FALSE(found);  // windowing partition: exactly one frame
        idx = f;
        found = true;
      }
    }
    REQUIRE(found);
    ref[idx](e.y, e.x) += static_cast<float>(e.p);
    ++assigned;
  }
  REQUIRE(assigned == s.events.size());
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (std::int64_t i = 0; i < ref[f].numel(); ++i)
      REQUIRE(frames[f].raw[i] == ref[f][i]);
}

TEST_CASE("conservation: sum of per-frame L1 counts equals event count") {
  Rng rng = make_rng(5);
  EventStream s = random_stream(3000, 16, 16, 0.9, rng);
  const auto frames = stack_events(s, 0.125);
  double total = 0.0;
  for (const auto& f : frames) total += f.event_count_l1();
  REQUIRE(total == Catch::Approx(3000.0));
}

TEST_CASE("polarity antisymmetry: negating polarities negates raw frames") {
  Rng rng = make_rng(6);
  EventStream s = random_stream(500, 12, 12, 0.5, rng);
  EventStream neg = s;
  for (auto& e : neg.events) e.p = static_cast<std::int8_t>(-e.p);
  const auto a = stack_events(s, 0.125);
  const auto b = stack_events(neg, 0.125);
  REQUIRE(a.size() == b.size());
  for (std::size_t f = 0; f < a.size(); ++f)
    for (std::int64_t i = 0; i < a[f].raw.numel(); ++i)
      REQUIRE(a[f].raw[i] == -b[f].raw[i]);
}

TEST_CASE("normalized frames stay within [-1, 1]") {
  Rng rng = make_rng(8);
  EventStream s = random_stream(4000, 10, 10, 1.0, rng);
  for (const auto& f : stack_events(s, 0.125))
    for (std::int64_t i = 0; i < f.data.numel(); ++i) {
      REQUIRE(f.data[i] <= 1.0f);
      REQUIRE(f.data[i] >= -1.0f);
    }
}

TEST_CASE("stack_events rejects bad input") {
  EventStream s;
  s.width = 4;
  s.height = 4;
  s.t_end = 1.0;
  REQUIRE_THROWS_AS(stack_events(s, 0.0), std::invalid_argument);
  Event bad;
  bad.x = 9;
  bad.y = 0;
  bad.t = 0.5;
  s.events.push_back(bad);
  REQUIRE_THROWS(stack_events(s, 0.125));
}

TEST_CASE("synthesizer: no change means no events") {
  Tensor<float> prev({4, 4}), next({4, 4});
  prev.fill(0.3f);
  next.fill(0.3f);
  const auto s = synthesize_events(prev, next, 0.4, 0.0, 0.125);
  REQUIRE(s.events.empty());
}

TEST_CASE("synthesizer: +0.95 at threshold 0.4 gives 2 positive events") {
  Tensor<float> prev({2, 2}), next({2, 2});
  next(0, 1) = 0.95f;
  const auto s = synthesize_events(prev, next, 0.4, 0.0, 0.125);
  REQUIRE(s.events.size() == 2);
  for (const auto& e : s.events) {
    REQUIRE(e.p == 1);
    REQUIRE(e.x == 1);
    REQUIRE(e.y == 0);
    REQUIRE(e.t > 0.0);
    REQUIRE(e.t <= 0.125);
  }
}

TEST_CASE("synthesizer: exactly -threshold gives one negative event") {
  Tensor<float> prev({1, 1}), next({1, 1});
  prev(0, 0) = 0.4f;
  next(0, 0) = 0.0f;
  const auto s = synthesize_events(prev, next, 0.4, 0.0, 0.125);
  REQUIRE(s.events.size() == 1);
  REQUIRE(s.events[0].p == -1);
}

TEST_CASE("synthesizer matches floor-count oracle on 1,000 random pixels") {
  Rng rng = make_rng(99);
  const int w = 40, h = 25;  // 1000 pixels
  Tensor<float> prev({h, w}), next({h, w});
  for (std::int64_t i = 0; i < prev.numel(); ++i) {
    prev[i] = static_cast<float>(uniform(rng, -2.0, 2.0));
    next[i] = static_cast<float>(uniform(rng, -2.0, 2.0));
  }
  const double th = 0.4;
  const auto s = synthesize_events(prev, next, th, 0.0, 0.125);
  Tensor<float> count({h, w}), polarity({h, w});
  for (const auto& e : s.events) {
    count(e.y, e.x) += 1.0f;
    polarity(e.y, e.x) = static_cast<float>(e.p);
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = static_cast<double>(next(y, x)) - prev(y, x);
      const double expected = std::floor(std::abs(d) / th);
      REQUIRE(count(y, x) == static_cast<float>(expected));
      if (expected > 0) REQUIRE(polarity(y, x) == (d > 0 ? 1.0f : -1.0f));
    }
  // sorted by time
  for (std::size_t i = 1; i < s.events.size(); ++i)
    REQUIRE(s.events[i].t >= s.events[i - 1].t);
}

TEST_CASE("synthesizer rejects shape mismatch and bad threshold") {
  Tensor<float> a({2, 2}), b({3, 2});
  REQUIRE_THROWS_AS(synthesize_events(a, b, 0.4, 0.0, 1.0), std::invalid_argument);
  Tensor<float> c({2, 2});
  REQUIRE_THROWS_AS(synthesize_events(a, c, 0.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("event_frame_to_input replicates channels") {
  EventFrame f;
  f.raw = Tensor<float>({3, 4});
  f.data = Tensor<float>({3, 4});
  f.data(1, 2) = 0.5f;
  const auto one = event_frame_to_input(f, 1);
  REQUIRE(one.dim(0) == 1);
  REQUIRE(one(0, 1, 2) == 0.5f);
  const auto three = event_frame_to_input(f, 3);
  REQUIRE(three.dim(0) == 3);
  for (int c = 0; c < 3; ++c) REQUIRE(three(c, 1, 2) == 0.5f);
  REQUIRE_THROWS_AS(event_frame_to_input(f, 2), std::invalid_argument);
}

TEST_CASE("EVS1 round trip preserves every event") {
  Rng rng = make_rng(42);
  EventStream s = random_stream(777, 33, 21, 0.7, rng);
  const std::string path = std::filesystem::temp_directory_path() / "t_events.evs";
  save_events(path, s);
  const EventStream r = load_events(path);
  REQUIRE(r.width == s.width);
  REQUIRE(r.height == s.height);
  REQUIRE(r.events.size() == s.events.size());
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    REQUIRE(r.events[i].x == s.events[i].x);
    REQUIRE(r.events[i].y == s.events[i].y);
    REQUIRE(r.events[i].t == s.events[i].t);
    REQUIRE(r.events[i].p == s.events[i].p);
  }
  std::filesystem::remove(path);
}
