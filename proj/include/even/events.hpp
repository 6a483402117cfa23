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

#ifndef EVEN_EVENTS_HPP
#define EVEN_EVENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/tensor.hpp"

namespace even {

/// One asynchronous brightness-change record.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t = 0.0;       // seconds
  std::int8_t p = 1;    // polarity, +1 or -1
};

struct EventStream {
  std::vector<Event> events;  // non-decreasing in t
  int width = 0, height = 0;
  double t_start = 0.0, t_end = 0.0;

  void validate() const {
    double prev = t_start;
    for (const Event& e : events) {
      if (e.x >= width || e.y >= height)
        throw std::runtime_error("EventStream: event outside resolution");
      if (e.p != 1 && e.p != -1)
        throw std::runtime_error("EventStream: polarity must be +1/-1");
      if (e.t < prev || e.t > t_end)
        throw std::runtime_error("EventStream: timestamps unsorted or out of range");
      prev = e.t;
    }
  }
};

/// Fixed-window 2-D accumulation of events. `raw` keeps the signed polarity
/// sums (colliding +/- events cancel); `count` keeps the unsigned per-pixel
/// event counts; `data` is raw divided by its max-abs value (all-zero if no
/// events).
struct EventFrame {
  Tensor<float> raw;    // H x W signed polarity sums
  Tensor<float> count;  // H x W events per pixel
  Tensor<float> data;   // H x W normalized to [-1, 1]
  double t0 = 0.0, t1 = 0.0;

  /// Total number of events assigned to this window.
  double event_count_l1() const {
    double s = 0.0;
    for (std::int64_t i = 0; i < count.numel(); ++i) s += count[i];
    return s;
  }
};

/// Stacks events into ceil((t_end - t_start)/delta_t) frames. Windows are
/// half-open (t0, t1]; an event with t == t_start goes into the first frame.
inline std::vector<EventFrame> stack_events(const EventStream& stream,
                                            double delta_t) {
  if (delta_t <= 0.0) throw std::invalid_argument("stack_events: delta_t <= 0");
  if (stream.width <= 0 || stream.height <= 0)
    throw std::invalid_argument("stack_events: unknown resolution");

  const double span = stream.t_end - stream.t_start;
  const int n_frames = std::max(1, static_cast<int>(std::ceil(span / delta_t - 1e-12)));

  std::vector<EventFrame> frames(static_cast<size_t>(n_frames));
  for (int f = 0; f < n_frames; ++f) {
    frames[f].raw = Tensor<float>({stream.height, stream.width});
    frames[f].count = Tensor<float>({stream.height, stream.width});
    frames[f].t0 = stream.t_start + f * delta_t;
    frames[f].t1 = stream.t_start + (f + 1) * delta_t;
  }

  for (const Event& e : stream.events) {
    if (e.x >= stream.width || e.y >= stream.height)
      throw std::runtime_error("stack_events: event outside resolution");
    // (t0, t1] windows, except t == t_start which belongs to frame 0
    int f = static_cast<int>(std::ceil((e.t - stream.t_start) / delta_t)) - 1;
    f = std::clamp(f, 0, n_frames - 1);
    frames[f].raw(e.y, e.x) += static_cast<float>(e.p);
    frames[f].count(e.y, e.x) += 1.0f;
  }

  for (EventFrame& fr : frames) {
    fr.data = fr.raw;
    const float m = fr.raw.max_abs();
    if (m > 0.0f)
      for (std::int64_t i = 0; i < fr.data.numel(); ++i) fr.data[i] /= m;
  }
  return frames;
}

/// Threshold-model event synthesizer: per pixel emits floor(|dL|/threshold)
/// events of polarity sign(dL), timestamps evenly spaced in (t0, t1].
inline EventStream synthesize_events(const Tensor<float>& log_prev,
                                     const Tensor<float>& log_next,
                                     double threshold, double t0, double t1) {
  if (!log_prev.same_shape(log_next))
    throw std::invalid_argument("synthesize_events: shape mismatch");
  if (threshold <= 0.0)
    throw std::invalid_argument("synthesize_events: threshold <= 0");

  const int h = log_prev.dim(0), w = log_prev.dim(1);
  EventStream out;
  out.width = w;
  out.height = h;
  out.t_start = t0;
  out.t_end = t1;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = static_cast<double>(log_next(y, x)) - log_prev(y, x);
      const int n = static_cast<int>(std::floor(std::abs(d) / threshold));
      if (n == 0) continue;
      const std::int8_t p = d > 0 ? 1 : -1;
      for (int i = 0; i < n; ++i) {
        Event e;
        e.x = static_cast<std::uint16_t>(x);
        e.y = static_cast<std::uint16_t>(y);
        e.t = t0 + (t1 - t0) * static_cast<double>(i + 1) / n;
        e.p = p;
        out.events.push_back(e);
      }
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return out;
}

/// Replicates a normalized 1-channel frame into the fusion net input layout.
inline Tensor<float> event_frame_to_input(const EventFrame& frame, int channels) {
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("event_frame_to_input: channels must be 1 or 3");
  const int h = frame.data.dim(0), w = frame.data.dim(1);
  Tensor<float> out({channels, h, w});
  for (int c = 0; c < channels; ++c)
    std::copy(frame.data.data(), frame.data.data() + frame.data.numel(),
              out.data() + static_cast<std::int64_t>(c) * h * w);
  return out;
}

// ---------------------------------------------------------------------------
// EVS1 binary format: "EVS1", u16 W, u16 H, then per event
// u16 x, u16 y, f64 t, i8 p, all little-endian.
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}
template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace detail

inline void write_events(std::ostream& os, const EventStream& stream) {
  os.write("EVS1", 4);
  detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(stream.width));
  detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(stream.height));
  for (const Event& e : stream.events) {
    detail::write_le<std::uint16_t>(os, e.x);
    detail::write_le<std::uint16_t>(os, e.y);
    detail::write_le<double>(os, e.t);
    detail::write_le<std::int8_t>(os, e.p);
  }
}

inline void save_events(const std::string& path, const EventStream& stream) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_events: cannot open " + path);
  write_events(os, stream);
}

/// t_start is taken as 0 and t_end as the last timestamp; callers that know
/// the true capture window should override both.
inline EventStream load_events(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_events: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "EVS1")
    throw std::runtime_error("load_events: bad magic in " + path);
  EventStream out;
  out.width = detail::read_le<std::uint16_t>(is);
  out.height = detail::read_le<std::uint16_t>(is);
  while (true) {
    Event e;
    e.x = detail::read_le<std::uint16_t>(is);
    if (!is) break;
    e.y = detail::read_le<std::uint16_t>(is);
    e.t = detail::read_le<double>(is);
    e.p = detail::read_le<std::int8_t>(is);
    if (!is) throw std::runtime_error("load_events: truncated record in " + path);
    out.events.push_back(e);
  }
  if (!out.events.empty()) out.t_end = out.events.back().t;
  return out;
}

}  // namespace even

#endif  // EVEN_EVENTS_HPP
