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

#ifndef EVEN_PLOT_HPP
#define EVEN_PLOT_HPP

#include <algorithm>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/evaluate.hpp"

namespace even {

/// Plain line plot of per-epoch loss values.
inline void plot_loss_curve(const std::vector<double>& loss,
                            const std::string& path,
                            const std::string& title = "loss") {
  const int w = 640, h = 400, margin = 48;
  cv::Mat img(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::rectangle(img, {margin, margin / 2}, {w - margin / 2, h - margin},
                cv::Scalar(0, 0, 0));
  cv::putText(img, title, {margin, margin / 2 - 6}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0));
  if (!loss.empty()) {
    const double lo = *std::min_element(loss.begin(), loss.end());
    const double hi = *std::max_element(loss.begin(), loss.end());
    const double span = std::max(hi - lo, 1e-12);
    cv::putText(img, cv::format("%.4g", hi), {2, margin / 2 + 12},
                cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    cv::putText(img, cv::format("%.4g", lo), {2, h - margin},
                cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    cv::Point prev;
    for (size_t i = 0; i < loss.size(); ++i) {
      const int x = margin + static_cast<int>((w - 1.5 * margin) * i /
                                              std::max<size_t>(loss.size() - 1, 1));
      const int y = h - margin -
                    static_cast<int>((h - 1.5 * margin) * (loss[i] - lo) / span);
      const cv::Point p(x, y);
      if (i) cv::line(img, prev, p, cv::Scalar(180, 60, 20), 2);
      prev = p;
    }
  }
  if (!cv::imwrite(path, img))
    throw std::runtime_error("plot_loss_curve: cannot write " + path);
}

/// One bar per table row for a single metric (default abs_rel).
inline void plot_metric_bars(const MetricsTable& rows, const std::string& path,
                             const std::string& metric = "abs_rel") {
  const int w = 720, h = 420, margin = 56;
  cv::Mat img(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::putText(img, metric, {margin, margin / 2}, cv::FONT_HERSHEY_SIMPLEX, 0.6,
              cv::Scalar(0, 0, 0));
  if (!rows.empty()) {
    auto value = [&](const MetricsReport& r) {
      if (metric == "abs_rel") return r.abs_rel;
      if (metric == "sq_rel") return r.sq_rel;
      if (metric == "rmse") return r.rmse;
      if (metric == "log10") return r.log10;
      if (metric == "alpha1") return r.alpha1;
      if (metric == "alpha2") return r.alpha2;
      if (metric == "alpha3") return r.alpha3;
      throw std::invalid_argument("plot_metric_bars: unknown metric " + metric);
    };
    double hi = 1e-12;
    for (const auto& [_, r] : rows) hi = std::max(hi, value(r));
    const int bar_w = (w - 2 * margin) / static_cast<int>(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      const double v = value(rows[i].second);
      const int x0 = margin + static_cast<int>(i) * bar_w;
      const int bh = static_cast<int>((h - 2.5 * margin) * v / hi);
      cv::rectangle(img, {x0 + 4, h - margin - bh}, {x0 + bar_w - 4, h - margin},
                    cv::Scalar(60, 120, 200), cv::FILLED);
      cv::putText(img, cv::format("%.3f", v), {x0 + 4, h - margin - bh - 4},
                  cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
      cv::putText(img, rows[i].first, {x0 + 2, h - margin + 16},
                  cv::FONT_HERSHEY_SIMPLEX, 0.35, cv::Scalar(0, 0, 0));
    }
  }
  if (!cv::imwrite(path, img))
    throw std::runtime_error("plot_metric_bars: cannot write " + path);
}

}  // namespace even

#endif  // EVEN_PLOT_HPP
