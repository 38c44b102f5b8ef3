#pragma once

// Static line charts rendered with OpenCV drawing primitives.

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "dsgan/error.hpp"

namespace dsgan {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label = "iteration";
    std::string y_label;
    int width = 900;
    int height = 540;
};

namespace detail {

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline cv::Scalar palette(std::size_t i) {
    static const cv::Scalar colours[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
                                         {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};
    return colours[i % std::size(colours)];
}

}  // namespace detail

/// Draws `series` on shared axes and writes a PNG. Non-finite points are skipped.
inline void save_line_plot(const std::string& path, const std::vector<Series>& series, const PlotOptions& opt = {}) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        detail::require(s.x.size() == s.y.size(), "save_line_plot: x/y length mismatch in " + s.name);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x1 = x0 + 1;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double ypad = 0.05 * (y1 - y0);
    y0 -= ypad;
    y1 += ypad;

    const int left = 80, right = 190, top = 40, bottom = 60;
    const int pw = opt.width - left - right, ph = opt.height - top - bottom;
    cv::Mat img(opt.height, opt.width, CV_8UC3, cv::Scalar(255, 255, 255));
    auto px = [&](double x, double y) {
        return cv::Point(left + static_cast<int>(std::lround((x - x0) / (x1 - x0) * pw)),
                         top + ph - static_cast<int>(std::lround((y - y0) / (y1 - y0) * ph)));
    };
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    const cv::Scalar black(0, 0, 0), grey(220, 220, 220);
    for (int t = 0; t <= 5; ++t) {
        const double xv = x0 + (x1 - x0) * t / 5, yv = y0 + (y1 - y0) * t / 5;
        const cv::Point pxv = px(xv, y0), pyv = px(x0, yv);
        cv::line(img, {pxv.x, top}, {pxv.x, top + ph}, grey, 1);
        cv::line(img, {left, pyv.y}, {left + pw, pyv.y}, grey, 1);
        cv::putText(img, detail::tick_label(xv), {pxv.x - 20, top + ph + 20}, font, 0.4, black, 1, cv::LINE_AA);
        cv::putText(img, detail::tick_label(yv), {5, pyv.y + 4}, font, 0.4, black, 1, cv::LINE_AA);
    }
    cv::rectangle(img, {left, top}, {left + pw, top + ph}, black, 1);
    cv::putText(img, opt.title, {left, top - 15}, font, 0.6, black, 1, cv::LINE_AA);
    cv::putText(img, opt.x_label, {left + pw / 2 - 30, opt.height - 15}, font, 0.5, black, 1, cv::LINE_AA);
    if (!opt.y_label.empty()) cv::putText(img, opt.y_label, {5, top - 15}, font, 0.45, black, 1, cv::LINE_AA);

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const cv::Scalar colour = detail::palette(k);
        std::vector<cv::Point> run;
        auto flush = [&] {
            if (run.size() >= 2) cv::polylines(img, run, false, colour, 2, cv::LINE_AA);
            else if (run.size() == 1) cv::circle(img, run[0], 2, colour, cv::FILLED);
            run.clear();
        };
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) run.push_back(px(s.x[i], s.y[i]));
            else flush();
        }
        flush();
        const int ly = top + 20 + static_cast<int>(k) * 22;
        cv::line(img, {left + pw + 15, ly - 4}, {left + pw + 40, ly - 4}, colour, 2, cv::LINE_AA);
        cv::putText(img, s.name, {left + pw + 45, ly}, font, 0.45, black, 1, cv::LINE_AA);
    }
    if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write plot " + path);
}

}  // namespace dsgan
