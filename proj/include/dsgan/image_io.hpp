#pragma once

// Image-folder ingestion and PNG output (OpenCV codecs).

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dsgan/data.hpp"
#include "dsgan/error.hpp"

namespace dsgan {

struct FolderLoad {
    Dataset<float> data;
    std::vector<std::string> files;          // loaded files, in dataset order
    std::vector<std::string> skipped;        // undecodable files
    std::vector<std::string> class_names;    // subdirectory names when labelled
};

namespace detail {

inline bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    static const char* known[] = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".pnm", ".tif", ".tiff", ".webp"};
    return std::find_if(std::begin(known), std::end(known), [&](const char* k) { return ext == k; }) != std::end(known);
}

/// Decoded image as planar float in [0, 1] (RGB order for 3 channels).
inline std::vector<float> to_planar(const cv::Mat& img, int channels) {
    cv::Mat f;
    img.convertTo(f, channels == 1 ? CV_32FC1 : CV_32FC3, img.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0);
    if (channels == 3) cv::cvtColor(f, f, cv::COLOR_BGR2RGB);
    std::vector<cv::Mat> planes;
    cv::split(f, planes);
    std::vector<float> out(static_cast<std::size_t>(channels) * f.rows * f.cols);
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < f.rows; ++y)
            std::copy_n(planes[c].ptr<float>(y), f.cols, out.data() + (static_cast<std::size_t>(c) * f.rows + y) * f.cols);
    return out;
}

}  // namespace detail

/// Loads every image under `root` (sorted paths), resized to n x n and scaled
/// to [-1, 1]. When every image sits in a direct subdirectory, the sorted
/// subdirectory names become class labels. Undecodable files are skipped and
/// reported on stderr.
inline FolderLoad load_image_folder(const std::string& root, int n, int channels = 3) {
    namespace fs = std::filesystem;
    detail::require(n >= 8, "load_image_folder: n must be >= 8");
    detail::require(channels == 1 || channels == 3, "load_image_folder: channels must be 1 or 3");
    if (!fs::is_directory(root)) throw std::invalid_argument("load_image_folder: not a directory: " + root);

    std::vector<fs::path> paths;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && detail::has_image_extension(e.path())) paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());

    const fs::path base = fs::path(root).lexically_normal();
    bool labelled = !paths.empty();
    std::map<std::string, int> classes;
    for (const auto& p : paths) {
        const fs::path rel = p.lexically_relative(base);
        if (std::distance(rel.begin(), rel.end()) != 2) labelled = false;
        else classes.emplace(rel.begin()->string(), 0);
    }

    FolderLoad out;
    if (labelled) {
        int k = 0;
        for (auto& [name, idx] : classes) {
            idx = k++;
            out.class_names.push_back(name);
        }
    }
    std::vector<std::vector<float>> images;
    std::vector<int> labels;
    for (const auto& p : paths) {
        cv::Mat img = cv::imread(p.string(), channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
        if (img.empty()) {
            std::cerr << "warning: skipping undecodable image " << p.string() << '\n';
            out.skipped.push_back(p.string());
            continue;
        }
        const auto planar = detail::to_planar(img, channels);
        std::vector<float> resized(static_cast<std::size_t>(channels) * n * n);
        resize_bilinear(planar.data(), channels, img.rows, img.cols, resized.data(), n, n);
        for (auto& v : resized) v = std::clamp(v * 2.0f - 1.0f, -1.0f, 1.0f);
        images.push_back(std::move(resized));
        out.files.push_back(p.string());
        if (labelled) labels.push_back(classes.at(p.lexically_relative(base).begin()->string()));
    }
    if (!out.skipped.empty())
        std::cerr << "load_image_folder: " << out.files.size() << " loaded, " << out.skipped.size() << " skipped\n";

    out.data.images = Tensor<float>(static_cast<int>(images.size()), channels, n, n);
    for (std::size_t i = 0; i < images.size(); ++i)
        std::copy(images[i].begin(), images[i].end(), out.data.images.data() + i * out.data.images.sample_size());
    if (labelled) {
        out.data.labels = std::move(labels);
        out.data.num_classes = static_cast<int>(out.class_names.size());
    }
    return out;
}

/// Writes images in [-1, 1] as a PNG grid with `cols` columns.
inline void save_image_grid(const std::string& path, const Tensor<float>& x, int cols = 8, int pad = 2) {
    detail::require(x.n() > 0, "save_image_grid: empty batch");
    cols = std::min(cols, x.n());
    const int rows = (x.n() + cols - 1) / cols;
    const int h = x.h(), w = x.w();
    cv::Mat canvas(rows * (h + pad) + pad, cols * (w + pad) + pad, CV_8UC3, cv::Scalar(255, 255, 255));
    auto to_u8 = [](float v) { return static_cast<unsigned char>(std::lround(std::clamp((v + 1.0f) * 127.5f, 0.0f, 255.0f))); };
    for (int i = 0; i < x.n(); ++i) {
        const int oy = pad + (i / cols) * (h + pad), ox = pad + (i % cols) * (w + pad);
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                auto& px = canvas.at<cv::Vec3b>(oy + y, ox + xx);
                if (x.c() == 1) {
                    px = cv::Vec3b::all(to_u8(x(i, 0, y, xx)));
                } else {
                    px = cv::Vec3b(to_u8(x(i, 2, y, xx)), to_u8(x(i, 1, y, xx)), to_u8(x(i, 0, y, xx)));
                }
            }
    }
    if (!cv::imwrite(path, canvas)) throw std::runtime_error("cannot write image " + path);
}

}  // namespace dsgan
