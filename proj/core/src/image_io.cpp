// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace dpanet {

namespace {

cv::Mat read_or_throw(const std::string& path, int flags) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("missing file: " + path);
    cv::Mat m = cv::imread(path, flags);
    if (m.empty()) throw std::runtime_error("undecodable or zero-sized image: " + path);
    if (m.rows < 1 || m.cols < 1) throw std::runtime_error("zero-sized image: " + path);
    return m;
}

uint8_t to_byte(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

void write_png(const std::string& path, const cv::Mat& m) {
    if (!cv::imwrite(path, m, {cv::IMWRITE_PNG_COMPRESSION, 6}))
        throw std::runtime_error("cannot write PNG: " + path);
}

}  // namespace

GrayImage load_gray(const std::string& path) {
    cv::Mat m = read_or_throw(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
    GrayImage out = make_gray(m.rows, m.cols, PixelMode::byte_range);
    if (m.depth() == CV_16U) {
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x)
                out.at(y, x) = std::round(m.at<uint16_t>(y, x) * 255.0 / 65535.0);
    } else if (m.depth() == CV_8U) {
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x) out.at(y, x) = m.at<uint8_t>(y, x);
    } else {
        cv::Mat m8;
        m.convertTo(m8, CV_8U);
        for (int y = 0; y < m8.rows; ++y)
            for (int x = 0; x < m8.cols; ++x) out.at(y, x) = m8.at<uint8_t>(y, x);
    }
    return out;
}

ColorImage load_color(const std::string& path) {
    cv::Mat m = read_or_throw(path, cv::IMREAD_COLOR);  // BGR, 8-bit
    ColorImage out = make_color(m.rows, m.cols, PixelMode::byte_range);
    const size_t plane = out.pixels();
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            const cv::Vec3b px = m.at<cv::Vec3b>(y, x);
            const size_t i = static_cast<size_t>(y) * m.cols + x;
            out.values[0 * plane + i] = px[2];  // R
            out.values[1 * plane + i] = px[1];  // G
            out.values[2 * plane + i] = px[0];  // B
        }
    }
    return out;
}

BinaryMask load_mask(const std::string& path) {
    return to_binary(load_gray(path), 127.0);
}

void save_gray_png(const std::string& path, const GrayImage& img) {
    cv::Mat m(img.height, img.width, CV_8U);
    const double s = img.mode == PixelMode::unit_range ? 255.0 : 1.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) m.at<uint8_t>(y, x) = to_byte(img.at(y, x) * s);
    write_png(path, m);
}

void save_mask_png(const std::string& path, const BinaryMask& mask) {
    cv::Mat m(mask.height, mask.width, CV_8U);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) m.at<uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
    write_png(path, m);
}

void save_saliency_png(const std::string& path, const GrayImage& unit_map) {
    cv::Mat m(unit_map.height, unit_map.width, CV_8U);
    for (int y = 0; y < unit_map.height; ++y)
        for (int x = 0; x < unit_map.width; ++x)
            m.at<uint8_t>(y, x) = to_byte(unit_map.at(y, x) * 255.0);
    write_png(path, m);
}

void save_color_png(const std::string& path, const ColorImage& img) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    const double s = img.mode == PixelMode::unit_range ? 255.0 : 1.0;
    const size_t plane = img.pixels();
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const size_t i = static_cast<size_t>(y) * img.width + x;
            m.at<cv::Vec3b>(y, x) = cv::Vec3b(to_byte(img.values[2 * plane + i] * s),
                                              to_byte(img.values[1 * plane + i] * s),
                                              to_byte(img.values[0 * plane + i] * s));
        }
    }
    write_png(path, m);
}

}  // namespace dpanet
