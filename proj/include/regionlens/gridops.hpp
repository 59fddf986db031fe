#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace regionlens {

/// Raised for any shape or argument contract violation in the numeric core.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles. Used for per-region feature tables.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// channels x height x width grid stored flat in (c, y, x) order.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int channels, int height, int width, double fill = 0.0);
    FeatureMap(int channels, int height, int width, std::vector<double> data);

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[(c * plane()) + static_cast<std::size_t>(y) * width_ + x]; }
    double at(int c, int y, int x) const { return data_[(c * plane()) + static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> channel(int c) { return {data_.data() + c * plane(), plane()}; }
    std::span<const double> channel(int c) const { return {data_.data() + c * plane(), plane()}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;
    bool same_shape(const FeatureMap& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    bool operator==(const FeatureMap&) const = default;

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Convolution weights indexed (out, in, ky, kx) plus one bias per output channel.
/// The same layout is used for transposed convolution.
struct Kernel {
    int out_channels = 0;
    int in_channels = 0;
    int k_h = 0;
    int k_w = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    Kernel() = default;
    Kernel(int out_c, int in_c, int kh, int kw);

    double& w(int o, int i, int ky, int kx) { return weights[((static_cast<std::size_t>(o) * in_channels + i) * k_h + ky) * k_w + kx]; }
    double w(int o, int i, int ky, int kx) const { return weights[((static_cast<std::size_t>(o) * in_channels + i) * k_h + ky) * k_w + kx]; }

    /// Swaps the in/out axes; bias is reset to zero of the new out size.
    Kernel transposed() const;

    void validate() const;
    bool operator==(const Kernel&) const = default;
};

FeatureMap bilinear_resize(const FeatureMap& map, int out_h, int out_w);
FeatureMap conv2d(const FeatureMap& map, const Kernel& kernel, int stride, int padding);
FeatureMap deconv2d(const FeatureMap& map, const Kernel& kernel, int stride);
FeatureMap concat_channels(std::span<const FeatureMap> maps);

// Adjoints used by the trainer. Each returns gradients w.r.t. the op inputs
// given the gradient of a scalar loss w.r.t. the op output.

struct ConvGrads {
    FeatureMap input;
    Kernel kernel;  // weights and bias hold dL/dW, dL/db
};

FeatureMap bilinear_resize_backward(const FeatureMap& grad_out, int in_h, int in_w);
ConvGrads conv2d_backward(const FeatureMap& input, const Kernel& kernel, int stride, int padding,
                          const FeatureMap& grad_out);
ConvGrads deconv2d_backward(const FeatureMap& input, const Kernel& kernel, int stride,
                            const FeatureMap& grad_out);
/// Splits a concatenated gradient back into per-input channel blocks.
std::vector<FeatureMap> split_channels(const FeatureMap& grad, std::span<const int> channel_counts);

double frobenius_dot(const FeatureMap& a, const FeatureMap& b);

void to_json(nlohmann::json& j, const FeatureMap& map);
void from_json(const nlohmann::json& j, FeatureMap& map);
void to_json(nlohmann::json& j, const Kernel& kernel);
void from_json(const nlohmann::json& j, Kernel& kernel);

}  // namespace regionlens
