#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cscl4 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Single-channel image, row-major.
struct Image2 {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image2() = default;
    Image2(int h, int w, double fill = 0.0);

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image2& o) const { return height == o.height && width == o.width; }
};

// Channel-major, then row, then column.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, double fill = 0.0);

    double& operator()(int k, int r, int c) {
        return data[(static_cast<std::size_t>(k) * height + r) * width + c];
    }
    double operator()(int k, int r, int c) const {
        return data[(static_cast<std::size_t>(k) * height + r) * width + c];
    }
    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    bool same_shape(const Tensor3& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    Image2 channel(int k) const;
    void set_channel(int k, const Image2& img);

    // channels x (height*width) view
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_matrix() const;
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_matrix();
};

Tensor3 to_tensor(const Image2& img);
Image2 to_image(const Tensor3& t); // requires one channel

double norm2(std::span<const double> v);
double sum_squares(std::span<const double> v);
bool all_finite(std::span<const double> v);
void require_finite(std::span<const double> v, const char* what);

// K filters of fh x fw. Rows of `weights` are vectorized filters (row-major).
struct FilterBank {
    int count = 0;
    int fh = 0;
    int fw = 0;
    int channels = 1;
    bool orthogonal = false;
    Matrix weights; // count x (channels*fh*fw)

    FilterBank() = default;
    FilterBank(int k, int fh, int fw, int channels, bool orthogonal_mode);

    int dim() const { return channels * fh * fw; }
    Image2 filter(int k) const; // single-channel banks only
    void set_filter(int k, const Image2& f);
    // Throws NumericError if the invariant for the current mode is violated.
    void check_invariants(double tol = 1e-8) const;
};

} // namespace cscl4

namespace cscl4 {

// out(:, pos) = P * t(:, pos) at every spatial position.
Tensor3 mix_channels(const Matrix& P, const Tensor3& t);

} // namespace cscl4
