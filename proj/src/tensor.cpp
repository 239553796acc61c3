#include "cscl4/tensor.hpp"

#include <cmath>
#include <string>

#include "cscl4/error.hpp"

namespace cscl4 {

Image2::Image2(int h, int w, double fill) : height(h), width(w) {
    if (h < 0 || w < 0) throw DimensionError("negative image extent");
    data.assign(static_cast<std::size_t>(h) * w, fill);
}

Tensor3::Tensor3(int c, int h, int w, double fill) : channels(c), height(h), width(w) {
    if (c < 0 || h < 0 || w < 0) throw DimensionError("negative tensor extent");
    data.assign(static_cast<std::size_t>(c) * h * w, fill);
}

Image2 Tensor3::channel(int k) const {
    if (k < 0 || k >= channels) throw DimensionError("channel index out of range");
    Image2 out(height, width);
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(k * plane()), plane(), out.data.begin());
    return out;
}

void Tensor3::set_channel(int k, const Image2& img) {
    if (k < 0 || k >= channels) throw DimensionError("channel index out of range");
    if (img.height != height || img.width != width) throw DimensionError("channel shape mismatch");
    std::copy(img.data.begin(), img.data.end(), data.begin() + static_cast<std::ptrdiff_t>(k * plane()));
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Tensor3::as_matrix() const {
    return {data.data(), channels, static_cast<Eigen::Index>(plane())};
}

Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Tensor3::as_matrix() {
    return {data.data(), channels, static_cast<Eigen::Index>(plane())};
}

Tensor3 to_tensor(const Image2& img) {
    Tensor3 t(1, img.height, img.width);
    t.data = img.data;
    return t;
}

Image2 to_image(const Tensor3& t) {
    if (t.channels != 1) throw DimensionError("expected a single-channel tensor, got " + std::to_string(t.channels));
    Image2 img(t.height, t.width);
    img.data = t.data;
    return img;
}

double sum_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(sum_squares(v)); }

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void require_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v)) throw NumericError(std::string("non-finite value in ") + what);
}

FilterBank::FilterBank(int k, int h, int w, int c, bool orthogonal_mode)
    : count(k), fh(h), fw(w), channels(c), orthogonal(orthogonal_mode) {
    if (k < 1 || h < 1 || w < 1 || c < 1) throw DimensionError("filter bank extents must be positive");
    if (orthogonal_mode && k > c * h * w)
        throw DimensionError("orthogonal filter bank needs count <= " + std::to_string(c * h * w));
    weights = Matrix::Zero(k, c * h * w);
}

Image2 FilterBank::filter(int k) const {
    if (channels != 1) throw DimensionError("filter() needs a single-channel bank");
    Image2 f(fh, fw);
    for (int i = 0; i < fh * fw; ++i) f.data[i] = weights(k, i);
    return f;
}

void FilterBank::set_filter(int k, const Image2& f) {
    if (channels != 1 || f.height != fh || f.width != fw) throw DimensionError("filter shape mismatch");
    for (int i = 0; i < fh * fw; ++i) weights(k, i) = f.data[i];
}

void FilterBank::check_invariants(double tol) const {
    if (!weights.allFinite()) throw NumericError("non-finite filter weights");
    if (orthogonal) {
        const Matrix gram = weights * weights.transpose();
        const double dev = (gram - Matrix::Identity(count, count)).cwiseAbs().maxCoeff();
        if (dev > tol) throw NumericError("filter rows lost orthonormality, deviation " + std::to_string(dev));
    } else {
        for (int k = 0; k < count; ++k)
            if (weights.row(k).squaredNorm() > 1.0 + 1e-9)
                throw NumericError("filter " + std::to_string(k) + " exceeds the unit ball");
    }
}

} // namespace cscl4

namespace cscl4 {

Tensor3 mix_channels(const Matrix& P, const Tensor3& t) {
    if (P.cols() != t.channels)
        throw DimensionError("channel map expects " + std::to_string(P.cols()) + " channels, code has " +
                             std::to_string(t.channels));
    Tensor3 out(static_cast<int>(P.rows()), t.height, t.width);
    out.as_matrix() = P * t.as_matrix();
    return out;
}

} // namespace cscl4
