#include "cscl4/conv.hpp"

#include <complex>
#include <mutex>

#include <fftw3.h>

#include "cscl4/error.hpp"

namespace cscl4 {

namespace {

void require_nonempty(const Image2& a, const char* what) {
    if (a.height < 1 || a.width < 1) throw DimensionError(std::string(what) + " is empty");
}

void require_fits(const Image2& image, const Image2& filter) {
    require_nonempty(image, "image");
    require_nonempty(filter, "filter");
    if (filter.height > image.height || filter.width > image.width)
        throw DimensionError("filter support larger than image");
}

// FFTW planning is not thread-safe.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

Image2 conv2_valid(const Image2& image, const Image2& filter) {
    require_fits(image, filter);
    const int fh = filter.height, fw = filter.width;
    Image2 out(image.height - fh + 1, image.width - fw + 1);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c) {
            double s = 0.0;
            for (int a = 0; a < fh; ++a)
                for (int b = 0; b < fw; ++b) s += filter(a, b) * image(r + fh - 1 - a, c + fw - 1 - b);
            out(r, c) = s;
        }
    return out;
}

Image2 correlate2_valid(const Image2& image, const Image2& filter) {
    require_fits(image, filter);
    const int fh = filter.height, fw = filter.width;
    Image2 out(image.height - fh + 1, image.width - fw + 1);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c) {
            double s = 0.0;
            for (int a = 0; a < fh; ++a)
                for (int b = 0; b < fw; ++b) s += filter(a, b) * image(r + a, c + b);
            out(r, c) = s;
        }
    return out;
}

Image2 conv2_full(const Image2& a, const Image2& b) {
    require_nonempty(a, "first operand");
    require_nonempty(b, "second operand");
    Image2 out(a.height + b.height - 1, a.width + b.width - 1);
    for (int i = 0; i < a.height; ++i)
        for (int j = 0; j < a.width; ++j) {
            const double v = a(i, j);
            if (v == 0.0) continue;
            for (int p = 0; p < b.height; ++p)
                for (int q = 0; q < b.width; ++q) out(i + p, j + q) += v * b(p, q);
        }
    return out;
}

Image2 conv2_full_fft(const Image2& a, const Image2& b) {
    require_nonempty(a, "first operand");
    require_nonempty(b, "second operand");
    const int H = a.height + b.height - 1;
    const int W = a.width + b.width - 1;
    const int Wc = W / 2 + 1;
    const std::size_t nreal = static_cast<std::size_t>(H) * W;
    const std::size_t ncplx = static_cast<std::size_t>(H) * Wc;

    double* ra = fftw_alloc_real(nreal);
    double* rb = fftw_alloc_real(nreal);
    fftw_complex* ca = fftw_alloc_complex(ncplx);
    fftw_complex* cb = fftw_alloc_complex(ncplx);
    fftw_plan pa, pb, inv;
    {
        std::lock_guard lock(plan_mutex());
        pa = fftw_plan_dft_r2c_2d(H, W, ra, ca, FFTW_ESTIMATE);
        pb = fftw_plan_dft_r2c_2d(H, W, rb, cb, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_2d(H, W, ca, ra, FFTW_ESTIMATE);
    }
    std::fill_n(ra, nreal, 0.0);
    std::fill_n(rb, nreal, 0.0);
    for (int i = 0; i < a.height; ++i)
        for (int j = 0; j < a.width; ++j) ra[static_cast<std::size_t>(i) * W + j] = a(i, j);
    for (int i = 0; i < b.height; ++i)
        for (int j = 0; j < b.width; ++j) rb[static_cast<std::size_t>(i) * W + j] = b(i, j);
    fftw_execute(pa);
    fftw_execute(pb);
    for (std::size_t k = 0; k < ncplx; ++k) {
        const std::complex<double> x(ca[k][0], ca[k][1]);
        const std::complex<double> y(cb[k][0], cb[k][1]);
        const auto z = x * y;
        ca[k][0] = z.real();
        ca[k][1] = z.imag();
    }
    fftw_execute(inv);

    Image2 out(H, W);
    const double scale = 1.0 / static_cast<double>(nreal);
    for (std::size_t k = 0; k < nreal; ++k) out.data[k] = ra[k] * scale;
    {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(pa);
        fftw_destroy_plan(pb);
        fftw_destroy_plan(inv);
    }
    fftw_free(ra);
    fftw_free(rb);
    fftw_free(ca);
    fftw_free(cb);
    return out;
}

Image2 conv2_same(const Image2& z, const Image2& filter) {
    require_nonempty(z, "code map");
    require_nonempty(filter, "filter");
    const int oh = (filter.height - 1) / 2, ow = (filter.width - 1) / 2;
    Image2 out(z.height, z.width);
    for (int r = 0; r < z.height; ++r)
        for (int c = 0; c < z.width; ++c) {
            double s = 0.0;
            for (int a = 0; a < filter.height; ++a) {
                const int zr = r + oh - a;
                if (zr < 0 || zr >= z.height) continue;
                for (int b = 0; b < filter.width; ++b) {
                    const int zc = c + ow - b;
                    if (zc < 0 || zc >= z.width) continue;
                    s += filter(a, b) * z(zr, zc);
                }
            }
            out(r, c) = s;
        }
    return out;
}

Image2 conv2_same_adjoint(const Image2& r, const Image2& filter) {
    require_nonempty(r, "residual");
    require_nonempty(filter, "filter");
    const int oh = (filter.height - 1) / 2, ow = (filter.width - 1) / 2;
    Image2 out(r.height, r.width);
    for (int i = 0; i < r.height; ++i)
        for (int j = 0; j < r.width; ++j) {
            double s = 0.0;
            for (int a = 0; a < filter.height; ++a) {
                const int rr = i - oh + a;
                if (rr < 0 || rr >= r.height) continue;
                for (int b = 0; b < filter.width; ++b) {
                    const int rc = j - ow + b;
                    if (rc < 0 || rc >= r.width) continue;
                    s += filter(a, b) * r(rr, rc);
                }
            }
            out(i, j) = s;
        }
    return out;
}

} // namespace cscl4
