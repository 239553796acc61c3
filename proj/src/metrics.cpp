#include "cscl4/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cscl4/error.hpp"

namespace cscl4 {

double psnr(const Image2& reference, const Image2& candidate) {
    if (!reference.same_shape(candidate)) throw DimensionError("PSNR needs equally shaped images");
    if (reference.size() == 0) throw DimensionError("PSNR of empty images");
    double se = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = reference.data[i] - candidate.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(reference.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image2& reference, const Image2& candidate, const SsimOptions& opt) {
    if (!reference.same_shape(candidate)) throw DimensionError("SSIM needs equally shaped images");
    const int w = opt.window;
    if (w < 1 || reference.height < w || reference.width < w)
        throw DimensionError("image smaller than the " + std::to_string(w) + "x" + std::to_string(w) + " SSIM window");
    const int step = opt.overlapping ? 1 : w;
    const double n = static_cast<double>(w) * w;
    double total = 0.0;
    int count = 0;
    for (int r = 0; r + w <= reference.height; r += step)
        for (int c = 0; c + w <= reference.width; c += step) {
            double mx = 0.0, my = 0.0;
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < w; ++j) {
                    mx += reference(r + i, c + j);
                    my += candidate(r + i, c + j);
                }
            mx /= n;
            my /= n;
            double vx = 0.0, vy = 0.0, cxy = 0.0;
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < w; ++j) {
                    const double dx = reference(r + i, c + j) - mx, dy = candidate(r + i, c + j) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            vx /= n;
            vy /= n;
            cxy /= n;
            total += ((2 * mx * my + opt.c1) * (2 * cxy + opt.c2)) /
                     ((mx * mx + my * my + opt.c1) * (vx + vy + opt.c2));
            ++count;
        }
    return total / count;
}

LabelMask segment_threshold(const Image2& image, int n_classes) {
    if (n_classes < 2) throw PreconditionError("segmentation needs at least 2 classes");
    if (image.size() == 0) throw DimensionError("empty image");
    std::vector<double> sorted = image.data;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) throw DegenerateInputError("cannot segment a constant image");
    const std::size_t n = sorted.size();
    std::vector<double> t;
    for (int k = 1; k < n_classes; ++k) {
        const std::size_t upper = (static_cast<std::size_t>(k) * n + n_classes - 1) / n_classes;
        t.push_back(sorted[std::max<std::size_t>(upper, 1) - 1]);
    }
    LabelMask m{image.height, image.width, std::vector<std::uint8_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t lab = 0;
        for (double th : t)
            if (image.data[i] > th) ++lab;
        m.labels[i] = lab;
    }
    return m;
}

DiceResult dice(const LabelMask& a, const LabelMask& b, int cls) {
    if (!a.same_shape(b) || a.labels.size() != b.labels.size()) throw DimensionError("Dice needs equally shaped masks");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        const bool ia = a.labels[i] == cls, ib = b.labels[i] == cls;
        na += ia;
        nb += ib;
        both += ia && ib;
    }
    if (na + nb == 0) return {1.0, true};
    return {2.0 * static_cast<double>(both) / static_cast<double>(na + nb), false};
}

double dice_macro(const LabelMask& a, const LabelMask& b, int n_classes) {
    double s = 0.0;
    for (int c = 0; c < n_classes; ++c) s += dice(a, b, c).value;
    return s / n_classes;
}

} // namespace cscl4
