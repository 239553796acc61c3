#include "cscl4/patches.hpp"

#include <string>

#include "cscl4/error.hpp"

namespace cscl4 {

void PatchGeometry::validate_extract() const {
    if (channels < 1 || height < 1 || width < 1) throw DimensionError("empty patch source");
    if (fh < 1 || fw < 1) throw DimensionError("patch support must be positive");
    if (stride < 1) throw DimensionError("stride must be >= 1");
    if (fh > height || fw > width)
        throw DimensionError("patch support " + std::to_string(fh) + "x" + std::to_string(fw) +
                             " exceeds image " + std::to_string(height) + "x" + std::to_string(width));
}

void PatchGeometry::validate_assemble() const {
    validate_extract();
    if (stride > fh || stride > fw) throw DimensionError("stride larger than support leaves uncovered pixels");
    if ((height - fh) % stride != 0 || (width - fw) % stride != 0)
        throw DimensionError("patch grid does not reach the image border");
}

Matrix extract_patches(const Tensor3& t, const PatchGeometry& g) {
    if (t.channels != g.channels || t.height != g.height || t.width != g.width)
        throw DimensionError("tensor does not match patch geometry");
    g.validate_extract();
    const int gh = g.grid_h(), gw = g.grid_w();
    Matrix out(g.dim(), static_cast<Eigen::Index>(gh) * gw);
    for (int pr = 0; pr < gh; ++pr)
        for (int pc = 0; pc < gw; ++pc) {
            const Eigen::Index col = static_cast<Eigen::Index>(pr) * gw + pc;
            int row = 0;
            for (int k = 0; k < g.channels; ++k)
                for (int a = 0; a < g.fh; ++a)
                    for (int b = 0; b < g.fw; ++b)
                        out(row++, col) = t(k, pr * g.stride + a, pc * g.stride + b);
        }
    return out;
}

Matrix extract_patches(const Image2& img, int fh, int fw, int stride) {
    return extract_patches(to_tensor(img), PatchGeometry{1, img.height, img.width, fh, fw, stride});
}

Tensor3 assemble_patches(const Matrix& patches, const PatchGeometry& g) {
    g.validate_assemble();
    const int gh = g.grid_h(), gw = g.grid_w();
    if (patches.rows() != g.dim() || patches.cols() != static_cast<Eigen::Index>(gh) * gw)
        throw DimensionError("patch matrix is " + std::to_string(patches.rows()) + "x" +
                             std::to_string(patches.cols()) + ", geometry expects " + std::to_string(g.dim()) +
                             "x" + std::to_string(gh * gw));
    Tensor3 out(g.channels, g.height, g.width);
    std::vector<int> cover(static_cast<std::size_t>(g.height) * g.width, 0);
    for (int pr = 0; pr < gh; ++pr)
        for (int pc = 0; pc < gw; ++pc) {
            const Eigen::Index col = static_cast<Eigen::Index>(pr) * gw + pc;
            int row = 0;
            for (int k = 0; k < g.channels; ++k)
                for (int a = 0; a < g.fh; ++a)
                    for (int b = 0; b < g.fw; ++b)
                        out(k, pr * g.stride + a, pc * g.stride + b) += patches(row++, col);
            for (int a = 0; a < g.fh; ++a)
                for (int b = 0; b < g.fw; ++b)
                    ++cover[static_cast<std::size_t>(pr * g.stride + a) * g.width + pc * g.stride + b];
        }
    for (int k = 0; k < g.channels; ++k)
        for (int r = 0; r < g.height; ++r)
            for (int c = 0; c < g.width; ++c) out(k, r, c) /= cover[static_cast<std::size_t>(r) * g.width + c];
    return out;
}

Image2 assemble_patches(const Matrix& patches, int height, int width, int fh, int fw, int stride) {
    return to_image(assemble_patches(patches, PatchGeometry{1, height, width, fh, fw, stride}));
}

} // namespace cscl4
