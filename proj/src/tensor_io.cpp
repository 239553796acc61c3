#include "cscl4/tensor_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "bytes.hpp"
#include "cscl4/error.hpp"

namespace cscl4 {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading '" + path + "'");
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

} // namespace detail

namespace {

constexpr char kMagic[4] = {'C', 'S', 'L', '4'};

} // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor3& t, Dtype dtype) {
    if (t.size() == 0) throw DimensionError("cannot store an empty tensor");
    require_finite(t.data, "tensor to store");
    std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(t.channels), static_cast<std::uint32_t>(t.height),
                                    static_cast<std::uint32_t>(t.width)};
    while (dims.size() > 1 && dims.front() == 1) dims.erase(dims.begin());
    detail::ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kTensorFormatVersion);
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u32(d);
    w.u8(static_cast<std::uint8_t>(dtype));
    for (double v : t.data) {
        if (dtype == Dtype::f64) w.f64(v);
        else w.f32(static_cast<float>(v));
    }
    return std::move(w.bytes());
}

Tensor3 decode_tensor(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes);
    if (r.str(4, "magic") != std::string(kMagic, 4)) throw FormatError("bad magic, expected CSL4", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kTensorFormatVersion)
        throw FormatError("unsupported tensor format version " + std::to_string(version), 4);
    const std::uint32_t rank = r.u32("rank");
    if (rank < 1 || rank > 3) throw FormatError("rank " + std::to_string(rank) + " outside [1, 3]", 8);
    std::uint32_t dims[3] = {1, 1, 1};
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::size_t at = r.offset();
        const std::uint32_t d = r.u32("dimension");
        if (d == 0 || d > 0x7fffffffu) throw FormatError("invalid dimension " + std::to_string(d), at);
        if (i == 0 && rank > 1 && d == 1) throw FormatError("leading unit dimension stored", at);
        count *= d;
        if (count > (1ULL << 40)) throw FormatError("tensor too large", at);
        dims[3 - rank + i] = d;
    }
    const std::size_t tag_at = r.offset();
    const std::uint8_t tag = r.u8("dtype");
    if (tag > 1) throw FormatError("unknown dtype tag " + std::to_string(tag), tag_at);
    const std::size_t width = tag == 1 ? 8 : 4;
    const std::size_t payload_at = r.offset();
    if (r.remaining() < count * width) throw FormatError("truncated payload", bytes.size());
    if (r.remaining() > count * width) throw FormatError("trailing bytes after payload", payload_at + count * width);
    Tensor3 t(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = r.offset();
        const double v = tag == 1 ? r.f64("payload") : static_cast<double>(r.f32("payload"));
        if (!std::isfinite(v)) throw FormatError("non-finite value in payload", at);
        t.data[i] = v;
    }
    return t;
}

void write_tensor(const std::string& path, const Tensor3& t, Dtype dtype) {
    detail::write_file(path, encode_tensor(t, dtype));
}

void write_tensor(const std::string& path, const Image2& img, Dtype dtype) { write_tensor(path, to_tensor(img), dtype); }

void write_mask(const std::string& path, const LabelMask& m) {
    Tensor3 t(1, m.height, m.width);
    for (std::size_t i = 0; i < m.labels.size(); ++i) t.data[i] = m.labels[i];
    write_tensor(path, t);
}

Tensor3 read_tensor(const std::string& path) {
    const auto bytes = detail::read_file(path);
    try {
        return decode_tensor(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.reason(), e.offset());
    }
}

Image2 read_image(const std::string& path) {
    const Tensor3 t = read_tensor(path);
    if (t.channels != 1) throw FormatError(path + ": expected a single-channel image", 8);
    return to_image(t);
}

LabelMask read_mask(const std::string& path) {
    const Image2 img = read_image(path);
    LabelMask m{img.height, img.width, std::vector<std::uint8_t>(img.size())};
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = img.data[i];
        if (v < 0.0 || v > 255.0 || v != std::floor(v)) throw FormatError(path + ": mask holds a non-label value", 0);
        m.labels[i] = static_cast<std::uint8_t>(v);
    }
    return m;
}

} // namespace cscl4
