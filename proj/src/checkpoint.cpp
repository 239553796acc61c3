#include "cscl4/checkpoint.hpp"

#include <cmath>

#include <zlib.h>

#include "bytes.hpp"
#include "cscl4/error.hpp"

namespace cscl4 {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'L', '4'};

void put_matrix(detail::ByteWriter& w, const Matrix& m) {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
}

Matrix get_matrix(detail::ByteReader& r, Eigen::Index rows, Eigen::Index cols, const char* what) {
    const std::size_t at = r.offset();
    const std::uint32_t mr = r.u32(what);
    const std::uint32_t mc = r.u32(what);
    if (mr != rows || mc != cols)
        throw FormatError(std::string(what) + " is " + std::to_string(mr) + "x" + std::to_string(mc) + ", expected " +
                              std::to_string(rows) + "x" + std::to_string(cols),
                          at);
    r.need(static_cast<std::size_t>(mr) * mc * 8, what);
    Matrix m(mr, mc);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const std::size_t vat = r.offset();
            m(i, j) = r.f64(what);
            if (!std::isfinite(m(i, j))) throw FormatError(std::string("non-finite value in ") + what, vat);
        }
    return m;
}

std::uint32_t get_dim(detail::ByteReader& r, const char* what, std::uint32_t lo, std::uint32_t hi) {
    const std::size_t at = r.offset();
    const std::uint32_t v = r.u32(what);
    if (v < lo || v > hi) throw FormatError(std::string(what) + " " + std::to_string(v) + " out of range", at);
    return v;
}

std::uint32_t checksum(const std::uint8_t* p, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelState& s) {
    detail::ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kCheckpointFormatVersion);
    const std::string cfg = config_to_text(s.config);
    w.u32(static_cast<std::uint32_t>(cfg.size()));
    w.raw(cfg.data(), cfg.size());
    w.u32(static_cast<std::uint32_t>(s.height));
    w.u32(static_cast<std::uint32_t>(s.width));
    w.f64(s.scale_ratio);
    w.u8(s.trained ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.layers.size()));
    for (const auto& l : s.layers) {
        const auto& g = l.geometry;
        for (int v : {g.channels, g.height, g.width, g.fh, g.fw, g.stride}) w.u32(static_cast<std::uint32_t>(v));
        put_matrix(w, l.filter_x.weights);
        put_matrix(w, l.filter_y.weights);
        put_matrix(w, l.P);
    }
    w.u32(static_cast<std::uint32_t>(s.training_log.size()));
    for (const auto& e : s.training_log)
        for (double v : {e.sparsity_x, e.sparsity_y, e.recon_x, e.recon_y, e.mmd, e.manifold, e.combined}) w.f64(v);
    w.u32(checksum(w.bytes().data(), w.bytes().size()));
    return std::move(w.bytes());
}

ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    {
        detail::ByteReader h(bytes);
        if (h.str(4, "magic") != std::string(kMagic, 4)) throw FormatError("bad magic, expected CSL4", 0);
        const std::uint32_t version = h.u32("version");
        if (version != kCheckpointFormatVersion)
            throw FormatError("unsupported checkpoint format version " + std::to_string(version), 4);
        h.need(8, "checkpoint");
    }
    const std::size_t body_size = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body_size + i]) << (8 * i);
    if (stored != checksum(bytes.data(), body_size)) throw FormatError("checksum mismatch", body_size);
    const std::vector<std::uint8_t> body(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(body_size));
    detail::ByteReader r(body);
    r.str(8, "header");
    const std::uint32_t cfg_len = get_dim(r, "config length", 1, 1u << 20);
    const std::size_t cfg_at = r.offset();
    ModelState s;
    try {
        s.config = config_from_text(r.str(cfg_len, "config"));
        validate(s.config);
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(std::string("invalid config echo: ") + e.what(), cfg_at);
    }
    s.height = static_cast<int>(get_dim(r, "height", 1, 1u << 16));
    s.width = static_cast<int>(get_dim(r, "width", 1, 1u << 16));
    const std::size_t ratio_at = r.offset();
    s.scale_ratio = r.f64("scale ratio");
    if (!std::isfinite(s.scale_ratio) || !(s.scale_ratio > 0.0)) throw FormatError("invalid scale ratio", ratio_at);
    const std::size_t trained_at = r.offset();
    const std::uint8_t trained = r.u8("trained flag");
    if (trained > 1) throw FormatError("invalid trained flag", trained_at);
    s.trained = trained == 1;

    std::vector<PatchGeometry> expect;
    try {
        expect = layer_geometries(s.config, s.height, s.width);
    } catch (const Error& e) {
        throw FormatError(std::string("config does not fit image size: ") + e.what(), cfg_at);
    }
    const auto specs = expand_layers(s.config.layers);
    const std::size_t count_at = r.offset();
    const std::uint32_t L = r.u32("layer count");
    if (L != expect.size())
        throw FormatError("layer count " + std::to_string(L) + " does not match config", count_at);
    for (std::uint32_t l = 0; l < L; ++l) {
        const std::size_t at = r.offset();
        PatchGeometry g;
        g.channels = static_cast<int>(r.u32("geometry"));
        g.height = static_cast<int>(r.u32("geometry"));
        g.width = static_cast<int>(r.u32("geometry"));
        g.fh = static_cast<int>(r.u32("geometry"));
        g.fw = static_cast<int>(r.u32("geometry"));
        g.stride = static_cast<int>(r.u32("geometry"));
        if (!(g == expect[l])) throw FormatError("layer " + std::to_string(l) + " geometry does not match config", at);
        ModelLayer layer;
        layer.geometry = g;
        const int K = specs[l].filters;
        layer.filter_x = FilterBank(K, g.fh, g.fw, g.channels, true);
        layer.filter_y = layer.filter_x;
        layer.filter_x.weights = get_matrix(r, K, g.dim(), "source filters");
        layer.filter_y.weights = get_matrix(r, K, g.dim(), "target filters");
        layer.P = get_matrix(r, K, K, "associator");
        s.layers.push_back(std::move(layer));
    }
    const std::uint32_t n_log = get_dim(r, "log length", 0, 1u << 24);
    r.need(static_cast<std::size_t>(n_log) * 56, "training log");
    for (std::uint32_t i = 0; i < n_log; ++i) {
        LossComponents e;
        for (double* p : {&e.sparsity_x, &e.sparsity_y, &e.recon_x, &e.recon_y, &e.mmd, &e.manifold, &e.combined}) {
            const std::size_t at = r.offset();
            *p = r.f64("training log");
            if (!std::isfinite(*p)) throw FormatError("non-finite training log value", at);
        }
        s.training_log.push_back(e);
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
    try {
        s.check_invariants();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint violates model invariants: ") + e.what(), 0);
    }
    return s;
}

void save_checkpoint(const std::string& path, const ModelState& state) {
    detail::write_file(path, encode_checkpoint(state));
}

ModelState load_checkpoint(const std::string& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = detail::read_file(path);
    } catch (const IoError& e) {
        throw FormatError(std::string("cannot load checkpoint: ") + e.what(), 0);
    }
    try {
        return decode_checkpoint(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.reason(), e.offset());
    }
}

} // namespace cscl4
