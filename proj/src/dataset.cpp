#include "cscl4/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cscl4/error.hpp"
#include "cscl4/tensor_io.hpp"

namespace cscl4 {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kSplitStream = 0x5b117ULL;

std::string file_name(const std::string& role, int id, const std::string& modality) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%05d_%s.csl4", role.c_str(), id, modality.c_str());
    return buf;
}

} // namespace

int Dataset::pair_count() const {
    return static_cast<int>(train_x.size() + train_y.size() + val.size() + test.size());
}

DatasetSplit make_split(int n_pairs, const std::array<double, 3>& f, std::uint64_t seed) {
    for (double v : f)
        if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("split fractions must be finite and >= 0");
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw PreconditionError("split fractions must sum to 1");
    const long n_train = std::lround(f[0] * n_pairs);
    const long n_val = std::lround(f[1] * n_pairs);
    if (n_train < 2)
        throw PreconditionError("too few samples: " + std::to_string(n_pairs) +
                                " pairs leave fewer than 2 training pairs");
    if (n_train + n_val > n_pairs)
        throw PreconditionError("too few samples for the requested fractions");

    std::vector<int> perm(static_cast<std::size_t>(n_pairs));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(splitmix(seed, kSplitStream));
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }
    DatasetSplit s;
    const long half = n_train / 2;
    auto take = [&](long from, long to) {
        std::vector<int> v(perm.begin() + from, perm.begin() + to);
        std::sort(v.begin(), v.end());
        return v;
    };
    s.train_x = take(0, half);
    s.train_y = take(half, 2 * half);
    s.val = take(n_train, n_train + n_val);
    s.test = take(n_train + n_val, n_pairs);
    return s;
}

PhantomSpec phantom_spec_for(const PhantomSpec& base, int id) {
    PhantomSpec s = base;
    s.seed = splitmix(base.seed, static_cast<std::uint64_t>(id));
    return s;
}

Dataset generate_dataset(const PhantomSpec& base, int n_pairs, const std::array<double, 3>& fractions) {
    validate(base);
    const DatasetSplit split = make_split(n_pairs, fractions, base.seed);
    auto gen = [&](int id) { return gen_phantom_pair(phantom_spec_for(base, id)); };
    Dataset ds;
    ds.train_x_ids = split.train_x;
    ds.train_y_ids = split.train_y;
    for (int id : split.train_x) ds.train_x.push_back(gen(id).a);
    for (int id : split.train_y) ds.train_y.push_back(gen(id).b);
    for (const auto* role : {&split.val, &split.test})
        for (int id : *role) {
            PhantomPair p = gen(id);
            PairedSample s{id, std::move(p.a), std::move(p.b), std::move(p.labels)};
            (role == &split.val ? ds.val : ds.test).push_back(std::move(s));
        }
    return ds;
}

void write_dataset(const std::string& dir, const Dataset& ds) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    std::ostringstream manifest;
    auto record = [&](const std::string& role, int id, const std::string& modality) {
        const std::string name = file_name(role, id, modality);
        manifest << role << ' ' << name << ' ' << id << ' ' << modality << '\n';
        return (fs::path(dir) / name).string();
    };
    for (std::size_t i = 0; i < ds.train_x.size(); ++i)
        write_tensor(record("train_x", ds.train_x_ids.at(i), "A"), ds.train_x[i]);
    for (std::size_t i = 0; i < ds.train_y.size(); ++i)
        write_tensor(record("train_y", ds.train_y_ids.at(i), "B"), ds.train_y[i]);
    for (const auto* role : {&ds.val, &ds.test}) {
        const std::string name = role == &ds.val ? "val" : "test";
        for (const auto& s : *role) {
            write_tensor(record(name, s.id, "A"), s.a);
            write_tensor(record(name, s.id, "B"), s.b);
            write_mask(record(name, s.id, "mask"), s.labels);
        }
    }
    const std::string path = (fs::path(dir) / "manifest.txt").string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << manifest.str();
    if (!out) throw IoError("failed writing '" + path + "'");
}

Dataset read_dataset(const std::string& dir) {
    const std::string path = (fs::path(dir) / "manifest.txt").string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    struct Entry {
        std::string a, b, mask;
    };
    std::map<int, Entry> val, test;
    Dataset ds;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t at = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string role, file, id_text, modality, extra;
        if (!(ls >> role >> file >> id_text >> modality) || (ls >> extra))
            throw FormatError(path + ": malformed manifest line '" + line + "'", at);
        int id = 0;
        const auto r = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (r.ec != std::errc() || r.ptr != id_text.data() + id_text.size() || id < 0)
            throw FormatError(path + ": invalid phantom id '" + id_text + "'", at);
        if (file.find('/') != std::string::npos || file.find('\\') != std::string::npos)
            throw FormatError(path + ": manifest paths must be plain file names", at);
        const std::string full = (fs::path(dir) / file).string();
        if (role == "train_x" && modality == "A") {
            ds.train_x_ids.push_back(id);
            ds.train_x.push_back(read_image(full));
        } else if (role == "train_y" && modality == "B") {
            ds.train_y_ids.push_back(id);
            ds.train_y.push_back(read_image(full));
        } else if (role == "val" || role == "test") {
            Entry& e = (role == "val" ? val : test)[id];
            std::string* slot = modality == "A" ? &e.a : modality == "B" ? &e.b : modality == "mask" ? &e.mask : nullptr;
            if (!slot) throw FormatError(path + ": unknown modality '" + modality + "'", at);
            if (!slot->empty()) throw FormatError(path + ": duplicate record for phantom " + id_text, at);
            *slot = full;
        } else {
            throw FormatError(path + ": unknown role/modality '" + role + " " + modality + "'", at);
        }
    }
    if (in.bad()) throw IoError("failed reading '" + path + "'");
    for (auto* group : {&val, &test})
        for (const auto& [id, e] : *group) {
            if (e.a.empty() || e.b.empty() || e.mask.empty())
                throw FormatError(path + ": phantom " + std::to_string(id) + " lacks A, B or mask", 0);
            PairedSample s{id, read_image(e.a), read_image(e.b), read_mask(e.mask)};
            if (s.a.height != s.b.height || s.a.width != s.b.width || s.labels.height != s.a.height ||
                s.labels.width != s.a.width)
                throw FormatError(path + ": phantom " + std::to_string(id) + " has mismatched sizes", 0);
            (group == &val ? ds.val : ds.test).push_back(std::move(s));
        }
    for (int a : ds.train_x_ids)
        if (std::find(ds.train_y_ids.begin(), ds.train_y_ids.end(), a) != ds.train_y_ids.end())
            throw FormatError(path + ": phantom " + std::to_string(a) + " appears on both training sides", 0);
    if (ds.train_x.empty() || ds.train_y.empty()) throw FormatError(path + ": no training images", 0);
    return ds;
}

} // namespace cscl4
