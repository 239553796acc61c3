#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>

#include "cscl4/dataset.hpp"
#include "cscl4/error.hpp"
#include "cscl4/phantom.hpp"
#include "cscl4/tensor_io.hpp"
#include "support/gen.hpp"

using namespace cscl4;
namespace fs = std::filesystem;

namespace {

PhantomSpec spec(const std::string& map, double noise, std::uint64_t seed) {
    PhantomSpec s;
    s.map = ModalityMap::parse(map);
    s.noise_sigma = noise;
    s.seed = seed;
    return s;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cscl4_test_data_io_" + name);
    fs::remove_all(p);
    return p;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("identity map without noise copies the phantom") {
    const PhantomPair p = gen_phantom_pair(spec("identity", 0.0, 3));
    CHECK(p.a.data == p.b.data);
}

TEST_CASE("inversion map without noise gives 1 - A") {
    const PhantomPair p = gen_phantom_pair(spec("inversion", 0.0, 4));
    for (std::size_t i = 0; i < p.a.size(); ++i) CHECK(p.b.data[i] == 1.0 - p.a.data[i]);
}

TEST_CASE("gamma map squares each pixel") {
    const PhantomPair p = gen_phantom_pair(spec("gamma:2.0", 0.0, 5));
    double worst = 0.0;
    for (int r = 0; r < p.a.height; ++r)
        for (int c = 0; c < p.a.width; ++c) worst = std::max(worst, std::abs(p.b(r, c) - p.a(r, c) * p.a(r, c)));
    CHECK(worst <= 1e-15);
}

TEST_CASE("modality map text round trips and rejects junk") {
    for (const char* s : {"identity", "gamma:2", "inversion", "blur:1:2"}) CHECK(ModalityMap::parse(ModalityMap::parse(s).str()).str() == ModalityMap::parse(s).str());
    for (const char* s : {"bogus", "gamma:", "gamma:-1", "blur:1", "gamma:x"}) CHECK_THROWS_AS(ModalityMap::parse(s), PreconditionError);
}

TEST_CASE("phantoms are deterministic, bounded and fully labelled") {
    testgen::Gen g(6);
    for (int trial = 0; trial < 20; ++trial) {
        const char* maps[] = {"identity", "gamma:0.5", "inversion", "blur:1.0:2.0"};
        const PhantomSpec s = spec(maps[trial % 4], g.uniform(0.0, 0.1), static_cast<std::uint64_t>(g.integer(0, 1 << 30)));
        const PhantomPair p = gen_phantom_pair(s), q = gen_phantom_pair(s);
        CHECK(bit_equal(p.a.data, q.a.data));
        CHECK(bit_equal(p.b.data, q.b.data));
        for (const auto* img : {&p.a, &p.b})
            for (double v : img->data) CHECK((v >= 0.0 && v <= 1.0));
        REQUIRE(p.labels.labels.size() == p.a.size());
        std::set<int> classes(p.labels.labels.begin(), p.labels.labels.end());
        std::vector<double> sorted = p.a.data;
        std::sort(sorted.begin(), sorted.end());
        if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() >= 3) CHECK(classes == std::set<int>{0, 1, 2});
    }
}

TEST_CASE("phantom spec validation") {
    PhantomSpec s;
    s.size = 15;
    CHECK_THROWS_AS(validate(s), PreconditionError);
    s.size = 16;
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(validate(s), PreconditionError);
}

TEST_CASE("split arithmetic for 10 pairs") {
    const DatasetSplit s = make_split(10, {0.6, 0.2, 0.2}, 1);
    CHECK(s.train_x.size() == 3);
    CHECK(s.train_y.size() == 3);
    CHECK(s.val.size() == 2);
    CHECK(s.test.size() == 2);
    std::set<int> all;
    for (const auto* v : {&s.train_x, &s.train_y, &s.val, &s.test}) all.insert(v->begin(), v->end());
    CHECK(all.size() == 10);
}

TEST_CASE("splits are deterministic") {
    const DatasetSplit a = make_split(40, {0.5, 0.25, 0.25}, 9), b = make_split(40, {0.5, 0.25, 0.25}, 9);
    CHECK(a.train_x == b.train_x);
    CHECK(a.train_y == b.train_y);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
}

TEST_CASE("training sides never share a phantom over 100 random splits") {
    testgen::Gen g(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = g.integer(6, 80);
        const double f0 = g.uniform(0.4, 0.8), f1 = g.uniform(0.0, 1.0 - f0);
        const DatasetSplit s = make_split(n, {f0, f1, 1.0 - f0 - f1}, static_cast<std::uint64_t>(trial));
        std::vector<int> both;
        std::set_intersection(s.train_x.begin(), s.train_x.end(), s.train_y.begin(), s.train_y.end(),
                              std::back_inserter(both));
        CHECK(both.empty());
        CHECK(s.train_x.size() == s.train_y.size());
    }
}

TEST_CASE("split preconditions") {
    CHECK_THROWS_AS(make_split(10, {0.5, 0.2, 0.2}, 0), PreconditionError);
    CHECK_THROWS_AS(make_split(2, {0.5, 0.25, 0.25}, 0), PreconditionError);
}

TEST_CASE("a 1x1x1 zero tensor is a 25-byte file") {
    const auto bytes = encode_tensor(Tensor3(1, 1, 1, 0.0));
    REQUIRE(bytes.size() == 25);
    const std::uint8_t expect[25] = {'C', 'S', 'L', '4', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(std::equal(bytes.begin(), bytes.end(), expect));
}

TEST_CASE("tensor round trip is bitwise") {
    testgen::Gen g(8);
    const Tensor3 t = g.tensor(4, 5, 6);
    const fs::path dir = scratch("roundtrip");
    fs::create_directories(dir);
    write_tensor((dir / "t.csl4").string(), t);
    const Tensor3 back = read_tensor((dir / "t.csl4").string());
    CHECK(back.channels == 4);
    CHECK(back.height == 5);
    CHECK(back.width == 6);
    CHECK(bit_equal(back.data, t.data));

    const Tensor3 f = decode_tensor(encode_tensor(t, Dtype::f32));
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(f.data[i] == static_cast<double>(static_cast<float>(t.data[i])));
    fs::remove_all(dir);
}

TEST_CASE("truncated payload names the offset") {
    testgen::Gen g(9);
    auto bytes = encode_tensor(g.tensor(2, 3, 3));
    bytes.resize(bytes.size() - 5);
    try {
        decode_tensor(bytes);
        FAIL("truncation not detected");
    } catch (const FormatError& e) {
        CHECK(e.offset() == bytes.size());
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("bad magic and version are rejected at their offsets") {
    auto bytes = encode_tensor(Tensor3(2, 2, 2, 0.5));
    auto bad = bytes;
    bad[1] = 'X';
    CHECK_THROWS_AS(decode_tensor(bad), FormatError);
    bad = bytes;
    bad[4] = 9;
    try {
        decode_tensor(bad);
        FAIL("version not checked");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 4);
    }
}

TEST_CASE("dataset write and read round trip") {
    PhantomSpec base = spec("gamma:2.0", 0.01, 11);
    base.size = 16;
    const Dataset ds = generate_dataset(base, 10, {0.6, 0.2, 0.2});
    CHECK(ds.pair_count() == 10);
    const fs::path dir = scratch("dataset");
    write_dataset(dir.string(), ds);
    const Dataset back = read_dataset(dir.string());
    CHECK(back.train_x_ids == ds.train_x_ids);
    CHECK(back.train_y_ids == ds.train_y_ids);
    REQUIRE(back.train_x.size() == ds.train_x.size());
    for (std::size_t i = 0; i < ds.train_x.size(); ++i) CHECK(bit_equal(back.train_x[i].data, ds.train_x[i].data));
    REQUIRE(back.test.size() == ds.test.size());
    for (std::size_t i = 0; i < ds.test.size(); ++i) {
        CHECK(back.test[i].id == ds.test[i].id);
        CHECK(bit_equal(back.test[i].b.data, ds.test[i].b.data));
        CHECK(back.test[i].labels.labels == ds.test[i].labels.labels);
    }
    const Dataset again = generate_dataset(base, 10, {0.6, 0.2, 0.2});
    for (std::size_t i = 0; i < ds.val.size(); ++i) CHECK(bit_equal(again.val[i].a.data, ds.val[i].a.data));
    fs::remove_all(dir);
}

TEST_CASE("missing and malformed manifests") {
    const fs::path dir = scratch("manifest");
    CHECK_THROWS_AS(read_dataset(dir.string()), IoError);
    fs::create_directories(dir);
    {
        std::FILE* f = std::fopen((dir / "manifest.txt").string().c_str(), "w");
        std::fputs("train_x only_two\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(read_dataset(dir.string()), FormatError);
    fs::remove_all(dir);
}
