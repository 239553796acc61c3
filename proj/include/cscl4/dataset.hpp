#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cscl4/metrics.hpp"
#include "cscl4/phantom.hpp"
#include "cscl4/tensor.hpp"

namespace cscl4 {

// Phantom ids per role. train_x and train_y come from disjoint phantoms.
struct DatasetSplit {
    std::vector<int> train_x;
    std::vector<int> train_y;
    std::vector<int> val;
    std::vector<int> test;
};

// fractions = (train, validation, test); the training share is halved into
// unpaired source and target sides, an odd leftover pair is dropped.
DatasetSplit make_split(int n_pairs, const std::array<double, 3>& fractions, std::uint64_t seed);

struct PairedSample {
    int id = 0;
    Image2 a;
    Image2 b;
    LabelMask labels;
};

struct Dataset {
    std::vector<int> train_x_ids;
    std::vector<int> train_y_ids;
    std::vector<Image2> train_x; // modality A
    std::vector<Image2> train_y; // modality B
    std::vector<PairedSample> val;
    std::vector<PairedSample> test;

    int pair_count() const;
};

// Phantom i uses a seed derived from (base.seed, i).
PhantomSpec phantom_spec_for(const PhantomSpec& base, int id);

Dataset generate_dataset(const PhantomSpec& base, int n_pairs, const std::array<double, 3>& fractions);

// Directory of tensor files plus manifest.txt: "role path phantom_id modality" per line,
// role in {train_x, train_y, val, test}, modality in {A, B, mask}.
void write_dataset(const std::string& dir, const Dataset& ds);
Dataset read_dataset(const std::string& dir);

} // namespace cscl4
