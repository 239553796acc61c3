#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cscl4/discrepancy.hpp"
#include "cscl4/manifold.hpp"
#include "cscl4/normalization.hpp"
#include "cscl4/patches.hpp"
#include "cscl4/tensor.hpp"

namespace cscl4 {

struct LayerSpec {
    int filters = 1;
    int fh = 1;
    int fw = 1;
    int stride = 1;
    int repeat = 1;
    bool operator==(const LayerSpec&) const = default;
};

enum class Correspondence { soft_kernel, fixed_pairs };

struct ModelConfig {
    std::vector<LayerSpec> layers{{16, 5, 5, 1, 1}, {16, 1, 1, 1, 1}, {9, 2, 2, 2, 1}};
    double lambda = 0.02;
    double mmd_weight = 1.0;
    double manifold_weight = 0.05;
    double ls_weight = 1.0;
    int epochs = 30;
    int batch_size = 16;
    std::uint64_t seed = 0;
    bool use_iun = true;
    IunParams iun;
    KernelParams kernel;
    ManifoldParams manifold{1e-6, DistanceMode::affine_invariant, false};
    Correspondence correspondence = Correspondence::soft_kernel;
    int adapt_top = 1;    // adaptation losses act on this many top layers
    int msp_iters = 5;    // MSP steps per layer per batch
    int p_steps = 10;     // associator gradient steps per batch
    double learning_rate = 0.01;
    double ridge = 1e-6;

    bool adapting() const { return mmd_weight > 0.0 || manifold_weight > 0.0; }
    bool operator==(const ModelConfig&) const;
};

void validate(const ModelConfig& c);

// key=value text form; keys match the command-line flags.
std::map<std::string, std::string> config_entries(const ModelConfig& c);
std::string config_to_text(const ModelConfig& c);
void apply_config_entry(ModelConfig& c, const std::string& key, const std::string& value);
ModelConfig config_from_text(const std::string& text);
std::vector<LayerSpec> parse_layers(const std::string& s);
std::string format_layers(const std::vector<LayerSpec>& layers);

// Layer specs with repeats unrolled.
std::vector<LayerSpec> expand_layers(const std::vector<LayerSpec>& layers);
std::vector<PatchGeometry> layer_geometries(const ModelConfig& c, int height, int width);

struct LossComponents {
    double sparsity_x = 0.0;
    double sparsity_y = 0.0;
    double recon_x = 0.0;
    double recon_y = 0.0;
    double mmd = 0.0;      // weighted as it enters the objective
    double manifold = 0.0; // weighted as it enters the objective
    double combined = 0.0;
};

struct ModelLayer {
    PatchGeometry geometry;
    FilterBank filter_x;
    FilterBank filter_y;
    Matrix P;
};

struct ModelState {
    ModelConfig config;
    int height = 0;
    int width = 0;
    double scale_ratio = 1.0; // mean target norm / mean source norm
    std::vector<ModelLayer> layers;
    std::vector<LossComponents> training_log;
    bool trained = false;

    void check_invariants() const;
};

struct Associator {
    Matrix P;
    double ridge = 0.0;
    double residual = 0.0;
    double condition = 1.0;
    bool ill_conditioned = false; // condition > 1e10
};

// Encode a batch with one layer, then IUN across the batch when `iun` is non-null.
std::vector<Tensor3> forward(const std::vector<Tensor3>& inputs, const FilterBank& filters, const PatchGeometry& g,
                             const IunParams* iun);

struct EncodedStack {
    std::vector<std::vector<Tensor3>> codes;  // [layer][sample], normalized
    std::vector<std::vector<double>> scalars; // IUN multipliers, 1 when IUN is off
};

EncodedStack encode_stack(const std::vector<Image2>& images, const ModelState& state, bool source);

// Weighted least squares: argmin sum w_ij ||y_j - P x_i||^2 + ridge ||P||^2.
Associator update_associator(const std::vector<Tensor3>& codes_x, const std::vector<Tensor3>& codes_y,
                             const Matrix& weights, double ridge);

// Pair weights summing to one: row-normalized top-layer cross kernel, or identity pairing.
Matrix pair_weights(const std::vector<Tensor3>& top_x, const std::vector<Tensor3>& top_y, const Matrix& P_top,
                    const ModelConfig& c);

LossComponents total_loss(const ModelState& state, const std::vector<Image2>& batch_x,
                          const std::vector<Image2>& batch_y);

using EpochCallback = std::function<void(int epoch, const LossComponents&)>;

ModelState train(const std::vector<Image2>& dataset_x, const std::vector<Image2>& dataset_y, const ModelConfig& c,
                 const EpochCallback& on_epoch = {});

Image2 synthesize(const Image2& image, const ModelState& state);

} // namespace cscl4
