#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "percept/feature_map.hpp"

namespace percept {

enum class LayerKind : uint8_t { Conv, Dense };

// Shape and wiring of one layer. Conv layers are stride-1, zero-padded to the
// input's spatial size, optionally followed by ReLU and a 2x2/2 max-pool.
struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    std::string name;
    int in_c = 0, out_c = 0, ksize = 0;  // conv
    int in_n = 0, out_n = 0;             // dense
    bool relu = false;
    bool pool = false;  // conv only

    static LayerSpec conv(std::string name, int in_c, int out_c, int k, bool relu, bool pool);
    static LayerSpec dense(std::string name, int in_n, int out_n, bool relu);

    size_t weight_count() const;
    size_t bias_count() const;
    bool operator==(const LayerSpec&) const = default;
};

using Arch = std::vector<LayerSpec>;

// Desk backbone: conv->ReLU->maxpool blocks with the given channel ladder,
// 3x3 kernels. The spatial size shrinks by 2 per block.
Arch backbone_arch(int in_channels, const std::vector<int>& channels);

struct LayerBlock {
    LayerSpec spec;
    std::vector<double> weights;
    std::vector<double> bias;
};

// Ordered parameter blocks for one network (a backbone column, the RPN head
// or a classification head). Instances with equal specs can be averaged.
struct NetworkParams {
    std::vector<LayerBlock> blocks;

    size_t param_count() const;
    Arch arch() const;
};

bool same_arch(const NetworkParams& a, const NetworkParams& b);
bool equal_params(const NetworkParams& a, const NetworkParams& b);

double glorot_bound(int fan_in, int fan_out);

// Uniform Glorot weights, zero biases, deterministic per seed.
NetworkParams init_params(const Arch& arch, uint64_t seed);

// Per-layer activations retained for the backward pass. `act` is the
// post-activation, pre-pool map; under ReLU, act == 0 marks the dead units.
struct LayerCache {
    FeatureMap input;
    FeatureMap act;
    std::vector<int32_t> pool_argmax;  // flat index into act, per pooled cell
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    FeatureMap output;
};

// Runs the block sequence. Dense layers flatten whatever map reaches them and
// emit an out_n x 1 x 1 map. Pass a cache to enable net_backward.
FeatureMap net_forward(const NetworkParams& params, const FeatureMap& input,
                       ForwardCache* cache = nullptr);

NetworkParams zeros_like(const NetworkParams& params);

// Exact gradients of net_forward. Accumulates parameter gradients into
// `grads` (shape-checked against params) and returns the input gradient.
FeatureMap net_backward(const NetworkParams& params, const ForwardCache& cache,
                        const FeatureMap& upstream, NetworkParams& grads);

// Elementwise arithmetic mean of every weight and bias. Computed as
// x0 + mean(xi - x0), so the average of identical instances is bit-exact.
NetworkParams average_params(const std::vector<NetworkParams>& nets);

void fill_zero(NetworkParams& p);
void axpy(double a, const NetworkParams& x, NetworkParams& y);  // y += a*x
void scale_params(NetworkParams& p, double a);

// Versioned little-endian binary layout; round-trips bit-exactly.
void write_params(std::ostream& out, const NetworkParams& params);
NetworkParams read_params(std::istream& in);

std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace percept
