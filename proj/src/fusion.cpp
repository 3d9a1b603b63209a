#include "percept/fusion.hpp"

#include <stdexcept>

namespace percept {

namespace {

void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": feature map dimensions differ");
    }
}

}  // namespace

FusionMode fusion_mode_from_name(const std::string& name) {
    if (name == "none") return FusionMode::None;
    if (name == "edges") return FusionMode::Edges;
    if (name == "flow") return FusionMode::Flow;
    if (name == "scale") return FusionMode::Scale;
    throw std::invalid_argument("unknown fusion mode '" + name + "'");
}

std::string fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::None: return "none";
        case FusionMode::Edges: return "edges";
        case FusionMode::Flow: return "flow";
        case FusionMode::Scale: return "scale";
    }
    return "?";
}

size_t fusion_input_count(FusionMode m) {
    switch (m) {
        case FusionMode::None: return 1;
        case FusionMode::Edges: return 4;
        case FusionMode::Flow: return 2;
        case FusionMode::Scale: return 3;
    }
    throw std::invalid_argument("fusion_input_count: bad mode");
}

FeatureMap fuse_sum(const FeatureMap& a, const FeatureMap& b) {
    require_same_shape(a, b, "fuse_sum");
    FeatureMap out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

FeatureMap fuse_max(const std::vector<FeatureMap>& maps) {
    if (maps.empty()) throw std::invalid_argument("fuse_max: empty map list");
    FeatureMap out = maps[0];
    for (size_t mi = 1; mi < maps.size(); ++mi) {
        require_same_shape(maps[mi], out, "fuse_max");
        for (size_t i = 0; i < out.data.size(); ++i) {
            if (maps[mi].data[i] > out.data[i]) out.data[i] = maps[mi].data[i];
        }
    }
    return out;
}

FusedMap fuse_edges(const FeatureMap& fI, const FeatureMap& fEc, const FeatureMap& fEs,
                    const FeatureMap& fEp) {
    return {fuse_max({fuse_sum(fI, fEc), fuse_sum(fI, fEs), fuse_sum(fI, fEp)}),
            FusionMode::Edges};
}

FusedMap fuse_flow(const FeatureMap& fI, const FeatureMap& fO) {
    return {fuse_sum(fI, fO), FusionMode::Flow};
}

FusedMap fuse_scale(const FeatureMap& fI, const FeatureMap& fG3, const FeatureMap& fG5) {
    return {fuse_max({fI, fG3, fG5}), FusionMode::Scale};
}

FeatureMap fuse_forward(FusionMode mode, const std::vector<FeatureMap>& inputs,
                        FusionCache* cache) {
    const size_t expected = fusion_input_count(mode);
    if (inputs.size() != expected) {
        throw std::invalid_argument("fuse_forward: wrong input count for mode " +
                                    fusion_mode_name(mode));
    }
    for (const auto& m : inputs) require_same_shape(m, inputs[0], "fuse_forward");
    if (cache) {
        cache->mode = mode;
        cache->n_inputs = static_cast<int>(inputs.size());
        cache->argmax.clear();
    }

    switch (mode) {
        case FusionMode::None:
            return inputs[0];
        case FusionMode::Flow:
            return fuse_sum(inputs[0], inputs[1]);
        case FusionMode::Scale: {
            FeatureMap out = inputs[0];
            if (cache) cache->argmax.assign(out.data.size(), 0);
            for (size_t mi = 1; mi < 3; ++mi) {
                for (size_t i = 0; i < out.data.size(); ++i) {
                    if (inputs[mi].data[i] > out.data[i]) {
                        out.data[i] = inputs[mi].data[i];
                        if (cache) cache->argmax[i] = static_cast<uint8_t>(mi);
                    }
                }
            }
            return out;
        }
        case FusionMode::Edges: {
            // branch k is fI + fE_k; the winning branch index is cached
            FeatureMap out = inputs[0];
            if (cache) cache->argmax.assign(out.data.size(), 0);
            for (size_t i = 0; i < out.data.size(); ++i) {
                out.data[i] += inputs[1].data[i];
            }
            for (size_t k = 1; k < 3; ++k) {
                for (size_t i = 0; i < out.data.size(); ++i) {
                    double cand = inputs[0].data[i] + inputs[1 + k].data[i];
                    if (cand > out.data[i]) {
                        out.data[i] = cand;
                        if (cache) cache->argmax[i] = static_cast<uint8_t>(k);
                    }
                }
            }
            return out;
        }
    }
    throw std::invalid_argument("fuse_forward: bad mode");
}

std::vector<FeatureMap> fuse_backward(const FusionCache& cache, const FeatureMap& upstream,
                                      int height, int width, int channels) {
    std::vector<FeatureMap> grads(cache.n_inputs);
    switch (cache.mode) {
        case FusionMode::None:
            grads[0] = upstream;
            return grads;
        case FusionMode::Flow:
            grads[0] = upstream;
            grads[1] = upstream;
            return grads;
        case FusionMode::Scale: {
            for (auto& g : grads) g = FeatureMap::zeros(channels, height, width);
            for (size_t i = 0; i < upstream.data.size(); ++i) {
                grads[cache.argmax[i]].data[i] = upstream.data[i];
            }
            return grads;
        }
        case FusionMode::Edges: {
            // every branch contains fI, so its gradient is the full upstream
            grads[0] = upstream;
            for (int k = 1; k < 4; ++k) grads[k] = FeatureMap::zeros(channels, height, width);
            for (size_t i = 0; i < upstream.data.size(); ++i) {
                grads[1 + cache.argmax[i]].data[i] = upstream.data[i];
            }
            return grads;
        }
    }
    throw std::invalid_argument("fuse_backward: bad mode");
}

}  // namespace percept
