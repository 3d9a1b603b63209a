#include "percept/heads.hpp"

#include <stdexcept>

namespace percept {

HeadVariant head_variant_from_name(const std::string& name) {
    if (name == "cnn0c") return HeadVariant::Cnn0C;
    if (name == "cnn1c") return HeadVariant::Cnn1C;
    throw std::invalid_argument("unknown head variant '" + name + "'");
}

std::string head_variant_name(HeadVariant v) {
    return v == HeadVariant::Cnn0C ? "cnn0c" : "cnn1c";
}

Arch head_arch(HeadVariant variant, int in_channels, int pooled_h, int pooled_w,
               int class_count_with_bg, int fc1, int fc2) {
    Arch arch;
    if (variant == HeadVariant::Cnn1C) {
        arch.push_back(LayerSpec::conv("conv", in_channels, in_channels, 3, /*relu=*/true,
                                       /*pool=*/false));
    }
    const int flat = in_channels * pooled_h * pooled_w;
    arch.push_back(LayerSpec::dense("fc1", flat, fc1, /*relu=*/true));
    arch.push_back(LayerSpec::dense("fc2", fc1, fc2, /*relu=*/true));
    arch.push_back(LayerSpec::dense("fc3", fc2, class_count_with_bg, /*relu=*/false));
    return arch;
}

std::vector<double> head_forward(const NetworkParams& head, const FeatureMap& pooled,
                                 ForwardCache* cache) {
    FeatureMap logits = net_forward(head, pooled, cache);
    return softmax(logits.data);
}

}  // namespace percept
