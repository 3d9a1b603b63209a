#include "percept/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "percept/error.hpp"
#include "percept/rng.hpp"

namespace percept {

LayerSpec LayerSpec::conv(std::string name, int in_c, int out_c, int k, bool relu, bool pool) {
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("conv kernel size must be odd");
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.name = std::move(name);
    s.in_c = in_c;
    s.out_c = out_c;
    s.ksize = k;
    s.relu = relu;
    s.pool = pool;
    return s;
}

LayerSpec LayerSpec::dense(std::string name, int in_n, int out_n, bool relu) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.name = std::move(name);
    s.in_n = in_n;
    s.out_n = out_n;
    s.relu = relu;
    return s;
}

size_t LayerSpec::weight_count() const {
    if (kind == LayerKind::Conv) {
        return static_cast<size_t>(out_c) * in_c * ksize * ksize;
    }
    return static_cast<size_t>(out_n) * in_n;
}

size_t LayerSpec::bias_count() const {
    return kind == LayerKind::Conv ? static_cast<size_t>(out_c) : static_cast<size_t>(out_n);
}

Arch backbone_arch(int in_channels, const std::vector<int>& channels) {
    Arch arch;
    int in_c = in_channels;
    for (size_t i = 0; i < channels.size(); ++i) {
        arch.push_back(LayerSpec::conv("conv" + std::to_string(i + 1), in_c, channels[i],
                                       3, /*relu=*/true, /*pool=*/true));
        in_c = channels[i];
    }
    return arch;
}

size_t NetworkParams::param_count() const {
    size_t n = 0;
    for (const auto& b : blocks) n += b.weights.size() + b.bias.size();
    return n;
}

Arch NetworkParams::arch() const {
    Arch a;
    for (const auto& b : blocks) a.push_back(b.spec);
    return a;
}

bool same_arch(const NetworkParams& a, const NetworkParams& b) {
    return a.arch() == b.arch();
}

bool equal_params(const NetworkParams& a, const NetworkParams& b) {
    if (!same_arch(a, b)) return false;
    for (size_t i = 0; i < a.blocks.size(); ++i) {
        if (a.blocks[i].weights != b.blocks[i].weights) return false;
        if (a.blocks[i].bias != b.blocks[i].bias) return false;
    }
    return true;
}

double glorot_bound(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
}

NetworkParams init_params(const Arch& arch, uint64_t seed) {
    Rng rng(seed);
    NetworkParams params;
    for (const auto& spec : arch) {
        LayerBlock block;
        block.spec = spec;
        int fan_in, fan_out;
        if (spec.kind == LayerKind::Conv) {
            fan_in = spec.in_c * spec.ksize * spec.ksize;
            fan_out = spec.out_c * spec.ksize * spec.ksize;
        } else {
            fan_in = spec.in_n;
            fan_out = spec.out_n;
        }
        const double a = glorot_bound(fan_in, fan_out);
        block.weights.resize(spec.weight_count());
        for (double& w : block.weights) w = rng.uniform(-a, a);
        block.bias.assign(spec.bias_count(), 0.0);
        params.blocks.push_back(std::move(block));
    }
    return params;
}

namespace {

// conv weight index: ((o * in_c + i) * k + ky) * k + kx
void conv_forward(const LayerBlock& block, const FeatureMap& in, FeatureMap& out) {
    const LayerSpec& s = block.spec;
    const int k = s.ksize, r = (k - 1) / 2;
    const int h = in.height, w = in.width;
    out = FeatureMap::zeros(s.out_c, h, w);
    for (int o = 0; o < s.out_c; ++o) {
        double* dst = &out.data[static_cast<size_t>(o) * h * w];
        const double b = block.bias[o];
        for (int i = 0; i < h * w; ++i) dst[i] = b;
        for (int c = 0; c < s.in_c; ++c) {
            const double* src = &in.data[static_cast<size_t>(c) * h * w];
            const double* wk = &block.weights[((static_cast<size_t>(o) * s.in_c + c) * k) * k];
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double wv = wk[ky * k + kx];
                    if (wv == 0.0) continue;
                    const int dy = ky - r, dx = kx - r;
                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    for (int y = y0; y < y1; ++y) {
                        const double* __restrict srow = src + static_cast<size_t>(y + dy) * w + dx;
                        double* __restrict drow = dst + static_cast<size_t>(y) * w;
                        for (int x = x0; x < x1; ++x) drow[x] += wv * srow[x];
                    }
                }
            }
        }
    }
}

void conv_backward(const LayerBlock& block, const FeatureMap& in, const FeatureMap& dout,
                   LayerBlock& grad, FeatureMap& din) {
    const LayerSpec& s = block.spec;
    const int k = s.ksize, r = (k - 1) / 2;
    const int h = in.height, w = in.width;
    din = FeatureMap::zeros(s.in_c, h, w);
    for (int o = 0; o < s.out_c; ++o) {
        const double* dgrad = &dout.data[static_cast<size_t>(o) * h * w];
        double bsum = 0.0;
        for (int i = 0; i < h * w; ++i) bsum += dgrad[i];
        grad.bias[o] += bsum;
        for (int c = 0; c < s.in_c; ++c) {
            const double* src = &in.data[static_cast<size_t>(c) * h * w];
            double* dsrc = &din.data[static_cast<size_t>(c) * h * w];
            double* wgrad = &grad.weights[((static_cast<size_t>(o) * s.in_c + c) * k) * k];
            const double* wk = &block.weights[((static_cast<size_t>(o) * s.in_c + c) * k) * k];
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const int dy = ky - r, dx = kx - r;
                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    double wacc = 0.0;
                    const double wv = wk[ky * k + kx];
                    for (int y = y0; y < y1; ++y) {
                        const double* __restrict srow = src + static_cast<size_t>(y + dy) * w + dx;
                        double* __restrict dsrow = dsrc + static_cast<size_t>(y + dy) * w + dx;
                        const double* __restrict drow = dgrad + static_cast<size_t>(y) * w;
                        for (int x = x0; x < x1; ++x) {
                            wacc += srow[x] * drow[x];
                            dsrow[x] += wv * drow[x];
                        }
                    }
                    wgrad[ky * k + kx] += wacc;
                }
            }
        }
    }
}

void dense_forward(const LayerBlock& block, const FeatureMap& in, FeatureMap& out) {
    const LayerSpec& s = block.spec;
    out = FeatureMap::zeros(s.out_n, 1, 1);
    for (int o = 0; o < s.out_n; ++o) {
        const double* wrow = &block.weights[static_cast<size_t>(o) * s.in_n];
        double acc = block.bias[o];
        for (int i = 0; i < s.in_n; ++i) acc += wrow[i] * in.data[i];
        out.data[o] = acc;
    }
}

void dense_backward(const LayerBlock& block, const FeatureMap& in, const FeatureMap& dout,
                    LayerBlock& grad, FeatureMap& din) {
    const LayerSpec& s = block.spec;
    din = FeatureMap::zeros(in.channels, in.height, in.width);
    for (int o = 0; o < s.out_n; ++o) {
        const double g = dout.data[o];
        const double* wrow = &block.weights[static_cast<size_t>(o) * s.in_n];
        double* wgrow = &grad.weights[static_cast<size_t>(o) * s.in_n];
        grad.bias[o] += g;
        for (int i = 0; i < s.in_n; ++i) {
            wgrow[i] += g * in.data[i];
            din.data[i] += g * wrow[i];
        }
    }
}

void maxpool2x2(const FeatureMap& in, FeatureMap& out, std::vector<int32_t>& argmax) {
    const int oh = in.height / 2, ow = in.width / 2;
    out = FeatureMap::zeros(in.channels, oh, ow);
    argmax.assign(out.size(), -1);
    for (int c = 0; c < in.channels; ++c) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double best = -1e300;
                int best_idx = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        int idx = (c * in.height + 2 * y + dy) * in.width + 2 * x + dx;
                        if (in.data[idx] > best) {
                            best = in.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                size_t oi = (static_cast<size_t>(c) * oh + y) * ow + x;
                out.data[oi] = best;
                argmax[oi] = best_idx;
            }
        }
    }
}

}  // namespace

FeatureMap net_forward(const NetworkParams& params, const FeatureMap& input, ForwardCache* cache) {
    if (cache) {
        cache->layers.clear();
        cache->layers.resize(params.blocks.size());
    }
    FeatureMap cur = input;
    for (size_t li = 0; li < params.blocks.size(); ++li) {
        const LayerBlock& block = params.blocks[li];
        const LayerSpec& s = block.spec;
        FeatureMap act;
        if (s.kind == LayerKind::Conv) {
            if (cur.channels != s.in_c) {
                throw std::invalid_argument("net_forward: layer '" + s.name + "' expects " +
                                            std::to_string(s.in_c) + " channels, got " +
                                            std::to_string(cur.channels));
            }
            conv_forward(block, cur, act);
        } else {
            if (static_cast<int>(cur.size()) != s.in_n) {
                throw std::invalid_argument("net_forward: layer '" + s.name + "' expects " +
                                            std::to_string(s.in_n) + " inputs, got " +
                                            std::to_string(cur.size()));
            }
            FeatureMap flat = cur;
            flat.channels = static_cast<int>(cur.size());
            flat.height = 1;
            flat.width = 1;
            dense_forward(block, flat, act);
        }
        if (cache) cache->layers[li].input = std::move(cur);
        if (s.relu) {
            for (double& v : act.data) v = v > 0.0 ? v : 0.0;
        }
        if (s.kind == LayerKind::Conv && s.pool) {
            FeatureMap pooled;
            std::vector<int32_t> argmax;
            maxpool2x2(act, pooled, argmax);
            if (cache) {
                cache->layers[li].pool_argmax = std::move(argmax);
                cache->layers[li].act = std::move(act);
            }
            cur = std::move(pooled);
        } else if (cache) {
            cache->layers[li].act = act;  // backward needs the mask and shape
            cur = std::move(act);
        } else {
            cur = std::move(act);
        }
    }
    if (cache) cache->output = cur;
    return cur;
}

NetworkParams zeros_like(const NetworkParams& params) {
    NetworkParams z;
    for (const auto& b : params.blocks) {
        LayerBlock nb;
        nb.spec = b.spec;
        nb.weights.assign(b.weights.size(), 0.0);
        nb.bias.assign(b.bias.size(), 0.0);
        z.blocks.push_back(std::move(nb));
    }
    return z;
}

FeatureMap net_backward(const NetworkParams& params, const ForwardCache& cache,
                        const FeatureMap& upstream, NetworkParams& grads) {
    if (cache.layers.size() != params.blocks.size() || !same_arch(params, grads)) {
        throw std::invalid_argument("net_backward: cache/params/grads mismatch");
    }
    FeatureMap dcur = upstream;
    for (size_t li = params.blocks.size(); li-- > 0;) {
        const LayerBlock& block = params.blocks[li];
        const LayerCache& lc = cache.layers[li];
        const LayerSpec& s = block.spec;

        FeatureMap dact;
        if (s.kind == LayerKind::Conv && s.pool) {
            dact = FeatureMap::zeros(s.out_c, lc.act.height, lc.act.width);
            for (size_t i = 0; i < lc.pool_argmax.size(); ++i) {
                dact.data[lc.pool_argmax[i]] += dcur.data[i];
            }
        } else {
            dact = std::move(dcur);
        }
        if (s.relu) {
            for (size_t i = 0; i < dact.data.size(); ++i) {
                if (lc.act.data[i] <= 0.0) dact.data[i] = 0.0;
            }
        }
        FeatureMap din;
        if (s.kind == LayerKind::Conv) {
            conv_backward(block, lc.input, dact, grads.blocks[li], din);
        } else {
            FeatureMap flat = lc.input;
            flat.channels = static_cast<int>(lc.input.size());
            flat.height = 1;
            flat.width = 1;
            dense_backward(block, flat, dact, grads.blocks[li], din);
            din.channels = lc.input.channels;
            din.height = lc.input.height;
            din.width = lc.input.width;
        }
        dcur = std::move(din);
    }
    return dcur;
}

NetworkParams average_params(const std::vector<NetworkParams>& nets) {
    if (nets.empty()) throw std::invalid_argument("average_params: empty list");
    for (const auto& n : nets) {
        if (!same_arch(n, nets[0])) {
            throw std::invalid_argument("average_params: architecture descriptors differ");
        }
    }
    // mean computed as x0 + mean(xi - x0): identical inputs average bit-exactly
    NetworkParams avg = nets[0];
    const double inv = 1.0 / static_cast<double>(nets.size());
    for (size_t bi = 0; bi < avg.blocks.size(); ++bi) {
        auto accumulate = [&](std::vector<double>& out,
                              const std::vector<double> LayerBlock::*member) {
            for (size_t i = 0; i < out.size(); ++i) {
                double delta = 0.0;
                for (size_t ni = 1; ni < nets.size(); ++ni) {
                    delta += (nets[ni].blocks[bi].*member)[i] - out[i];
                }
                out[i] += delta * inv;
            }
        };
        accumulate(avg.blocks[bi].weights, &LayerBlock::weights);
        accumulate(avg.blocks[bi].bias, &LayerBlock::bias);
    }
    return avg;
}

void fill_zero(NetworkParams& p) {
    for (auto& b : p.blocks) {
        std::fill(b.weights.begin(), b.weights.end(), 0.0);
        std::fill(b.bias.begin(), b.bias.end(), 0.0);
    }
}

void axpy(double a, const NetworkParams& x, NetworkParams& y) {
    if (!same_arch(x, y)) throw std::invalid_argument("axpy: architecture mismatch");
    for (size_t bi = 0; bi < y.blocks.size(); ++bi) {
        for (size_t i = 0; i < y.blocks[bi].weights.size(); ++i) {
            y.blocks[bi].weights[i] += a * x.blocks[bi].weights[i];
        }
        for (size_t i = 0; i < y.blocks[bi].bias.size(); ++i) {
            y.blocks[bi].bias[i] += a * x.blocks[bi].bias[i];
        }
    }
}

void scale_params(NetworkParams& p, double a) {
    for (auto& b : p.blocks) {
        for (double& w : b.weights) w *= a;
        for (double& v : b.bias) v *= a;
    }
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("model container: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("model container: truncated");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw DataError("model container: truncated");
    return s;
}

void put_vec(std::ostream& out, const std::vector<double>& v) {
    put_u32(out, static_cast<uint32_t>(v.size()));
    for (double x : v) put_f64(out, x);
}

std::vector<double> get_vec(std::istream& in) {
    uint32_t n = get_u32(in);
    std::vector<double> v(n);
    for (uint32_t i = 0; i < n; ++i) v[i] = get_f64(in);
    return v;
}

}  // namespace

void write_params(std::ostream& out, const NetworkParams& params) {
    put_u32(out, static_cast<uint32_t>(params.blocks.size()));
    for (const auto& b : params.blocks) {
        const LayerSpec& s = b.spec;
        out.put(static_cast<char>(s.kind));
        put_string(out, s.name);
        put_u32(out, static_cast<uint32_t>(s.in_c));
        put_u32(out, static_cast<uint32_t>(s.out_c));
        put_u32(out, static_cast<uint32_t>(s.ksize));
        put_u32(out, static_cast<uint32_t>(s.in_n));
        put_u32(out, static_cast<uint32_t>(s.out_n));
        out.put(s.relu ? 1 : 0);
        out.put(s.pool ? 1 : 0);
        put_vec(out, b.weights);
        put_vec(out, b.bias);
    }
}

NetworkParams read_params(std::istream& in) {
    NetworkParams params;
    uint32_t n = get_u32(in);
    for (uint32_t i = 0; i < n; ++i) {
        LayerBlock b;
        int kind = in.get();
        if (kind != 0 && kind != 1) throw DataError("model container: bad layer kind");
        b.spec.kind = static_cast<LayerKind>(kind);
        b.spec.name = get_string(in);
        b.spec.in_c = static_cast<int>(get_u32(in));
        b.spec.out_c = static_cast<int>(get_u32(in));
        b.spec.ksize = static_cast<int>(get_u32(in));
        b.spec.in_n = static_cast<int>(get_u32(in));
        b.spec.out_n = static_cast<int>(get_u32(in));
        b.spec.relu = in.get() != 0;
        b.spec.pool = in.get() != 0;
        b.weights = get_vec(in);
        b.bias = get_vec(in);
        if (b.weights.size() != b.spec.weight_count() || b.bias.size() != b.spec.bias_count()) {
            throw DataError("model container: parameter count mismatch in '" + b.spec.name + "'");
        }
        params.blocks.push_back(std::move(b));
    }
    return params;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = -1e300;
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace percept
