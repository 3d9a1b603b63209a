#pragma once

#include <map>
#include <string>
#include <vector>

namespace percept {

struct GradStatRow {
    int part = 0;
    int epoch = 0;
    std::string layer;
    double mean_norm = 0.0;  // ||mean of gradient samples||_2 / ||weights||_2
    double std_norm = 0.0;   // ||per-component population std||_2 / ||weights||_2
};

// Direct formula for one layer and one epoch: samples are the per-batch weight
// gradients, weights the layer's weight vector. Throws on zero weight norm.
std::pair<double, double> grad_norm_stats(const std::vector<std::vector<double>>& samples,
                                          const std::vector<double>& weights);

// Streaming accumulator used by the training loop. Call record() once per
// batch per layer, then end_epoch() with the current weights per layer.
class GradStats {
public:
    void begin_epoch(int part, int epoch);
    void record(const std::string& layer, const std::vector<double>& grad);
    void end_epoch(const std::map<std::string, const std::vector<double>*>& weights);
    const std::vector<GradStatRow>& rows() const { return rows_; }
    void write_csv(const std::string& path) const;

private:
    struct Accum {
        long count = 0;
        std::vector<double> sum;
        std::vector<double> sumsq;
    };
    int part_ = 0;
    int epoch_ = 0;
    std::map<std::string, Accum> accum_;
    std::vector<GradStatRow> rows_;
};

}  // namespace percept
