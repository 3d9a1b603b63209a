#include "percept/svm.hpp"

#include <numeric>
#include <set>
#include <stdexcept>

#include "percept/rng.hpp"

namespace percept {

SvmModel svm_train(const std::vector<std::vector<double>>& samples,
                   const std::vector<int>& labels, int n_classes, int epochs, double lr,
                   double reg, uint64_t seed) {
    if (samples.empty() || samples.size() != labels.size()) {
        throw std::invalid_argument("svm_train: bad sample/label counts");
    }
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw std::invalid_argument("svm_train: need at least two classes in the data");
    }
    for (int l : labels) {
        if (l < 0 || l >= n_classes) throw std::invalid_argument("svm_train: label out of range");
    }

    SvmModel model;
    model.n_classes = n_classes;
    model.dim = static_cast<int>(samples[0].size());
    model.weights.assign(n_classes, std::vector<double>(model.dim, 0.0));
    model.bias.assign(n_classes, 0.0);

    Rng rng(seed);
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t idx : order) {
            const auto& x = samples[idx];
            for (int c = 0; c < n_classes; ++c) {
                const double y = labels[idx] == c ? 1.0 : -1.0;
                auto& w = model.weights[c];
                double margin = model.bias[c];
                for (int i = 0; i < model.dim; ++i) margin += w[i] * x[i];
                margin *= y;
                const double decay = 1.0 - lr * reg;
                if (margin < 1.0) {
                    for (int i = 0; i < model.dim; ++i) w[i] = w[i] * decay + lr * y * x[i];
                    model.bias[c] += lr * y;
                } else {
                    for (int i = 0; i < model.dim; ++i) w[i] *= decay;
                }
            }
        }
    }
    return model;
}

int svm_predict(const SvmModel& model, const std::vector<double>& sample) {
    if (static_cast<int>(sample.size()) != model.dim) {
        throw std::invalid_argument("svm_predict: feature dimension mismatch");
    }
    int best = 0;
    double best_margin = -1e300;
    for (int c = 0; c < model.n_classes; ++c) {
        double m = model.bias[c];
        for (int i = 0; i < model.dim; ++i) m += model.weights[c][i] * sample[i];
        if (m > best_margin) {
            best_margin = m;
            best = c;
        }
    }
    return best;
}

}  // namespace percept
