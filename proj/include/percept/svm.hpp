#pragma once

#include <cstdint>
#include <vector>

namespace percept {

// One-vs-rest linear SVM over flattened pooled features.
struct SvmModel {
    int n_classes = 0;
    int dim = 0;
    std::vector<std::vector<double>> weights;  // one vector per class
    std::vector<double> bias;
};

// Hinge loss, subgradient descent with L2 regularization. At least two
// distinct labels must be present.
SvmModel svm_train(const std::vector<std::vector<double>>& samples,
                   const std::vector<int>& labels, int n_classes, int epochs = 50,
                   double lr = 0.01, double reg = 1e-4, uint64_t seed = 1);

// argmax of the per-class margins, lowest index on ties.
int svm_predict(const SvmModel& model, const std::vector<double>& sample);

}  // namespace percept
