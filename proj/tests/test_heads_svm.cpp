#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "percept/heads.hpp"
#include "percept/rng.hpp"
#include "percept/svm.hpp"

using namespace percept;

namespace {

FeatureMap random_map(int c, int h, int w, uint64_t seed) {
    FeatureMap m = FeatureMap::zeros(c, h, w);
    Rng rng(seed);
    for (double& v : m.data) v = rng.uniform(-1, 1);
    return m;
}

}  // namespace

TEST_SUITE("heads") {

TEST_CASE("head architectures: cnn1c is cnn0c plus one conv block") {
    const Arch a0 = head_arch(HeadVariant::Cnn0C, 32, 4, 4, 4);
    const Arch a1 = head_arch(HeadVariant::Cnn1C, 32, 4, 4, 4);
    REQUIRE(a0.size() == 3);
    REQUIRE(a1.size() == 4);
    int convs0 = 0, convs1 = 0;
    for (const auto& s : a0) convs0 += s.kind == LayerKind::Conv;
    for (const auto& s : a1) convs1 += s.kind == LayerKind::Conv;
    CHECK(convs0 == 0);
    CHECK(convs1 == 1);
    // identical FC stacks
    for (size_t i = 0; i < a0.size(); ++i) {
        CHECK(a0[i].in_n == a1[i + 1].in_n);
        CHECK(a0[i].out_n == a1[i + 1].out_n);
    }
}

TEST_CASE("head_forward yields a probability simplex") {
    for (HeadVariant v : {HeadVariant::Cnn0C, HeadVariant::Cnn1C}) {
        const NetworkParams head = init_params(head_arch(v, 8, 4, 4, 4), 3);
        const auto probs = head_forward(head, random_map(8, 4, 4, 4));
        REQUIRE(probs.size() == 4);
        double sum = 0.0;
        for (double p : probs) {
            CHECK(p > 0.0);
            CHECK(p <= 1.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("zero input and zero biases give the uniform distribution") {
    const int classes_with_bg = 4;
    NetworkParams head = init_params(head_arch(HeadVariant::Cnn0C, 8, 4, 4, classes_with_bg), 5);
    const auto probs = head_forward(head, FeatureMap::zeros(8, 4, 4));
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / classes_with_bg).epsilon(1e-12));
}

TEST_CASE("softmax of [2,0,0]") {
    const auto p = softmax({2.0, 0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.7870).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.1065).epsilon(1e-3));
    CHECK(p[2] == doctest::Approx(0.1065).epsilon(1e-3));
}

TEST_CASE("head shape mismatch is rejected") {
    const NetworkParams head = init_params(head_arch(HeadVariant::Cnn0C, 8, 4, 4, 4), 6);
    CHECK_THROWS_AS(head_forward(head, random_map(8, 3, 3, 7)), std::invalid_argument);
}

TEST_CASE("svm separates 2-D blobs with a margin") {
    Rng rng(11);
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (int i = 0; i < 40; ++i) {
        xs.push_back({rng.uniform(2.0, 4.0), rng.uniform(2.0, 4.0)});
        ys.push_back(0);
        xs.push_back({rng.uniform(-4.0, -2.0), rng.uniform(-4.0, -2.0)});
        ys.push_back(1);
    }
    const SvmModel model = svm_train(xs, ys, 2, 100, 0.05, 1e-4, 7);
    int correct = 0;
    for (size_t i = 0; i < xs.size(); ++i) correct += svm_predict(model, xs[i]) == ys[i];
    CHECK(correct == static_cast<int>(xs.size()));
}

TEST_CASE("svm tie-break and positive-scaling invariance") {
    SvmModel model;
    model.n_classes = 3;
    model.dim = 2;
    model.weights = {{1, 0}, {0, 1}, {-1, -1}};
    model.bias = {0, 0, 0};
    CHECK(svm_predict(model, {0, 0}) == 0);  // all margins zero, lowest index

    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const std::vector<double> sx = {3.7 * x[0], 3.7 * x[1]};
        CHECK(svm_predict(model, x) == svm_predict(model, sx));
    }
}

TEST_CASE("svm rejects single-class data") {
    const std::vector<std::vector<double>> xs = {{1, 2}, {3, 4}};
    CHECK_THROWS_AS(svm_train(xs, {0, 0}, 2), std::invalid_argument);
}

}  // TEST_SUITE
