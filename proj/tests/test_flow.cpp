#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "percept/filters.hpp"
#include "percept/optical_flow.hpp"
#include "test_util.hpp"

using namespace percept;
using testutil::random_image;

TEST_SUITE("flow") {

TEST_CASE("identical frames give the exact zero field") {
    const Image img = random_image(16, 16, 31);
    const FlowField f = optical_flow(img, img);
    for (double v : f.u) CHECK(v == 0.0);
    for (double v : f.v) CHECK(v == 0.0);
}

TEST_CASE("two uncorrelated constant frames give the zero field") {
    Image a = Image::zeros(8, 8, 1);
    Image b = Image::zeros(8, 8, 1);
    for (double& v : a.data) v = 0.2;
    for (double& v : b.data) v = 0.9;
    const FlowField f = optical_flow(a, b);
    for (double v : f.u) CHECK(v == 0.0);
    for (double v : f.v) CHECK(v == 0.0);
}

TEST_CASE("1px rightward shift yields positive mean u") {
    Image prev = random_image(32, 32, 77);
    prev = gaussian_scale(prev, 2.0);  // smooth texture so gradients are informative
    const Image next = shift_image(prev, 0, 1);
    const FlowField f = optical_flow(prev, next);
    double mu = 0, mv = 0;
    for (double v : f.u) mu += v;
    for (double v : f.v) mv += v;
    mu /= f.u.size();
    mv /= f.v.size();
    CHECK(mu > 0.0);
    CHECK(std::abs(mv) <= 0.2);
}

TEST_CASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(optical_flow(random_image(8, 8, 1), random_image(8, 9, 2)),
                    std::invalid_argument);
}

TEST_CASE("flow_orientation maps angles onto [0,1)") {
    FlowField f = FlowField::zeros(1, 4);
    f.u = {1.0, 0.0, 0.0, -1.0};
    f.v = {0.0, 0.0, 1.0, 0.0};
    const Image o = flow_orientation(f);
    CHECK(o.data[0] == doctest::Approx(0.5));   // angle 0
    CHECK(o.data[1] == 0.0);                    // zero flow
    CHECK(o.data[2] == doctest::Approx(0.75));  // +pi/2
    CHECK(o.data[3] < 1.0);                     // pi wraps into the range
    CHECK(o.data[3] >= 0.0);

    Rng rng(8);
    FlowField r = FlowField::zeros(10, 10);
    for (size_t i = 0; i < r.u.size(); ++i) {
        r.u[i] = rng.uniform(-3, 3);
        r.v[i] = rng.uniform(-3, 3);
    }
    const Image ro = flow_orientation(r);
    for (double v : ro.data) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("shift_image replicates vacated borders") {
    Image img = Image::zeros(3, 3, 1);
    for (int i = 0; i < 9; ++i) img.data[i] = i;
    const Image s = shift_image(img, 1, 1);
    CHECK(s.at(1, 1) == img.at(0, 0));
    CHECK(s.at(2, 2) == img.at(1, 1));
    CHECK(s.at(0, 0) == img.at(0, 0));  // clamped corner
}

}  // TEST_SUITE
