#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <anisoglm/structure_tensor.hpp>
#include <anisoglm/synth.hpp>

#include "support.hpp"

using namespace anisoglm;
using testsupport::angle_diff;

namespace {

double max_energy(const TensorField& field) {
    double m = 0.0;
    for (const auto& t : field.tensors) m = std::max(m, t.t11 + t.t22);
    return m;
}

} // namespace

TEST_CASE("principal orientation closed form") {
    const auto ex = principal_orientation({1.0, 0.0, 0.0});
    REQUIRE(ex.angle == 0.0);
    REQUIRE(ex.anisotropy == Catch::Approx(1.0));
    REQUIRE(ex.energy == Catch::Approx(1.0));

    const auto ed = principal_orientation({0.5, 0.5, 0.5});
    REQUIRE(ed.angle == Catch::Approx(M_PI / 4));
    REQUIRE(ed.anisotropy == Catch::Approx(1.0));
    REQUIRE(ed.energy == Catch::Approx(1.0));

    const auto eiso = principal_orientation({1.0, 0.0, 1.0});
    REQUIRE(eiso.anisotropy == 0.0);
    REQUIRE(eiso.angle == 0.0);
    REQUIRE(eiso.energy == Catch::Approx(2.0));
}

TEST_CASE("orientation tensor projections") {
    const auto px = project_onto_orientation_tensors({1.0, 0.0, 0.0});
    REQUIRE(px.x == Catch::Approx(1.0));
    REQUIRE(px.y == Catch::Approx(0.0));
    REQUIRE(px.xy == Catch::Approx(0.5));
    REQUIRE(px.neg_xy == Catch::Approx(0.5));

    const auto pd = project_onto_orientation_tensors({0.5, 0.5, 0.5});
    REQUIRE(pd.x == Catch::Approx(0.5));
    REQUIRE(pd.y == Catch::Approx(0.5));
    REQUIRE(pd.xy == Catch::Approx(1.0));
    REQUIRE(pd.neg_xy == Catch::Approx(0.0).margin(1e-15));

    const auto pi = project_onto_orientation_tensors({1.0, 0.0, 1.0});
    REQUIRE(pi.x == Catch::Approx(1.0));
    REQUIRE(pi.y == Catch::Approx(1.0));
    REQUIRE(pi.xy == Catch::Approx(1.0));
    REQUIRE(pi.neg_xy == Catch::Approx(1.0));
}

TEST_CASE("direction is invariant to positive scaling") {
    RngStream rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const double gx = rng.normal(), gy = rng.normal();
        const StructureTensor t{gx * gx + 0.01, gx * gy, gy * gy + 0.02};
        const double c = std::exp(6.0 * (rng.uniform() - 0.5) * 2.302585);
        const StructureTensor tc{c * t.t11, c * t.t12, c * t.t22};
        REQUIRE(angle_diff(principal_orientation(t).angle, principal_orientation(tc).angle) <
                1e-10);

        const auto p = project_onto_orientation_tensors(t);
        const auto pc = project_onto_orientation_tensors(tc);
        const double a[4] = {p.x, p.y, p.xy, p.neg_xy};
        const double b[4] = {pc.x, pc.y, pc.xy, pc.neg_xy};
        int arg_a = 0, arg_b = 0;
        for (int k = 1; k < 4; ++k) {
            if (a[k] > a[arg_a]) arg_a = k;
            if (b[k] > b[arg_b]) arg_b = k;
        }
        REQUIRE(arg_a == arg_b);
    }
}

TEST_CASE("projection argmax picks the exact multiple of 45 degrees") {
    // projections are ordered (x, y, xy, -xy) = (0, 90, 45, 135) degrees
    const int expected_argmax[4] = {0, 2, 1, 3};
    for (int k = 0; k < 4; ++k) {
        const double theta = k * M_PI / 4.0;
        const double dx = std::cos(theta), dy = std::sin(theta);
        const StructureTensor t{dx * dx, dx * dy, dy * dy};
        const auto p = project_onto_orientation_tensors(t);
        const double proj[4] = {p.x, p.y, p.xy, p.neg_xy};
        int best = 0;
        for (int i = 1; i < 4; ++i)
            if (proj[i] > proj[best]) best = i;
        REQUIRE(best == expected_argmax[k]);
    }
}

TEST_CASE("constant image produces zero tensors") {
    ImageGrid img(24, 20, 7.5);
    const auto field = estimate_structure_tensor(img, 1.0, 2.0);
    for (const auto& t : field.tensors) REQUIRE(t.t11 + t.t22 < 1e-12 * 7.5 * 7.5);
}

TEST_CASE("horizontal ramp aligns tensors with the x axis") {
    ImageGrid img(32, 32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) img.at(r, c) = static_cast<double>(c);
    const auto field = estimate_structure_tensor(img, 1.0, 2.0);
    for (int r = 12; r < 20; ++r)
        for (int c = 12; c < 20; ++c) {
            const auto& t = field.at(r, c);
            REQUIRE(t.t11 > 0.5);
            REQUIRE(std::fabs(t.t12) < 1e-6 * t.t11);
            REQUIRE(std::fabs(t.t22) < 1e-6 * t.t11);
        }
}

TEST_CASE("oriented stripes recover their angle") {
    const double theta = 30.0 * M_PI / 180.0;
    const ImageGrid img = make_stripes(48, 48, 30.0, 8.0, 1.0, 0.0);
    const auto field = estimate_structure_tensor(img, 1.0, 2.0);
    for (int r = 12; r < 36; ++r)
        for (int c = 12; c < 36; ++c) {
            const auto est = principal_orientation(field.at(r, c));
            REQUIRE(angle_diff(est.angle, theta) < 3.0 * M_PI / 180.0);
        }
}

TEST_CASE("stripes rotated by 90 degrees rotate the estimate by 90 degrees") {
    const ImageGrid a = make_stripes(48, 48, 20.0, 8.0, 1.0, 0.0);
    const ImageGrid b = make_stripes(48, 48, 110.0, 8.0, 1.0, 0.0);
    const auto fa = estimate_structure_tensor(a, 1.0, 2.0);
    const auto fb = estimate_structure_tensor(b, 1.0, 2.0);
    for (int r = 12; r < 36; ++r)
        for (int c = 12; c < 36; ++c) {
            const double da = principal_orientation(fa.at(r, c)).angle;
            const double db = principal_orientation(fb.at(r, c)).angle;
            REQUIRE(std::fabs(angle_diff(da, db) - M_PI / 2) < 3.0 * M_PI / 180.0);
        }
}

TEST_CASE("estimated tensors are positive semidefinite") {
    RngStream rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        ImageGrid img(16, 14);
        for (auto& v : img.values) v = 10.0 * rng.normal();
        const auto field = estimate_structure_tensor(img, 0.8 + 0.4 * trial, 0.5 * trial);
        const double scale = max_energy(field);
        for (const auto& t : field.tensors) {
            REQUIRE(t.t11 >= 0.0);
            REQUIRE(t.t22 >= 0.0);
            REQUIRE(t.t11 * t.t22 - t.t12 * t.t12 >= -1e-9 * scale * scale);
        }
    }
}

TEST_CASE("estimator rejects bad inputs") {
    REQUIRE_THROWS_AS(estimate_structure_tensor(ImageGrid(4, 8)), Error);
    REQUIRE_THROWS_AS(estimate_structure_tensor(ImageGrid(8, 4)), Error);
    ImageGrid img(8, 8);
    REQUIRE_THROWS_AS(estimate_structure_tensor(img, 0.0, 1.0), Error);
    REQUIRE_THROWS_AS(estimate_structure_tensor(img, 1.0, -1.0), Error);
    img.at(3, 3) = std::nan("");
    REQUIRE_THROWS_AS(estimate_structure_tensor(img), Error);
    // non-finite values outside the mask are tolerated
    img.mask[img.idx(3, 3)] = 0;
    REQUIRE_NOTHROW(estimate_structure_tensor(img));
}

TEST_CASE("unoriented mask flags isotropic pixels") {
    ImageGrid img = make_stripes(32, 32, 0.0, 8.0, 1.0, 0.0);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) img.at(r, c) = 0.0; // uniform quadrant
    const auto field = estimate_structure_tensor(img, 1.0, 2.0);
    const auto flags = unoriented_mask(field, img, 0.01);
    REQUIRE(flags[field.idx(4, 4)] == 1);   // deep inside the uniform patch
    REQUIRE(flags[field.idx(24, 24)] == 0); // striped region keeps orientation
}
