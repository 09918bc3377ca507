#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <anisoglm/prior_graph.hpp>
#include <anisoglm/synth.hpp>

#include "support.hpp"

using namespace anisoglm;

namespace {

TensorField constant_field(int width, int height, const StructureTensor& t) {
    TensorField field(width, height);
    for (auto& tt : field.tensors) tt = t;
    return field;
}

void check_laplacian_invariants(const SparseSymMatrix& L) {
    REQUIRE(L.is_symmetric());
    double max_abs = 0.0;
    for (const auto& t : L.entries()) max_abs = std::max(max_abs, std::fabs(t.v));
    for (int i = 0; i < L.n(); ++i) {
        REQUIRE(std::fabs(L.row_sum(i)) <= 1e-12 * std::max(max_abs, 1e-300));
        REQUIRE(L.coeff(i, i) >= 0.0);
        for (int k = L.row_begin(i); k < L.row_end(i); ++k)
            if (L.col_at(k) != i) REQUIRE(L.val_at(k) <= 0.0);
    }
}

} // namespace

TEST_CASE("UGL adjacency on small masks") {
    ImageGrid full3(3, 3);
    const auto A = build_ugl_adjacency(full3);
    // center pixel connects to the four cardinal neighbors
    REQUIRE(A.coeff(4, 1) == 1.0);
    REQUIRE(A.coeff(4, 3) == 1.0);
    REQUIRE(A.coeff(4, 5) == 1.0);
    REQUIRE(A.coeff(4, 7) == 1.0);
    REQUIRE(A.coeff(4, 0) == 0.0);
    REQUIRE(A.row_nnz_offdiag(4) == 4);

    ImageGrid single(1, 1);
    const auto A1 = build_ugl_adjacency(single);
    REQUIRE(A1.n() == 1);
    REQUIRE(A1.nnz() == 0);

    ImageGrid strip(1, 2); // 2 rows, 1 column
    const auto A2 = build_ugl_adjacency(strip);
    REQUIRE(A2.coeff(0, 1) == 1.0);
    REQUIRE(A2.coeff(1, 0) == 1.0);

    ImageGrid empty(2, 2);
    empty.mask.assign(4, 0);
    REQUIRE_THROWS_AS(build_ugl_adjacency(empty), Error);
}

TEST_CASE("UGL interior row realizes the Laplacian stencil exactly") {
    ImageGrid full(5, 5);
    const auto L = laplacian(build_ugl_adjacency(full));
    const int center = 2 * 5 + 2;
    REQUIRE(L.coeff(center, center) == 4.0);
    REQUIRE(L.coeff(center, center - 1) == -1.0);
    REQUIRE(L.coeff(center, center + 1) == -1.0);
    REQUIRE(L.coeff(center, center - 5) == -1.0);
    REQUIRE(L.coeff(center, center + 5) == -1.0);
    REQUIRE(L.coeff(center, center - 6) == 0.0);
}

TEST_CASE("4dir assignment picks the perpendicular stencil") {
    ImageGrid domain(3, 3);
    // orientation d_x -> N_y
    auto a = assign_4dir_neighborhoods(constant_field(3, 3, {1.0, 0.0, 0.0}), domain);
    for (auto s : a.stencil) REQUIRE(s == Stencil::vertical);
    // orientation d_y -> N_x
    a = assign_4dir_neighborhoods(constant_field(3, 3, {0.0, 0.0, 1.0}), domain);
    for (auto s : a.stencil) REQUIRE(s == Stencil::horizontal);
    // orientation d_xy -> N_-xy
    a = assign_4dir_neighborhoods(constant_field(3, 3, {0.5, 0.5, 0.5}), domain);
    for (auto s : a.stencil) REQUIRE(s == Stencil::diag_anti);
    // orientation d_-xy -> N_xy
    a = assign_4dir_neighborhoods(constant_field(3, 3, {0.5, -0.5, 0.5}), domain);
    for (auto s : a.stencil) REQUIRE(s == Stencil::diag_main);
    // zero tensor: ties break towards d_x, so N_y
    a = assign_4dir_neighborhoods(constant_field(3, 3, {}), domain);
    for (auto s : a.stencil) REQUIRE(s == Stencil::vertical);
}

TEST_CASE("4dir assignment follows stripe orientation") {
    // gradient along x: tensors point along d_x, stencil should be N_y
    const ImageGrid img = make_stripes(48, 48, 0.0, 8.0, 1.0, 0.0);
    const auto field = estimate_structure_tensor(img, 1.0, 2.0);
    const auto assignment = assign_4dir_neighborhoods(field, img);
    const auto map = PixelIndexMap::from_mask(img);
    int good = 0, total = 0;
    for (int r = 10; r < 38; ++r)
        for (int c = 10; c < 38; ++c) {
            ++total;
            good += assignment.stencil[map.index_of(r, c)] == Stencil::vertical;
        }
    REQUIRE(good >= static_cast<int>(0.95 * total));
}

TEST_CASE("4dir adjacency symmetrization") {
    // 1x2 domain, both pixels horizontal: reciprocated edge keeps weight 1
    ImageGrid two(2, 1);
    NeighborhoodAssignment both{{Stencil::horizontal, Stencil::horizontal}};
    auto A = build_adjacency_4dir(both, two);
    REQUIRE(A.coeff(0, 1) == 1.0);

    // pixel 0 points at 1, pixel 1 points elsewhere: averaged to 0.5
    NeighborhoodAssignment mixed{{Stencil::horizontal, Stencil::vertical}};
    A = build_adjacency_4dir(mixed, two);
    REQUIRE(A.coeff(0, 1) == 0.5);
    REQUIRE(A.coeff(1, 0) == 0.5);

    // isolated masked pixel has an empty row
    ImageGrid spaced(3, 1);
    spaced.mask = {1, 0, 1};
    NeighborhoodAssignment iso{{Stencil::horizontal, Stencil::horizontal}};
    A = build_adjacency_4dir(iso, spaced);
    REQUIRE(A.nnz() == 0);

    NeighborhoodAssignment short_assignment{{Stencil::horizontal}};
    REQUIRE_THROWS_AS(build_adjacency_4dir(short_assignment, two), Error);
}

TEST_CASE("anydir weight formula") {
    REQUIRE(anydir_weight(M_PI / 2, 0.0, 1.0, 12.0, 5.0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(anydir_weight(M_PI / 2, 0.0, std::sqrt(2.0), 12.0, 5.0) ==
            Catch::Approx(std::pow(2.0, -2.5)).margin(1e-12));
    REQUIRE(anydir_weight(M_PI / 4, 0.0, 1.0, 12.0, 5.0) ==
            Catch::Approx(1.0 / 64.0).margin(1e-12));

    REQUIRE_THROWS_AS(anydir_weight(0.0, 0.0, 0.0, 12.0, 5.0), Error);
    REQUIRE_THROWS_AS(anydir_weight(0.0, 0.0, 1.0, 0.0, 5.0), Error);
    REQUIRE_THROWS_AS(anydir_weight(0.0, 0.0, 1.0, 12.0, 0.0), Error);
}

TEST_CASE("anydir weights are pi-periodic in the tensor angle") {
    RngStream rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const double phi_pix = (trial % 8) * M_PI / 4.0;
        const double phi_t = rng.uniform() * M_PI;
        const double r = trial % 2 == 0 ? 1.0 : std::sqrt(2.0);
        const double a = anydir_weight(phi_pix, phi_t, r, 12.0, 5.0);
        const double b = anydir_weight(phi_pix, phi_t + M_PI, r, 12.0, 5.0);
        REQUIRE(std::fabs(a - b) < 1e-12);
    }
}

TEST_CASE("anydir weight is continuous in the tensor angle") {
    const double delta = 0.01;
    for (double r : {1.0, std::sqrt(2.0)}) {
        double prev = anydir_weight(0.0, 0.0, r, 12.0, 5.0);
        for (double phi = delta; phi < 2.0 * M_PI; phi += delta) {
            const double cur = anydir_weight(0.0, phi, r, 12.0, 5.0);
            REQUIRE(std::fabs(cur - prev) <= 4.0 * delta);
            prev = cur;
        }
    }
}

TEST_CASE("anydir adjacency for a horizontal tensor field") {
    // phi_tensor = 0 everywhere: vertical neighbors get weight 1, diagonals
    // 2^-8.5, horizontal neighbors exactly zero
    ImageGrid domain(5, 5);
    const auto field = constant_field(5, 5, {1.0, 0.0, 0.0});
    const auto A = build_adjacency_anydir(field, domain, 12.0, 5.0);
    const auto map = PixelIndexMap::from_mask(domain);
    const int center = map.index_of(2, 2);
    REQUIRE(A.coeff(center, map.index_of(1, 2)) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(A.coeff(center, map.index_of(3, 2)) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(A.coeff(center, map.index_of(1, 3)) ==
            Catch::Approx(std::pow(2.0, -8.5)).margin(1e-12));
    REQUIRE(A.coeff(center, map.index_of(3, 1)) ==
            Catch::Approx(std::pow(2.0, -8.5)).margin(1e-12));
    REQUIRE(A.coeff(center, map.index_of(2, 1)) == 0.0);
    REQUIRE(A.coeff(center, map.index_of(2, 3)) == 0.0);
    REQUIRE(A.row_nnz_offdiag(center) == 6);
}

TEST_CASE("anydir drops unmasked neighbors") {
    ImageGrid domain(3, 1);
    domain.mask = {1, 0, 1};
    const auto A = build_adjacency_anydir(constant_field(3, 1, {1.0, 0.0, 0.0}), domain);
    REQUIRE(A.n() == 2);
    REQUIRE(A.nnz() == 0);
}

TEST_CASE("fallback substitutes UGL rows at unoriented pixels") {
    // left half oriented, right half isotropic-zero
    TensorField field(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            field.at(r, c) = c < 4 ? StructureTensor{1.0, 0.0, 0.0} : StructureTensor{};
    ImageGrid domain(8, 8);
    FallbackOptions fb;
    fb.enabled = true;

    const auto assignment = assign_4dir_neighborhoods(field, domain, fb);
    const auto map = PixelIndexMap::from_mask(domain);
    REQUIRE(assignment.stencil[map.index_of(4, 1)] == Stencil::vertical);
    REQUIRE(assignment.stencil[map.index_of(4, 6)] == Stencil::ugl);

    const auto A = build_adjacency_anydir(field, domain, 12.0, 5.0, fb);
    const int i = map.index_of(4, 6);
    REQUIRE(A.coeff(i, map.index_of(4, 5)) >= 0.5);
    REQUIRE(A.coeff(i, map.index_of(3, 6)) >= 0.5);
    REQUIRE(A.coeff(i, map.index_of(3, 5)) == 0.0);
}

TEST_CASE("all three laplacians satisfy the precision-matrix invariants") {
    RngStream rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        const int w = 4 + static_cast<int>(rng.uniform() * 7);
        const int h = 4 + static_cast<int>(rng.uniform() * 7);
        const auto field = testsupport::random_tensor_field(w, h, rng);
        const ImageGrid domain =
            trial % 3 == 0 ? testsupport::random_mask(w, h, 0.85, rng) : ImageGrid(w, h);

        const auto l_ugl = laplacian(build_ugl_adjacency(domain));
        const auto l_4dir =
            laplacian(build_adjacency_4dir(assign_4dir_neighborhoods(field, domain), domain));
        const auto l_anydir = laplacian(build_adjacency_anydir(field, domain));

        for (const auto* L : {&l_ugl, &l_4dir, &l_anydir}) {
            check_laplacian_invariants(*L);
            REQUIRE(testsupport::smallest_eigenvalue(*L) >= -1e-10);
        }

        // null space: the constant vector maps to zero
        std::vector<double> ones(l_anydir.n(), 1.0), out(l_anydir.n());
        for (const auto* L : {&l_ugl, &l_4dir, &l_anydir}) {
            L->multiply(ones.data(), out.data());
            for (double v : out) REQUIRE(std::fabs(v) < 1e-10);
        }

        // sparsity: per-row neighbor bound 8, total degree bound 4 resp. 8
        std::size_t total_4dir = 0, total_anydir = 0;
        for (int i = 0; i < l_4dir.n(); ++i) {
            REQUIRE(l_4dir.row_nnz_offdiag(i) <= 8);
            REQUIRE(l_anydir.row_nnz_offdiag(i) <= 8);
            total_4dir += l_4dir.row_nnz_offdiag(i);
            total_anydir += l_anydir.row_nnz_offdiag(i);
        }
        REQUIRE(total_4dir <= 4 * static_cast<std::size_t>(l_4dir.n()));
        REQUIRE(total_anydir <= 8 * static_cast<std::size_t>(l_anydir.n()));
    }
}

TEST_CASE("constant-orientation fields keep 4dir rows at UGL sparsity") {
    ImageGrid domain(10, 10);
    const auto a =
        assign_4dir_neighborhoods(constant_field(10, 10, {0.5, 0.5, 0.5}), domain);
    const auto L = laplacian(build_adjacency_4dir(a, domain));
    for (int i = 0; i < L.n(); ++i) REQUIRE(L.row_nnz_offdiag(i) <= 4);
}

TEST_CASE("make_prior assembles ranks from components") {
    ImageGrid domain(4, 4);
    PriorOptions opts;
    opts.scheme = PriorScheme::ugl;
    const auto prior = make_prior(nullptr, domain, opts);
    REQUIRE(prior.d_w.n() == 16);
    REQUIRE(prior.rank_w == 15); // one connected component
    REQUIRE(prior.d_ar == prior.d_w);

    opts.scheme = PriorScheme::fourdir;
    REQUIRE_THROWS_AS(make_prior(nullptr, domain, opts), Error);
}
