#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cellalign/errors.hpp"
#include "cellalign/evaluation.hpp"

using namespace cellalign;

namespace {

constexpr double kPi = std::numbers::pi;

LandmarkSet landmarks_for(const RigidTransform& truth, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 400.0);
    LandmarkSet lm;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2D s{u(rng), u(rng)};
        lm.pairs.push_back({s, apply(truth, s)});
    }
    return lm;
}

CellTable table_from(const std::vector<Point2D>& pts, const char* prefix = "c") {
    CellTable t;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        t.cells.push_back({prefix + std::to_string(i), pts[i], {}, std::nullopt});
    }
    return t;
}

}  // namespace

TEST_CASE("evaluate identities when estimate equals ground truth") {
    const auto truth = make_rigid(0.25, 1.0, 30.0, -10.0);
    const LandmarkSet lm = landmarks_for(truth, 8, 1);
    const EvaluationReport r = evaluate(lm, truth, truth);
    CHECK(r.delta_d == 0.0);
    CHECK(r.delta_t == 0.0);
    CHECK(r.delta_theta == 0.0);
    REQUIRE(r.per_landmark.size() == 8);
    for (const auto& p : r.per_landmark) {
        CHECK(p.d_gt <= 1e-9);
        CHECK(p.d_est <= 1e-9);
    }
}

TEST_CASE("evaluate translation magnitude difference") {
    // gt translation norm 10, estimate norm 15 -> delta_t exactly 5
    const auto gt = make_rigid(0.0, 1.0, 10.0, 0.0);
    const auto est = make_rigid(0.0, 1.0, 9.0, 12.0);
    const LandmarkSet lm = landmarks_for(gt, 5, 2);
    const EvaluationReport r = evaluate(lm, est, gt);
    CHECK(r.delta_t == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("evaluate rotation difference wraps") {
    const auto gt = make_rigid(179.0 * kPi / 180.0, 1.0, 0.0, 0.0);
    const auto est = make_rigid(-179.0 * kPi / 180.0, 1.0, 0.0, 0.0);
    const LandmarkSet lm = landmarks_for(gt, 4, 3);
    const EvaluationReport r = evaluate(lm, est, gt);
    CHECK(r.delta_theta == doctest::Approx(2.0 * kPi / 180.0).epsilon(1e-9));
    CHECK(r.delta_theta >= 0.0);
    CHECK(r.delta_theta <= kPi);
}

TEST_CASE("evaluate closed form residual perturbation") {
    // gt maps landmarks exactly (d_gt = 0); estimate shifted by (3, 4)
    // moves every mapped point exactly 5 um, so delta_d = 5.
    const auto gt = make_rigid(0.1, 1.0, 20.0, 10.0);
    auto est = gt;
    est.dx += 3.0;
    est.dy += 4.0;
    const LandmarkSet lm = landmarks_for(gt, 10, 4);
    const EvaluationReport r = evaluate(lm, est, gt);
    CHECK(r.delta_d == doctest::Approx(5.0).epsilon(1e-9));
    for (const auto& p : r.per_landmark) CHECK(p.d_est == doctest::Approx(5.0));
}

TEST_CASE("evaluate affine overload uses rigid part for angle") {
    const auto gt = make_rigid(0.2, 1.0, 5.0, 5.0);
    const AffineTransform est = to_affine(make_rigid(0.3, 1.0, 5.0, 5.0));
    const LandmarkSet lm = landmarks_for(gt, 5, 5);
    const EvaluationReport r = evaluate(lm, est, gt);
    CHECK(r.delta_theta == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("evaluate needs two landmarks") {
    LandmarkSet lm;
    lm.pairs.push_back({{0.0, 0.0}, {1.0, 1.0}});
    CHECK_THROWS_AS(evaluate(lm, RigidTransform{}, RigidTransform{}), TooFewLandmarks);
}

TEST_CASE("nearest_pairing census") {
    SUBCASE("hand built one-to-one, orphan and collision") {
        // s0 -> t0 unique; s1, s2 -> t1 collision; s3 has nothing in radius
        const CellTable src = table_from({{0.0, 0.0}, {10.0, 0.0}, {11.0, 0.0}, {100.0, 100.0}}, "s");
        const CellTable tgt = table_from({{0.5, 0.0}, {10.5, 0.0}}, "t");
        const NearestPairing np = nearest_pairing(src, tgt, 2.0);
        CHECK(np.n1 == 1);
        CHECK(np.n_multi == 2);
        CHECK(np.n0 == 1);
        CHECK(np.n0 + np.n1 + np.n_multi == src.cells.size());
        REQUIRE(np.unique_pairs.size() == 1);
        CHECK(np.unique_pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
    }
    SUBCASE("census always partitions the source set") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.0, 100.0);
        std::vector<Point2D> sp(60), tp(50);
        for (auto& p : sp) p = {u(rng), u(rng)};
        for (auto& p : tp) p = {u(rng), u(rng)};
        const CellTable src = table_from(sp, "s"), tgt = table_from(tp, "t");
        for (double radius : {1.0, 5.0, 20.0, std::numeric_limits<double>::infinity()}) {
            const NearestPairing np = nearest_pairing(src, tgt, radius);
            CHECK(np.n0 + np.n1 + np.n_multi == 60);
            CHECK(np.unique_pairs.size() == np.n1);
        }
    }
    SUBCASE("infinite radius pairs everyone somewhere") {
        const CellTable src = table_from({{0.0, 0.0}, {1.0, 1.0}}, "s");
        const CellTable tgt = table_from({{50.0, 50.0}}, "t");
        const NearestPairing np =
            nearest_pairing(src, tgt, std::numeric_limits<double>::infinity());
        CHECK(np.n0 == 0);
        CHECK(np.n_multi == 2);  // both claim the single target
    }
    SUBCASE("empty input throws") {
        const CellTable t = table_from({{0.0, 0.0}});
        CHECK_THROWS_AS(nearest_pairing(CellTable{}, t, 1.0), EmptyInput);
        CHECK_THROWS_AS(nearest_pairing(t, CellTable{}, 1.0), EmptyInput);
    }
}

TEST_CASE("default_pairing_radius is half the median NN distance") {
    // collinear points with NN distances {10, 10, 20, 20} -> median 15 -> radius 7.5
    const CellTable t = table_from({{0.0, 0.0}, {10.0, 0.0}, {40.0, 0.0}, {60.0, 0.0}});
    CHECK(default_pairing_radius(t) == doctest::Approx(7.5));
}

TEST_CASE("pearson") {
    SUBCASE("exact positive and negative correlation") {
        std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
        std::vector<double> y{2.0, 4.0, 6.0, 8.0, 10.0};
        const PearsonResult up = pearson(x, y);
        CHECK(up.r == doctest::Approx(1.0));
        CHECK(up.p <= 1e-12);
        std::vector<double> z{10.0, 8.0, 6.0, 4.0, 2.0};
        const PearsonResult dn = pearson(x, z);
        CHECK(dn.r == doctest::Approx(-1.0));
        CHECK(dn.p <= 1e-12);
    }
    SUBCASE("textbook value") {
        // r for these pairs is 0.5 exactly: x = {-1,0,1}, y = {-1,1,0} -> r = 1/2
        std::vector<double> x{-1.0, 0.0, 1.0};
        std::vector<double> y{-1.0, 1.0, 0.0};
        CHECK(pearson(x, y).r == doctest::Approx(0.5));
    }
    SUBCASE("independent noise has weak correlation and large p") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> x(200), y(200);
        for (std::size_t i = 0; i < 200; ++i) {
            x[i] = g(rng);
            y[i] = g(rng);
        }
        const PearsonResult r = pearson(x, y);
        CHECK(std::abs(r.r) < 0.2);
        CHECK(r.p > 1e-4);
    }
    SUBCASE("degenerate inputs") {
        std::vector<double> c{1.0, 1.0, 1.0};
        std::vector<double> v{1.0, 2.0, 3.0};
        CHECK_THROWS_AS(pearson(c, v), UndefinedCorrelation);
        CHECK_THROWS_AS(pearson(v, c), UndefinedCorrelation);
        std::vector<double> two{1.0, 2.0};
        CHECK_THROWS_AS(pearson(two, two), InvalidInput);
        CHECK_THROWS_AS(pearson(v, two), InvalidInput);
    }
}

TEST_CASE("regional composition and concordance") {
    CellTable a;
    // bin (0,0): 3 tumor of 4; bin (1,0): 1 tumor of 2
    a.cells.push_back({"a0", {10.0, 10.0}, {}, "tumor"});
    a.cells.push_back({"a1", {20.0, 20.0}, {}, "tumor"});
    a.cells.push_back({"a2", {30.0, 30.0}, {}, "tumor"});
    a.cells.push_back({"a3", {40.0, 40.0}, {}, "stroma"});
    a.cells.push_back({"a4", {60.0, 10.0}, {}, "tumor"});
    a.cells.push_back({"a5", {70.0, 20.0}, {}, "stroma"});
    const ProportionGrid ga = regional_composition(a, 50.0, "tumor");
    REQUIRE(ga.proportions.size() == 2);
    CHECK(ga.proportions.at({0, 0}) == doctest::Approx(0.75));
    CHECK(ga.proportions.at({1, 0}) == doctest::Approx(0.5));
    CHECK(ga.counts.at({0, 0}) == 4);

    CellTable b;
    b.cells.push_back({"b0", {5.0, 5.0}, {}, "tumor"});       // bin (0,0): 1/2
    b.cells.push_back({"b1", {45.0, 45.0}, {}, "stroma"});
    b.cells.push_back({"b2", {120.0, 10.0}, {}, "tumor"});    // bin (2,0), no counterpart
    const ProportionGrid gb = regional_composition(b, 50.0, "tumor");
    const ConcordanceGrid cg = regional_concordance(ga, gb);
    REQUIRE(cg.similarity.size() == 1);  // only the shared bin
    CHECK(cg.similarity.at({0, 0}) == doctest::Approx(1.0 - std::abs(0.75 - 0.5)));

    SUBCASE("missing label throws") {
        CellTable bad = a;
        bad.cells[2].class_label.reset();
        CHECK_THROWS_AS(regional_composition(bad, 50.0, "tumor"), MissingLabel);
    }
    SUBCASE("grid size mismatch throws") {
        const ProportionGrid gc = regional_composition(b, 25.0, "tumor");
        CHECK_THROWS_AS(regional_concordance(ga, gc), GridMismatch);
    }
    SUBCASE("identical tables are perfectly concordant") {
        const ConcordanceGrid self = regional_concordance(ga, ga);
        for (const auto& [bin, s] : self.similarity) CHECK(s == doctest::Approx(1.0));
    }
}
