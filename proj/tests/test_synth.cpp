#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "cellalign/errors.hpp"
#include "cellalign/synth.hpp"

using namespace cellalign;

namespace {

// Hopkins statistic on the first `m` probes; ~0.5 for CSR, -> 1 for
// clustered patterns.
double hopkins(const std::vector<CellRecord>& cells, double extent, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, extent);
    const std::size_t m = std::min<std::size_t>(50, cells.size() / 4);
    auto nn = [&](const Point2D& q, std::size_t skip) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == skip) continue;
            best = std::min(best, distance(q, cells[i].centroid));
        }
        return best;
    };
    double su = 0.0, sw = 0.0;
    std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
    for (std::size_t t = 0; t < m; ++t) {
        su += nn({u(rng), u(rng)}, cells.size());
        const std::size_t j = pick(rng);
        sw += nn(cells[j].centroid, j);
    }
    return su / (su + sw);
}

}  // namespace

TEST_CASE("synth identity scenario") {
    SynthScenario sc;
    sc.n_points = 200;
    sc.seed = 5;
    const SynthOutput out = generate(sc);
    REQUIRE(out.source.cells.size() == 200);
    REQUIRE(out.target.cells.size() == 200);
    REQUIRE(out.truth_pairs.size() == 200);
    std::map<std::string, const CellRecord*> tgt;
    for (const auto& c : out.target.cells) tgt[c.cell_id] = &c;
    for (std::size_t i = 0; i < out.truth_pairs.size(); ++i) {
        const auto& [sid, tid] = out.truth_pairs[i];
        CHECK(sid == out.source.cells[i].cell_id);
        REQUIRE(tgt.count(tid) == 1);
        CHECK(distance(out.source.cells[i].centroid, tgt[tid]->centroid) == 0.0);
        CHECK(out.source.cells[i].features == tgt[tid]->features);
    }
}

TEST_CASE("synth transform is applied exactly when jitter is zero") {
    SynthScenario sc;
    sc.n_points = 100;
    sc.transform = make_rigid(0.2, 1.0, 40.0, -25.0);
    sc.seed = 9;
    const SynthOutput out = generate(sc);
    std::map<std::string, Point2D> tgt;
    for (const auto& c : out.target.cells) tgt[c.cell_id] = c.centroid;
    for (std::size_t i = 0; i < out.truth_pairs.size(); ++i) {
        const Point2D expect = apply(sc.transform, out.source.cells[i].centroid);
        CHECK(distance(expect, tgt[out.truth_pairs[i].second]) <= 1e-12);
    }
    CHECK(out.truth_transform.theta == sc.transform.theta);
}

TEST_CASE("synth determinism and seed sensitivity") {
    SynthScenario sc;
    sc.n_points = 300;
    sc.cluster_count = 10;
    sc.jitter_sigma = 0.5;
    sc.dropout_rate = 0.1;
    sc.spurious_rate = 0.05;
    sc.seed = 42;
    const SynthOutput a = generate(sc);
    const SynthOutput b = generate(sc);
    REQUIRE(a.source.cells.size() == b.source.cells.size());
    for (std::size_t i = 0; i < a.source.cells.size(); ++i) {
        CHECK(a.source.cells[i].centroid.x == b.source.cells[i].centroid.x);
        CHECK(a.source.cells[i].features == b.source.cells[i].features);
    }
    REQUIRE(a.target.cells.size() == b.target.cells.size());
    for (std::size_t i = 0; i < a.target.cells.size(); ++i) {
        CHECK(a.target.cells[i].centroid.y == b.target.cells[i].centroid.y);
    }
    CHECK(a.truth_pairs == b.truth_pairs);

    sc.seed = 43;
    const SynthOutput c = generate(sc);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.source.cells.size(); ++i) {
        if (a.source.cells[i].centroid.x != c.source.cells[i].centroid.x) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("synth dropout count matches binomial expectation") {
    SynthScenario sc;
    sc.n_points = 2000;
    sc.dropout_rate = 0.2;
    double total_kept = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        sc.seed = s;
        const SynthOutput out = generate(sc);
        CHECK(out.truth_pairs.size() == out.target.cells.size());  // no spurious here
        total_kept += static_cast<double>(out.truth_pairs.size());
    }
    const double n = 10.0 * 2000.0;
    const double p = 0.8;
    // 5 sigma band around the binomial mean.
    const double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(std::abs(total_kept - n * p) <= 5.0 * sigma);
}

TEST_CASE("synth spurious cells are unmatched extras") {
    SynthScenario sc;
    sc.n_points = 400;
    sc.spurious_rate = 0.25;
    sc.seed = 3;
    const SynthOutput out = generate(sc);
    CHECK(out.target.cells.size() == 400 + 100);
    CHECK(out.truth_pairs.size() == 400);
    std::set<std::string> matched;
    for (const auto& [s, t] : out.truth_pairs) matched.insert(t);
    CHECK(matched.size() == 400);
}

TEST_CASE("clustered mode is detectably clustered, uniform is not") {
    SynthScenario sc;
    sc.n_points = 600;
    sc.extent = 500.0;
    sc.cluster_count = 12;
    sc.cluster_sigma = 12.0;
    sc.seed = 17;
    const double h_clustered = hopkins(generate(sc).source.cells, sc.extent, 99);
    sc.cluster_count = 0;
    const double h_uniform = hopkins(generate(sc).source.cells, sc.extent, 99);
    CHECK(h_clustered >= 0.7);
    CHECK(h_uniform < 0.65);
    CHECK(h_uniform > 0.35);
}

TEST_CASE("synth morphology features present and plausible") {
    SynthScenario sc;
    sc.n_points = 50;
    sc.seed = 1;
    const SynthOutput out = generate(sc);
    for (const auto& c : out.source.cells) {
        const double area = *c.feature("area");
        const double per = *c.feature("perimeter");
        const double sol = *c.feature("solidity");
        CHECK(area > 0.0);
        CHECK(per > 0.0);
        CHECK(sol > 0.0);
        CHECK(sol <= 1.0);
        CHECK(*c.feature("min_diameter") <= *c.feature("max_diameter"));
        // circle would give 4*pi*area == per^2; solidity < 1 lowers the ratio
        CHECK(4.0 * std::numbers::pi * area <= per * per + 1e-9);
        CHECK(c.feature("nucleus_stain_mean").has_value());
    }
}

TEST_CASE("synth config validation") {
    SynthScenario sc;
    sc.n_points = 1;
    CHECK_THROWS_AS(generate(sc), ConfigError);
    sc.n_points = 10;
    sc.dropout_rate = 1.0;
    CHECK_THROWS_AS(generate(sc), ConfigError);
    sc.dropout_rate = 0.0;
    sc.extent = -5.0;
    CHECK_THROWS_AS(generate(sc), ConfigError);
    sc.extent = 500.0;
    sc.jitter_sigma = -1.0;
    CHECK_THROWS_AS(generate(sc), ConfigError);
}
