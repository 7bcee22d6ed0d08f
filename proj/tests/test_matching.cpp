#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cellalign/errors.hpp"
#include "cellalign/matching.hpp"

using namespace cellalign;

namespace {

CellGraph random_graph(std::size_t n, std::uint64_t seed, double extent = 60.0,
                       double edge_threshold = 30.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, extent);
    std::normal_distribution<double> f(20.0, 3.0);
    CellGraph g;
    for (std::size_t i = 0; i < n; ++i) {
        g.nodes.push_back({"n" + std::to_string(i), {u(rng), u(rng)}, {f(rng), f(rng)}});
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(g.nodes[i].pos, g.nodes[j].pos);
            if (d < edge_threshold) g.edges.push_back({i, j, d});
        }
    }
    return g;
}

CellGraph permute_graph(const CellGraph& g, const std::vector<std::size_t>& perm) {
    // node old i goes to new position perm[i]
    CellGraph out;
    out.nodes.resize(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        out.nodes[perm[i]] = g.nodes[i];
        out.nodes[perm[i]].cell_id = "p" + std::to_string(perm[i]);
    }
    for (const auto& e : g.edges) {
        std::size_t a = perm[e.i], b = perm[e.j];
        if (a > b) std::swap(a, b);
        out.edges.push_back({a, b, e.length});
    }
    return out;
}

double assignment_score(const AffinityMatrix& k,
                        const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    double s = 0.0;
    for (const auto& [i, a] : pairs) {
        for (const auto& [j, b] : pairs) s += k.at(i, a, j, b);
    }
    return s;
}

}  // namespace

TEST_CASE("build_affinity matches elementwise formula") {
    const CellGraph src = random_graph(4, 1);
    const CellGraph tgt = random_graph(5, 2);
    AffinityParams params;
    params.feature_names = {};
    params.sigma_feature = 1.3;
    params.sigma_edge = 4.0;
    const AffinityMatrix m = build_affinity(src, tgt, params);
    REQUIRE(m.n1 == 4);
    REQUIRE(m.n2 == 5);

    // independent recomputation of z-scores over the union
    const std::size_t dim = 2;
    std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
    std::vector<const GraphNode*> all;
    for (const auto& n : src.nodes) all.push_back(&n);
    for (const auto& n : tgt.nodes) all.push_back(&n);
    for (const auto* n : all) {
        for (std::size_t d = 0; d < dim; ++d) mean[d] += n->features[d];
    }
    for (auto& v : mean) v /= static_cast<double>(all.size());
    for (const auto* n : all) {
        for (std::size_t d = 0; d < dim; ++d) {
            sd[d] += (n->features[d] - mean[d]) * (n->features[d] - mean[d]);
        }
    }
    for (auto& v : sd) v = std::sqrt(v / static_cast<double>(all.size()));

    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t a = 0; a < 5; ++a) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double z = (src.nodes[i].features[d] - tgt.nodes[a].features[d]) / sd[d];
                d2 += z * z;
            }
            const double expect = std::exp(-d2 / (1.3 * 1.3));
            CHECK(m.at(i, a, i, a) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    for (const auto& es : src.edges) {
        for (const auto& et : tgt.edges) {
            const double diff = es.length - et.length;
            const double expect = std::exp(-diff * diff / (4.0 * 4.0));
            CHECK(m.at(es.i, et.i, es.j, et.j) == doctest::Approx(expect));
            CHECK(m.at(es.j, et.j, es.i, et.i) == doctest::Approx(expect));
            CHECK(m.at(es.i, et.j, es.j, et.i) == doctest::Approx(expect));
        }
    }
    // no edge -> no off-diagonal entry
    bool has_edge_01_src = false;
    for (const auto& e : src.edges) {
        if (e.i == 0 && e.j == 1) has_edge_01_src = true;
    }
    if (!has_edge_01_src && !tgt.edges.empty()) {
        CHECK(m.at(0, tgt.edges[0].i, 1, tgt.edges[0].j) == 0.0);
    }
}

TEST_CASE("build_affinity identical feature dims contribute zero distance") {
    CellGraph a, b;
    a.nodes.push_back({"a0", {0, 0}, {5.0}});
    a.nodes.push_back({"a1", {1, 0}, {5.0}});
    b.nodes.push_back({"b0", {0, 0}, {5.0}});
    const AffinityMatrix m = build_affinity(a, b, AffinityParams{});
    CHECK(m.at(0, 0, 0, 0) == doctest::Approx(1.0));  // zero spread -> exp(0)
    CHECK(m.at(1, 0, 1, 0) == doctest::Approx(1.0));
}

TEST_CASE("build_affinity feature mismatch throws") {
    CellGraph a, b;
    a.nodes.push_back({"a0", {0, 0}, {1.0, 2.0}});
    b.nodes.push_back({"b0", {0, 0}, {1.0}});
    CHECK_THROWS_AS(build_affinity(a, b, AffinityParams{}), FeatureMismatch);
    CHECK_THROWS_AS(build_affinity(CellGraph{}, b, AffinityParams{}), EmptyInput);
}

TEST_CASE("sinkhorn") {
    SUBCASE("square positive matrix becomes doubly stochastic") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.1, 2.0);
        Eigen::MatrixXd m(5, 5);
        for (long i = 0; i < 5; ++i) {
            for (long j = 0; j < 5; ++j) m(i, j) = u(rng);
        }
        const Eigen::MatrixXd s = sinkhorn(m);
        for (long i = 0; i < 5; ++i) CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
        for (long j = 0; j < 5; ++j) CHECK(s.col(j).sum() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK((s.array() >= 0.0).all());
    }
    SUBCASE("permutation matrix is a fixed point") {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 4);
        p(0, 2) = p(1, 0) = p(2, 3) = p(3, 1) = 1.0;
        const Eigen::MatrixXd s = sinkhorn(p);
        // entries off the permutation stay at the floor; support is preserved
        CHECK(s(0, 2) == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(s(1, 0) == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(s(0, 0) <= 1e-4);
        const Eigen::MatrixXd s2 = sinkhorn(s);
        CHECK((s2 - s).cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("rectangular input is padded square") {
        Eigen::MatrixXd m(2, 4);
        m.setConstant(1.0);
        const Eigen::MatrixXd s = sinkhorn(m);
        REQUIRE(s.rows() == 4);
        REQUIRE(s.cols() == 4);
        for (long i = 0; i < 4; ++i) CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("invalid input") {
        CHECK_THROWS_AS(sinkhorn(Eigen::MatrixXd()), EmptyInput);
        Eigen::MatrixXd bad(2, 2);
        bad.setConstant(std::numeric_limits<double>::quiet_NaN());
        CHECK_THROWS_AS(sinkhorn(bad), InvalidInput);
    }
}

TEST_CASE("hungarian against brute force") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const long n = 2 + static_cast<long>(rng() % 6);  // up to 7
        Eigen::MatrixXd score(n, n);
        for (long i = 0; i < n; ++i) {
            for (long j = 0; j < n; ++j) score(i, j) = u(rng);
        }
        const auto got = hungarian(score);
        REQUIRE(got.size() == static_cast<std::size_t>(n));
        double got_total = 0.0;
        for (const auto& [i, j] : got) got_total += score(static_cast<long>(i), static_cast<long>(j));

        std::vector<long> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = -1.0;
        do {
            double s = 0.0;
            for (long i = 0; i < n; ++i) s += score(i, perm[i]);
            best = std::max(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(got_total == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("hungarian rectangular and ties") {
    SUBCASE("wide matrix returns one pair per row") {
        Eigen::MatrixXd score(2, 4);
        score << 0.1, 0.9, 0.2, 0.3,
                 0.8, 0.95, 0.1, 0.2;
        const auto got = hungarian(score);
        REQUIRE(got.size() == 2);
        // optimum: row0 -> col1 (0.9), row1 -> col0 (0.8), total 1.7
        CHECK(got[0] == std::pair<std::size_t, std::size_t>{0, 1});
        CHECK(got[1] == std::pair<std::size_t, std::size_t>{1, 0});
    }
    SUBCASE("all-equal scores still give a valid one-to-one assignment") {
        Eigen::MatrixXd score = Eigen::MatrixXd::Constant(4, 4, 0.5);
        const auto got = hungarian(score);
        REQUIRE(got.size() == 4);
        std::vector<char> rs(4, 0), cs(4, 0);
        for (const auto& [i, j] : got) {
            CHECK(!rs[i]);
            CHECK(!cs[j]);
            rs[i] = cs[j] = 1;
        }
        const auto again = hungarian(score);
        CHECK(got == again);  // deterministic tie handling
    }
}

TEST_CASE("rrwm trivial and degenerate cases") {
    SUBCASE("1x1") {
        CellGraph a, b;
        a.nodes.push_back({"a", {0, 0}, {}});
        b.nodes.push_back({"b", {0, 0}, {}});
        const auto m = build_affinity(a, b, AffinityParams{});
        const Eigen::MatrixXd x = rrwm(m, RrwmParams{});
        REQUIRE(x.rows() == 1);
        CHECK(x(0, 0) > 0.0);
    }
    SUBCASE("empty affinity throws") {
        AffinityMatrix m;
        m.n1 = m.n2 = 2;
        m.k.resize(4, 4);
        CHECK_THROWS_AS(rrwm(m, RrwmParams{}), DegenerateAffinity);
    }
    SUBCASE("bad params throw") {
        CellGraph a, b;
        a.nodes.push_back({"a", {0, 0}, {}});
        b.nodes.push_back({"b", {0, 0}, {}});
        const auto m = build_affinity(a, b, AffinityParams{});
        RrwmParams p;
        p.alpha = 1.5;
        CHECK_THROWS_AS(rrwm(m, p), ConfigError);
        p.alpha = 0.2;
        p.beta = -1.0;
        CHECK_THROWS_AS(rrwm(m, p), ConfigError);
    }
}

TEST_CASE("rrwm recovers a planted isomorphism") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 6 + trial % 4;
        const CellGraph src = random_graph(n, 100 + static_cast<std::uint64_t>(trial));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const CellGraph tgt = permute_graph(src, perm);

        const AffinityMatrix m = build_affinity(src, tgt, AffinityParams{});
        const Eigen::MatrixXd x = rrwm(m, RrwmParams{});
        const auto pairs = hungarian(x);
        REQUIRE(pairs.size() == n);
        std::size_t correct = 0;
        for (const auto& [i, a] : pairs) {
            if (a == perm[i]) ++correct;
        }
        CHECK(correct == n);

        // sanity: the planted assignment is at least as good as any other
        // permutation under the pairwise objective (checked exhaustively at n<=6)
        if (n == 6) {
            std::vector<std::size_t> q(n);
            std::iota(q.begin(), q.end(), 0);
            std::vector<std::pair<std::size_t, std::size_t>> planted;
            for (std::size_t i = 0; i < n; ++i) planted.emplace_back(i, perm[i]);
            const double planted_score = assignment_score(m, planted);
            do {
                std::vector<std::pair<std::size_t, std::size_t>> cand;
                for (std::size_t i = 0; i < n; ++i) cand.emplace_back(i, q[i]);
                CHECK(assignment_score(m, cand) <= planted_score + 1e-9);
            } while (std::next_permutation(q.begin(), q.end()));
        }
    }
}

TEST_CASE("rrwm equivariant under target relabeling") {
    const CellGraph src = random_graph(7, 55);
    const CellGraph tgt = random_graph(7, 56);
    const Eigen::MatrixXd x = rrwm(build_affinity(src, tgt, AffinityParams{}), RrwmParams{});

    std::vector<std::size_t> perm{3, 0, 5, 1, 6, 2, 4};
    const CellGraph tgt2 = permute_graph(tgt, perm);
    const Eigen::MatrixXd y = rrwm(build_affinity(src, tgt2, AffinityParams{}), RrwmParams{});
    for (std::size_t i = 0; i < 7; ++i) {
        for (std::size_t a = 0; a < 7; ++a) {
            CHECK(y(static_cast<long>(i), static_cast<long>(perm[a])) ==
                  doctest::Approx(x(static_cast<long>(i), static_cast<long>(a))).epsilon(1e-9));
        }
    }
}

TEST_CASE("lpm filter") {
    // 10x10 grid pairs under a pure translation
    std::map<std::string, Point2D> sp, tp;
    MatchSet good;
    for (int gx = 0; gx < 10; ++gx) {
        for (int gy = 0; gy < 10; ++gy) {
            const std::string sid = "s" + std::to_string(gx) + "_" + std::to_string(gy);
            const std::string tid = "t" + std::to_string(gx) + "_" + std::to_string(gy);
            sp[sid] = {gx * 10.0, gy * 10.0};
            tp[tid] = {gx * 10.0 + 30.0, gy * 10.0 - 5.0};
            good.matches.push_back({sid, tid, 1.0});
        }
    }
    SUBCASE("consistent matches all survive") {
        const MatchSet out = lpm_filter(good, sp, tp, 8, 0.5);
        CHECK(out.size() == good.size());
        CHECK_FALSE(out.low_confidence);
    }
    SUBCASE("a swapped far pair is removed, everything else kept") {
        MatchSet bad = good;
        // swap targets of two distant matches
        auto find = [&](const std::string& sid) -> Match& {
            for (auto& m : bad.matches) {
                if (m.src_id == sid) return m;
            }
            FAIL("missing");
            return bad.matches.front();
        };
        std::swap(find("s1_1").tgt_id, find("s8_8").tgt_id);
        const MatchSet out = lpm_filter(bad, sp, tp, 4, 0.5);
        CHECK(out.size() == good.size() - 2);
        for (const auto& m : out.matches) {
            CHECK(m.src_id != "s1_1");
            CHECK(m.src_id != "s8_8");
        }
    }
    SUBCASE("too few matches pass through with the flag") {
        MatchSet tiny;
        for (int i = 0; i < 5; ++i) {
            tiny.matches.push_back(good.matches[static_cast<std::size_t>(i) * 13]);
        }
        const MatchSet out = lpm_filter(tiny, sp, tp, 8, 0.5);
        CHECK(out.size() == 5);
        CHECK(out.low_confidence);
    }
    SUBCASE("unknown id throws") {
        MatchSet m = good;
        m.matches[0].src_id = "nope";
        CHECK_THROWS_AS(lpm_filter(m, sp, tp, 8, 0.5), UnknownId);
    }
}
