#include "doctest.h"
#include "scmfuse/io.hpp"
#include "support.hpp"

using namespace scmfuse;
using namespace scmfuse::testing;

namespace {

bool is_descendant(const Pscm& m, VarIndex from, VarIndex to) {
    std::vector<VarIndex> stack{from};
    std::set<VarIndex> seen;
    while (!stack.empty()) {
        const VarIndex v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        for (VarIndex c : m.dag().children(v)) {
            if (seen.insert(c).second) stack.push_back(c);
        }
    }
    return false;
}

/// X <- Ux, Y = X xor W with W a private binary root. PNS = P(W = 0), which
/// the trial arms identify.
Pscm xor_model() {
    std::vector<Variable> vars{endo("X"), endo("Y"), Variable{"Ux", VarKind::exogenous, 2, {}},
                               Variable{"W", VarKind::exogenous, 2, {}}};
    return Pscm(vars, {{0, {2}, {0, 1}}, {1, {0, 3}, {0, 1, 1, 0}}});
}

}  // namespace

TEST_CASE("sampled models pass the structural audit") {
    BenchConfig cfg;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const SampledModel sm = sample_model(cfg, seed);
        const Pscm& m = sm.model;
        CHECK(sm.sampled_nodes >= cfg.min_nodes);
        CHECK(sm.sampled_nodes <= cfg.max_nodes);
        CHECK(m.endogenous().size() >= 2);
        for (VarIndex u : m.exogenous()) {
            CHECK(m.cardinality(u) <= static_cast<int>(cfg.max_exo_states));
            CHECK(sm.truth.pmf(u).minCoeff() > 0.0);
            CHECK(sm.truth.pmf(u).sum() == doctest::Approx(1.0));
        }
        for (VarIndex v : m.endogenous()) {
            CHECK(m.cardinality(v) == 2);
            int exo_parents = 0;
            int endo_parents = 0;
            for (VarIndex p : m.dag().parents(v)) (m.variable(p).is_exogenous() ? exo_parents : endo_parents)++;
            CHECK(exo_parents == 1);
            CHECK(endo_parents <= cfg.max_endo_parents);
        }
        CHECK(m.variable(sm.cause).id == "V1");
        for (VarIndex p : m.dag().parents(sm.cause)) CHECK(m.variable(p).is_exogenous());
        CHECK(sm.effect != sm.cause);
        CHECK(is_descendant(m, sm.cause, sm.effect));
    }
}

TEST_CASE("sample_model is deterministic and rejects hopeless configs") {
    BenchConfig cfg;
    const SampledModel a = sample_model(cfg, 17);
    const SampledModel b = sample_model(cfg, 17);
    CHECK(a.model == b.model);
    CHECK(a.truth == b.truth);
    cfg.edge_probability = 0.0;
    CHECK_THROWS_AS(sample_model(cfg, 1), ModelError);
}

TEST_CASE("forward sampling converges to the induced joint") {
    const Pscm m = binary_parent();
    std::mt19937_64 g(2);
    const ExoParams theta = random_theta(m, g);
    Rng rng(99);
    const Dataset d = sample_dataset(m, theta, 100000, rng);
    CHECK(d.total() == 100000);
    const auto joint = brute_joint(m, theta);
    double tv = 0.0;
    std::map<std::vector<int>, double> freq;
    for (const auto& r : d.rows) freq[r.values] = r.count / 100000.0;
    for (const auto& [cfg, p] : joint) tv += std::abs(p - (freq.count(cfg) ? freq[cfg] : 0.0));
    CHECK(tv / 2 < 0.01);
}

TEST_CASE("trial arms split N2 and fix the cause") {
    BenchConfig cfg;
    const SampledModel sm = sample_model(cfg, 3);
    const BenchStudies s = sample_studies(sm, 1000, 2001, 5);
    CHECK(s.observational.data.total() == 1000);
    CHECK(s.arm0.data.total() == 1000);
    CHECK(s.arm1.data.total() == 1001);
    for (const auto* arm : {&s.arm0, &s.arm1}) {
        CHECK_NOTHROW(arm->validate(sm.model));
        const int state = arm->intervention.at(sm.cause);
        const Dataset d = arm->data.aligned_to(sm.model);
        const auto col = static_cast<std::size_t>(
            std::find(sm.model.endogenous().begin(), sm.model.endogenous().end(), sm.cause) - sm.model.endogenous().begin());
        for (const auto& r : d.rows) CHECK(r.values[col] == state);
    }
}

TEST_CASE("point-mass truth in a deterministic model yields one record") {
    const Pscm m = binary_parent();
    ExoParams theta(m);
    theta.pmf(m.index_of("Uw")) = Eigen::Vector2d(0.0, 1.0);
    theta.pmf(m.index_of("Uv")) = Eigen::Vector4d(0.0, 1.0, 0.0, 0.0);
    Rng rng(1);
    const Dataset d = sample_dataset(m, theta, 50, rng);
    REQUIRE(d.rows.size() == 1);
    CHECK(d.rows[0].count == 50);
}

TEST_CASE("shrink statistics use linear quartiles") {
    const ShrinkStats s = shrink_stats({4.0, 1.0, 3.0, 2.0});
    CHECK(s.n == 4);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.min == 1.0);
    CHECK(s.q1 == doctest::Approx(1.75));
    CHECK(s.median == doctest::Approx(2.5));
    CHECK(s.q3 == doctest::Approx(3.25));
    CHECK(s.max == 4.0);
}

TEST_CASE("grid size counts compositions") {
    CHECK(grid_size(one_node(), 0.5) == 3);
    CHECK(grid_size(binary_parent(), 0.5) == 3 * 10);
    CHECK(grid_size(one_node(), 0.02) == 51);
}

TEST_CASE("pns by enumeration agrees with the test oracle") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const Pscm m = random_model(rng);
        const ExoParams theta = random_theta(m, rng);
        PnsQuery q;
        q.cause = m.endogenous_order().front();
        q.effect = m.endogenous_order().back();
        CHECK(pns_by_enumeration(m, theta, q) == doctest::Approx(brute_pns(m, theta, q.cause, q.effect)).epsilon(1e-12));
    }
}

TEST_CASE("grid oracle") {
    SUBCASE("conflicting clones: nothing retained") {
        PnsQuery q;
        const Pscm two = binary_parent();
        q.cause = two.index_of("W");
        q.effect = two.index_of("V");
        const std::vector<Study> s2{{"a", make_data(two, {"W", "V"}, {{{0, 0}, 90}, {{1, 1}, 10}}), {}},
                                    {"b", make_data(two, {"W", "V"}, {{{0, 0}, 10}, {{1, 1}, 90}}), {}}};
        const auto r = grid_oracle(two, s2, 0.05, q);
        CHECK_FALSE(r.feasible);
        CHECK(r.retained == 0);
    }
    SUBCASE("identifiable toy collapses and contains the EMCC points") {
        const Pscm m = xor_model();
        ExoParams truth(m);
        truth.pmf(2) = Eigen::Vector2d(0.5, 0.5);
        truth.pmf(3) = Eigen::Vector2d(0.7, 0.3);
        std::vector<Study> studies;
        for (int x = 0; x < 2; ++x) {
            Dataset d;
            d.columns = m.endogenous();
            d.rows = {{{x, x}, 70}, {{x, 1 - x}, 30}};
            studies.push_back({"arm" + std::to_string(x), d, {{0, x}}});
        }
        PnsQuery q;
        q.cause = 0;
        q.effect = 1;
        const auto oracle = grid_oracle(m, studies, 0.02, q);
        REQUIRE(oracle.feasible);
        CHECK(oracle.upper - oracle.lower <= oracle.slack);
        CHECK(oracle.lower - oracle.slack <= 0.7);
        CHECK(oracle.upper + oracle.slack >= 0.7);

        EmConfig cfg;
        cfg.restarts = 8;
        const auto fit = emcc(m, studies, cfg);
        REQUIRE_FALSE(fit.params.empty());
        const auto b = bounds(m, fit.params, Query{"pns", q});
        CHECK(b.width() <= 1e-3);
        for (double p : b.points) {
            CHECK(p >= oracle.lower - oracle.slack);
            CHECK(p <= oracle.upper + oracle.slack);
        }
    }
    SUBCASE("refuses oversized grids") {
        PnsQuery q;
        const Pscm m = fig1();
        q.cause = m.index_of("Treatment");
        q.effect = m.index_of("Survival");
        CHECK_THROWS_AS(grid_oracle(m, table1_fig1(m), 0.02, q), ModelError);
    }
}

TEST_CASE("small benchmark run is deterministic") {
    BenchConfig cfg;
    cfg.n_models = 2;
    cfg.em.restarts = 8;
    cfg.seed = 7;
    const auto a = run_benchmark(cfg);
    const auto b = run_benchmark(cfg);
    REQUIRE(a.size() == 2);
    REQUIRE(b.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(bench_record_to_json(a[i]).dump() == bench_record_to_json(b[i]).dump());
        if (a[i].emitted) {
            REQUIRE(a[i].joint);
            CHECK(a[i].joint->upper - a[i].joint->lower > cfg.min_width);
        } else {
            CHECK_FALSE(a[i].skip_reason.empty());
        }
    }
}
