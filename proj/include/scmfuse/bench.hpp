#ifndef SCMFUSE_BENCH_HPP
#define SCMFUSE_BENCH_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scmfuse/queries.hpp"

namespace scmfuse {

struct BenchConfig {
    int min_nodes = 5;
    int max_nodes = 15;
    double edge_probability = 0.3;
    /// Endogenous parents kept per endogenous node (extra arcs are dropped at random).
    int max_endo_parents = 2;
    std::uint64_t max_exo_states = 64;
    int n1 = 1000;
    double n2_factor = 2.0;
    int max_total_records = 5500;
    double growth = 1.5;
    int n_models = 130;
    std::uint64_t seed = 0;
    /// Records are emitted only when the O+I interval is wider than this.
    double min_width = identifiable_width;
    EmConfig em = default_em();

    static EmConfig default_em();
    void validate() const;
};

struct SampledModel {
    Pscm model;
    ExoParams truth;
    VarIndex cause = 0;   // first endogenous variable in topological order
    VarIndex effect = 0;  // last endogenous descendant of the cause
    int sampled_nodes = 0;
};

/// Erdos-Renyi DAG; parentless nodes become exogenous, the rest binary
/// endogenous. Each endogenous node keeps one exogenous parent (a root is
/// attached when it has none). Exogenous states index joint response
/// functions of the children, sampled without replacement down to the cap.
SampledModel sample_model(const BenchConfig& cfg, std::uint64_t seed);

/// Forward sampling of n complete endogenous records from (model, theta).
Dataset sample_dataset(const Pscm& model, const ExoParams& theta, std::int64_t n, Rng& rng);

struct BenchStudies {
    Study observational;
    Study arm0;  // do(cause = 0), floor(n2 / 2) records
    Study arm1;  // do(cause = 1), the rest
};

BenchStudies sample_studies(const SampledModel& sm, std::int64_t n1, std::int64_t n2, std::uint64_t seed);

struct BenchInterval {
    double lower = 0.0;
    double upper = 0.0;
    bool compatible = false;
    double gap = 0.0;
    std::size_t retained = 0;
};

struct BenchRecord {
    int model_index = 0;
    std::uint64_t seed = 0;
    int sampled_nodes = 0;
    int n_endogenous = 0;
    int n_exogenous = 0;
    std::vector<int> exo_cardinalities;
    std::string cause;
    std::string effect;
    std::int64_t n1 = 0;
    std::int64_t n2 = 0;
    int attempts = 0;
    std::optional<BenchInterval> obs;
    std::optional<BenchInterval> rct;
    std::optional<BenchInterval> joint;
    std::optional<double> shrink_vs_obs;
    std::optional<double> shrink_vs_rct;
    bool emitted = false;
    std::string skip_reason;
};

std::vector<BenchRecord> run_benchmark(const BenchConfig& cfg,
                                       const std::function<void(const BenchRecord&)>& progress = {});

struct ShrinkStats {
    std::size_t n = 0;
    double mean = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Linear-interpolation quartiles (the usual box-plot convention).
ShrinkStats shrink_stats(std::vector<double> values);

struct BenchSummary {
    std::size_t models = 0;
    std::size_t emitted = 0;
    std::size_t skipped = 0;
    ShrinkStats vs_obs;  // 1 - L_{O+I} / L_O
    ShrinkStats vs_rct;  // 1 - L_{O+I} / L_I
    /// Reference means reported for the same protocol in the literature.
    double reference_vs_obs = 0.18;
    double reference_vs_rct = 0.13;
    double inclusion_slack = 0.02;
    /// Share of emitted records with the O+I interval inside both single-study
    /// intervals up to the slack.
    double inclusion_rate = 0.0;
};

BenchSummary summarize(const std::vector<BenchRecord>& records, double inclusion_slack = 0.02);

// -- grid oracle ----------------------------------------------------------------

struct OracleResult {
    bool feasible = false;  // some grid point matches every study
    double lower = 0.0;
    double upper = 0.0;
    std::size_t grid_points = 0;
    std::size_t retained = 0;
    double epsilon = 0.0;  // L-infinity tolerance on the study joints
    double slack = 0.0;    // suggested envelope inflation, 2 * step * dim
};

/// Number of points of the product-of-simplices grid with the given step.
std::size_t grid_size(const Pscm& model, double step);

/// Enumerates theta on the grid, keeps the points whose induced joint of every
/// study is within epsilon of its empirical joint (default step * dim, dim the
/// total free parameter count), and returns the query envelope over them. The
/// query is evaluated by summing over the joint exogenous space, without
/// variable elimination.
OracleResult grid_oracle(const Pscm& model, const std::vector<Study>& studies, double step, const PnsQuery& q,
                         std::optional<double> epsilon = std::nullopt, std::size_t max_points = 10'000'000);

/// PNS by explicit enumeration of the joint exogenous space.
double pns_by_enumeration(const Pscm& model, const ExoParams& theta, const PnsQuery& q);

}  // namespace scmfuse

#endif  // SCMFUSE_BENCH_HPP
