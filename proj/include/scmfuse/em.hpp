#ifndef SCMFUSE_EM_HPP
#define SCMFUSE_EM_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scmfuse/inference.hpp"
#include "scmfuse/random.hpp"

namespace scmfuse {

struct EmConfig {
    int restarts = 30;
    double tol = 1e-9;  // relative log-likelihood change
    int max_iter = 1000;
    std::uint64_t seed = 0;
    /// Symmetric Dirichlet concentration of the random starts (1 = flat).
    double concentration = 0.02;
    /// Compatibility tolerance per record: the gap test uses this times N0
    /// unless `compat_tol` gives an absolute value.
    double compat_tol_per_record = 1e-4;
    std::optional<double> compat_tol;
    int threads = 1;
    int init_attempts = 5;

    void validate() const;
    double compatibility_tolerance(std::int64_t total_records) const;
};

struct EmRunResult {
    ExoParams theta;
    std::vector<double> ll_trace;  // ll_trace[0] is the starting point
    int iterations = 0;
    bool converged = false;

    double loglik() const { return ll_trace.empty() ? 0.0 : ll_trace.back(); }
};

struct ParamSet {
    std::vector<ExoParams> thetas;
    std::vector<double> ll_values;

    std::size_t size() const { return thetas.size(); }
    bool empty() const { return thetas.empty(); }
};

struct CompatibilityVerdict {
    bool compatible = false;
    double achieved_ll = 0.0;
    std::vector<double> per_study_max_ll;
    double gap = 0.0;
    double tolerance = 0.0;
};

CompatibilityVerdict check_compatibility(double achieved_ll, const std::vector<double>& per_study_max, double tol);

enum class MaxSource { bound, em };

/// Per-study maximum log-likelihood. `bound` is the empirical-BN ceiling,
/// `em_best` the best single-study EM value; `value` is the bound when EM
/// reaches it within tolerance and em_best otherwise.
struct StudyMaximum {
    double value = 0.0;
    double bound = 0.0;
    double em_best = 0.0;
    MaxSource source = MaxSource::bound;
};

/// Symmetric Dirichlet draw for every exogenous PMF, computed in log space so
/// small concentrations do not underflow. Entries are floored at 1e-300.
ExoParams random_init(const Pscm& model, double concentration, Rng& rng);

/// M-step from pooled expected counts: theta_u = n(u) / N0.
ExoParams maximization(const Pscm& model, const std::vector<Eigen::VectorXd>& counts, std::int64_t total);

ExoParams em_step(const StudySet& studies, const ExoParams& theta);
ExoParams em_step(const Pscm& base, const std::vector<Study>& studies, const ExoParams& theta);

EmRunResult em_run(const StudySet& studies, const ExoParams& theta0, const EmConfig& cfg);
EmRunResult em_run(const Pscm& base, const std::vector<Study>& studies, const ExoParams& theta0,
                   const EmConfig& cfg);

/// One randomly started run: redraws the start after a zero-probability
/// failure, up to cfg.init_attempts times. Throws ZeroProbabilityError when
/// every attempt fails.
EmRunResult em_random_run(const StudySet& studies, const EmConfig& cfg, std::uint64_t run_seed, int* attempts = nullptr);

StudyMaximum study_max_loglik(const Pscm& base, const Study& study, const EmConfig& cfg);

struct RunSummary {
    std::uint64_t seed = 0;
    int attempts = 0;
    int iterations = 0;
    bool converged = false;
    double initial_ll = 0.0;
    double final_ll = 0.0;
    double gap = 0.0;
    bool retained = false;
    std::string error;  // non-empty when the run failed
};

struct EmccResult {
    ParamSet params;
    std::vector<RunSummary> runs;
    std::vector<StudyMaximum> maxima;
    /// Verdict at the best run (largest achieved log-likelihood).
    CompatibilityVerdict verdict;
    std::int64_t total_records = 0;
};

/// cfg.restarts independent EM runs with seeded random starts. Runs whose
/// gap exceeds the compatibility tolerance are dropped from `params` but kept
/// in `runs`.
EmccResult emcc(const Pscm& base, const std::vector<Study>& studies, const EmConfig& cfg);
/// Same, with the per-study maxima supplied by the caller (one per study).
EmccResult emcc(const Pscm& base, const std::vector<Study>& studies, const EmConfig& cfg,
                const std::vector<StudyMaximum>& maxima);

}  // namespace scmfuse

#endif  // SCMFUSE_EM_HPP
