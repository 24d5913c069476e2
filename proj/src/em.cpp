#include "scmfuse/em.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace scmfuse {

namespace {

constexpr std::uint64_t run_stream = 0x52554e53;    // restarts of emcc
constexpr std::uint64_t study_stream = 0x53545544;  // single-study maxima

bool close_enough(double prev, double cur, double tol) {
    return std::abs(cur - prev) <= tol * (1.0 + std::abs(cur));
}

}  // namespace

void EmConfig::validate() const {
    if (restarts < 1) throw ModelError("restarts must be at least 1");
    if (!(tol > 0.0)) throw ModelError("tol must be positive");
    if (max_iter < 1) throw ModelError("max_iter must be at least 1");
    if (!(concentration > 0.0)) throw ModelError("Dirichlet concentration must be positive");
    if (!(compat_tol_per_record >= 0.0)) throw ModelError("compatibility tolerance must be nonnegative");
    if (compat_tol && !(*compat_tol >= 0.0)) throw ModelError("compatibility tolerance must be nonnegative");
    if (threads < 1) throw ModelError("threads must be at least 1");
    if (init_attempts < 1) throw ModelError("init_attempts must be at least 1");
}

double EmConfig::compatibility_tolerance(std::int64_t total_records) const {
    return compat_tol ? *compat_tol : compat_tol_per_record * static_cast<double>(total_records);
}

CompatibilityVerdict check_compatibility(double achieved_ll, const std::vector<double>& per_study_max, double tol) {
    CompatibilityVerdict v;
    v.achieved_ll = achieved_ll;
    v.per_study_max_ll = per_study_max;
    v.tolerance = tol;
    ExactSum sum;
    for (double m : per_study_max) sum.add(m);
    sum.add(-achieved_ll);
    v.gap = sum.value();
    v.compatible = v.gap <= tol;
    return v;
}

ExoParams random_init(const Pscm& model, double concentration, Rng& rng) {
    ExoParams theta(model);
    std::gamma_distribution<double> gamma(concentration + 1.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (VarIndex u : model.exogenous()) {
        const int n = model.cardinality(u);
        // G ~ Gamma(a) as Gamma(a + 1) * U^(1/a), kept in log space.
        Eigen::VectorXd log_g(n);
        for (int i = 0; i < n; ++i) {
            const double g = gamma(rng);
            const double v = 1.0 - unif(rng);
            log_g(i) = std::log(g) + std::log(v) / concentration;
        }
        const double top = log_g.maxCoeff();
        Eigen::VectorXd p = (log_g.array() - top).exp().matrix();
        p /= p.sum();
        p = p.cwiseMax(1e-300);
        p /= p.sum();
        theta.pmf(u) = std::move(p);
    }
    return theta;
}

ExoParams maximization(const Pscm& model, const std::vector<Eigen::VectorXd>& counts, std::int64_t total) {
    ExoParams theta(model);
    const auto n0 = static_cast<double>(total);
    for (VarIndex u : model.exogenous()) {
        Eigen::VectorXd p = counts[u] / n0;
        p /= p.sum();
        theta.pmf(u) = std::move(p);
    }
    return theta;
}

ExoParams em_step(const StudySet& studies, const ExoParams& theta) {
    const auto e = studies.expectation(theta);
    return maximization(studies.base(), e.counts, studies.total());
}

ExoParams em_step(const Pscm& base, const std::vector<Study>& studies, const ExoParams& theta) {
    return em_step(StudySet(base, studies), theta);
}

EmRunResult em_run(const StudySet& studies, const ExoParams& theta0, const EmConfig& cfg) {
    theta0.validate(studies.base());
    EmRunResult out;
    auto e = studies.expectation(theta0);
    out.theta = theta0;
    out.ll_trace.push_back(e.loglik);
    for (int it = 1; it <= cfg.max_iter; ++it) {
        ExoParams next = maximization(studies.base(), e.counts, studies.total());
        e = studies.expectation(next);
        out.theta = std::move(next);
        out.ll_trace.push_back(e.loglik);
        out.iterations = it;
        if (close_enough(out.ll_trace[out.ll_trace.size() - 2], e.loglik, cfg.tol)) {
            out.converged = true;
            break;
        }
    }
    return out;
}

EmRunResult em_run(const Pscm& base, const std::vector<Study>& studies, const ExoParams& theta0,
                   const EmConfig& cfg) {
    return em_run(StudySet(base, studies), theta0, cfg);
}

EmRunResult em_random_run(const StudySet& studies, const EmConfig& cfg, std::uint64_t run_seed, int* attempts) {
    Rng rng(run_seed);
    std::string last_error;
    for (int a = 1; a <= cfg.init_attempts; ++a) {
        if (attempts) *attempts = a;
        const ExoParams theta0 = random_init(studies.base(), cfg.concentration, rng);
        try {
            return em_run(studies, theta0, cfg);
        } catch (const ZeroProbabilityError& err) {
            last_error = err.what();
        }
    }
    throw ZeroProbabilityError("no usable start after " + std::to_string(cfg.init_attempts) +
                               " attempts (structural mismatch between model and data?): " + last_error);
}

StudyMaximum study_max_loglik(const Pscm& base, const Study& study, const EmConfig& cfg) {
    StudyMaximum out;
    const Pscm clone = intervene(base, study.intervention);
    out.bound = empirical_bound(clone, study.data);
    const StudySet single(base, {study});
    const double tol = cfg.compatibility_tolerance(single.total());
    out.em_best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.restarts; ++i) {
        try {
            const auto run = em_random_run(single, cfg, derive_seed(cfg.seed, study_stream, static_cast<std::uint64_t>(i)));
            out.em_best = std::max(out.em_best, run.loglik());
        } catch (const ZeroProbabilityError&) {
            continue;
        }
        if (out.bound - out.em_best <= tol) break;
    }
    if (out.bound - out.em_best <= tol) {
        out.value = out.bound;
        out.source = MaxSource::bound;
    } else {
        out.value = out.em_best;
        out.source = MaxSource::em;
    }
    return out;
}

EmccResult emcc(const Pscm& base, const std::vector<Study>& studies, const EmConfig& cfg) {
    cfg.validate();
    std::vector<StudyMaximum> maxima;
    for (const auto& s : studies) maxima.push_back(study_max_loglik(base, s, cfg));
    return emcc(base, studies, cfg, maxima);
}

EmccResult emcc(const Pscm& base, const std::vector<Study>& studies, const EmConfig& cfg,
                const std::vector<StudyMaximum>& study_maxima) {
    cfg.validate();
    if (study_maxima.size() != studies.size()) throw ModelError("one study maximum per study expected");
    const StudySet set(base, studies);

    EmccResult out;
    out.total_records = set.total();
    out.maxima = study_maxima;
    std::vector<double> maxima;
    for (const auto& m : study_maxima) maxima.push_back(m.value);
    const double tol = cfg.compatibility_tolerance(set.total());

    const auto n_runs = static_cast<std::size_t>(cfg.restarts);
    std::vector<std::optional<EmRunResult>> results(n_runs);
    out.runs.resize(n_runs);
    auto work = [&](std::size_t i) {
        auto& summary = out.runs[i];
        summary.seed = derive_seed(cfg.seed, run_stream, i);
        try {
            results[i] = em_random_run(set, cfg, summary.seed, &summary.attempts);
        } catch (const ZeroProbabilityError& err) {
            summary.error = err.what();
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n_runs);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n_runs; ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n_runs; i = next++) work(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n_runs; ++i) {
        auto& summary = out.runs[i];
        if (!results[i]) continue;
        const auto& run = *results[i];
        summary.iterations = run.iterations;
        summary.converged = run.converged;
        summary.initial_ll = run.ll_trace.front();
        summary.final_ll = run.loglik();
        const auto verdict = check_compatibility(run.loglik(), maxima, tol);
        summary.gap = verdict.gap;
        summary.retained = verdict.compatible;
        if (verdict.compatible) {
            out.params.thetas.push_back(run.theta);
            out.params.ll_values.push_back(run.loglik());
        }
        if (!best || run.loglik() > results[*best]->loglik()) best = i;
    }
    if (best) {
        out.verdict = check_compatibility(results[*best]->loglik(), maxima, tol);
    } else {
        out.verdict = check_compatibility(-std::numeric_limits<double>::infinity(), maxima, tol);
    }
    return out;
}

}  // namespace scmfuse
