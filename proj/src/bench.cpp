#include "scmfuse/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace scmfuse {

namespace {

constexpr std::uint64_t model_stream = 0x4d4f44;
constexpr std::uint64_t data_stream = 0x44415441;
constexpr std::uint64_t fit_stream = 0x464954;

int evaluate_se(const StructuralEquation& se, const Pscm& model, const std::vector<int>& state) {
    std::size_t idx = 0;
    for (VarIndex in : se.inputs) {
        idx = idx * static_cast<std::size_t>(model.cardinality(in)) + static_cast<std::size_t>(state[in]);
    }
    return se.table[idx];
}

// Endogenous states for a full exogenous assignment (entries of `state` for
// exogenous variables must be set).
void propagate(const Pscm& model, std::vector<int>& state) {
    for (VarIndex v : model.endogenous_order()) state[v] = evaluate_se(model.equation(v), model, state);
}

BenchInterval interval_of(const Pscm& model, const EmccResult& fit, const Query& q) {
    BenchInterval out;
    out.compatible = fit.verdict.compatible;
    out.gap = fit.verdict.gap;
    out.retained = fit.params.size();
    if (!fit.params.empty()) {
        const auto r = bounds(model, fit.params, q);
        out.lower = r.lower;
        out.upper = r.upper;
    }
    return out;
}

}  // namespace

EmConfig BenchConfig::default_em() {
    EmConfig em;
    em.restarts = 30;
    // Sampling noise alone leaves a gap of roughly half a chi-square with the
    // model's degrees of freedom, so the per-record slack is loose.
    em.tol = 1e-7;
    em.compat_tol_per_record = 2e-2;
    return em;
}

void BenchConfig::validate() const {
    if (min_nodes < 2 || max_nodes < min_nodes) throw ModelError("bench: invalid node range");
    if (!(edge_probability >= 0.0 && edge_probability <= 1.0)) throw ModelError("bench: edge probability must be in [0, 1]");
    if (max_endo_parents < 1 || max_endo_parents > 5) throw ModelError("bench: max_endo_parents must be in 1..5");
    if (max_exo_states < 2) throw ModelError("bench: exogenous state cap must be at least 2");
    if (n1 < 1) throw ModelError("bench: N1 must be at least 1");
    if (!(n2_factor > 0.0)) throw ModelError("bench: N2 factor must be positive");
    if (max_total_records < 2) throw ModelError("bench: record ceiling too small");
    if (!(growth > 1.0)) throw ModelError("bench: growth factor must exceed 1");
    if (n_models < 0) throw ModelError("bench: negative model count");
    em.validate();
}

SampledModel sample_model(const BenchConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    std::bernoulli_distribution arc(cfg.edge_probability);
    std::uniform_int_distribution<int> size(cfg.min_nodes, cfg.max_nodes);

    for (int attempt = 0; attempt < 10000; ++attempt) {
        const int n = size(rng);
        std::vector<std::vector<int>> parents(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < j; ++i) {
                if (arc(rng)) parents[static_cast<std::size_t>(j)].push_back(i);
            }
        }
        std::vector<int> exo;
        std::vector<int> endo;
        for (int j = 0; j < n; ++j) (parents[static_cast<std::size_t>(j)].empty() ? exo : endo).push_back(j);
        if (endo.size() < 2 || exo.empty()) continue;
        std::vector<bool> is_exo(static_cast<std::size_t>(n), false);
        for (int u : exo) is_exo[static_cast<std::size_t>(u)] = true;

        std::map<int, int> exo_of;  // endogenous node -> its single exogenous parent
        std::map<int, std::vector<int>> endo_parents;
        for (int v : endo) {
            std::vector<int> ep;
            std::vector<int> np;
            for (int p : parents[static_cast<std::size_t>(v)]) (is_exo[static_cast<std::size_t>(p)] ? ep : np).push_back(p);
            if (ep.empty()) {
                exo_of[v] = exo[std::uniform_int_distribution<std::size_t>(0, exo.size() - 1)(rng)];
            } else {
                exo_of[v] = ep[std::uniform_int_distribution<std::size_t>(0, ep.size() - 1)(rng)];
            }
            std::shuffle(np.begin(), np.end(), rng);
            if (np.size() > static_cast<std::size_t>(cfg.max_endo_parents)) np.resize(static_cast<std::size_t>(cfg.max_endo_parents));
            std::sort(np.begin(), np.end());
            endo_parents[v] = np;
        }

        // Cause: first endogenous node; effect: its last endogenous descendant.
        const int cause = endo.front();
        std::set<int> desc{cause};
        int effect = -1;
        for (int v : endo) {
            if (v == cause) continue;
            for (int p : endo_parents[v]) {
                if (desc.count(p)) {
                    desc.insert(v);
                    effect = v;
                    break;
                }
            }
        }
        if (effect < 0) continue;

        std::map<int, std::string> name;
        std::vector<Variable> variables;
        for (std::size_t i = 0; i < endo.size(); ++i) {
            Variable v;
            v.id = "V" + std::to_string(i + 1);
            v.cardinality = 2;
            name[endo[i]] = v.id;
            variables.push_back(std::move(v));
        }
        std::vector<std::pair<std::string, std::string>> arcs;
        for (int v : endo) {
            for (int p : endo_parents[v]) arcs.emplace_back(name[p], name[v]);
        }
        std::vector<ExoGroup> groups;
        CanonicalOptions options;
        options.max_exo_states = cfg.max_exo_states;
        int u_count = 0;
        for (int u : exo) {
            ExoGroup g;
            g.id = "U" + std::to_string(++u_count);
            std::vector<std::uint64_t> per_child;
            std::uint64_t total = 1;
            for (int v : endo) {
                if (exo_of[v] != u) continue;
                g.children.push_back(name[v]);
                per_child.push_back(function_count(2, std::uint64_t{1} << endo_parents[v].size()));
                const auto c = per_child.back();
                total = (c > cfg.max_exo_states || total > cfg.max_exo_states / c) ? cfg.max_exo_states + 1 : total * c;
            }
            if (g.children.empty()) {
                --u_count;
                continue;
            }
            if (total > cfg.max_exo_states) {
                std::set<std::vector<std::uint64_t>> picked;
                std::vector<std::vector<std::uint64_t>> keep;
                while (keep.size() < cfg.max_exo_states) {
                    std::vector<std::uint64_t> r;
                    for (auto c : per_child) r.push_back(std::uniform_int_distribution<std::uint64_t>(0, c - 1)(rng));
                    if (picked.insert(r).second) keep.push_back(std::move(r));
                }
                options.keep[g.id] = std::move(keep);
            }
            groups.push_back(std::move(g));
        }

        SampledModel out;
        out.model = build_canonical_pscm(variables, arcs, groups, options);
        out.sampled_nodes = n;
        out.cause = out.model.index_of(name[cause]);
        out.effect = out.model.index_of(name[effect]);
        out.truth = ExoParams(out.model);
        std::gamma_distribution<double> gamma(1.0, 1.0);
        for (VarIndex u : out.model.exogenous()) {
            Eigen::VectorXd p(out.model.cardinality(u));
            for (auto& x : p) x = std::max(gamma(rng), 1e-300);
            out.truth.pmf(u) = p / p.sum();
        }
        return out;
    }
    throw ModelError("bench: could not sample a usable graph; widen the node range or raise the edge probability");
}

Dataset sample_dataset(const Pscm& model, const ExoParams& theta, std::int64_t n, Rng& rng) {
    std::vector<std::discrete_distribution<int>> draws;
    for (VarIndex u : model.exogenous()) {
        const auto& p = theta.pmf(u);
        draws.emplace_back(p.data(), p.data() + p.size());
    }
    Dataset d;
    d.columns = model.endogenous();
    std::map<std::vector<int>, std::int64_t> counts;
    std::vector<int> state(model.size(), 0);
    std::vector<int> row(d.columns.size());
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < draws.size(); ++k) state[model.exogenous()[k]] = draws[k](rng);
        propagate(model, state);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = state[d.columns[c]];
        ++counts[row];
    }
    for (const auto& [values, c] : counts) d.rows.push_back(Record{values, c});
    return d;
}

BenchStudies sample_studies(const SampledModel& sm, std::int64_t n1, std::int64_t n2, std::uint64_t seed) {
    Rng rng(seed);
    BenchStudies out;
    out.observational.name = "observational";
    out.observational.data = sample_dataset(sm.model, sm.truth, n1, rng);
    const std::int64_t half = n2 / 2;
    out.arm0.name = "rct_arm0";
    out.arm0.intervention = {{sm.cause, 0}};
    out.arm0.data = sample_dataset(intervene(sm.model, out.arm0.intervention), sm.truth, half, rng);
    out.arm1.name = "rct_arm1";
    out.arm1.intervention = {{sm.cause, 1}};
    out.arm1.data = sample_dataset(intervene(sm.model, out.arm1.intervention), sm.truth, n2 - half, rng);
    return out;
}

std::vector<BenchRecord> run_benchmark(const BenchConfig& cfg, const std::function<void(const BenchRecord&)>& progress) {
    cfg.validate();
    std::vector<BenchRecord> records;
    for (int i = 0; i < cfg.n_models; ++i) {
        BenchRecord rec;
        rec.model_index = i;
        rec.seed = derive_seed(cfg.seed, model_stream, static_cast<std::uint64_t>(i));
        const SampledModel sm = sample_model(cfg, rec.seed);
        rec.sampled_nodes = sm.sampled_nodes;
        rec.n_endogenous = static_cast<int>(sm.model.endogenous().size());
        rec.n_exogenous = static_cast<int>(sm.model.exogenous().size());
        for (VarIndex u : sm.model.exogenous()) rec.exo_cardinalities.push_back(sm.model.cardinality(u));
        rec.cause = sm.model.variable(sm.cause).id;
        rec.effect = sm.model.variable(sm.effect).id;
        PnsQuery pq;
        pq.cause = sm.cause;
        pq.effect = sm.effect;
        const Query q{"pns", pq};

        std::int64_t n1 = cfg.n1;
        const auto total_for = [&](std::int64_t a) { return a + static_cast<std::int64_t>(std::llround(cfg.n2_factor * static_cast<double>(a))); };
        if (total_for(n1) > cfg.max_total_records) {
            rec.skip_reason = "starting sizes exceed the record ceiling";
        }
        for (int attempt = 0; rec.skip_reason.empty(); ++attempt) {
            const std::int64_t n2 = total_for(n1) - n1;
            rec.n1 = n1;
            rec.n2 = n2;
            rec.attempts = attempt + 1;
            const auto st = sample_studies(sm, n1, n2, derive_seed(rec.seed, data_stream, static_cast<std::uint64_t>(attempt)));
            EmConfig em = cfg.em;
            em.seed = derive_seed(rec.seed, fit_stream, static_cast<std::uint64_t>(attempt));
            const StudyMaximum m_obs = study_max_loglik(sm.model, st.observational, em);
            const StudyMaximum m_arm0 = study_max_loglik(sm.model, st.arm0, em);
            const StudyMaximum m_arm1 = study_max_loglik(sm.model, st.arm1, em);

            const auto joint = emcc(sm.model, {st.observational, st.arm0, st.arm1}, em, {m_obs, m_arm0, m_arm1});
            if (!joint.verdict.compatible || joint.params.empty()) {
                std::int64_t next = static_cast<std::int64_t>(std::floor(static_cast<double>(n1) * cfg.growth));
                if (total_for(n1) >= cfg.max_total_records) {
                    rec.joint = interval_of(sm.model, joint, q);
                    rec.skip_reason = "incompatible at the record ceiling";
                    break;
                }
                while (next > n1 && total_for(next) > cfg.max_total_records) --next;
                if (next <= n1) {
                    rec.joint = interval_of(sm.model, joint, q);
                    rec.skip_reason = "incompatible at the record ceiling";
                    break;
                }
                n1 = next;
                continue;
            }
            const auto obs = emcc(sm.model, {st.observational}, em, {m_obs});
            const auto rct = emcc(sm.model, {st.arm0, st.arm1}, em, {m_arm0, m_arm1});
            rec.joint = interval_of(sm.model, joint, q);
            rec.obs = interval_of(sm.model, obs, q);
            rec.rct = interval_of(sm.model, rct, q);
            if (obs.params.empty() || rct.params.empty()) {
                rec.skip_reason = "a single-study fit retained no parameters";
                break;
            }
            const double lj = rec.joint->upper - rec.joint->lower;
            if (!(lj > cfg.min_width)) {
                rec.skip_reason = "query identifiable from the joint studies";
                break;
            }
            const double lo = rec.obs->upper - rec.obs->lower;
            const double li = rec.rct->upper - rec.rct->lower;
            if (lo > 0.0) rec.shrink_vs_obs = 1.0 - lj / lo;
            if (li > 0.0) rec.shrink_vs_rct = 1.0 - lj / li;
            rec.emitted = true;
            break;
        }
        if (progress) progress(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

ShrinkStats shrink_stats(std::vector<double> values) {
    ShrinkStats s;
    s.n = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    ExactSum sum;
    for (double v : values) sum.add(v);
    s.mean = sum.value() / static_cast<double>(values.size());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    s.min = values.front();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.max = values.back();
    return s;
}

BenchSummary summarize(const std::vector<BenchRecord>& records, double inclusion_slack) {
    BenchSummary s;
    s.models = records.size();
    s.inclusion_slack = inclusion_slack;
    std::vector<double> vo;
    std::vector<double> vi;
    std::size_t included = 0;
    for (const auto& r : records) {
        if (!r.emitted) {
            ++s.skipped;
            continue;
        }
        ++s.emitted;
        if (r.shrink_vs_obs) vo.push_back(*r.shrink_vs_obs);
        if (r.shrink_vs_rct) vi.push_back(*r.shrink_vs_rct);
        const auto inside = [&](const BenchInterval& outer) {
            return r.joint->lower >= outer.lower - inclusion_slack && r.joint->upper <= outer.upper + inclusion_slack;
        };
        if (inside(*r.obs) && inside(*r.rct)) ++included;
    }
    s.vs_obs = shrink_stats(vo);
    s.vs_rct = shrink_stats(vi);
    s.inclusion_rate = s.emitted ? static_cast<double>(included) / static_cast<double>(s.emitted) : 0.0;
    return s;
}

// -- grid oracle ----------------------------------------------------------------

namespace {

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    long double r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (r > static_cast<long double>(std::numeric_limits<std::size_t>::max() / 4)) {
        return std::numeric_limits<std::size_t>::max() / 4;
    }
    return static_cast<std::size_t>(std::llround(r));
}

int grid_divisions(double step) {
    if (!(step > 0.0 && step <= 1.0)) throw ModelError("grid step must be in (0, 1]");
    const auto k = static_cast<int>(std::lround(1.0 / step));
    if (std::abs(k * step - 1.0) > 1e-9) throw ModelError("grid step must divide 1");
    return k;
}

// All vectors of `parts` nonnegative integers summing to k.
std::vector<std::vector<int>> compositions(int k, int parts) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(parts), 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == parts - 1) {
            cur[static_cast<std::size_t>(pos)] = left;
            out.push_back(cur);
            return;
        }
        for (int x = left; x >= 0; --x) {
            cur[static_cast<std::size_t>(pos)] = x;
            rec(pos + 1, left - x);
        }
    };
    rec(0, k);
    return out;
}

struct PnsTables {
    std::vector<double> condition;  // 1 where the factual condition holds
    std::vector<double> event;      // 1 where both counterfactual outcomes hold
};

PnsTables pns_tables(const Pscm& model, const PnsQuery& q) {
    const auto& exo = model.exogenous();
    std::vector<int> cards;
    for (VarIndex u : exo) cards.push_back(model.cardinality(u));
    const std::size_t n = config_count(cards);
    for (VarIndex v : {q.cause, q.effect}) {
        if (model.variable(v).is_exogenous() || model.cardinality(v) != 2) throw ModelError("PNS needs binary endogenous variables");
    }
    auto pick = [](int given, int fallback) { return given >= 0 ? given : fallback; };
    const Pscm pos = intervene(model, Assignment{{q.cause, pick(q.cause_positive, 1)}});
    const Pscm neg = intervene(model, Assignment{{q.cause, pick(q.cause_negative, 0)}});
    PnsTables t;
    t.condition.resize(n);
    t.event.resize(n);
    std::vector<int> digits(cards.size());
    std::vector<int> factual(model.size(), 0);
    std::vector<int> s_pos(model.size(), 0);
    std::vector<int> s_neg(model.size(), 0);
    for (std::size_t j = 0; j < n; ++j) {
        decode_config(j, cards, digits);
        for (std::size_t i = 0; i < exo.size(); ++i) factual[exo[i]] = s_pos[exo[i]] = s_neg[exo[i]] = digits[i];
        propagate(model, factual);
        propagate(pos, s_pos);
        propagate(neg, s_neg);
        bool cond = true;
        for (const auto& [v, s] : q.condition) cond = cond && factual[v] == s;
        t.condition[j] = cond ? 1.0 : 0.0;
        const bool ev = s_pos[q.effect] == pick(q.effect_positive, 1) && s_neg[q.effect] == pick(q.effect_negative, 0);
        t.event[j] = (cond && ev) ? 1.0 : 0.0;
    }
    return t;
}

std::vector<double> joint_exo(const Pscm& model, const ExoParams& theta) {
    std::vector<double> p{1.0};
    for (VarIndex u : model.exogenous()) {
        const auto& pmf = theta.pmf(u);
        std::vector<double> next;
        next.reserve(p.size() * static_cast<std::size_t>(pmf.size()));
        for (double a : p) {
            for (Eigen::Index s = 0; s < pmf.size(); ++s) next.push_back(a * pmf(s));
        }
        p = std::move(next);
    }
    return p;
}

}  // namespace

double pns_by_enumeration(const Pscm& model, const ExoParams& theta, const PnsQuery& q) {
    const auto t = pns_tables(model, q);
    const auto p = joint_exo(model, theta);
    ExactSum num;
    ExactSum den;
    for (std::size_t j = 0; j < p.size(); ++j) {
        num.add(p[j] * t.event[j]);
        den.add(p[j] * t.condition[j]);
    }
    if (!(den.value() > 0.0)) throw ZeroProbabilityError("PNS condition has probability zero");
    return num.value() / den.value();
}

std::size_t grid_size(const Pscm& model, double step) {
    const int k = grid_divisions(step);
    std::size_t total = 1;
    for (VarIndex u : model.exogenous()) {
        const std::size_t c = binomial(static_cast<std::size_t>(k + model.cardinality(u) - 1),
                                       static_cast<std::size_t>(model.cardinality(u) - 1));
        if (total > std::numeric_limits<std::size_t>::max() / 4 / std::max<std::size_t>(c, 1)) {
            return std::numeric_limits<std::size_t>::max() / 4;
        }
        total *= c;
    }
    return total;
}

OracleResult grid_oracle(const Pscm& model, const std::vector<Study>& studies, double step, const PnsQuery& q,
                         std::optional<double> epsilon, std::size_t max_points) {
    const int k = grid_divisions(step);
    OracleResult out;
    out.grid_points = grid_size(model, step);
    if (out.grid_points > max_points) {
        throw ModelError("grid oracle: " + std::to_string(out.grid_points) + " grid points exceed the limit of " +
                         std::to_string(max_points));
    }
    if (studies.empty()) throw ModelError("grid oracle: no studies");
    int dim = 0;
    for (VarIndex u : model.exogenous()) dim += model.cardinality(u) - 1;
    out.epsilon = epsilon.value_or(step * dim);
    out.slack = 2.0 * step * dim;

    const auto& exo = model.exogenous();
    std::vector<int> exo_cards;
    for (VarIndex u : exo) exo_cards.push_back(model.cardinality(u));
    const std::size_t n_exo_joint = config_count(exo_cards);
    std::vector<int> endo_cards;
    for (VarIndex v : model.endogenous()) endo_cards.push_back(model.cardinality(v));
    const std::size_t n_endo_joint = config_count(endo_cards);

    // Per study: where each joint exogenous configuration lands, and the empirical joint.
    std::vector<std::vector<std::size_t>> lands(studies.size());
    std::vector<std::vector<double>> empirical(studies.size());
    std::vector<int> digits(exo.size());
    std::vector<int> config(model.endogenous().size());
    for (std::size_t s = 0; s < studies.size(); ++s) {
        studies[s].validate(model);
        const Pscm clone = intervene(model, studies[s].intervention);
        std::vector<int> state(model.size(), 0);
        lands[s].resize(n_exo_joint);
        for (std::size_t j = 0; j < n_exo_joint; ++j) {
            decode_config(j, exo_cards, digits);
            for (std::size_t i = 0; i < exo.size(); ++i) state[exo[i]] = digits[i];
            propagate(clone, state);
            for (std::size_t c = 0; c < config.size(); ++c) config[c] = state[model.endogenous()[c]];
            lands[s][j] = encode_config(config, endo_cards);
        }
        const Dataset d = studies[s].data.aligned_to(model);
        empirical[s].assign(n_endo_joint, 0.0);
        const auto n = static_cast<double>(d.total());
        for (const auto& r : d.rows) empirical[s][encode_config(r.values, endo_cards)] += static_cast<double>(r.count) / n;
    }
    const auto tables = pns_tables(model, q);

    std::vector<std::vector<std::vector<int>>> simplex;
    for (int c : exo_cards) simplex.push_back(compositions(k, c));
    std::vector<std::size_t> pick(exo.size(), 0);
    ExoParams theta(model);
    std::vector<double> induced(n_endo_joint);
    out.lower = std::numeric_limits<double>::infinity();
    out.upper = -std::numeric_limits<double>::infinity();
    const double inv_k = 1.0 / k;
    for (std::size_t point = 0; point < out.grid_points; ++point) {
        for (std::size_t i = 0; i < exo.size(); ++i) {
            const auto& comp = simplex[i][pick[i]];
            Eigen::VectorXd p(exo_cards[i]);
            for (int s = 0; s < exo_cards[i]; ++s) p(s) = comp[static_cast<std::size_t>(s)] * inv_k;
            theta.pmf(exo[i]) = std::move(p);
        }
        const auto pu = joint_exo(model, theta);
        bool ok = true;
        for (std::size_t s = 0; s < studies.size() && ok; ++s) {
            std::fill(induced.begin(), induced.end(), 0.0);
            for (std::size_t j = 0; j < n_exo_joint; ++j) induced[lands[s][j]] += pu[j];
            for (std::size_t c = 0; c < n_endo_joint; ++c) {
                if (std::abs(induced[c] - empirical[s][c]) > out.epsilon) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) {
            double num = 0.0;
            double den = 0.0;
            for (std::size_t j = 0; j < n_exo_joint; ++j) {
                num += pu[j] * tables.event[j];
                den += pu[j] * tables.condition[j];
            }
            if (den > 0.0) {
                ++out.retained;
                out.lower = std::min(out.lower, num / den);
                out.upper = std::max(out.upper, num / den);
            }
        }
        for (std::size_t i = exo.size(); i-- > 0;) {
            if (++pick[i] < simplex[i].size()) break;
            pick[i] = 0;
        }
    }
    out.feasible = out.retained > 0;
    if (!out.feasible) out.lower = out.upper = 0.0;
    return out;
}

}  // namespace scmfuse
