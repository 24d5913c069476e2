// Test fixtures and brute-force oracles. The oracles evaluate the structural
// equations directly for every joint exogenous configuration; they share no
// code with the inference engine beyond the model accessors.
#ifndef SCMFUSE_TESTS_SUPPORT_HPP
#define SCMFUSE_TESTS_SUPPORT_HPP

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "scmfuse/bench.hpp"

namespace scmfuse::testing {

inline Variable endo(const std::string& id, std::vector<std::string> labels = {"0", "1"}) {
    Variable v;
    v.id = id;
    v.cardinality = static_cast<int>(labels.size());
    v.labels = std::move(labels);
    return v;
}

/// V <- U, identity equation.
inline Pscm one_node() { return build_canonical_pscm({endo("V")}, {}, {{"U", {"V"}}}); }

/// W -> V, each with a private root. Declared W first.
inline Pscm binary_parent() {
    return build_canonical_pscm({endo("W"), endo("V")}, {{"W", "V"}}, {{"Uw", {"W"}}, {"Uv", {"V"}}});
}

inline Pscm fig1() {
    return build_canonical_pscm({endo("Treatment", {"no_drug", "drug"}), endo("Gender", {"female", "male"}),
                                 endo("Survival", {"dead", "survived"})},
                                {{"Gender", "Treatment"}, {"Treatment", "Survival"}, {"Gender", "Survival"}},
                                {{"U", {"Treatment", "Gender", "Survival"}}});
}

inline Pscm two_node() {
    return build_canonical_pscm({endo("Treatment", {"no_drug", "drug"}), endo("Survival", {"dead", "survived"})},
                                {{"Treatment", "Survival"}}, {{"U", {"Treatment", "Survival"}}});
}

inline Dataset make_data(const Pscm& m, const std::vector<std::string>& cols,
                         const std::vector<std::pair<std::vector<int>, std::int64_t>>& rows) {
    Dataset d;
    for (const auto& c : cols) d.columns.push_back(m.index_of(c));
    for (const auto& [v, n] : rows) d.rows.push_back({v, n});
    return d;
}

/// Observational study and the two trial arms of Table 1 (columns T, G, S).
inline std::vector<Study> table1_fig1(const Pscm& m) {
    const std::vector<std::string> cols{"Treatment", "Gender", "Survival"};
    const VarIndex t = m.index_of("Treatment");
    return {
        {"observational",
         make_data(m, cols,
                   {{{1, 0, 1}, 378}, {{1, 0, 0}, 1022}, {{1, 1, 1}, 980}, {{1, 1, 0}, 420},
                    {{0, 0, 1}, 420}, {{0, 0, 0}, 180}, {{0, 1, 1}, 420}, {{0, 1, 0}, 180}}),
         {}},
        {"do_drug", make_data(m, cols, {{{1, 0, 1}, 489}, {{1, 0, 0}, 511}, {{1, 1, 1}, 490}, {{1, 1, 0}, 510}}),
         {{t, 1}}},
        {"do_no_drug", make_data(m, cols, {{{0, 0, 1}, 210}, {{0, 0, 0}, 790}, {{0, 1, 1}, 210}, {{0, 1, 0}, 790}}),
         {{t, 0}}},
    };
}

/// Table 1 aggregated over Gender (columns T, S).
inline std::vector<Study> table1_two_node(const Pscm& m) {
    const std::vector<std::string> cols{"Treatment", "Survival"};
    const VarIndex t = m.index_of("Treatment");
    return {
        {"observational", make_data(m, cols, {{{1, 1}, 1358}, {{1, 0}, 1442}, {{0, 1}, 840}, {{0, 0}, 360}}), {}},
        {"do_drug", make_data(m, cols, {{{1, 1}, 979}, {{1, 0}, 1021}}), {{t, 1}}},
        {"do_no_drug", make_data(m, cols, {{{0, 1}, 420}, {{0, 0}, 1580}}), {{t, 0}}},
    };
}

// -- brute force ------------------------------------------------------------------

/// Values of all variables given one state per exogenous variable (indexed by
/// position in model.exogenous()) and an intervention.
inline std::vector<int> evaluate_world(const Pscm& m, const std::vector<int>& u_states, const Assignment& intervention) {
    std::vector<int> value(m.size(), -1);
    for (std::size_t i = 0; i < m.exogenous().size(); ++i) value[m.exogenous()[i]] = u_states[i];
    for (VarIndex v : m.dag().topological_order()) {
        if (m.variable(v).is_exogenous()) continue;
        if (auto it = intervention.find(v); it != intervention.end()) {
            value[v] = it->second;
            continue;
        }
        const auto& se = m.equation(v);
        std::size_t idx = 0;
        for (VarIndex in : se.inputs) idx = idx * static_cast<std::size_t>(m.cardinality(in)) + static_cast<std::size_t>(value[in]);
        value[v] = se.table[idx];
    }
    return value;
}

/// Calls f(u_states, probability) for every joint exogenous configuration.
template <class F>
void for_each_exo(const Pscm& m, const ExoParams& theta, F&& f) {
    const auto& exo = m.exogenous();
    std::vector<int> u(exo.size(), 0);
    while (true) {
        double p = 1.0;
        for (std::size_t i = 0; i < exo.size(); ++i) p *= theta.pmf(exo[i])(u[i]);
        f(u, p);
        std::size_t i = exo.size();
        while (i > 0) {
            --i;
            if (++u[i] < m.cardinality(exo[i])) break;
            u[i] = 0;
            if (i == 0) return;
        }
        if (exo.empty()) return;
    }
}

/// P(endogenous configuration) under an intervention, configurations in
/// model.endogenous() order.
inline std::map<std::vector<int>, double> brute_joint(const Pscm& m, const ExoParams& theta,
                                                      const Assignment& intervention = {}) {
    std::map<std::vector<int>, double> joint;
    for_each_exo(m, theta, [&](const std::vector<int>& u, double p) {
        const auto w = evaluate_world(m, u, intervention);
        std::vector<int> key;
        for (VarIndex v : m.endogenous()) key.push_back(w[v]);
        joint[key] += p;
    });
    return joint;
}

inline double brute_loglik(const Pscm& m, const ExoParams& theta, const std::vector<Study>& studies) {
    long double ll = 0.0L;
    for (const auto& s : studies) {
        const auto joint = brute_joint(m, theta, s.intervention);
        const Dataset d = s.data.aligned_to(m);
        for (const auto& r : d.rows) {
            auto it = joint.find(r.values);
            const double p = it == joint.end() ? 0.0 : it->second;
            ll += static_cast<long double>(r.count) * std::log(static_cast<long double>(p));
        }
    }
    return static_cast<double>(ll);
}

/// P(Y_{x=1} = 1, Y_{x=0} = 0 | condition), the condition read in the factual world.
inline double brute_pns(const Pscm& m, const ExoParams& theta, VarIndex x, VarIndex y, const Assignment& condition = {}) {
    double num = 0.0;
    double den = 0.0;
    for_each_exo(m, theta, [&](const std::vector<int>& u, double p) {
        const auto factual = evaluate_world(m, u, {});
        for (const auto& [v, s] : condition) {
            if (factual[v] != s) return;
        }
        den += p;
        if (evaluate_world(m, u, {{x, 1}})[y] == 1 && evaluate_world(m, u, {{x, 0}})[y] == 0) num += p;
    });
    return den > 0.0 ? num / den : 0.0;
}

// -- fuzzing ----------------------------------------------------------------------

inline ExoParams random_theta(const Pscm& m, std::mt19937_64& rng, double alpha = 1.0) {
    ExoParams theta(m);
    std::gamma_distribution<double> g(alpha, 1.0);
    for (VarIndex u : m.exogenous()) {
        Eigen::VectorXd p(m.cardinality(u));
        for (int i = 0; i < p.size(); ++i) p(i) = g(rng) + 1e-12;
        theta.pmf(u) = p / p.sum();
    }
    return theta;
}

/// Random canonical model with 2 or 3 binary endogenous variables and at most
/// `cap` states per exogenous variable (larger groups are reduced at random).
inline Pscm random_model(std::mt19937_64& rng, std::uint64_t cap = 32) {
    std::uniform_int_distribution<int> n_dist(2, 3);
    std::bernoulli_distribution coin(0.5);
    const int n = n_dist(rng);
    std::vector<Variable> vars;
    for (int i = 0; i < n; ++i) vars.push_back(endo("V" + std::to_string(i + 1)));
    std::vector<std::pair<std::string, std::string>> arcs;
    std::vector<int> n_parents(n, 0);
    for (int j = 1; j < n; ++j) {
        for (int i = 0; i < j; ++i) {
            if (coin(rng)) {
                arcs.emplace_back(vars[i].id, vars[j].id);
                ++n_parents[j];
            }
        }
    }
    std::vector<ExoGroup> groups;
    for (int i = 0; i < n;) {
        const int size = (i + 1 < n && coin(rng)) ? 2 : 1;
        ExoGroup g{"U" + std::to_string(groups.size() + 1), {}};
        for (int k = 0; k < size; ++k) g.children.push_back(vars[i + k].id);
        groups.push_back(g);
        i += size;
    }
    CanonicalOptions opt;
    opt.max_exo_states = cap;
    for (const auto& g : groups) {
        std::vector<std::uint64_t> counts;
        std::uint64_t total = 1;
        for (const auto& c : g.children) {
            const int idx = std::stoi(c.substr(1)) - 1;
            counts.push_back(function_count(2, std::uint64_t{1} << n_parents[idx]));
            total *= counts.back();
        }
        if (total <= cap) continue;
        std::set<std::vector<std::uint64_t>> picked;
        while (picked.size() < cap) {
            std::vector<std::uint64_t> t;
            for (auto c : counts) t.push_back(std::uniform_int_distribution<std::uint64_t>(0, c - 1)(rng));
            picked.insert(t);
        }
        opt.keep[g.id] = {picked.begin(), picked.end()};
    }
    return build_canonical_pscm(vars, arcs, groups, opt);
}

/// n records drawn from the induced joint under `intervention`.
inline Dataset sample_records(const Pscm& m, const ExoParams& theta, const Assignment& intervention, int n,
                              std::mt19937_64& rng) {
    const auto joint = brute_joint(m, theta, intervention);
    std::vector<std::vector<int>> keys;
    std::vector<double> w;
    for (const auto& [k, p] : joint) {
        keys.push_back(k);
        w.push_back(p);
    }
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::map<std::vector<int>, std::int64_t> counts;
    for (int i = 0; i < n; ++i) ++counts[keys[pick(rng)]];
    Dataset d;
    d.columns = m.endogenous();
    for (const auto& [k, c] : counts) d.rows.push_back({k, c});
    return d;
}

/// One observational study, plus an intervened one on the first endogenous
/// variable when `with_trial` is set.
inline std::vector<Study> random_studies(const Pscm& m, const ExoParams& theta, std::mt19937_64& rng,
                                         bool with_trial, int n = 200) {
    std::vector<Study> out{{"obs", sample_records(m, theta, {}, n, rng), {}}};
    if (with_trial) {
        const VarIndex x = m.endogenous_order().front();
        const int s = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
        out.push_back({"trial", sample_records(m, theta, {{x, s}}, n, rng), {{x, s}}});
    }
    return out;
}

}  // namespace scmfuse::testing

#endif  // SCMFUSE_TESTS_SUPPORT_HPP
