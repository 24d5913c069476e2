#include "scmfuse/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scmfuse/exact_sum.hpp"

namespace scmfuse {

std::int64_t Dataset::total() const {
    std::int64_t n = 0;
    for (const auto& r : rows) n += r.count;
    return n;
}

void Dataset::compact() {
    std::sort(rows.begin(), rows.end(), [](const Record& a, const Record& b) { return a.values < b.values; });
    std::vector<Record> merged;
    for (auto& r : rows) {
        if (!merged.empty() && merged.back().values == r.values) {
            merged.back().count += r.count;
        } else {
            merged.push_back(std::move(r));
        }
    }
    rows = std::move(merged);
}

Dataset Dataset::aligned_to(const Pscm& model) const {
    const auto& endo = model.endogenous();
    if (columns.size() != endo.size()) {
        throw ModelError("dataset has " + std::to_string(columns.size()) + " columns, model has " +
                         std::to_string(endo.size()) + " endogenous variables");
    }
    std::vector<std::size_t> source(endo.size());
    for (std::size_t i = 0; i < endo.size(); ++i) {
        auto it = std::find(columns.begin(), columns.end(), endo[i]);
        if (it == columns.end()) {
            throw ModelError("dataset lacks a column for '" + model.variable(endo[i]).id + "'");
        }
        source[i] = static_cast<std::size_t>(it - columns.begin());
    }
    Dataset out;
    out.columns = endo;
    out.rows.reserve(rows.size());
    for (const auto& r : rows) {
        Record a;
        a.count = r.count;
        a.values.resize(endo.size());
        for (std::size_t i = 0; i < endo.size(); ++i) a.values[i] = r.values.at(source[i]);
        out.rows.push_back(std::move(a));
    }
    return out;
}

void Dataset::validate(const Pscm& model) const {
    std::set<VarIndex> seen;
    for (VarIndex c : columns) {
        if (c >= model.size() || model.variable(c).is_exogenous()) {
            throw ModelError("dataset column is not an endogenous variable");
        }
        if (!seen.insert(c).second) throw ModelError("dataset repeats a column");
    }
    if (rows.empty() || total() <= 0) throw ModelError("dataset is empty");
    for (const auto& r : rows) {
        if (r.values.size() != columns.size()) throw ModelError("record width differs from the header");
        if (r.count <= 0) throw ModelError("record count must be positive");
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (r.values[i] < 0 || r.values[i] >= model.cardinality(columns[i])) {
                throw ModelError("record state out of range for '" + model.variable(columns[i]).id + "'");
            }
        }
    }
}

void Study::validate(const Pscm& model) const {
    data.validate(model);
    for (const auto& [v, state] : intervention) {
        if (v >= model.size() || model.variable(v).is_exogenous()) {
            throw ModelError("study '" + name + "' intervenes on a non-endogenous variable");
        }
        auto it = std::find(data.columns.begin(), data.columns.end(), v);
        if (it == data.columns.end()) continue;
        const auto col = static_cast<std::size_t>(it - data.columns.begin());
        for (const auto& r : data.rows) {
            if (r.values[col] != state) {
                throw ModelError("study '" + name + "' has a record with '" + model.variable(v).id +
                                 "' different from its intervened state");
            }
        }
    }
}

double EmpiricalModel::probability(std::span<const int> config) const {
    double p = 1.0;
    std::vector<int> states;
    std::vector<int> cond_cards;
    for (const auto& cpt : cpts) {
        states.clear();
        cond_cards.clear();
        for (VarIndex w : cpt.conditioners) {
            states.push_back(config[column_of[w]]);
            cond_cards.push_back(cards[column_of[w]]);
        }
        const auto col = static_cast<Eigen::Index>(encode_config(states, cond_cards));
        p *= cpt.values(config[column_of[cpt.child]], col);
        if (p == 0.0) return 0.0;
    }
    return p;
}

EmpiricalModel empirical_model(const Pscm& model, const Dataset& data, std::size_t joint_cap) {
    const Dataset aligned = data.aligned_to(model);
    const auto cc = c_components(model);

    EmpiricalModel em;
    em.endogenous = model.endogenous();
    em.column_of.assign(model.size(), 0);
    for (std::size_t i = 0; i < em.endogenous.size(); ++i) {
        em.column_of[em.endogenous[i]] = i;
        em.cards.push_back(model.cardinality(em.endogenous[i]));
    }

    for (VarIndex v : model.endogenous_order()) {
        Cpt cpt;
        cpt.child = v;
        cpt.conditioners = cc.w_of.at(v);
        std::vector<int> cond_cards;
        for (VarIndex w : cpt.conditioners) cond_cards.push_back(model.cardinality(w));
        const auto n_cols = static_cast<Eigen::Index>(config_count(cond_cards));
        Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(model.cardinality(v), n_cols);
        std::vector<int> states(cpt.conditioners.size());
        for (const auto& r : aligned.rows) {
            for (std::size_t i = 0; i < cpt.conditioners.size(); ++i) {
                states[i] = r.values[em.column_of[cpt.conditioners[i]]];
            }
            counts(r.values[em.column_of[v]], static_cast<Eigen::Index>(encode_config(states, cond_cards))) +=
                static_cast<double>(r.count);
        }
        for (Eigen::Index c = 0; c < n_cols; ++c) {
            const double total = counts.col(c).sum();
            if (total > 0.0) {
                counts.col(c) /= total;
            } else {
                em.absent_columns.emplace_back(v, static_cast<std::size_t>(c));
            }
        }
        cpt.values = std::move(counts);
        em.cpts.push_back(std::move(cpt));
    }

    std::size_t space = 1;
    bool fits = true;
    for (int c : em.cards) {
        if (space > joint_cap / static_cast<std::size_t>(c)) {
            fits = false;
            break;
        }
        space *= static_cast<std::size_t>(c);
    }
    if (fits) {
        em.joint.resize(static_cast<Eigen::Index>(space));
        std::vector<int> config(em.cards.size());
        for (std::size_t i = 0; i < space; ++i) {
            decode_config(i, em.cards, config);
            em.joint(static_cast<Eigen::Index>(i)) = em.probability(config);
        }
    }
    return em;
}

double multinomial_bound(const Dataset& data) {
    Dataset d = data;
    d.compact();
    const auto n = static_cast<double>(d.total());
    ExactSum sum;
    for (const auto& r : d.rows) {
        const auto c = static_cast<double>(r.count);
        sum.add(c * std::log(c / n));
    }
    return sum.value();
}

double empirical_bound(const Pscm& model, const Dataset& data) {
    const auto em = empirical_model(model, data, 0);
    const Dataset aligned = data.aligned_to(model);
    ExactSum sum;
    for (const auto& r : aligned.rows) {
        sum.add(static_cast<double>(r.count) * std::log(em.probability(r.values)));
    }
    return sum.value();
}

}  // namespace scmfuse
