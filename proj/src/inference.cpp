#include "scmfuse/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace scmfuse {

namespace {

constexpr double probability_floor = 1e-300;

std::set<VarIndex> ancestral_closure(const Pscm& model, const std::vector<VarIndex>& seeds) {
    std::set<VarIndex> out;
    std::vector<VarIndex> stack(seeds.begin(), seeds.end());
    while (!stack.empty()) {
        VarIndex v = stack.back();
        stack.pop_back();
        if (!out.insert(v).second) continue;
        for (VarIndex p : model.dag().parents(v)) stack.push_back(p);
    }
    return out;
}

}  // namespace

std::vector<VarIndex> min_fill_order(const std::vector<std::vector<VarIndex>>& scopes,
                                     const std::vector<VarIndex>& to_eliminate,
                                     const std::vector<int>& cards) {
    std::map<VarIndex, std::set<VarIndex>> adj;
    for (const auto& s : scopes) {
        for (VarIndex a : s) {
            adj[a];
            for (VarIndex b : s) {
                if (a != b) adj[a].insert(b);
            }
        }
    }
    std::set<VarIndex> remaining(to_eliminate.begin(), to_eliminate.end());
    std::vector<VarIndex> order;
    while (!remaining.empty()) {
        VarIndex best = *remaining.begin();
        std::size_t best_fill = std::numeric_limits<std::size_t>::max();
        double best_weight = std::numeric_limits<double>::infinity();
        for (VarIndex v : remaining) {
            const auto& nb = adj[v];
            std::size_t fill = 0;
            for (auto i = nb.begin(); i != nb.end(); ++i) {
                for (auto j = std::next(i); j != nb.end(); ++j) {
                    if (!adj[*i].count(*j)) ++fill;
                }
            }
            double weight = cards[v];
            for (VarIndex n : nb) weight *= cards[n];
            if (fill < best_fill || (fill == best_fill && weight < best_weight)) {
                best = v;
                best_fill = fill;
                best_weight = weight;
            }
        }
        const auto nb = adj[best];
        for (VarIndex a : nb) {
            for (VarIndex b : nb) {
                if (a != b) adj[a].insert(b);
            }
            adj[a].erase(best);
        }
        adj.erase(best);
        remaining.erase(best);
        order.push_back(best);
    }
    return order;
}

Posterior query(const Pscm& model, const ExoParams& theta, const std::vector<VarIndex>& target,
                const Assignment& evidence, const std::vector<VarIndex>* order) {
    for (VarIndex v : target) {
        if (v >= model.size()) throw ModelError("query target out of range");
    }
    if (std::set<VarIndex>(target.begin(), target.end()).size() != target.size()) {
        throw ModelError("query target repeats a variable");
    }
    std::vector<VarIndex> seeds = target;
    for (const auto& [v, s] : evidence) {
        if (v >= model.size()) throw ModelError("evidence variable out of range");
        if (s < 0 || s >= model.cardinality(v)) throw ModelError("evidence state out of range for '" + model.variable(v).id + "'");
        seeds.push_back(v);
    }
    const auto relevant = ancestral_closure(model, seeds);

    Assignment reducible;
    for (const auto& [v, s] : evidence) {
        if (std::find(target.begin(), target.end(), v) == target.end()) reducible.emplace(v, s);
    }

    std::vector<Factor> factors;
    for (VarIndex v : relevant) {
        Factor f = model.variable(v).is_exogenous() ? Factor::from_pmf(v, theta.pmf(v))
                                                    : Factor::from_cpt(se_to_cpt(model.equation(v), model), model);
        factors.push_back(reduce(f, reducible));
    }
    for (const auto& [v, s] : evidence) {
        if (reducible.count(v)) continue;
        Factor indicator = Factor::from_pmf(v, Eigen::VectorXd::Zero(model.cardinality(v)));
        indicator.values(s) = 1.0;
        factors.push_back(std::move(indicator));
    }

    std::vector<VarIndex> to_eliminate;
    for (VarIndex v : relevant) {
        if (!reducible.count(v) && std::find(target.begin(), target.end(), v) == target.end()) {
            to_eliminate.push_back(v);
        }
    }
    std::vector<VarIndex> elimination;
    if (order != nullptr) {
        for (VarIndex v : *order) {
            if (std::find(to_eliminate.begin(), to_eliminate.end(), v) != to_eliminate.end()) elimination.push_back(v);
        }
        if (elimination.size() != to_eliminate.size()) {
            throw ModelError("elimination order does not cover the variables to eliminate");
        }
    } else {
        std::vector<std::vector<VarIndex>> scopes;
        for (const auto& f : factors) scopes.push_back(f.scope);
        std::vector<int> cards;
        for (const auto& var : model.variables()) cards.push_back(var.cardinality);
        elimination = min_fill_order(scopes, to_eliminate, cards);
    }

    for (VarIndex v : elimination) {
        Factor product = Factor::scalar(1.0);
        std::vector<Factor> rest;
        for (auto& f : factors) {
            if (f.contains(v)) {
                product = multiply(product, f);
            } else {
                rest.push_back(std::move(f));
            }
        }
        rest.push_back(sum_out(product, v));
        factors = std::move(rest);
    }
    Factor joint = Factor::scalar(1.0);
    for (const auto& f : factors) joint = multiply(joint, f);

    Posterior out;
    out.pmf = reorder(joint, target);
    out.evidence = out.pmf.values.sum();
    if (out.evidence > 0.0) {
        out.pmf.values /= out.evidence;
    } else {
        out.evidence = 0.0;
        out.pmf.values.setZero();
    }
    return out;
}

// -- compiled studies ----------------------------------------------------------------

CompiledStudy::CompiledStudy(const Pscm& base, const Study& study)
    : model_(intervene(base, study.intervention)) {
    study.validate(base);
    data_ = study.data.aligned_to(model_);
    data_.compact();
    total_ = data_.total();
    const std::size_t n_rows = data_.rows.size();

    std::vector<std::size_t> column_of(model_.size(), 0);
    for (std::size_t i = 0; i < data_.columns.size(); ++i) column_of[data_.columns[i]] = i;

    // Group exogenous variables that share a child.
    std::vector<std::size_t> group(model_.size());
    std::iota(group.begin(), group.end(), 0);
    auto find = [&](std::size_t x) {
        while (group[x] != x) x = group[x] = group[group[x]];
        return x;
    };
    for (VarIndex v : model_.endogenous()) {
        std::optional<VarIndex> first;
        for (VarIndex in : model_.equation(v).inputs) {
            if (!model_.variable(in).is_exogenous()) continue;
            if (!first) {
                first = in;
            } else {
                auto a = find(*first);
                auto b = find(in);
                if (a != b) group[std::max(a, b)] = std::min(a, b);
            }
        }
    }
    std::map<std::size_t, std::size_t> block_of_root;
    for (VarIndex u : model_.exogenous()) {
        auto [it, inserted] = block_of_root.emplace(find(u), blocks_.size());
        if (inserted) blocks_.emplace_back();
        blocks_[it->second].exogenous.push_back(u);
        blocks_[it->second].cards.push_back(model_.cardinality(u));
    }
    std::vector<VarIndex> deterministic;
    for (VarIndex v : model_.endogenous_order()) {
        const auto& in = model_.equation(v).inputs;
        auto exo = std::find_if(in.begin(), in.end(), [&](VarIndex p) { return model_.variable(p).is_exogenous(); });
        if (exo == in.end()) {
            deterministic.push_back(v);
        } else {
            blocks_[block_of_root.at(find(*exo))].children.push_back(v);
        }
    }

    auto evaluate = [&](VarIndex v, const Record& r, const std::vector<int>& exo_state) {
        const auto& se = model_.equation(v);
        std::size_t idx = 0;
        for (VarIndex in : se.inputs) {
            const int s = model_.variable(in).is_exogenous() ? exo_state[in] : r.values[column_of[in]];
            idx = idx * static_cast<std::size_t>(model_.cardinality(in)) + static_cast<std::size_t>(s);
        }
        return se.table[idx];
    };

    std::vector<int> exo_state(model_.size(), 0);
    deterministic_ok_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_rows));
    counts_.resize(static_cast<Eigen::Index>(n_rows));
    for (std::size_t r = 0; r < n_rows; ++r) {
        counts_(static_cast<Eigen::Index>(r)) = static_cast<double>(data_.rows[r].count);
        for (VarIndex v : deterministic) {
            if (evaluate(v, data_.rows[r], exo_state) != data_.rows[r].values[column_of[v]]) {
                deterministic_ok_(static_cast<Eigen::Index>(r)) = 0.0;
            }
        }
    }

    std::vector<int> digits;
    for (auto& b : blocks_) {
        const std::size_t joint = config_count(b.cards);
        if (joint > (std::size_t{1} << 22)) {
            throw ModelError("coupled exogenous block too large (" + std::to_string(joint) + " joint states)");
        }
        std::vector<Eigen::Triplet<double>> ones;
        digits.assign(b.cards.size(), 0);
        for (std::size_t j = 0; j < joint; ++j) {
            decode_config(j, b.cards, digits);
            for (std::size_t i = 0; i < b.exogenous.size(); ++i) exo_state[b.exogenous[i]] = digits[i];
            for (std::size_t r = 0; r < n_rows; ++r) {
                const auto& rec = data_.rows[r];
                const bool ok = std::all_of(b.children.begin(), b.children.end(), [&](VarIndex v) {
                    return evaluate(v, rec, exo_state) == rec.values[column_of[v]];
                });
                if (ok) ones.emplace_back(static_cast<int>(r), static_cast<int>(j), 1.0);
            }
        }
        b.mask.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(joint));
        b.mask.setFromTriplets(ones.begin(), ones.end());
        b.mask.makeCompressed();
    }
}

Eigen::VectorXd CompiledStudy::block_prior(std::size_t block, const ExoParams& theta) const {
    const auto& b = blocks_[block];
    Eigen::VectorXd prior = Eigen::VectorXd::Ones(1);
    for (VarIndex u : b.exogenous) {
        const auto& p = theta.pmf(u);
        Eigen::VectorXd next(prior.size() * p.size());
        for (Eigen::Index i = 0; i < prior.size(); ++i) next.segment(i * p.size(), p.size()) = prior(i) * p;
        prior = std::move(next);
    }
    return prior;
}

Eigen::VectorXd CompiledStudy::record_probabilities(const ExoParams& theta) const {
    Eigen::VectorXd p = deterministic_ok_;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        if (blocks_[b].children.empty()) continue;
        p.array() *= (blocks_[b].mask * block_prior(b, theta)).array();
    }
    return p;
}

double CompiledStudy::record_term(std::size_t r, double probability) const {
    if (probability < probability_floor) return -std::numeric_limits<double>::infinity();
    return counts_(static_cast<Eigen::Index>(r)) * std::log(probability);
}

void CompiledStudy::accumulate(const ExoParams& theta, ExactSum& loglik, std::vector<Eigen::VectorXd>& counts) const {
    const auto n_rows = static_cast<Eigen::Index>(data_.rows.size());
    std::vector<Eigen::VectorXd> priors;
    std::vector<Eigen::VectorXd> block_p;
    Eigen::VectorXd p = deterministic_ok_;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        priors.push_back(block_prior(b, theta));
        if (blocks_[b].children.empty()) {
            block_p.emplace_back();
        } else {
            block_p.push_back(blocks_[b].mask * priors.back());
            p.array() *= block_p.back().array();
        }
    }
    for (Eigen::Index r = 0; r < n_rows; ++r) {
        if (p(r) < probability_floor) {
            std::string rec;
            for (std::size_t i = 0; i < data_.columns.size(); ++i) {
                rec += (i ? ", " : "") + model_.variable(data_.columns[i]).id + "=" +
                       std::to_string(data_.rows[static_cast<std::size_t>(r)].values[i]);
            }
            throw ZeroProbabilityError("record (" + rec + ") has zero probability under the current parameters");
        }
        loglik.add(record_term(static_cast<std::size_t>(r), p(r)));
    }

    std::vector<int> digits;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto& blk = blocks_[b];
        Eigen::VectorXd joint;
        if (blk.children.empty()) {
            joint = static_cast<double>(total_) * priors[b];
        } else {
            const Eigen::VectorXd weights = counts_.cwiseQuotient(block_p[b]);
            joint = priors[b].cwiseProduct(blk.mask.transpose() * weights);
        }
        if (blk.exogenous.size() == 1) {
            counts[blk.exogenous[0]] = std::move(joint);
            continue;
        }
        for (std::size_t i = 0; i < blk.exogenous.size(); ++i) {
            counts[blk.exogenous[i]] = Eigen::VectorXd::Zero(blk.cards[i]);
        }
        digits.assign(blk.cards.size(), 0);
        for (Eigen::Index j = 0; j < joint.size(); ++j) {
            decode_config(static_cast<std::size_t>(j), blk.cards, digits);
            for (std::size_t i = 0; i < digits.size(); ++i) counts[blk.exogenous[i]](digits[i]) += joint(j);
        }
    }
}

StudySet::StudySet(const Pscm& base, const std::vector<Study>& studies) : base_(base) {
    if (studies.empty()) throw ModelError("no studies given");
    studies_.reserve(studies.size());
    for (const auto& s : studies) {
        studies_.emplace_back(base, s);
        total_ += studies_.back().total();
    }
}

std::vector<double> StudySet::study_log_likelihoods(const ExoParams& theta) const {
    std::vector<double> out;
    for (const auto& s : studies_) {
        const Eigen::VectorXd p = s.record_probabilities(theta);
        ExactSum sum;
        for (std::size_t r = 0; r < s.size(); ++r) sum.add(s.record_term(r, p(static_cast<Eigen::Index>(r))));
        out.push_back(sum.value());
    }
    return out;
}

double StudySet::log_likelihood(const ExoParams& theta) const {
    ExactSum total;
    for (const auto& s : studies_) {
        const Eigen::VectorXd p = s.record_probabilities(theta);
        ExactSum sum;
        for (std::size_t r = 0; r < s.size(); ++r) sum.add(s.record_term(r, p(static_cast<Eigen::Index>(r))));
        total.add(sum);
    }
    return total.value();
}

StudySet::Expectation StudySet::expectation(const ExoParams& theta) const {
    ExactSum loglik;
    std::vector<std::vector<Eigen::VectorXd>> per_study(studies_.size(), std::vector<Eigen::VectorXd>(base_.size()));
    for (std::size_t k = 0; k < studies_.size(); ++k) studies_[k].accumulate(theta, loglik, per_study[k]);

    Expectation out;
    out.loglik = loglik.value();
    out.counts.resize(base_.size());
    if (studies_.size() == 1) {
        out.counts = std::move(per_study[0]);
        return out;
    }
    // Pooled counts: the per-study terms of each state are added in sorted
    // order, so the result does not depend on the order of the studies.
    std::vector<double> terms(studies_.size());
    for (VarIndex u : base_.exogenous()) {
        auto& c = out.counts[u];
        c.resize(base_.cardinality(u));
        for (Eigen::Index s = 0; s < c.size(); ++s) {
            for (std::size_t k = 0; k < studies_.size(); ++k) terms[k] = per_study[k][u](s);
            std::sort(terms.begin(), terms.end());
            double sum = 0.0;
            for (double t : terms) sum += t;
            c(s) = sum;
        }
    }
    return out;
}

double log_likelihood(const ExoParams& theta, const std::vector<Study>& studies, const Pscm& base) {
    return StudySet(base, studies).log_likelihood(theta);
}

double log_likelihood_concatenated(const ExoParams& theta, const std::vector<Study>& studies, const Pscm& base) {
    // Appended dataset: each row remembers which clone model scores it.
    struct Row {
        std::size_t model;
        std::size_t record;
    };
    std::vector<CompiledStudy> models;
    std::vector<Row> appended;
    for (std::size_t k = 0; k < studies.size(); ++k) {
        models.emplace_back(base, studies[k]);
        for (std::size_t r = 0; r < models.back().size(); ++r) appended.push_back({k, r});
    }
    std::vector<Eigen::VectorXd> probabilities;
    for (const auto& m : models) probabilities.push_back(m.record_probabilities(theta));

    ExactSum sum;
    for (const auto& row : appended) {
        sum.add(models[row.model].record_term(row.record,
                                              probabilities[row.model](static_cast<Eigen::Index>(row.record))));
    }
    return sum.value();
}

ExoPosterior exo_posterior(const Pscm& model, const ExoParams& theta, std::span<const int> record) {
    Study single;
    single.data.columns = model.endogenous();
    single.data.rows.push_back(Record{std::vector<int>(record.begin(), record.end()), 1});
    const CompiledStudy compiled(model, single);

    ExoPosterior out;
    out.marginals.resize(model.size());
    double probability = compiled.record_probabilities(theta)(0);
    out.record_probability = probability;
    std::vector<int> digits;
    for (std::size_t b = 0; b < compiled.blocks().size(); ++b) {
        const auto& blk = compiled.blocks()[b];
        const Eigen::VectorXd prior = compiled.block_prior(b, theta);
        Eigen::VectorXd joint = prior;
        if (!blk.children.empty()) joint = prior.cwiseProduct(Eigen::VectorXd(blk.mask.row(0).transpose()));
        const double z = joint.sum();
        if (z > 0.0 && probability > 0.0) joint /= z;
        for (std::size_t i = 0; i < blk.exogenous.size(); ++i) {
            out.marginals[blk.exogenous[i]] = Eigen::VectorXd::Zero(blk.cards[i]);
        }
        if (!(probability > 0.0)) continue;
        digits.assign(blk.cards.size(), 0);
        for (Eigen::Index j = 0; j < joint.size(); ++j) {
            decode_config(static_cast<std::size_t>(j), blk.cards, digits);
            for (std::size_t i = 0; i < digits.size(); ++i) out.marginals[blk.exogenous[i]](digits[i]) += joint(j);
        }
    }
    return out;
}

}  // namespace scmfuse
