#include "scmfuse/model.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

namespace scmfuse {

int Variable::state_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    // Plain integers are accepted for unlabelled variables and as a fallback.
    try {
        std::size_t pos = 0;
        int s = std::stoi(label, &pos);
        if (pos == label.size() && s >= 0 && s < cardinality) return s;
    } catch (const std::exception&) {
    }
    throw ModelError("variable '" + id + "' has no state '" + label + "'");
}

std::string Variable::label_of(int state) const {
    if (state < 0 || state >= cardinality) {
        throw ModelError("state " + std::to_string(state) + " out of range for '" + id + "'");
    }
    if (labels.empty()) return std::to_string(state);
    return labels[static_cast<std::size_t>(state)];
}

std::size_t config_count(std::span<const int> cards) {
    std::size_t n = 1;
    for (int c : cards) {
        if (c <= 0) throw ModelError("non-positive cardinality");
        if (n > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(c)) {
            throw ModelError("configuration space overflows");
        }
        n *= static_cast<std::size_t>(c);
    }
    return n;
}

std::size_t encode_config(std::span<const int> states, std::span<const int> cards) {
    std::size_t index = 0;
    for (std::size_t i = 0; i < cards.size(); ++i) {
        index = index * static_cast<std::size_t>(cards[i]) + static_cast<std::size_t>(states[i]);
    }
    return index;
}

void decode_config(std::size_t index, std::span<const int> cards, std::span<int> states) {
    for (std::size_t i = cards.size(); i-- > 0;) {
        const auto c = static_cast<std::size_t>(cards[i]);
        states[i] = static_cast<int>(index % c);
        index /= c;
    }
}

// -- Dag ---------------------------------------------------------------------

Dag::Dag(std::size_t n_nodes, const std::vector<std::pair<VarIndex, VarIndex>>& arcs)
    : parents_(n_nodes), children_(n_nodes) {
    for (const auto& [from, to] : arcs) {
        if (from >= n_nodes || to >= n_nodes) throw ModelError("arc endpoint out of range");
        if (from == to) throw ModelError("self loop");
        if (std::find(parents_[to].begin(), parents_[to].end(), from) != parents_[to].end()) {
            continue;
        }
        parents_[to].push_back(from);
        children_[from].push_back(to);
    }
    for (auto& p : parents_) std::sort(p.begin(), p.end());
    for (auto& c : children_) std::sort(c.begin(), c.end());

    std::vector<std::size_t> indegree(n_nodes);
    for (std::size_t v = 0; v < n_nodes; ++v) indegree[v] = parents_[v].size();
    std::priority_queue<VarIndex, std::vector<VarIndex>, std::greater<>> ready;
    for (std::size_t v = 0; v < n_nodes; ++v) {
        if (indegree[v] == 0) ready.push(v);
    }
    while (!ready.empty()) {
        VarIndex v = ready.top();
        ready.pop();
        order_.push_back(v);
        for (VarIndex c : children_[v]) {
            if (--indegree[c] == 0) ready.push(c);
        }
    }
    if (order_.size() != n_nodes) throw ModelError("graph is cyclic");
}

std::vector<std::pair<VarIndex, VarIndex>> Dag::arcs() const {
    std::vector<std::pair<VarIndex, VarIndex>> out;
    for (VarIndex v = 0; v < parents_.size(); ++v) {
        for (VarIndex p : parents_[v]) out.emplace_back(p, v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool Dag::has_arc(VarIndex from, VarIndex to) const {
    const auto& p = parents_.at(to);
    return std::binary_search(p.begin(), p.end(), from);
}

// -- equations -----------------------------------------------------------------

bool StructuralEquation::is_constant() const {
    return std::all_of(table.begin(), table.end(), [&](int s) { return s == table.front(); });
}

bool Cpt::is_degenerate() const {
    return (values.array() == 0.0 || values.array() == 1.0).all();
}

// -- Pscm ----------------------------------------------------------------------

Pscm::Pscm(std::vector<Variable> variables, std::vector<StructuralEquation> equations,
           Assignment interventions)
    : variables_(std::move(variables)), interventions_(std::move(interventions)) {
    const std::size_t n = variables_.size();
    std::set<std::string> ids;
    for (VarIndex v = 0; v < n; ++v) {
        const auto& var = variables_[v];
        if (var.id.empty()) throw ModelError("empty variable id");
        if (!ids.insert(var.id).second) throw ModelError("duplicate variable id '" + var.id + "'");
        if (var.cardinality < 1) throw ModelError("variable '" + var.id + "' has cardinality < 1");
        if (!var.labels.empty()) {
            if (var.labels.size() != static_cast<std::size_t>(var.cardinality)) {
                throw ModelError("variable '" + var.id + "' has wrong number of labels");
            }
            std::set<std::string> distinct(var.labels.begin(), var.labels.end());
            if (distinct.size() != var.labels.size()) {
                throw ModelError("variable '" + var.id + "' has repeated labels");
            }
        }
        (var.is_exogenous() ? exogenous_ : endogenous_).push_back(v);
    }

    std::sort(equations.begin(), equations.end(),
              [](const auto& a, const auto& b) { return a.child < b.child; });
    equation_slot_.assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::pair<VarIndex, VarIndex>> arcs;
    for (std::size_t i = 0; i < equations.size(); ++i) {
        const auto& se = equations[i];
        if (se.child >= n) throw ModelError("equation child out of range");
        const auto& child = variables_[se.child];
        if (child.is_exogenous()) throw ModelError("exogenous '" + child.id + "' has an equation");
        if (equation_slot_[se.child] != std::numeric_limits<std::size_t>::max()) {
            throw ModelError("two equations for '" + child.id + "'");
        }
        equation_slot_[se.child] = i;
        std::vector<int> cards;
        std::set<VarIndex> seen;
        for (VarIndex in : se.inputs) {
            if (in >= n) throw ModelError("equation input out of range");
            if (!seen.insert(in).second) throw ModelError("repeated input in equation of '" + child.id + "'");
            cards.push_back(variables_[in].cardinality);
            arcs.emplace_back(in, se.child);
        }
        if (se.table.size() != config_count(cards)) {
            throw ModelError("equation of '" + child.id + "' is not total over its inputs");
        }
        for (int s : se.table) {
            if (s < 0 || s >= child.cardinality) {
                throw ModelError("equation of '" + child.id + "' maps outside its codomain");
            }
        }
    }
    for (VarIndex v : endogenous_) {
        if (equation_slot_[v] == std::numeric_limits<std::size_t>::max()) {
            throw ModelError("endogenous '" + variables_[v].id + "' has no equation");
        }
    }
    equations_ = std::move(equations);
    dag_ = Dag(n, arcs);

    for (const auto& [v, state] : interventions_) {
        if (v >= n || variables_[v].is_exogenous()) throw ModelError("intervention on a non-endogenous variable");
        const auto& se = equations_[equation_slot_[v]];
        if (!se.inputs.empty() || se.table.size() != 1 || se.table[0] != state) {
            throw ModelError("intervened '" + variables_[v].id + "' must have a constant equation");
        }
    }
    for (VarIndex v : endogenous_) {
        if (interventions_.count(v)) continue;
        const auto& in = equations_[equation_slot_[v]].inputs;
        if (std::none_of(in.begin(), in.end(), [&](VarIndex p) { return variables_[p].is_exogenous(); })) {
            throw ModelError("endogenous '" + variables_[v].id + "' has no exogenous parent");
        }
    }
    for (VarIndex v : dag_.topological_order()) {
        if (!variables_[v].is_exogenous()) endo_order_.push_back(v);
    }
}

VarIndex Pscm::index_of(const std::string& id) const {
    if (auto v = find(id)) return *v;
    throw ModelError("unknown variable '" + id + "'");
}

std::optional<VarIndex> Pscm::find(const std::string& id) const {
    for (VarIndex v = 0; v < variables_.size(); ++v) {
        if (variables_[v].id == id) return v;
    }
    return std::nullopt;
}

const StructuralEquation& Pscm::equation(VarIndex v) const {
    if (v >= equation_slot_.size() || equation_slot_[v] == std::numeric_limits<std::size_t>::max()) {
        throw ModelError("no equation for variable index " + std::to_string(v));
    }
    return equations_[equation_slot_[v]];
}

std::vector<std::string> Pscm::non_surjective() const {
    std::vector<std::string> out;
    for (const auto& se : equations_) {
        if (interventions_.count(se.child)) continue;
        std::vector<bool> hit(static_cast<std::size_t>(variables_[se.child].cardinality));
        for (int s : se.table) hit[static_cast<std::size_t>(s)] = true;
        if (std::find(hit.begin(), hit.end(), false) != hit.end()) out.push_back(variables_[se.child].id);
    }
    return out;
}

bool Pscm::operator==(const Pscm& other) const {
    return variables_ == other.variables_ && equations_ == other.equations_ &&
           interventions_ == other.interventions_;
}

// -- ExoParams -----------------------------------------------------------------

ExoParams::ExoParams(const Pscm& model) : pmfs_(model.size()) {
    for (VarIndex u : model.exogenous()) pmfs_[u] = Eigen::VectorXd::Zero(model.cardinality(u));
}

ExoParams ExoParams::uniform(const Pscm& model) {
    ExoParams theta(model);
    for (VarIndex u : model.exogenous()) {
        theta.pmfs_[u].setConstant(1.0 / model.cardinality(u));
    }
    return theta;
}

void ExoParams::validate(const Pscm& model, double tol) const {
    for (VarIndex u : model.exogenous()) {
        const auto& id = model.variable(u).id;
        if (u >= pmfs_.size() || pmfs_[u].size() != model.cardinality(u)) {
            throw ModelError("parameters for '" + id + "' have the wrong length");
        }
        const auto& p = pmfs_[u];
        if (!p.allFinite() || (p.array() < 0.0).any()) {
            throw ModelError("parameters for '" + id + "' are not a probability vector");
        }
        if (std::abs(p.sum() - 1.0) > tol) {
            throw ModelError("parameters for '" + id + "' do not sum to one");
        }
    }
}

bool ExoParams::strictly_positive(const Pscm& model) const {
    for (VarIndex u : model.exogenous()) {
        if ((pmfs_.at(u).array() <= 0.0).any()) return false;
    }
    return true;
}

bool ExoParams::operator==(const ExoParams& other) const {
    if (pmfs_.size() != other.pmfs_.size()) return false;
    for (std::size_t i = 0; i < pmfs_.size(); ++i) {
        if (pmfs_[i].size() != other.pmfs_[i].size()) return false;
        if (pmfs_[i] != other.pmfs_[i]) return false;
    }
    return true;
}

}  // namespace scmfuse
