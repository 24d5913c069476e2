#include <algorithm>
#include <numeric>

#include "scmfuse/model.hpp"

namespace scmfuse {

Cpt se_to_cpt(const StructuralEquation& se, const Pscm& model) {
    Cpt cpt;
    cpt.child = se.child;
    cpt.conditioners = se.inputs;
    cpt.values = Eigen::MatrixXd::Zero(model.cardinality(se.child), static_cast<Eigen::Index>(se.table.size()));
    for (std::size_t c = 0; c < se.table.size(); ++c) {
        cpt.values(se.table[c], static_cast<Eigen::Index>(c)) = 1.0;
    }
    return cpt;
}

namespace {

struct UnionFind {
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::size_t> parent;
};

}  // namespace

CComponentDecomposition c_components(const Pscm& model) {
    const auto& dag = model.dag();
    UnionFind uf(model.size());
    for (VarIndex u : model.exogenous()) {
        for (VarIndex c : dag.children(u)) uf.unite(u, c);
    }

    std::vector<std::size_t> position(model.size(), 0);
    const auto& order = model.endogenous_order();
    for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;

    CComponentDecomposition out;
    std::map<std::size_t, std::size_t> root_to_component;
    auto component_for = [&](VarIndex v) {
        auto [it, inserted] = root_to_component.emplace(uf.find(v), out.components.size());
        if (inserted) {
            out.components.emplace_back();
            out.exo_components.emplace_back();
        }
        return it->second;
    };
    for (VarIndex v : order) {
        auto c = component_for(v);
        out.components[c].push_back(v);
        out.component_of[v] = c;
    }
    for (VarIndex u : model.exogenous()) out.exo_components[component_for(u)].push_back(u);

    auto by_position = [&](VarIndex a, VarIndex b) { return position[a] < position[b]; };
    for (const auto& members : out.components) {
        std::vector<VarIndex> w = members;
        for (VarIndex v : members) {
            for (VarIndex p : dag.parents(v)) {
                if (!model.variable(p).is_exogenous()) w.push_back(p);
            }
        }
        std::sort(w.begin(), w.end(), by_position);
        w.erase(std::unique(w.begin(), w.end()), w.end());
        for (VarIndex v : members) {
            std::vector<VarIndex> wv;
            for (VarIndex x : w) {
                if (position[x] < position[v]) wv.push_back(x);
            }
            out.w_of[v] = std::move(wv);
        }
        out.w_sets.push_back(std::move(w));
    }
    return out;
}

Pscm intervene(const Pscm& model, const Assignment& assignment) {
    if (assignment.empty()) return model;
    Assignment merged = model.interventions();
    std::vector<StructuralEquation> equations = model.equations();
    for (const auto& [v, state] : assignment) {
        if (v >= model.size()) throw ModelError("intervention on unknown variable index");
        const auto& var = model.variable(v);
        if (var.is_exogenous()) throw ModelError("cannot intervene on exogenous '" + var.id + "'");
        if (state < 0 || state >= var.cardinality) {
            throw ModelError("intervention state out of range for '" + var.id + "'");
        }
        merged[v] = state;
        for (auto& se : equations) {
            if (se.child == v) {
                se.inputs.clear();
                se.table.assign(1, state);
            }
        }
    }
    return Pscm(model.variables(), std::move(equations), std::move(merged));
}

Pscm intervene(const Pscm& model, const std::map<std::string, std::string>& assignment) {
    Assignment a;
    for (const auto& [id, label] : assignment) {
        VarIndex v = model.index_of(id);
        a[v] = model.variable(v).state_of(label);
    }
    return intervene(model, a);
}

std::string world_id(const std::string& id, std::size_t world) {
    return world == 0 ? id : id + "@" + std::to_string(world);
}

VarIndex world_index(const Pscm& model, VarIndex v, std::size_t world) {
    if (world == 0 || model.variable(v).is_exogenous()) return v;
    const auto& endo = model.endogenous();
    const auto slot = static_cast<std::size_t>(std::find(endo.begin(), endo.end(), v) - endo.begin());
    return model.size() + (world - 1) * endo.size() + slot;
}

Pscm counterfactual_network(const Pscm& model, const std::vector<Assignment>& worlds,
                            bool allow_factual_interventions) {
    if (!model.interventions().empty() && !allow_factual_interventions) {
        throw ModelError("factual copy carries interventions; pass allow_factual_interventions");
    }
    const auto& endo = model.endogenous();
    const std::size_t n = model.size();
    std::vector<std::size_t> slot(n, 0);
    for (std::size_t i = 0; i < endo.size(); ++i) slot[endo[i]] = i;

    auto copy_index = [&](VarIndex v, std::size_t w) -> VarIndex {
        if (w == 0 || model.variable(v).is_exogenous()) return v;
        return n + (w - 1) * endo.size() + slot[v];
    };

    std::vector<Variable> variables = model.variables();
    std::vector<StructuralEquation> equations = model.equations();
    Assignment interventions = model.interventions();
    for (std::size_t w = 1; w <= worlds.size(); ++w) {
        for (VarIndex v : endo) {
            Variable copy = model.variable(v);
            copy.id = world_id(copy.id, w);
            variables.push_back(std::move(copy));
        }
        for (VarIndex v : endo) {
            StructuralEquation se = model.equation(v);
            se.child = copy_index(v, w);
            for (auto& in : se.inputs) in = copy_index(in, w);
            equations.push_back(std::move(se));
        }
        for (const auto& [v, state] : worlds[w - 1]) {
            if (v >= n || model.variable(v).is_exogenous()) {
                throw ModelError("counterfactual intervention must target an endogenous variable");
            }
            if (state < 0 || state >= model.cardinality(v)) throw ModelError("counterfactual state out of range");
            const VarIndex c = copy_index(v, w);
            auto& se = equations[equations.size() - endo.size() + slot[v]];
            se.inputs.clear();
            se.table.assign(1, state);
            interventions[c] = state;
        }
    }
    return Pscm(std::move(variables), std::move(equations), std::move(interventions));
}

Pscm twin_network(const Pscm& model, const Assignment& counterfactual_interventions,
                  bool allow_factual_interventions) {
    return counterfactual_network(model, {counterfactual_interventions}, allow_factual_interventions);
}

}  // namespace scmfuse
