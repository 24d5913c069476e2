#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "scmfuse/model.hpp"

namespace scmfuse {

namespace {

constexpr std::uint64_t saturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > saturated / a) return saturated;
    return a * b;
}

std::uint64_t saturating_pow(std::uint64_t base, std::uint64_t exp) {
    std::uint64_t out = 1;
    for (std::uint64_t i = 0; i < exp; ++i) {
        out = saturating_mul(out, base);
        if (out == saturated) break;
    }
    return out;
}

}  // namespace

std::uint64_t function_count(int child_card, std::uint64_t parent_configs) {
    return saturating_pow(static_cast<std::uint64_t>(child_card), parent_configs);
}

int response_value(std::uint64_t k, int child_card, std::uint64_t parent_configs,
                   std::uint64_t config) {
    const auto base = static_cast<std::uint64_t>(child_card);
    for (std::uint64_t i = config + 1; i < parent_configs; ++i) k /= base;
    return static_cast<int>(k % base);
}

Pscm build_canonical_pscm(const std::vector<Variable>& endogenous,
                          const std::vector<std::pair<std::string, std::string>>& arcs,
                          const std::vector<ExoGroup>& exo_groups,
                          const CanonicalOptions& options) {
    std::map<std::string, VarIndex> index;
    std::vector<Variable> variables;
    for (const auto& v : endogenous) {
        if (v.is_exogenous()) throw ModelError("'" + v.id + "' listed as endogenous is exogenous");
        if (!index.emplace(v.id, variables.size()).second) throw ModelError("duplicate id '" + v.id + "'");
        variables.push_back(v);
    }
    const std::size_t n_endo = variables.size();

    std::vector<std::vector<VarIndex>> endo_parents(n_endo);
    for (const auto& [from, to] : arcs) {
        auto f = index.find(from);
        auto t = index.find(to);
        if (f == index.end() || t == index.end()) {
            throw ModelError("arc " + from + " -> " + to + " references an unknown endogenous variable");
        }
        endo_parents[t->second].push_back(f->second);
    }
    for (auto& p : endo_parents) {
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
    }

    std::vector<int> owner(n_endo, -1);
    for (std::size_t g = 0; g < exo_groups.size(); ++g) {
        const auto& group = exo_groups[g];
        if (group.children.empty()) throw ModelError("exogenous '" + group.id + "' has no children");
        if (index.count(group.id)) throw ModelError("duplicate id '" + group.id + "'");
        for (const auto& c : group.children) {
            auto it = index.find(c);
            if (it == index.end() || it->second >= n_endo) throw ModelError("unknown child '" + c + "' of '" + group.id + "'");
            if (owner[it->second] != -1) throw ModelError("'" + c + "' has more than one exogenous parent");
            owner[it->second] = static_cast<int>(g);
        }
    }
    for (std::size_t v = 0; v < n_endo; ++v) {
        if (owner[v] == -1) throw ModelError("'" + variables[v].id + "' has no exogenous parent");
    }

    std::vector<std::uint64_t> parent_configs(n_endo);
    for (std::size_t v = 0; v < n_endo; ++v) {
        std::uint64_t n = 1;
        for (VarIndex p : endo_parents[v]) n = saturating_mul(n, static_cast<std::uint64_t>(variables[p].cardinality));
        parent_configs[v] = n;
    }

    // Joint responses per group: one function index per child.
    std::vector<std::vector<std::vector<std::uint64_t>>> responses(exo_groups.size());
    for (std::size_t g = 0; g < exo_groups.size(); ++g) {
        const auto& group = exo_groups[g];
        std::vector<std::uint64_t> per_child;
        std::uint64_t total = 1;
        for (const auto& c : group.children) {
            VarIndex v = index.at(c);
            per_child.push_back(function_count(variables[v].cardinality, parent_configs[v]));
            total = saturating_mul(total, per_child.back());
        }
        if (auto it = options.keep.find(group.id); it != options.keep.end()) {
            std::set<std::vector<std::uint64_t>> distinct;
            for (const auto& r : it->second) {
                if (r.size() != per_child.size()) throw ModelError("kept response for '" + group.id + "' has wrong arity");
                for (std::size_t i = 0; i < r.size(); ++i) {
                    if (r[i] >= per_child[i]) throw ModelError("kept response for '" + group.id + "' out of range");
                }
                if (!distinct.insert(r).second) throw ModelError("kept responses for '" + group.id + "' repeat");
            }
            responses[g] = it->second;
        } else {
            if (total > options.max_exo_states) {
                throw ModelError("exogenous '" + group.id + "' would need " +
                                 (total == saturated ? std::string("more than 2^64") : std::to_string(total)) +
                                 " states, above the cap of " + std::to_string(options.max_exo_states));
            }
            std::vector<std::uint64_t> r(per_child.size(), 0);
            for (std::uint64_t k = 0; k < total; ++k) {
                std::uint64_t rest = k;
                for (std::size_t i = per_child.size(); i-- > 0;) {
                    r[i] = rest % per_child[i];
                    rest /= per_child[i];
                }
                responses[g].push_back(r);
            }
        }
        if (responses[g].empty()) throw ModelError("exogenous '" + group.id + "' keeps no responses");
        if (responses[g].size() > options.max_exo_states) {
            throw ModelError("exogenous '" + group.id + "' exceeds the state cap");
        }
        Variable u;
        u.id = group.id;
        u.kind = VarKind::exogenous;
        u.cardinality = static_cast<int>(responses[g].size());
        index.emplace(u.id, variables.size());
        variables.push_back(std::move(u));
    }

    std::vector<StructuralEquation> equations;
    for (std::size_t v = 0; v < n_endo; ++v) {
        const auto g = static_cast<std::size_t>(owner[v]);
        const auto& group = exo_groups[g];
        const auto slot = static_cast<std::size_t>(
            std::find(group.children.begin(), group.children.end(), variables[v].id) - group.children.begin());
        const VarIndex u = index.at(group.id);

        StructuralEquation se;
        se.child = v;
        se.inputs = endo_parents[v];
        se.inputs.push_back(u);
        const std::uint64_t pa = parent_configs[v];
        const auto n_u = responses[g].size();
        se.table.resize(static_cast<std::size_t>(pa) * n_u);
        for (std::uint64_t c = 0; c < pa; ++c) {
            for (std::size_t s = 0; s < n_u; ++s) {
                se.table[static_cast<std::size_t>(c) * n_u + s] =
                    response_value(responses[g][s][slot], variables[v].cardinality, pa, c);
            }
        }
        equations.push_back(std::move(se));
    }
    return Pscm(std::move(variables), std::move(equations));
}

}  // namespace scmfuse
