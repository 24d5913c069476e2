#ifndef SCMFUSE_MODEL_HPP
#define SCMFUSE_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scmfuse {

using VarIndex = std::size_t;

/// Variable assignment keyed by variable index (evidence, interventions).
using Assignment = std::map<VarIndex, int>;

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class VarKind { endogenous, exogenous };

struct Variable {
    std::string id;
    VarKind kind = VarKind::endogenous;
    int cardinality = 2;
    std::vector<std::string> labels;

    bool is_exogenous() const { return kind == VarKind::exogenous; }
    int state_of(const std::string& label) const;
    std::string label_of(int state) const;

    bool operator==(const Variable&) const = default;
};

// Mixed-radix helpers. The first variable of a scope is the most significant
// digit; every flat table in the library uses this convention.
std::size_t config_count(std::span<const int> cards);
std::size_t encode_config(std::span<const int> states, std::span<const int> cards);
void decode_config(std::size_t index, std::span<const int> cards, std::span<int> states);

class Dag {
public:
    Dag() = default;
    Dag(std::size_t n_nodes, const std::vector<std::pair<VarIndex, VarIndex>>& arcs);

    std::size_t size() const { return parents_.size(); }
    const std::vector<VarIndex>& parents(VarIndex v) const { return parents_[v]; }
    const std::vector<VarIndex>& children(VarIndex v) const { return children_[v]; }
    std::vector<std::pair<VarIndex, VarIndex>> arcs() const;

    /// Kahn order, smallest index first among ready nodes. Throws on cycles.
    const std::vector<VarIndex>& topological_order() const { return order_; }
    bool has_arc(VarIndex from, VarIndex to) const;

    bool operator==(const Dag& other) const { return parents_ == other.parents_; }

private:
    std::vector<std::vector<VarIndex>> parents_;
    std::vector<std::vector<VarIndex>> children_;
    std::vector<VarIndex> order_;
};

/// f_child: Omega(inputs) -> Omega(child) stored as a flat table in input order.
struct StructuralEquation {
    VarIndex child = 0;
    std::vector<VarIndex> inputs;
    std::vector<int> table;

    bool is_constant() const;
    bool operator==(const StructuralEquation&) const = default;
};

/// values(child_state, conditioner_config).
struct Cpt {
    VarIndex child = 0;
    std::vector<VarIndex> conditioners;
    Eigen::MatrixXd values;

    bool is_degenerate() const;
};

class Pscm {
public:
    Pscm() = default;

    /// Validates acyclicity, equation totality, exogenous roots and the
    /// intervention invariants. Arcs are derived from the equation inputs.
    Pscm(std::vector<Variable> variables, std::vector<StructuralEquation> equations,
         Assignment interventions = {});

    const std::vector<Variable>& variables() const { return variables_; }
    const Variable& variable(VarIndex v) const { return variables_.at(v); }
    std::size_t size() const { return variables_.size(); }
    int cardinality(VarIndex v) const { return variables_[v].cardinality; }
    VarIndex index_of(const std::string& id) const;
    std::optional<VarIndex> find(const std::string& id) const;

    const std::vector<VarIndex>& endogenous() const { return endogenous_; }
    const std::vector<VarIndex>& exogenous() const { return exogenous_; }
    /// Endogenous variables in topological order.
    const std::vector<VarIndex>& endogenous_order() const { return endo_order_; }

    const Dag& dag() const { return dag_; }
    const StructuralEquation& equation(VarIndex v) const;
    const std::vector<StructuralEquation>& equations() const { return equations_; }
    const Assignment& interventions() const { return interventions_; }

    /// Ids of endogenous variables whose equation is not onto its codomain.
    std::vector<std::string> non_surjective() const;

    bool operator==(const Pscm& other) const;

private:
    std::vector<Variable> variables_;
    std::vector<StructuralEquation> equations_;  // sorted by child index
    std::vector<std::size_t> equation_slot_;     // variable -> position in equations_
    Assignment interventions_;
    Dag dag_;
    std::vector<VarIndex> endogenous_;
    std::vector<VarIndex> exogenous_;
    std::vector<VarIndex> endo_order_;
};

/// One marginal PMF per exogenous variable, indexed by variable index.
/// Entries for endogenous variables are empty vectors.
class ExoParams {
public:
    ExoParams() = default;
    explicit ExoParams(const Pscm& model);

    static ExoParams uniform(const Pscm& model);

    std::size_t size() const { return pmfs_.size(); }
    Eigen::VectorXd& pmf(VarIndex u) { return pmfs_.at(u); }
    const Eigen::VectorXd& pmf(VarIndex u) const { return pmfs_.at(u); }

    /// Throws ModelError unless every exogenous vector of `model` has the right
    /// length, is nonnegative and sums to one within `tol`.
    void validate(const Pscm& model, double tol = 1e-9) const;
    bool strictly_positive(const Pscm& model) const;

    bool operator==(const ExoParams& other) const;

private:
    std::vector<Eigen::VectorXd> pmfs_;
};

struct CComponentDecomposition {
    std::vector<std::vector<VarIndex>> components;      // endogenous, topological order
    std::vector<std::vector<VarIndex>> exo_components;  // matching exogenous sets
    std::vector<std::vector<VarIndex>> w_sets;          // W^(c), topological order
    std::map<VarIndex, std::vector<VarIndex>> w_of;     // W_V, topological order
    std::map<VarIndex, std::size_t> component_of;
};

// -- construction ----------------------------------------------------------

struct ExoGroup {
    std::string id;
    std::vector<std::string> children;
};

struct CanonicalOptions {
    /// Reject any exogenous variable whose state count would exceed this.
    std::uint64_t max_exo_states = 1024;
    /// Optional reduction: for an exogenous id, the joint response functions to
    /// keep, each given as one function index per child (children order of the
    /// group). Function k of a child maps parent configuration c to digit c of k
    /// written in base |Omega_child| with c = 0 as the most significant digit.
    std::map<std::string, std::vector<std::vector<std::uint64_t>>> keep;
};

/// Number of functions Omega(parents) -> Omega(child); saturates at UINT64_MAX.
std::uint64_t function_count(int child_card, std::uint64_t parent_configs);
/// Value of function `k` at parent configuration `config`.
int response_value(std::uint64_t k, int child_card, std::uint64_t parent_configs,
                   std::uint64_t config);

/// Builds a canonical (conservative) PSCM: every exogenous root enumerates all
/// joint deterministic responses of its endogenous children. `endogenous`
/// lists the endogenous variables, `arcs` the endogenous arcs by id.
Pscm build_canonical_pscm(const std::vector<Variable>& endogenous,
                          const std::vector<std::pair<std::string, std::string>>& arcs,
                          const std::vector<ExoGroup>& exo_groups,
                          const CanonicalOptions& options = {});

// -- surgery ---------------------------------------------------------------

Cpt se_to_cpt(const StructuralEquation& se, const Pscm& model);

CComponentDecomposition c_components(const Pscm& model);

/// Replaces the equations of the assigned endogenous variables by constants.
Pscm intervene(const Pscm& model, const Assignment& assignment);
Pscm intervene(const Pscm& model, const std::map<std::string, std::string>& assignment);

/// Id of the copy of `id` in counterfactual world `world` (world 0 is factual).
std::string world_id(const std::string& id, std::size_t world);

/// Index of the copy of `v` in world `world` of counterfactual_network(model, ...).
/// Exogenous variables and world 0 map to themselves.
VarIndex world_index(const Pscm& model, VarIndex v, std::size_t world);

/// Factual endogenous layer plus one intervened copy per entry of `worlds`,
/// every copy sharing the exogenous variables. Variable indices of the input
/// model are preserved, so its ExoParams apply unchanged. Copies of world w are
/// appended in endogenous order of the input.
Pscm counterfactual_network(const Pscm& model, const std::vector<Assignment>& worlds,
                            bool allow_factual_interventions = false);

Pscm twin_network(const Pscm& model, const Assignment& counterfactual_interventions,
                  bool allow_factual_interventions = false);

}  // namespace scmfuse

#endif  // SCMFUSE_MODEL_HPP
