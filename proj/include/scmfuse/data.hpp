#ifndef SCMFUSE_DATA_HPP
#define SCMFUSE_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "scmfuse/model.hpp"

namespace scmfuse {

struct Record {
    std::vector<int> values;  // one state per dataset column
    std::int64_t count = 1;

    bool operator==(const Record&) const = default;
};

/// Complete endogenous records with multiplicities.
struct Dataset {
    std::vector<VarIndex> columns;
    std::vector<Record> rows;

    std::int64_t total() const;

    /// Merges duplicate configurations; rows end up sorted by configuration.
    void compact();

    /// Reorders columns to `model.endogenous()` order. Throws unless the
    /// columns are exactly the endogenous variables of `model`.
    Dataset aligned_to(const Pscm& model) const;

    /// Throws ModelError on out-of-range states or non-positive counts.
    void validate(const Pscm& model) const;
};

struct Study {
    std::string name;
    Dataset data;
    Assignment intervention;

    /// Checks the dataset and that every record agrees with the intervention.
    void validate(const Pscm& model) const;
};

/// Empirical BN over the c-component factorisation, CPTs estimated by counts.
struct EmpiricalModel {
    std::vector<Cpt> cpts;  // one per endogenous variable, topological order
    /// (variable, conditioner configuration) pairs with zero count.
    std::vector<std::pair<VarIndex, std::size_t>> absent_columns;
    /// Product of the CPTs over Omega(V) in model.endogenous() order. Left empty
    /// when the joint space exceeds the materialisation cap.
    Eigen::VectorXd joint;

    /// Product of the CPTs at a complete configuration given in
    /// model.endogenous() order. Zero if a needed column is absent.
    double probability(std::span<const int> config) const;

    std::vector<VarIndex> endogenous;  // column order of `config`
    std::vector<int> cards;
    std::vector<std::size_t> column_of;  // variable index -> position in `endogenous`
};

EmpiricalModel empirical_model(const Pscm& model, const Dataset& data,
                               std::size_t joint_cap = std::size_t{1} << 20);

/// sum_v N(v) log(N(v)/N): the saturated multinomial maximum.
double multinomial_bound(const Dataset& data);

/// sum_v N(v) log P~(v) under the empirical BN of `model`; equals the
/// multinomial bound when the factorisation is saturated.
double empirical_bound(const Pscm& model, const Dataset& data);

}  // namespace scmfuse

#endif  // SCMFUSE_DATA_HPP
