#ifndef SCMFUSE_FACTOR_HPP
#define SCMFUSE_FACTOR_HPP

#include <vector>

#include "scmfuse/model.hpp"

namespace scmfuse {

/// Nonnegative potential over a scope, flat in mixed-radix scope order.
struct Factor {
    std::vector<VarIndex> scope;
    std::vector<int> cards;
    Eigen::VectorXd values;

    static Factor scalar(double value);
    static Factor from_cpt(const Cpt& cpt, const Pscm& model);
    static Factor from_pmf(VarIndex u, const Eigen::VectorXd& pmf);

    double operator()(const Assignment& config) const;
    bool contains(VarIndex v) const;
};

Factor multiply(const Factor& a, const Factor& b);
Factor sum_out(const Factor& f, VarIndex v);
/// Fixes the evidence variables present in the scope and drops them from it.
Factor reduce(const Factor& f, const Assignment& evidence);
/// Same potential with the scope permuted to `order` (a permutation of scope).
Factor reorder(const Factor& f, const std::vector<VarIndex>& order);

}  // namespace scmfuse

#endif  // SCMFUSE_FACTOR_HPP
