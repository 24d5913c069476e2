#ifndef SCMFUSE_QUERIES_HPP
#define SCMFUSE_QUERIES_HPP

#include <string>
#include <variant>
#include <vector>

#include "scmfuse/em.hpp"

namespace scmfuse {

/// An event in one intervened world: the copy of the model under
/// `intervention` takes the states in `event`.
struct WorldEvent {
    Assignment intervention;
    Assignment event;
};

/// P(event in every world | factual evidence), all worlds sharing the
/// exogenous variables. Throws ZeroProbabilityError if the evidence is
/// impossible under theta.
double counterfactual_probability(const Pscm& base, const ExoParams& theta, const std::vector<WorldEvent>& worlds,
                                  const Assignment& factual_evidence = {}, const Assignment& factual_event = {});

struct CounterfactualSpec {
    Assignment twin_interventions;
    Assignment factual_evidence;
    Assignment target;          // counterfactual copy
    Assignment factual_target;  // optional part of the event on the factual copy
};

double counterfactual(const Pscm& base, const ExoParams& theta, const CounterfactualSpec& spec);

struct PnsQuery {
    VarIndex cause = 0;
    VarIndex effect = 0;
    Assignment condition;
    // -1 picks the default: positive = second declared state, negative = first.
    int cause_positive = -1;
    int cause_negative = -1;
    int effect_positive = -1;
    int effect_negative = -1;
};

/// P(effect_{cause=pos} = pos, effect_{cause=neg} = neg | condition). Cause and
/// effect must be binary.
double pns(const Pscm& base, const ExoParams& theta, const PnsQuery& q);

struct Query {
    std::string name;
    std::variant<PnsQuery, CounterfactualSpec> body;
};

double evaluate(const Pscm& base, const ExoParams& theta, const Query& q);

struct QueryResult {
    std::string name;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> points;
    /// Informational: every point lies within 1e-3 of the others.
    bool identifiable = false;

    double width() const { return upper - lower; }
};

inline constexpr double identifiable_width = 1e-3;

/// Query envelope over the retained parameter vectors.
QueryResult bounds(const Pscm& base, const ParamSet& params, const Query& q);

/// 1 - L_joint / L_single.
double shrink(const QueryResult& joint, const QueryResult& single);

/// Two-decimal rounding (the --paper-rounding report flag).
double round2(double x);
QueryResult rounded(const QueryResult& r);

}  // namespace scmfuse

#endif  // SCMFUSE_QUERIES_HPP
