#include "scmfuse/queries.hpp"

#include <algorithm>
#include <cmath>

namespace scmfuse {

double counterfactual_probability(const Pscm& base, const ExoParams& theta, const std::vector<WorldEvent>& worlds,
                                  const Assignment& factual_evidence, const Assignment& factual_event) {
    std::vector<Assignment> interventions;
    for (const auto& w : worlds) interventions.push_back(w.intervention);
    const Pscm net = counterfactual_network(base, interventions);

    std::vector<VarIndex> target;
    std::vector<int> states;
    auto add_event = [&](const Assignment& event, std::size_t world) {
        for (const auto& [v, s] : event) {
            if (v >= base.size() || base.variable(v).is_exogenous()) {
                throw ModelError("counterfactual event must refer to endogenous variables");
            }
            if (s < 0 || s >= base.cardinality(v)) throw ModelError("counterfactual event state out of range");
            target.push_back(world_index(base, v, world));
            states.push_back(s);
        }
    };
    add_event(factual_event, 0);
    for (std::size_t w = 0; w < worlds.size(); ++w) add_event(worlds[w].event, w + 1);

    for (const auto& [v, s] : factual_evidence) {
        if (v >= base.size() || base.variable(v).is_exogenous()) {
            throw ModelError("factual evidence must refer to endogenous variables");
        }
    }
    const auto post = query(net, theta, target, factual_evidence);
    if (post.zero_evidence()) throw ZeroProbabilityError("factual evidence has probability zero");
    return post.pmf.values(static_cast<Eigen::Index>(encode_config(states, post.pmf.cards)));
}

double counterfactual(const Pscm& base, const ExoParams& theta, const CounterfactualSpec& spec) {
    return counterfactual_probability(base, theta, {WorldEvent{spec.twin_interventions, spec.target}},
                                      spec.factual_evidence, spec.factual_target);
}

double pns(const Pscm& base, const ExoParams& theta, const PnsQuery& q) {
    for (VarIndex v : {q.cause, q.effect}) {
        if (v >= base.size() || base.variable(v).is_exogenous()) {
            throw ModelError("PNS cause and effect must be endogenous");
        }
        if (base.cardinality(v) != 2) {
            throw ModelError("PNS needs binary cause and effect; '" + base.variable(v).id + "' has " +
                             std::to_string(base.cardinality(v)) + " states");
        }
    }
    if (q.cause == q.effect) throw ModelError("PNS cause and effect must differ");
    auto pick = [](int given, int fallback) { return given >= 0 ? given : fallback; };
    const int xp = pick(q.cause_positive, 1);
    const int xn = pick(q.cause_negative, 0);
    const int yp = pick(q.effect_positive, 1);
    const int yn = pick(q.effect_negative, 0);
    for (int s : {xp, xn, yp, yn}) {
        if (s < 0 || s > 1) throw ModelError("PNS state designation out of range");
    }
    if (xp == xn || yp == yn) throw ModelError("PNS positive and negative states must differ");

    const std::vector<WorldEvent> worlds{
        WorldEvent{{{q.cause, xp}}, {{q.effect, yp}}},
        WorldEvent{{{q.cause, xn}}, {{q.effect, yn}}},
    };
    return counterfactual_probability(base, theta, worlds, q.condition);
}

double evaluate(const Pscm& base, const ExoParams& theta, const Query& q) {
    return std::visit(
        [&](const auto& body) -> double {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, PnsQuery>) {
                return pns(base, theta, body);
            } else {
                return counterfactual(base, theta, body);
            }
        },
        q.body);
}

QueryResult bounds(const Pscm& base, const ParamSet& params, const Query& q) {
    if (params.empty()) {
        throw ModelError("no compatible parameter vectors: the studies look incompatible with the model "
                         "(or every EM run stopped short of the joint maximum); bounds are not available");
    }
    QueryResult out;
    out.name = q.name;
    for (const auto& theta : params.thetas) out.points.push_back(evaluate(base, theta, q));
    const auto [lo, hi] = std::minmax_element(out.points.begin(), out.points.end());
    out.lower = *lo;
    out.upper = *hi;
    out.identifiable = out.width() <= identifiable_width;
    return out;
}

double shrink(const QueryResult& joint, const QueryResult& single) {
    if (!(single.width() > 0.0)) throw ModelError("shrink: the single-study interval has zero length");
    return 1.0 - joint.width() / single.width();
}

double round2(double x) {
    const double r = std::round(x * 100.0) / 100.0;
    return r == 0.0 ? 0.0 : r;
}

QueryResult rounded(const QueryResult& r) {
    QueryResult out = r;
    out.lower = round2(r.lower);
    out.upper = round2(r.upper);
    for (auto& p : out.points) p = round2(p);
    return out;
}

}  // namespace scmfuse
