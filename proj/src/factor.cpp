#include "scmfuse/factor.hpp"

#include <algorithm>

namespace scmfuse {

namespace {

std::vector<std::size_t> strides_for(const std::vector<int>& cards) {
    std::vector<std::size_t> strides(cards.size());
    std::size_t s = 1;
    for (std::size_t i = cards.size(); i-- > 0;) {
        strides[i] = s;
        s *= static_cast<std::size_t>(cards[i]);
    }
    return strides;
}

// Stride of each variable of `target_scope` inside `source` (0 when absent).
std::vector<std::size_t> projected_strides(const Factor& source, const std::vector<VarIndex>& target_scope) {
    const auto strides = strides_for(source.cards);
    std::vector<std::size_t> out(target_scope.size(), 0);
    for (std::size_t i = 0; i < target_scope.size(); ++i) {
        auto it = std::find(source.scope.begin(), source.scope.end(), target_scope[i]);
        if (it != source.scope.end()) out[i] = strides[static_cast<std::size_t>(it - source.scope.begin())];
    }
    return out;
}

}  // namespace

Factor Factor::scalar(double value) {
    Factor f;
    f.values = Eigen::VectorXd::Constant(1, value);
    return f;
}

Factor Factor::from_cpt(const Cpt& cpt, const Pscm& model) {
    Factor f;
    f.scope = cpt.conditioners;
    f.scope.push_back(cpt.child);
    for (VarIndex v : f.scope) f.cards.push_back(model.cardinality(v));
    const auto n_child = cpt.values.rows();
    const auto n_cols = cpt.values.cols();
    f.values.resize(n_child * n_cols);
    for (Eigen::Index c = 0; c < n_cols; ++c) {
        for (Eigen::Index x = 0; x < n_child; ++x) f.values(c * n_child + x) = cpt.values(x, c);
    }
    return f;
}

Factor Factor::from_pmf(VarIndex u, const Eigen::VectorXd& pmf) {
    Factor f;
    f.scope = {u};
    f.cards = {static_cast<int>(pmf.size())};
    f.values = pmf;
    return f;
}

double Factor::operator()(const Assignment& config) const {
    std::vector<int> states;
    for (VarIndex v : scope) states.push_back(config.at(v));
    return values(static_cast<Eigen::Index>(encode_config(states, cards)));
}

bool Factor::contains(VarIndex v) const {
    return std::find(scope.begin(), scope.end(), v) != scope.end();
}

Factor multiply(const Factor& a, const Factor& b) {
    Factor out;
    out.scope = a.scope;
    out.cards = a.cards;
    for (std::size_t i = 0; i < b.scope.size(); ++i) {
        if (!a.contains(b.scope[i])) {
            out.scope.push_back(b.scope[i]);
            out.cards.push_back(b.cards[i]);
        }
    }
    const auto sa = projected_strides(a, out.scope);
    const auto sb = projected_strides(b, out.scope);
    const std::size_t n = config_count(out.cards);
    out.values.resize(static_cast<Eigen::Index>(n));

    std::vector<int> digits(out.scope.size(), 0);
    std::size_t ia = 0;
    std::size_t ib = 0;
    for (std::size_t k = 0; k < n; ++k) {
        out.values(static_cast<Eigen::Index>(k)) =
            a.values(static_cast<Eigen::Index>(ia)) * b.values(static_cast<Eigen::Index>(ib));
        for (std::size_t d = digits.size(); d-- > 0;) {
            if (++digits[d] < out.cards[d]) {
                ia += sa[d];
                ib += sb[d];
                break;
            }
            digits[d] = 0;
            ia -= sa[d] * static_cast<std::size_t>(out.cards[d] - 1);
            ib -= sb[d] * static_cast<std::size_t>(out.cards[d] - 1);
        }
    }
    return out;
}

Factor sum_out(const Factor& f, VarIndex v) {
    auto it = std::find(f.scope.begin(), f.scope.end(), v);
    if (it == f.scope.end()) return f;
    const auto pos = static_cast<std::size_t>(it - f.scope.begin());
    const auto strides = strides_for(f.cards);
    const std::size_t inner = strides[pos];
    const auto card = static_cast<std::size_t>(f.cards[pos]);
    const std::size_t outer = static_cast<std::size_t>(f.values.size()) / (inner * card);

    Factor out;
    out.scope = f.scope;
    out.cards = f.cards;
    out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(pos));
    out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(pos));
    out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(outer * inner));
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t s = 0; s < card; ++s) {
            const auto src = static_cast<Eigen::Index>((o * card + s) * inner);
            out.values.segment(static_cast<Eigen::Index>(o * inner), static_cast<Eigen::Index>(inner)) +=
                f.values.segment(src, static_cast<Eigen::Index>(inner));
        }
    }
    return out;
}

Factor reduce(const Factor& f, const Assignment& evidence) {
    Factor out;
    std::vector<int> fixed(f.scope.size(), -1);
    for (std::size_t i = 0; i < f.scope.size(); ++i) {
        if (auto it = evidence.find(f.scope[i]); it != evidence.end()) {
            fixed[i] = it->second;
        } else {
            out.scope.push_back(f.scope[i]);
            out.cards.push_back(f.cards[i]);
        }
    }
    if (out.scope.size() == f.scope.size()) return f;
    const std::size_t n = config_count(out.cards);
    out.values.resize(static_cast<Eigen::Index>(n));
    std::vector<int> kept(out.scope.size());
    std::vector<int> full(f.scope.size());
    for (std::size_t k = 0; k < n; ++k) {
        decode_config(k, out.cards, kept);
        for (std::size_t i = 0, j = 0; i < f.scope.size(); ++i) full[i] = fixed[i] >= 0 ? fixed[i] : kept[j++];
        out.values(static_cast<Eigen::Index>(k)) = f.values(static_cast<Eigen::Index>(encode_config(full, f.cards)));
    }
    return out;
}

Factor reorder(const Factor& f, const std::vector<VarIndex>& order) {
    if (order == f.scope) return f;
    Factor out;
    out.scope = order;
    for (VarIndex v : order) {
        auto it = std::find(f.scope.begin(), f.scope.end(), v);
        if (it == f.scope.end()) throw ModelError("reorder: variable not in scope");
        out.cards.push_back(f.cards[static_cast<std::size_t>(it - f.scope.begin())]);
    }
    if (order.size() != f.scope.size()) throw ModelError("reorder: scope size mismatch");
    const auto strides = projected_strides(f, order);
    const std::size_t n = config_count(out.cards);
    out.values.resize(static_cast<Eigen::Index>(n));
    std::vector<int> digits(order.size());
    for (std::size_t k = 0; k < n; ++k) {
        decode_config(k, out.cards, digits);
        std::size_t src = 0;
        for (std::size_t i = 0; i < digits.size(); ++i) src += strides[i] * static_cast<std::size_t>(digits[i]);
        out.values(static_cast<Eigen::Index>(k)) = f.values(static_cast<Eigen::Index>(src));
    }
    return out;
}

}  // namespace scmfuse
