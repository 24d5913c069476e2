#ifndef SCMFUSE_INFERENCE_HPP
#define SCMFUSE_INFERENCE_HPP

#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "scmfuse/data.hpp"
#include "scmfuse/exact_sum.hpp"
#include "scmfuse/factor.hpp"

namespace scmfuse {

/// Raised when a record or evidence has probability zero where a posterior is
/// required.
class ZeroProbabilityError : public ModelError {
public:
    using ModelError::ModelError;
};

/// P(target | evidence). `evidence` is the probability of the evidence; when it
/// is zero the pmf is all zeros and zero_evidence() is true.
struct Posterior {
    Factor pmf;
    double evidence = 0.0;

    bool zero_evidence() const { return !(evidence > 0.0); }
};

/// Exact variable elimination over the SE-induced CPTs and the exogenous PMFs.
/// Variables that are not ancestors of target or evidence are pruned; the
/// rest are eliminated in min-fill order unless `order` is given (it must then
/// list every variable to eliminate). The pmf scope follows `target`.
Posterior query(const Pscm& model, const ExoParams& theta, const std::vector<VarIndex>& target,
                const Assignment& evidence = {}, const std::vector<VarIndex>* order = nullptr);

/// Greedy min-fill elimination order for the given factor scopes.
std::vector<VarIndex> min_fill_order(const std::vector<std::vector<VarIndex>>& scopes,
                                     const std::vector<VarIndex>& to_eliminate,
                                     const std::vector<int>& cards);

struct ExoPosterior {
    double record_probability = 0.0;
    std::vector<Eigen::VectorXd> marginals;  // by variable index; empty for endogenous

    bool zero_probability() const { return !(record_probability > 0.0); }
};

/// Posterior of every exogenous variable given a complete endogenous record
/// (states in model.endogenous() order).
ExoPosterior exo_posterior(const Pscm& model, const ExoParams& theta, std::span<const int> record);

/// Exogenous variables coupled through shared endogenous children. Given a
/// complete record the blocks are independent, so each one carries a 0/1
/// compatibility matrix over its joint exogenous space.
struct ExoBlock {
    std::vector<VarIndex> exogenous;
    std::vector<int> cards;
    std::vector<VarIndex> children;
    Eigen::SparseMatrix<double, Eigen::RowMajor> mask;  // rows: records, cols: joint exogenous configurations
};

/// One study compiled against its (intervened) clone model.
class CompiledStudy {
public:
    CompiledStudy(const Pscm& base, const Study& study);

    const Pscm& model() const { return model_; }
    const Dataset& data() const { return data_; }
    const std::vector<ExoBlock>& blocks() const { return blocks_; }
    std::int64_t total() const { return total_; }
    std::size_t size() const { return data_.rows.size(); }

    /// Kronecker product of the block's exogenous PMFs.
    Eigen::VectorXd block_prior(std::size_t block, const ExoParams& theta) const;
    /// P(record r | theta) for every record, one block product at a time.
    Eigen::VectorXd record_probabilities(const ExoParams& theta) const;
    /// count * log P(record); -inf when the probability is below 1e-300.
    double record_term(std::size_t r, double probability) const;

    /// Adds this study's log-likelihood terms to `loglik` and writes its
    /// expected exogenous counts (by variable index) to `counts`. Throws
    /// ZeroProbabilityError if a record has probability zero.
    void accumulate(const ExoParams& theta, ExactSum& loglik, std::vector<Eigen::VectorXd>& counts) const;

private:
    Pscm model_;
    Dataset data_;
    std::vector<ExoBlock> blocks_;
    Eigen::VectorXd deterministic_ok_;  // 1 where the exogenous-free equations agree
    Eigen::VectorXd counts_;
    std::int64_t total_ = 0;
};

/// Per-study compiled models sharing one exogenous parameter vector.
class StudySet {
public:
    StudySet(const Pscm& base, const std::vector<Study>& studies);

    const Pscm& base() const { return base_; }
    const std::vector<CompiledStudy>& studies() const { return studies_; }
    std::int64_t total() const { return total_; }

    /// Sum over studies of the study log-likelihoods (exactly rounded).
    double log_likelihood(const ExoParams& theta) const;
    std::vector<double> study_log_likelihoods(const ExoParams& theta) const;

    struct Expectation {
        double loglik = 0.0;
        std::vector<Eigen::VectorXd> counts;  // by variable index
    };
    /// E-step at theta: expected exogenous counts pooled over studies and the
    /// log-likelihood at theta.
    Expectation expectation(const ExoParams& theta) const;

private:
    Pscm base_;
    std::vector<CompiledStudy> studies_;
    std::int64_t total_ = 0;
};

/// Sum over studies of count * log P(record | theta, M^(k)); -inf if a
/// positive-count record is impossible.
double log_likelihood(const ExoParams& theta, const std::vector<Study>& studies, const Pscm& base);

/// Same quantity computed the sequential way: the study datasets are appended
/// into one dataset and each record is scored with its own study's model.
double log_likelihood_concatenated(const ExoParams& theta, const std::vector<Study>& studies, const Pscm& base);

}  // namespace scmfuse

#endif  // SCMFUSE_INFERENCE_HPP
