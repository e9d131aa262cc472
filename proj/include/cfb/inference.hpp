#ifndef CFB_INFERENCE_HPP
#define CFB_INFERENCE_HPP

#include <limits>
#include <map>
#include <vector>

#include "cfb/dataset.hpp"
#include "cfb/factor.hpp"
#include "cfb/model.hpp"

namespace cfb {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Conditionals P(V | W_V) estimated from data frequencies, with W_V
/// taken from the c-component decomposition. Parent configurations with
/// no observations get a uniform conditional and an `unseen` flag.
struct EndogenousBN {
    struct Cpt {
        VarId child = -1;
        std::vector<VarId> given;        // W_V
        Factor table;                    // scope: given..., child
        std::vector<bool> unseen;        // per parent configuration
    };
    std::vector<Cpt> cpts;
};

EndogenousBN endogenous_bn_from_data(const Pscm& model, const Dataset& data);

/// Marginal probability of a (possibly partial) endogenous assignment
/// under the FSCM-as-BN.
double assignment_probability(const Fscm& fscm, const std::map<VarId, int>& assignment);

/// Posterior exogenous PMFs given an endogenous record. zero_evidence
/// is the distinguishable signal for records of probability 0.
struct ExoPosterior {
    bool zero_evidence = false;
    std::map<VarId, std::vector<double>> pmfs;
};

ExoPosterior posterior_exogenous(const Fscm& fscm, const std::map<VarId, int>& record);

/// Sum over records of count * log P(record); -inf if any record has
/// probability zero.
double log_likelihood(const Fscm& fscm, const Dataset& data);

/// Likelihood of a selector-split dataset against a selector-embedded
/// model: the N_{S=0} log P(S=0) mass term plus the per-record complete
/// terms.
double log_likelihood_biased(const Fscm& fscm, VarId selector, const BiasedDataset& data);

/// Global maximum of the log-likelihood over all exogenous chance
/// assignments. For complete data this is the multinomial maximum of
/// the frequency-quantified endogenous BN; with masked records it is
/// the multinomial maximum over the observed coarsening (the reduced
/// single-variable view of the selector construction).
double max_log_likelihood(const Pscm& model, const Dataset& data);

struct LikelihoodReport {
    double ll = kNegInf;
    double ll_star = kNegInf;
    double gap = 0.0;
};

LikelihoodReport likelihood_report(const Fscm& fscm, const Dataset& data);

/// Builds the unified record table for a selector-split dataset: the
/// selected rows with S=1 plus one masked row carrying N_{S=0}.
Dataset biased_to_records(const Pscm& selector_model, VarId selector, const BiasedDataset& data);

} // namespace cfb

#endif
