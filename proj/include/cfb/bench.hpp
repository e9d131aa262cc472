#ifndef CFB_BENCH_HPP
#define CFB_BENCH_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfb/em.hpp"
#include "cfb/fusion.hpp"
#include "cfb/model.hpp"
#include "cfb/rng.hpp"

namespace cfb {

struct Range {
    double lower = 0.0;
    double upper = 0.0;
    double width() const { return upper - lower; }
};

struct BenchConfig {
    int n_models = 5;
    int n_endogenous_min = 5;
    int n_endogenous_max = 17;
    double edge_probability = 0.3;
    int max_exo_card = 64;
    int max_endo_indegree = 3;
    int dataset_size = 1000;
    double selector_band_lo = 0.25;
    double selector_band_hi = 0.75;
    int runs = 20;            // EM restarts per stage
    int max_iterations = 300;
    std::uint64_t seed = 1;
    int threads = 0;          // parallelism across models
};

struct Roles {
    VarId input = -1;
    VarId covariate = -1;
    VarId target = -1;
};

struct ExperimentRecord {
    int model_id = 0;
    int n_endogenous = 0;
    Roles roles;
    double p_s1 = 0.0;
    bool ok = false;
    std::string note;
    // Stage ranges keyed "<ordering><stage>_<variant>", e.g. "A2_global":
    // ordering A = D_IB, +D_O, +D_I; ordering B = D_I, +D_O, +D_IB.
    std::map<std::string, Range> ranges;
    std::map<std::string, double> shrinks; // keyed like the refined stage
    double bias_effect_lower = -1.0;       // -1: undefined
    double bias_effect_upper = -1.0;
};

/// 1 − width(refined)/width(base); throws on zero-width base.
double relative_shrink(const Range& base, const Range& refined);

/// Per-endpoint |biased − unbiased| normalized by the value it takes
/// when the biased range is vacuous ([0,1]); empty on a degenerate
/// normalizer.
std::optional<std::pair<double, double>> normalized_bias_effect(const Range& biased,
                                                                const Range& unbiased);

/// Random PSCM: an Erdős–Rényi DAG over ordered nodes, roots promoted
/// to exogenous variables, Boolean endogenous nodes, and mechanisms
/// drawn without replacement per joint exogenous parent state.
Pscm sample_er_pscm(const BenchConfig& config, Rng& rng);

/// Deterministic role choice; empty when the model has no confounded
/// input with a 2+-arc endogenous path to a leaf.
std::optional<Roles> choose_roles(const Pscm& model);

/// Uniform ground-truth chances on each exogenous simplex.
Fscm sample_ground_truth(const Pscm& model, Rng& rng);

struct SampledStudies {
    StudySpec d_o;   // observational
    StudySpec d_i;   // do(input), balanced
    StudySpec d_ib;  // do(covariate), balanced, selector-masked
    Dataset d_ib_complete; // the pre-selection records, for bias-effect baselines
    double p_s1 = 0.0;
};

SampledStudies sample_datasets(const Fscm& truth, const Roles& roles, const BenchConfig& config,
                               Rng& rng);

std::vector<ExperimentRecord> run_fusion_experiment(const BenchConfig& config);

std::string records_to_csv(const std::vector<ExperimentRecord>& records);
std::string summary_to_json(const std::vector<ExperimentRecord>& records);

} // namespace cfb

#endif
