#ifndef CFB_EM_HPP
#define CFB_EM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cfb/dataset.hpp"
#include "cfb/model.hpp"

namespace cfb {

using ExoChances = std::map<VarId, ExoPmf>;

enum class RunStatus { global_max, saddle_suspect, max_iters, incompatible_suspect };

struct EmccConfig {
    int runs = 300;
    int max_iterations = 500;
    double ll_tolerance = 1e-6;       // log-space absolute stopping gain
    // |ll - ll*| <= max(ll_tolerance, rel*|ll*|) classifies a run as a
    // global maximum, and a run stops as soon as it enters this band.
    // The band is the sampling resolution of the compatible set: larger
    // values keep near-compatible points and widen the recovered
    // ranges, smaller values collapse them toward exact compatibility.
    double status_rel_tolerance = 3e-4;
    std::uint64_t seed = 0;
    int threads = 0;                  // 0 = hardware concurrency
    // Concentration of the symmetric Dirichlet initialization. Values
    // well below 1 start the runs near the faces of each simplex, which
    // spreads the converged endpoints toward the extremes of the
    // compatible set and widens the recovered query ranges; 1 is the
    // uniform law.
    double init_alpha = 0.02;
    // Classify runs against the best likelihood found across runs
    // instead of the theoretical maximum. For models whose feasible set
    // cannot reproduce the empirical frequencies exactly (finite
    // samples from restricted mechanisms), the theoretical maximum is
    // unattainable and every run would be rejected otherwise.
    bool classify_against_best = false;
    std::optional<ExoChances> init;   // custom initialization (else uniform on each simplex)
};

struct EmRunResult {
    ExoChances chances;
    int iterations = 0;
    std::vector<double> ll_trace;
    RunStatus status = RunStatus::max_iters;
};

struct CompatibleSet {
    Pscm model;
    std::vector<EmRunResult> results;
    double ll_star = 0.0;
    double status_tolerance = 0.0;

    bool any_global_max() const;
    Fscm fscm_of(std::size_t run) const;
};

/// Symmetric-Dirichlet draw on each exogenous simplex (strictly
/// positive entries; alpha = 1 is uniform).
ExoChances initialize_exogenous(const Pscm& model, std::uint64_t seed, double alpha = 1.0);

/// One E+M sweep over (possibly masked) weighted records. Records of
/// probability zero under `theta` are skipped and flagged.
struct EmStep {
    ExoChances theta_next;
    double ll = 0.0;     // log-likelihood at the input theta
    bool skipped_records = false;
};

EmStep em_step(const Pscm& model, const ExoChances& theta, const Dataset& data);

/// Unbiased step of the EM scheme: P_{t+1}(U) = |D|^-1 sum_v P_t(U|v).
ExoChances em_step_unbiased(const Pscm& model, const ExoChances& theta, const Dataset& data);

/// Biased step: the masked mass enters as N_{S=0} P_t(U|S=0).
ExoChances em_step_biased(const Pscm& model, VarId selector, const ExoChances& theta,
                          const BiasedDataset& data);

/// Iterates until the log-likelihood gain drops below tolerance or the
/// iteration cap; classifies the endpoint against ll_star.
EmRunResult run_em(const Pscm& model, const Dataset& data, const ExoChances& init,
                   const EmccConfig& config, double ll_star);

/// r independent runs with seeds split from config.seed; deterministic
/// for a fixed config regardless of thread count.
CompatibleSet emcc(const Pscm& model, const Dataset& data, const EmccConfig& config);

} // namespace cfb

#endif
