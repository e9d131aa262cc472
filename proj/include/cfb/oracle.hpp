#ifndef CFB_ORACLE_HPP
#define CFB_ORACLE_HPP

#include <cstdint>

#include "cfb/dataset.hpp"
#include "cfb/model.hpp"
#include "cfb/query.hpp"

namespace cfb {

/// Bounds found by direct search over the compatible chance
/// assignments: restarted random local search on the product of
/// simplices, constrained to reproduce the empirical endogenous
/// distribution within `residual_tolerance` (max absolute deviation).
/// Probabilities are computed by exhaustive enumeration of the joint
/// exogenous states, independently of the elimination engine.
struct OracleBounds {
    double lower = 1.0;
    double upper = 0.0;
    double residual_lower = 1.0; // constraint residual at each bound
    double residual_upper = 1.0;
    bool feasible = false;
};

struct OracleConfig {
    int restarts = 40;
    int feasibility_iterations = 4000;
    int search_iterations = 4000;
    double residual_tolerance = 1e-4;
    std::uint64_t seed = 7;
};

OracleBounds brute_force_bounds(const Pscm& model, const Dataset& data, const QuerySpec& spec,
                                const OracleConfig& config = {});

} // namespace cfb

#endif
