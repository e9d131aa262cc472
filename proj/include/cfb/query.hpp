#ifndef CFB_QUERY_HPP
#define CFB_QUERY_HPP

#include <map>
#include <optional>
#include <vector>

#include "cfb/em.hpp"
#include "cfb/fusion.hpp"
#include "cfb/model.hpp"

namespace cfb {

enum class QueryKind { pns, pn, ps, general };

/// One parallel world of a counterfactual query, identified by the
/// surgery applied in it (empty map: the factual world).
struct WorldSpec {
    std::map<VarId, int> interventions;
};

/// A literal V=v read in a specific world.
struct WorldTerm {
    int world = 0;
    VarId var = -1;
    int state = 0;
};

/// P(target-conjunction | evidence-conjunction) across the given
/// worlds. The pns/pn/ps kinds are sugar expanded by the make_*
/// builders into the general form.
struct QuerySpec {
    QueryKind kind = QueryKind::general;
    std::vector<WorldSpec> worlds;
    std::vector<WorldTerm> target;
    std::vector<WorldTerm> evidence;
};

QuerySpec make_pns(VarId cause, VarId effect, int cause_true = 1, int cause_false = 0,
                   int effect_true = 1, int effect_false = 0);
QuerySpec make_pn(VarId cause, VarId effect, int cause_true = 1, int cause_false = 0,
                  int effect_true = 1, int effect_false = 0);
QuerySpec make_ps(VarId cause, VarId effect, int cause_true = 1, int cause_false = 0,
                  int effect_true = 1, int effect_false = 0);

/// The multi-world model: world 0 keeps the original endogenous ids,
/// further worlds append fresh copies sharing the exogenous variables.
/// Surgery replaces each intervened mechanism by the constant map.
struct TwinNetwork {
    Pscm model;
    std::vector<std::map<VarId, VarId>> endo_map; // per world: base id -> twin id
};

TwinNetwork build_counterfactual_model(const Pscm& base, const std::vector<WorldSpec>& worlds);

/// Probability of the query under one fully specified FSCM; empty when
/// the conditioning event has probability zero.
std::optional<double> evaluate_query(const Fscm& fscm, const QuerySpec& spec);

struct QueryResult {
    struct PerRun {
        std::size_t run = 0;
        RunStatus status = RunStatus::max_iters;
        bool defined = false;
        double value = 0.0;
    };
    std::vector<PerRun> per_run;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t n_excluded = 0; // non-converged or undefined runs
};

/// Inner approximation of the query range over the compatible set:
/// min/max over the global-maximum runs. Throws if no run qualifies.
QueryResult counterfactual_range(const CompatibleSet& set, const QuerySpec& spec);

/// Same, for a compatible set learned on an auxiliary fused model: each
/// run is first restricted back to the original variables.
QueryResult counterfactual_range(const CompatibleSet& set, const AuxiliaryModel& aux,
                                 const QuerySpec& spec, int chance_study_state = -1);

} // namespace cfb

#endif
