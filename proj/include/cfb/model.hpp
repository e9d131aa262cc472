#ifndef CFB_MODEL_HPP
#define CFB_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfb/factor.hpp"

namespace cfb {

enum class Kind { exogenous, endogenous };

struct Variable {
    std::string name;
    int cardinality = 0;
    Kind kind = Kind::endogenous;
};

struct CausalGraph {
    int n = 0;                                  // node count, ids 0..n-1
    std::vector<std::pair<VarId, VarId>> arcs;  // (parent, child)
};

/// Deterministic mechanism for one endogenous variable. `table` maps
/// each joint parent configuration (row-major in parent_order, last
/// parent fastest) to a child state.
struct StructuralEquation {
    VarId child = -1;
    std::vector<VarId> parents;
    std::vector<int> table;
};

/// Causal DAG plus one structural equation per endogenous variable.
/// `exo_condition` records study-index conditioning of exogenous
/// chances (the coarsening-variable mechanism); it is deliberately kept
/// out of the arc set so that exogenous variables remain graph roots.
struct Pscm {
    std::vector<Variable> vars;
    std::vector<std::optional<StructuralEquation>> equations; // indexed by VarId
    std::map<VarId, VarId> exo_condition; // exogenous var -> observed endogenous index var

    int card(VarId v) const { return vars[static_cast<std::size_t>(v)].cardinality; }
    Kind kind(VarId v) const { return vars[static_cast<std::size_t>(v)].kind; }
    const std::string& name(VarId v) const { return vars[static_cast<std::size_t>(v)].name; }
    VarId find(const std::string& name) const; // -1 if absent

    std::vector<VarId> exogenous() const;
    std::vector<VarId> endogenous() const;
    std::vector<VarId> parents_of(VarId v) const;    // SE parents; empty for exogenous
    std::vector<VarId> endo_parents_of(VarId v) const;
    std::vector<VarId> exo_parents_of(VarId v) const;
    std::vector<std::pair<VarId, VarId>> arcs() const;

    /// Endogenous-then-exogenous-respecting topological order over all
    /// variables (exogenous first).
    std::vector<VarId> topological_order() const;

    /// Applies SEs in topological order; exo_state maps each exogenous
    /// variable to a state. Returns the unique endogenous joint state.
    std::map<VarId, int> simulate(const std::map<VarId, int>& exo_state) const;

    int se_child_state(VarId v, const std::vector<int>& parent_states) const;
};

/// Conditional exogenous PMF. `rows` has one PMF per conditioning state
/// (a single row when the variable is unconditioned).
struct ExoPmf {
    std::vector<std::vector<double>> rows;
};

struct Fscm {
    Pscm model;
    std::map<VarId, ExoPmf> exo_pmfs;
};

struct Violation {
    std::string kind; // "cycle", "exogenous_not_root", ...
    std::string detail;
};

using ValidationReport = std::vector<Violation>;

/// Diagnoses every violated PSCM invariant; empty report iff valid.
ValidationReport validate_pscm(const Pscm& model);
ValidationReport validate_fscm(const Fscm& model);

/// Exogenous cardinality needed to index every deterministic map from
/// the endogenous parents to the child. Throws on integer overflow.
std::int64_t canonical_cardinality(int child_card, const std::vector<int>& endo_parent_cards);

/// Builds a PSCM with canonical structural equations from an
/// endogenous-only graph. `names`/`cards` describe the endogenous
/// variables of `endo_graph`; `exo_assignment` maps each endogenous
/// index to an exogenous variable name (shared names give shared
/// exogenous parents). Function enumeration order: child-state digits in
/// base |child| over lexicographic parent configurations, least
/// significant digit first.
Pscm build_canonical_pscm(const CausalGraph& endo_graph,
                          const std::vector<std::string>& names,
                          const std::vector<int>& cards,
                          const std::vector<std::string>& exo_assignment);

struct CComponent {
    std::vector<VarId> endo;      // V^(c)
    std::vector<VarId> exo;       // U^(c)
    std::vector<VarId> frontier;  // W^(c)
    std::map<VarId, std::vector<VarId>> predecessors; // W_V per V in endo
};

struct CComponentDecomposition {
    std::vector<CComponent> components;
    std::map<VarId, int> component_of; // variable -> component index
};

CComponentDecomposition c_components(const Pscm& model);

/// Degenerate CPT induced by an SE: 1 where the child state matches the
/// mechanism, 0 elsewhere. Scope order: parents then child.
Factor se_to_cpt(const Pscm& model, VarId child);

/// All factors of the FSCM-as-BN: one degenerate CPT per endogenous
/// variable and one (possibly conditional) PMF factor per exogenous.
std::vector<Factor> fscm_factors(const Fscm& fscm);

} // namespace cfb

#endif
