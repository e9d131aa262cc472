#ifndef CFB_FUSION_HPP
#define CFB_FUSION_HPP

#include <optional>
#include <string>
#include <vector>

#include "cfb/dataset.hpp"
#include "cfb/model.hpp"

namespace cfb {

/// Deterministic selection mechanism over a subset of the endogenous
/// variables: g maps each joint scope configuration (row-major, last
/// variable fastest) to kept (1) or masked (0).
struct Selector {
    std::vector<VarId> scope;
    std::vector<int> table;

    void validate(const Pscm& model) const;
};

/// One study to be fused: its records, which variables it intervened on
/// (empty for observational), its selector if the sample is biased, and
/// the exogenous variables whose chances are specific to this study.
struct StudySpec {
    Dataset dataset;
    std::vector<VarId> intervened_vars;
    std::optional<Selector> selector;
    double n_unselected = 0.0;          // masked record count for a biased study
    std::vector<VarId> local_chance_vars;
};

struct MergedDataset {
    Dataset data;                        // columns: V..., W, optional S
    VarId w_var = -1;                    // id W will take in the auxiliary model
    VarId s_var = -1;                    // id of S, -1 when no study is biased
    std::vector<std::string> w_labels;   // state names of W
    int w_null_state = -1;               // the no-intervention state
    std::vector<int> w_study;            // originating study index per W state (-1: shared)
    std::vector<std::map<VarId, int>> w_intervention; // surgical assignment per W state
    bool has_selector = false;
};

/// Splits a complete dataset by a selector: surviving records verbatim,
/// masked ones collapsed into a count.
BiasedDataset partition_by_selector(const Dataset& data, const Pscm& model, const Selector& sel);

/// M^S: the model augmented with the Boolean selector child (plus its
/// one-state dummy exogenous parent). Returns the augmented model and
/// the selector variable id.
std::pair<Pscm, VarId> embed_selector(const Pscm& model, const Selector& sel);

/// Merges heterogeneous studies into one observational-style table with
/// the intervention index column W (and S when any study is biased).
MergedDataset merge_studies(const Pscm& model, const std::vector<StudySpec>& studies);

/// The auxiliary model: W becomes a parent of every endogenous
/// variable, dispatching surgical constants per intervention state;
/// U_W is its identity-mapped exogenous parent. With selectors, S is
/// added with the per-study selection functions keyed by W.
struct AuxiliaryModel {
    Pscm model;
    VarId w = -1;
    VarId u_w = -1;
    VarId s = -1;        // -1 when no study is biased
    VarId w_prime = -1;  // -1 until local chances are attached
    int w_null_state = -1;
    std::vector<int> w_study;
};

AuxiliaryModel build_auxiliary(const Pscm& model, const MergedDataset& merged,
                               const std::vector<StudySpec>& studies);

/// Per-study exogenous chances: adds the coarsening index W' = i(W) and
/// conditions the listed exogenous variables on it. Also appends the W'
/// column to the merged data.
void attach_local_chances(AuxiliaryModel& aux, MergedDataset& merged,
                          const std::vector<StudySpec>& studies);

/// Restricts an auxiliary-model FSCM back to the original variables by
/// fixing W to the no-intervention state symbolically (SE slices, not
/// numeric conditioning) and selecting the requested chance-index
/// column for study-conditioned exogenous variables.
Fscm observational_restriction(const Fscm& aux_fscm, const AuxiliaryModel& aux,
                               int chance_study_state = -1);

} // namespace cfb

#endif
