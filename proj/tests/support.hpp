#ifndef CFB_TESTS_SUPPORT_HPP
#define CFB_TESTS_SUPPORT_HPP

#include <map>
#include <string>
#include <vector>

#include "cfb/dataset.hpp"
#include "cfb/em.hpp"
#include "cfb/fusion.hpp"
#include "cfb/io.hpp"
#include "cfb/model.hpp"
#include "cfb/query.hpp"

namespace cfb::test {

// Drug trial model: Treatment (V1), Gender (V2), Survival (V3) with
// Gender -> Treatment -> Survival, Gender -> Survival, a confounder U1
// shared by Treatment and Survival, and U2 behind Gender. Canonical
// mechanisms: |U1| = 4*16 = 64, |U2| = 2.
// States: V1 {drug, no_drug}, V2 {female, male}, V3 {survived, dead}.
inline ModelDoc drug_trial_doc() {
    CausalGraph g;
    g.n = 3;
    g.arcs = {{1, 0}, {0, 2}, {1, 2}}; // V2->V1, V1->V3, V2->V3
    ModelDoc doc;
    doc.model = build_canonical_pscm(g, {"V1", "V2", "V3"}, {2, 2, 2}, {"U1", "U2", "U1"});
    doc.state_names.resize(doc.model.vars.size());
    doc.state_names[0] = {"drug", "no_drug"};
    doc.state_names[1] = {"female", "male"};
    doc.state_names[2] = {"survived", "dead"};
    for (std::size_t i = 3; i < doc.model.vars.size(); ++i)
        for (int s = 0; s < doc.model.vars[i].cardinality; ++s)
            doc.state_names[i].push_back(std::to_string(s));
    return doc;
}

constexpr VarId kTreatment = 0, kGender = 1, kSurvival = 2;

inline Dataset observational_study() {
    Dataset d;
    d.columns = {kTreatment, kGender, kSurvival};
    auto add = [&](int v1, int v2, int v3, double n) {
        d.rows.push_back({{v1, v2, v3}, n});
    };
    add(0, 0, 0, 378);
    add(0, 0, 1, 1022);
    add(0, 1, 0, 980);
    add(0, 1, 1, 420);
    add(1, 0, 0, 420);
    add(1, 0, 1, 180);
    add(1, 1, 0, 420);
    add(1, 1, 1, 180);
    return d;
}

inline Dataset interventional_study() {
    Dataset d;
    d.columns = {kTreatment, kGender, kSurvival};
    auto add = [&](int v1, int v2, int v3, double n) {
        d.rows.push_back({{v1, v2, v3}, n});
    };
    add(0, 0, 0, 489);
    add(0, 0, 1, 511);
    add(0, 1, 0, 490);
    add(0, 1, 1, 510);
    add(1, 0, 0, 210);
    add(1, 0, 1, 790);
    add(1, 1, 0, 210);
    add(1, 1, 1, 790);
    return d;
}

// Selector of the biased variant: a record survives selection iff
// Treatment and Gender are in opposite states (drug/male or
// no_drug/female); the other half of the table is masked.
inline Selector biased_study_selector() {
    Selector s;
    s.scope = {kTreatment, kGender};
    s.table = {0, 1, 1, 0};
    return s;
}

// PNS of the treatment on survival: survives when given the drug and
// dies without it.
inline QuerySpec pns_treatment_survival() {
    return make_pns(kTreatment, kSurvival, /*cause_true=*/0, /*cause_false=*/1,
                    /*effect_true=*/0, /*effect_false=*/1);
}

// Two-variable variant: Treatment -> Survival with a single canonical
// confounder U of cardinality 2*4 = 8.
inline ModelDoc pair_doc() {
    CausalGraph g;
    g.n = 2;
    g.arcs = {{0, 1}};
    ModelDoc doc;
    doc.model = build_canonical_pscm(g, {"V1", "V3"}, {2, 2}, {"U", "U"});
    doc.state_names.resize(doc.model.vars.size());
    doc.state_names[0] = {"drug", "no_drug"};
    doc.state_names[1] = {"survived", "dead"};
    for (int s = 0; s < doc.model.vars[2].cardinality; ++s)
        doc.state_names[2].push_back(std::to_string(s));
    return doc;
}

inline Dataset pair_observational() {
    // Table marginalized over gender.
    Dataset d;
    d.columns = {0, 1};
    d.rows = {{{0, 0}, 1358}, {{0, 1}, 1442}, {{1, 0}, 840}, {{1, 1}, 360}};
    return d;
}

// Removes one state of an exogenous variable, slicing every dependent
// mechanism table (the variable is the last, fastest-varying parent in
// canonical equations).
inline Pscm remove_exo_state(const Pscm& model, VarId u, int state) {
    Pscm out = model;
    int old_card = model.card(u);
    out.vars[static_cast<std::size_t>(u)].cardinality = old_card - 1;
    for (auto& eq : out.equations) {
        if (!eq || eq->parents.empty() || eq->parents.back() != u) continue;
        std::vector<int> table;
        for (std::size_t i = 0; i < eq->table.size(); ++i)
            if (static_cast<int>(i % static_cast<std::size_t>(old_card)) != state)
                table.push_back(eq->table[i]);
        eq->table = std::move(table);
    }
    return out;
}

struct FusedFit {
    MergedDataset merged;
    AuxiliaryModel aux;
    CompatibleSet set;
};

inline FusedFit fit_fused(const Pscm& model, std::vector<StudySpec> studies,
                          const EmccConfig& cfg) {
    FusedFit f;
    f.merged = merge_studies(model, studies);
    f.aux = build_auxiliary(model, f.merged, studies);
    attach_local_chances(f.aux, f.merged, studies);
    f.set = emcc(f.aux.model, f.merged.data, cfg);
    return f;
}

} // namespace cfb::test

#endif
