#include "cfb/fusion.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cfb {

namespace {

std::size_t scope_index(const std::vector<VarId>& scope, const std::vector<int>& cards,
                        const std::vector<int>& states) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < scope.size(); ++i)
        idx = idx * static_cast<std::size_t>(cards[i]) + static_cast<std::size_t>(states[i]);
    return idx;
}

std::string unique_name(const Pscm& model, std::string base) {
    if (model.find(base) < 0) return base;
    for (int i = 1;; ++i) {
        std::string cand = base + "_" + std::to_string(i);
        if (model.find(cand) < 0) return cand;
    }
}

} // namespace

void Selector::validate(const Pscm& model) const {
    std::size_t expect = 1;
    for (VarId v : scope) {
        if (v < 0 || static_cast<std::size_t>(v) >= model.vars.size())
            throw std::invalid_argument("selector: scope variable out of range");
        if (model.kind(v) != Kind::endogenous)
            throw std::invalid_argument("selector: scope must be endogenous");
        expect *= static_cast<std::size_t>(model.card(v));
    }
    if (table.size() != expect)
        throw std::invalid_argument("selector: table size does not match scope");
    for (int x : table)
        if (x != 0 && x != 1) throw std::invalid_argument("selector: table entries must be 0/1");
}

BiasedDataset partition_by_selector(const Dataset& data, const Pscm& model, const Selector& sel) {
    sel.validate(model);
    std::vector<int> cards;
    std::vector<int> cols;
    for (VarId v : sel.scope) {
        cards.push_back(model.card(v));
        int c = data.column_of(v);
        if (c < 0) throw std::invalid_argument("partition_by_selector: selector scope not in data");
        cols.push_back(c);
    }
    BiasedDataset out;
    out.selected.columns = data.columns;
    for (const auto& row : data.rows) {
        std::vector<int> st;
        for (int c : cols) {
            int v = row.states[static_cast<std::size_t>(c)];
            if (v == kMissing)
                throw std::invalid_argument("partition_by_selector: masked selector scope value");
            st.push_back(v);
        }
        std::size_t idx = scope_index(sel.scope, cards, st);
        if (sel.table[idx] == 1)
            out.selected.rows.push_back(row);
        else
            out.n_unselected += row.count;
    }
    return out;
}

std::pair<Pscm, VarId> embed_selector(const Pscm& model, const Selector& sel) {
    sel.validate(model);
    Pscm out = model;
    VarId s = static_cast<VarId>(out.vars.size());
    out.vars.push_back({unique_name(out, "S"), 2, Kind::endogenous});
    out.equations.emplace_back();
    VarId u_s = static_cast<VarId>(out.vars.size());
    out.vars.push_back({unique_name(out, "U_S"), 1, Kind::exogenous});
    out.equations.emplace_back();

    StructuralEquation eq;
    eq.child = s;
    eq.parents = sel.scope;
    eq.parents.push_back(u_s);
    eq.table = sel.table; // trailing one-state parent leaves the layout unchanged
    out.equations[static_cast<std::size_t>(s)] = std::move(eq);
    return {std::move(out), s};
}

MergedDataset merge_studies(const Pscm& model, const std::vector<StudySpec>& studies) {
    if (studies.empty()) throw std::invalid_argument("merge_studies: no studies");

    bool any_local = false;
    bool any_selector = false;
    for (const auto& st : studies) {
        if (!st.local_chance_vars.empty()) any_local = true;
        if (st.selector) any_selector = true;
    }

    MergedDataset merged;
    merged.has_selector = any_selector;
    const VarId n0 = static_cast<VarId>(model.vars.size());
    merged.w_var = n0; // W and (optionally) S take the next ids in the auxiliary model
    merged.s_var = any_selector ? n0 + 2 : -1;

    std::vector<VarId> endo = model.endogenous();
    merged.data.columns = endo;
    merged.data.columns.push_back(merged.w_var);
    if (any_selector) merged.data.columns.push_back(merged.s_var);

    int shared_obs = -1;
    auto new_state = [&](std::string label, int study, std::map<VarId, int> interv) {
        merged.w_labels.push_back(std::move(label));
        merged.w_study.push_back(study);
        merged.w_intervention.push_back(std::move(interv));
        return static_cast<int>(merged.w_labels.size()) - 1;
    };

    for (std::size_t k = 0; k < studies.size(); ++k) {
        const StudySpec& study = studies[k];
        const Dataset& d = study.dataset;
        if (study.selector) study.selector->validate(model);

        const bool observational = study.intervened_vars.empty();
        const bool plain = observational && !study.selector && !any_local;

        // One W state per distinct surgical assignment of this study.
        std::map<std::vector<int>, int> state_of;
        int obs_state = -1;
        if (observational) {
            if (plain) {
                if (shared_obs < 0) shared_obs = new_state("obs", -1, {});
                obs_state = shared_obs;
            } else {
                obs_state = new_state("obs[" + std::to_string(k) + "]", static_cast<int>(k), {});
            }
        }

        auto state_for_row = [&](const Dataset::Row& row) {
            if (observational) return obs_state;
            std::vector<int> key;
            std::map<VarId, int> interv;
            for (VarId v : study.intervened_vars) {
                int c = d.column_of(v);
                if (c < 0)
                    throw std::invalid_argument("merge_studies: intervened variable not in data");
                int val = row.states[static_cast<std::size_t>(c)];
                if (val == kMissing)
                    throw std::invalid_argument("merge_studies: masked intervened value");
                key.push_back(val);
                interv[v] = val;
            }
            auto it = state_of.find(key);
            if (it != state_of.end()) return it->second;
            std::ostringstream label;
            label << "do[" << k << "](";
            for (std::size_t i = 0; i < study.intervened_vars.size(); ++i) {
                if (i) label << ",";
                label << model.name(study.intervened_vars[i]) << "=" << key[i];
            }
            label << ")";
            int s = new_state(label.str(), static_cast<int>(k), std::move(interv));
            state_of[key] = s;
            return s;
        };

        for (const auto& row : d.rows) {
            Dataset::Row out;
            int w = state_for_row(row);
            bool masked = false;
            for (VarId v : endo) {
                int c = d.column_of(v);
                int val = c >= 0 ? row.states[static_cast<std::size_t>(c)] : kMissing;
                if (val == kMissing) {
                    auto it = merged.w_intervention[static_cast<std::size_t>(w)].find(v);
                    if (it != merged.w_intervention[static_cast<std::size_t>(w)].end())
                        val = it->second;
                }
                if (val == kMissing) masked = true;
                out.states.push_back(val);
            }
            if (masked && !study.selector)
                throw std::invalid_argument("merge_studies: masked values in an unbiased study");
            out.states.push_back(w);
            if (any_selector) out.states.push_back(masked ? 0 : 1);
            out.count = row.count;
            merged.data.rows.push_back(std::move(out));
        }

        if (study.selector && study.n_unselected > 0.0) {
            if (!observational && state_of.size() != 1)
                throw std::invalid_argument(
                    "merge_studies: biased study must have a single surgical assignment");
            int w = observational ? obs_state : state_of.begin()->second;
            Dataset::Row masked;
            for (VarId v : endo) {
                auto it = merged.w_intervention[static_cast<std::size_t>(w)].find(v);
                masked.states.push_back(
                    it == merged.w_intervention[static_cast<std::size_t>(w)].end() ? kMissing
                                                                                   : it->second);
            }
            masked.states.push_back(w);
            masked.states.push_back(0);
            masked.count = study.n_unselected;
            merged.data.rows.push_back(std::move(masked));
        }
    }

    if (shared_obs < 0) shared_obs = new_state("obs", -1, {});
    merged.w_null_state = shared_obs;
    return merged;
}

AuxiliaryModel build_auxiliary(const Pscm& model, const MergedDataset& merged,
                               const std::vector<StudySpec>& studies) {
    AuxiliaryModel aux;
    aux.model = model;
    aux.w_null_state = merged.w_null_state;
    aux.w_study = merged.w_study;

    const int w_card = static_cast<int>(merged.w_labels.size());
    aux.w = static_cast<VarId>(aux.model.vars.size());
    aux.model.vars.push_back({unique_name(aux.model, "W"), w_card, Kind::endogenous});
    aux.model.equations.emplace_back();
    aux.u_w = static_cast<VarId>(aux.model.vars.size());
    aux.model.vars.push_back({unique_name(aux.model, "U_W"), w_card, Kind::exogenous});
    aux.model.equations.emplace_back();
    if (aux.w != merged.w_var)
        throw std::logic_error("build_auxiliary: merged dataset built against a different model");

    StructuralEquation w_eq;
    w_eq.child = aux.w;
    w_eq.parents = {aux.u_w};
    for (int i = 0; i < w_card; ++i) w_eq.table.push_back(i);
    aux.model.equations[static_cast<std::size_t>(aux.w)] = std::move(w_eq);

    // Rewire every endogenous mechanism through W: the original equation
    // on the no-intervention branch, the surgical constant elsewhere.
    for (VarId v : model.endogenous()) {
        const StructuralEquation& old = *model.equations[static_cast<std::size_t>(v)];
        StructuralEquation eq;
        eq.child = v;
        eq.parents.push_back(aux.w);
        eq.parents.insert(eq.parents.end(), old.parents.begin(), old.parents.end());
        eq.table.reserve(static_cast<std::size_t>(w_card) * old.table.size());
        for (int w = 0; w < w_card; ++w) {
            const auto& interv = merged.w_intervention[static_cast<std::size_t>(w)];
            auto it = interv.find(v);
            if (it == interv.end())
                eq.table.insert(eq.table.end(), old.table.begin(), old.table.end());
            else
                eq.table.insert(eq.table.end(), old.table.size(), it->second);
        }
        aux.model.equations[static_cast<std::size_t>(v)] = std::move(eq);
    }

    if (merged.has_selector) {
        std::set<VarId> scope_union;
        for (const auto& st : studies)
            if (st.selector)
                scope_union.insert(st.selector->scope.begin(), st.selector->scope.end());
        std::vector<VarId> scope(scope_union.begin(), scope_union.end());

        aux.s = static_cast<VarId>(aux.model.vars.size());
        aux.model.vars.push_back({unique_name(aux.model, "S"), 2, Kind::endogenous});
        aux.model.equations.emplace_back();
        VarId u_s = static_cast<VarId>(aux.model.vars.size());
        aux.model.vars.push_back({unique_name(aux.model, "U_S"), 1, Kind::exogenous});
        aux.model.equations.emplace_back();

        StructuralEquation s_eq;
        s_eq.child = aux.s;
        s_eq.parents = scope;
        s_eq.parents.push_back(aux.w);
        s_eq.parents.push_back(u_s);

        std::vector<int> cards;
        for (VarId v : scope) cards.push_back(model.card(v));
        std::size_t n_scope = 1;
        for (int c : cards) n_scope *= static_cast<std::size_t>(c);

        s_eq.table.resize(n_scope * static_cast<std::size_t>(w_card));
        std::vector<int> st(scope.size(), 0);
        for (std::size_t cfg = 0; cfg < n_scope; ++cfg) {
            for (int w = 0; w < w_card; ++w) {
                int val = 1;
                int k = merged.w_study[static_cast<std::size_t>(w)];
                if (k >= 0 && studies[static_cast<std::size_t>(k)].selector) {
                    const Selector& sel = *studies[static_cast<std::size_t>(k)].selector;
                    std::vector<int> sub;
                    std::vector<int> sub_cards;
                    for (VarId v : sel.scope) {
                        std::size_t pos = static_cast<std::size_t>(
                            std::find(scope.begin(), scope.end(), v) - scope.begin());
                        sub.push_back(st[pos]);
                        sub_cards.push_back(model.card(v));
                    }
                    val = sel.table[scope_index(sel.scope, sub_cards, sub)];
                }
                s_eq.table[cfg * static_cast<std::size_t>(w_card) + static_cast<std::size_t>(w)] =
                    val;
            }
            for (std::size_t i = scope.size(); i-- > 0;) {
                if (++st[i] < cards[i]) break;
                st[i] = 0;
            }
        }
        aux.model.equations[static_cast<std::size_t>(aux.s)] = std::move(s_eq);
        if (aux.s != merged.s_var)
            throw std::logic_error("build_auxiliary: selector id mismatch with merged dataset");
    }

    return aux;
}

void attach_local_chances(AuxiliaryModel& aux, MergedDataset& merged,
                          const std::vector<StudySpec>& studies) {
    std::set<VarId> locals;
    for (const auto& st : studies)
        locals.insert(st.local_chance_vars.begin(), st.local_chance_vars.end());
    if (locals.empty()) return;

    int default_study = 0;
    for (std::size_t k = 0; k < studies.size(); ++k)
        if (studies[k].intervened_vars.empty()) {
            default_study = static_cast<int>(k);
            break;
        }

    const int n_studies = static_cast<int>(studies.size());
    aux.w_prime = static_cast<VarId>(aux.model.vars.size());
    aux.model.vars.push_back({unique_name(aux.model, "Wp"), n_studies, Kind::endogenous});
    aux.model.equations.emplace_back();
    VarId u_wp = static_cast<VarId>(aux.model.vars.size());
    aux.model.vars.push_back({unique_name(aux.model, "U_Wp"), 1, Kind::exogenous});
    aux.model.equations.emplace_back();

    StructuralEquation eq;
    eq.child = aux.w_prime;
    eq.parents = {aux.w, u_wp};
    for (int s : aux.w_study) eq.table.push_back(s >= 0 ? s : default_study);
    aux.model.equations[static_cast<std::size_t>(aux.w_prime)] = std::move(eq);

    for (VarId u : locals) {
        if (u < 0 || static_cast<std::size_t>(u) >= aux.model.vars.size() ||
            aux.model.kind(u) != Kind::exogenous)
            throw std::invalid_argument("attach_local_chances: not an exogenous variable");
        aux.model.exo_condition[u] = aux.w_prime;
    }

    int w_col = merged.data.column_of(merged.w_var);
    merged.data.columns.push_back(aux.w_prime);
    const auto& table = aux.model.equations[static_cast<std::size_t>(aux.w_prime)]->table;
    for (auto& row : merged.data.rows) {
        int w = row.states[static_cast<std::size_t>(w_col)];
        row.states.push_back(table[static_cast<std::size_t>(w)]);
    }
}

Fscm observational_restriction(const Fscm& aux_fscm, const AuxiliaryModel& aux,
                               int chance_study_state) {
    const Pscm& am = aux_fscm.model;
    const VarId n0 = aux.w; // original variables occupy the leading ids

    Fscm out;
    out.model.vars.assign(am.vars.begin(), am.vars.begin() + n0);
    out.model.equations.resize(static_cast<std::size_t>(n0));

    for (VarId v = 0; v < n0; ++v) {
        if (am.kind(v) != Kind::endogenous) continue;
        const StructuralEquation& eq = *am.equations[static_cast<std::size_t>(v)];
        if (eq.parents.empty() || eq.parents.front() != aux.w)
            throw std::logic_error("observational_restriction: unexpected mechanism shape");
        StructuralEquation sliced;
        sliced.child = v;
        sliced.parents.assign(eq.parents.begin() + 1, eq.parents.end());
        std::size_t block = eq.table.size() / static_cast<std::size_t>(am.card(aux.w));
        std::size_t off = static_cast<std::size_t>(aux.w_null_state) * block;
        sliced.table.assign(eq.table.begin() + static_cast<std::ptrdiff_t>(off),
                            eq.table.begin() + static_cast<std::ptrdiff_t>(off + block));
        out.model.equations[static_cast<std::size_t>(v)] = std::move(sliced);
    }

    int default_chance = chance_study_state;
    if (default_chance < 0 && aux.w_prime >= 0)
        default_chance = am.equations[static_cast<std::size_t>(aux.w_prime)]
                             ->table[static_cast<std::size_t>(aux.w_null_state)];

    for (VarId u = 0; u < n0; ++u) {
        if (am.kind(u) != Kind::exogenous) continue;
        const ExoPmf& pmf = aux_fscm.exo_pmfs.at(u);
        if (am.exo_condition.count(u)) {
            out.exo_pmfs[u] = ExoPmf{{pmf.rows.at(static_cast<std::size_t>(default_chance))}};
        } else {
            out.exo_pmfs[u] = pmf;
        }
    }
    out.model.exo_condition.clear();
    return out;
}

} // namespace cfb
