#include "cfb/query.hpp"

#include <algorithm>
#include <stdexcept>

#include "cfb/factor.hpp"

namespace cfb {

QuerySpec make_pns(VarId cause, VarId effect, int cause_true, int cause_false, int effect_true,
                   int effect_false) {
    QuerySpec q;
    q.kind = QueryKind::pns;
    q.worlds = {WorldSpec{{{cause, cause_true}}}, WorldSpec{{{cause, cause_false}}}};
    q.target = {{0, effect, effect_true}, {1, effect, effect_false}};
    return q;
}

QuerySpec make_pn(VarId cause, VarId effect, int cause_true, int cause_false, int effect_true,
                  int effect_false) {
    QuerySpec q;
    q.kind = QueryKind::pn;
    q.worlds = {WorldSpec{}, WorldSpec{{{cause, cause_false}}}};
    q.target = {{1, effect, effect_false}};
    q.evidence = {{0, cause, cause_true}, {0, effect, effect_true}};
    return q;
}

QuerySpec make_ps(VarId cause, VarId effect, int cause_true, int cause_false, int effect_true,
                  int effect_false) {
    QuerySpec q;
    q.kind = QueryKind::ps;
    q.worlds = {WorldSpec{}, WorldSpec{{{cause, cause_true}}}};
    q.target = {{1, effect, effect_true}};
    q.evidence = {{0, cause, cause_false}, {0, effect, effect_false}};
    return q;
}

TwinNetwork build_counterfactual_model(const Pscm& base, const std::vector<WorldSpec>& worlds) {
    if (worlds.empty()) throw std::invalid_argument("counterfactual model needs a world");
    TwinNetwork tn;
    tn.model = base;

    std::map<VarId, VarId> identity;
    for (VarId v : base.endogenous()) identity[v] = v;
    tn.endo_map.push_back(identity);

    for (std::size_t w = 1; w < worlds.size(); ++w) {
        std::map<VarId, VarId> remap;
        for (VarId v : base.endogenous()) {
            VarId tw = static_cast<VarId>(tn.model.vars.size());
            Variable var = base.vars[static_cast<std::size_t>(v)];
            var.name += "'" + std::string(w > 1 ? std::to_string(w) : "");
            tn.model.vars.push_back(var);
            tn.model.equations.emplace_back();
            remap[v] = tw;
        }
        for (VarId v : base.endogenous()) {
            StructuralEquation eq = *base.equations[static_cast<std::size_t>(v)];
            eq.child = remap[v];
            for (VarId& p : eq.parents) {
                auto it = remap.find(p);
                if (it != remap.end()) p = it->second; // exogenous parents stay shared
            }
            tn.model.equations[static_cast<std::size_t>(remap[v])] = std::move(eq);
        }
        tn.endo_map.push_back(std::move(remap));
    }

    for (std::size_t w = 0; w < worlds.size(); ++w) {
        for (const auto& [v, state] : worlds[w].interventions) {
            VarId tw = tn.endo_map[w].at(v);
            auto& eq = tn.model.equations[static_cast<std::size_t>(tw)];
            if (!eq) throw std::logic_error("surgery on variable without mechanism");
            if (state < 0 || state >= tn.model.card(tw))
                throw std::invalid_argument("surgery state out of range");
            std::fill(eq->table.begin(), eq->table.end(), state);
        }
    }
    return tn;
}

std::optional<double> evaluate_query(const Fscm& fscm, const QuerySpec& spec) {
    TwinNetwork tn = build_counterfactual_model(fscm.model, spec.worlds);
    Fscm twin;
    twin.model = tn.model;
    twin.exo_pmfs = fscm.exo_pmfs;

    // Boolean conjunction node for the target, so a single elimination
    // pass yields numerator and denominator together.
    std::vector<VarId> q_parents;
    std::vector<int> q_states;
    for (const auto& t : spec.target) {
        if (t.world < 0 || static_cast<std::size_t>(t.world) >= tn.endo_map.size())
            throw std::invalid_argument("query term references an unknown world");
        q_parents.push_back(tn.endo_map[static_cast<std::size_t>(t.world)].at(t.var));
        q_states.push_back(t.state);
    }

    VarId q = static_cast<VarId>(twin.model.vars.size());
    twin.model.vars.push_back({"Q", 2, Kind::endogenous});
    twin.model.equations.emplace_back();
    VarId u_q = static_cast<VarId>(twin.model.vars.size());
    twin.model.vars.push_back({"U_Q", 1, Kind::exogenous});
    twin.model.equations.emplace_back();
    twin.exo_pmfs[u_q] = ExoPmf{{{1.0}}};

    StructuralEquation eq;
    eq.child = q;
    eq.parents = q_parents;
    eq.parents.push_back(u_q);
    std::size_t n_cfg = 1;
    std::vector<int> cards;
    for (VarId p : q_parents) {
        cards.push_back(twin.model.card(p));
        n_cfg *= static_cast<std::size_t>(twin.model.card(p));
    }
    eq.table.assign(n_cfg, 0);
    std::vector<int> st(q_parents.size(), 0);
    for (std::size_t cfg = 0; cfg < n_cfg; ++cfg) {
        bool all = true;
        for (std::size_t i = 0; i < st.size(); ++i)
            if (st[i] != q_states[i]) {
                all = false;
                break;
            }
        eq.table[cfg] = all ? 1 : 0;
        for (std::size_t i = st.size(); i-- > 0;) {
            if (++st[i] < cards[i]) break;
            st[i] = 0;
        }
    }
    twin.model.equations[static_cast<std::size_t>(q)] = std::move(eq);

    std::map<VarId, int> evidence;
    for (const auto& e : spec.evidence) {
        if (e.world < 0 || static_cast<std::size_t>(e.world) >= tn.endo_map.size())
            throw std::invalid_argument("evidence term references an unknown world");
        evidence[tn.endo_map[static_cast<std::size_t>(e.world)].at(e.var)] = e.state;
    }

    std::vector<Factor> fs = fscm_factors(twin);
    Factor marg = variable_elimination(fs, {q}, evidence);
    double denom = marg.total();
    if (denom <= 0.0) return std::nullopt;
    return marg.values.at(1) / denom;
}

namespace {

QueryResult range_over_runs(const CompatibleSet& set, const QuerySpec& spec,
                            const AuxiliaryModel* aux, int chance_study_state) {
    QueryResult out;
    bool any = false;
    for (std::size_t r = 0; r < set.results.size(); ++r) {
        QueryResult::PerRun pr;
        pr.run = r;
        pr.status = set.results[r].status;
        if (pr.status == RunStatus::global_max) {
            Fscm f = set.fscm_of(r);
            if (aux) f = observational_restriction(f, *aux, chance_study_state);
            auto v = evaluate_query(f, spec);
            if (v) {
                pr.defined = true;
                pr.value = *v;
                if (!any || pr.value < out.lower) out.lower = pr.value;
                if (!any || pr.value > out.upper) out.upper = pr.value;
                any = true;
            }
        }
        if (!pr.defined) ++out.n_excluded;
        out.per_run.push_back(pr);
    }
    if (!any)
        throw std::runtime_error(
            "counterfactual_range: no run reached the global maximum with defined conditioning");
    return out;
}

} // namespace

QueryResult counterfactual_range(const CompatibleSet& set, const QuerySpec& spec) {
    return range_over_runs(set, spec, nullptr, -1);
}

QueryResult counterfactual_range(const CompatibleSet& set, const AuxiliaryModel& aux,
                                 const QuerySpec& spec, int chance_study_state) {
    return range_over_runs(set, spec, &aux, chance_study_state);
}

} // namespace cfb
