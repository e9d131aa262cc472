#include "cfb/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>

namespace cfb {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    if (a != 0 && b > std::numeric_limits<std::int64_t>::max() / a)
        throw std::overflow_error("canonical cardinality overflows 64-bit integer");
    return a * b;
}

std::int64_t checked_pow(std::int64_t base, std::int64_t exp) {
    std::int64_t r = 1;
    for (std::int64_t i = 0; i < exp; ++i) r = checked_mul(r, base);
    return r;
}

} // namespace

VarId Pscm::find(const std::string& name) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return static_cast<VarId>(i);
    return -1;
}

std::vector<VarId> Pscm::exogenous() const {
    std::vector<VarId> r;
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].kind == Kind::exogenous) r.push_back(static_cast<VarId>(i));
    return r;
}

std::vector<VarId> Pscm::endogenous() const {
    std::vector<VarId> r;
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].kind == Kind::endogenous) r.push_back(static_cast<VarId>(i));
    return r;
}

std::vector<VarId> Pscm::parents_of(VarId v) const {
    const auto& eq = equations[static_cast<std::size_t>(v)];
    return eq ? eq->parents : std::vector<VarId>{};
}

std::vector<VarId> Pscm::endo_parents_of(VarId v) const {
    std::vector<VarId> r;
    for (VarId p : parents_of(v))
        if (kind(p) == Kind::endogenous) r.push_back(p);
    return r;
}

std::vector<VarId> Pscm::exo_parents_of(VarId v) const {
    std::vector<VarId> r;
    for (VarId p : parents_of(v))
        if (kind(p) == Kind::exogenous) r.push_back(p);
    return r;
}

std::vector<std::pair<VarId, VarId>> Pscm::arcs() const {
    std::vector<std::pair<VarId, VarId>> a;
    for (std::size_t v = 0; v < vars.size(); ++v)
        for (VarId p : parents_of(static_cast<VarId>(v)))
            a.emplace_back(p, static_cast<VarId>(v));
    return a;
}

std::vector<VarId> Pscm::topological_order() const {
    const int n = static_cast<int>(vars.size());
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<VarId>> children(n);
    for (auto [p, c] : arcs()) {
        ++indeg[static_cast<std::size_t>(c)];
        children[static_cast<std::size_t>(p)].push_back(c);
    }
    std::priority_queue<VarId, std::vector<VarId>, std::greater<>> ready;
    for (VarId v = 0; v < n; ++v)
        if (indeg[static_cast<std::size_t>(v)] == 0) ready.push(v);
    std::vector<VarId> order;
    order.reserve(static_cast<std::size_t>(n));
    while (!ready.empty()) {
        VarId v = ready.top();
        ready.pop();
        order.push_back(v);
        for (VarId c : children[static_cast<std::size_t>(v)])
            if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push(c);
    }
    if (static_cast<int>(order.size()) != n)
        throw std::runtime_error("graph has a cycle; no topological order exists");
    return order;
}

int Pscm::se_child_state(VarId v, const std::vector<int>& parent_states) const {
    const auto& eq = equations[static_cast<std::size_t>(v)];
    if (!eq) throw std::invalid_argument("variable has no structural equation");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < eq->parents.size(); ++i)
        idx = idx * static_cast<std::size_t>(card(eq->parents[i])) +
              static_cast<std::size_t>(parent_states[i]);
    return eq->table[idx];
}

std::map<VarId, int> Pscm::simulate(const std::map<VarId, int>& exo_state) const {
    std::map<VarId, int> state = exo_state;
    for (VarId v : topological_order()) {
        if (kind(v) != Kind::endogenous) continue;
        const auto& eq = equations[static_cast<std::size_t>(v)];
        std::vector<int> ps;
        ps.reserve(eq->parents.size());
        for (VarId p : eq->parents) ps.push_back(state.at(p));
        state[v] = se_child_state(v, ps);
    }
    for (VarId u : exogenous()) state.erase(u);
    return state;
}

ValidationReport validate_pscm(const Pscm& model) {
    ValidationReport report;
    const int n = static_cast<int>(model.vars.size());

    for (VarId v = 0; v < n; ++v) {
        if (model.card(v) < 1)
            report.push_back({"bad_cardinality", model.name(v) + " has cardinality < 1"});
        const auto& eq = model.equations[static_cast<std::size_t>(v)];
        if (model.kind(v) == Kind::exogenous) {
            if (eq)
                report.push_back({"exogenous_not_root",
                                  model.name(v) + " is exogenous but has a structural equation"});
            continue;
        }
        if (!eq) {
            report.push_back({"missing_equation", model.name(v) + " has no structural equation"});
            continue;
        }
        if (eq->child != v)
            report.push_back({"equation_mismatch", model.name(v) + " equation child id differs"});

        bool has_exo = false;
        std::size_t expect = 1;
        bool sized = true;
        for (VarId p : eq->parents) {
            if (p < 0 || p >= n) {
                report.push_back({"bad_parent", model.name(v) + " references unknown parent"});
                sized = false;
                break;
            }
            if (model.kind(p) == Kind::exogenous) has_exo = true;
            expect *= static_cast<std::size_t>(model.card(p));
        }
        if (!has_exo)
            report.push_back({"no_exogenous_parent",
                              model.name(v) + " has no exogenous parent"});
        if (sized && eq->table.size() != expect) {
            report.push_back({"table_size_mismatch",
                              model.name(v) + " table does not cover the parent space"});
            continue;
        }
        std::vector<bool> seen(static_cast<std::size_t>(model.card(v)), false);
        bool in_range = true;
        for (int y : eq->table) {
            if (y < 0 || y >= model.card(v)) {
                in_range = false;
                break;
            }
            seen[static_cast<std::size_t>(y)] = true;
        }
        if (!in_range)
            report.push_back({"table_state_out_of_range",
                              model.name(v) + " table maps to a state outside its domain"});
        else if (std::find(seen.begin(), seen.end(), false) != seen.end())
            report.push_back({"not_surjective",
                              model.name(v) + " equation does not reach every child state"});
    }

    // Cycle check over the induced graph.
    try {
        model.topological_order();
    } catch (const std::runtime_error&) {
        report.push_back({"cycle", "induced graph is cyclic"});
    }

    for (const auto& [u, w] : model.exo_condition) {
        if (u < 0 || u >= n || model.kind(u) != Kind::exogenous)
            report.push_back({"bad_conditioning", "conditioned variable is not exogenous"});
        if (w < 0 || w >= n || model.kind(w) != Kind::endogenous)
            report.push_back({"bad_conditioning", "conditioning index variable is not endogenous"});
    }
    return report;
}

ValidationReport validate_fscm(const Fscm& fscm) {
    ValidationReport report = validate_pscm(fscm.model);
    for (VarId u : fscm.model.exogenous()) {
        auto it = fscm.exo_pmfs.find(u);
        if (it == fscm.exo_pmfs.end()) {
            report.push_back({"missing_pmf", fscm.model.name(u) + " has no PMF"});
            continue;
        }
        std::size_t rows_expected = 1;
        auto cit = fscm.model.exo_condition.find(u);
        if (cit != fscm.model.exo_condition.end())
            rows_expected = static_cast<std::size_t>(fscm.model.card(cit->second));
        if (it->second.rows.size() != rows_expected) {
            report.push_back({"pmf_shape", fscm.model.name(u) + " conditional row count mismatch"});
            continue;
        }
        for (const auto& row : it->second.rows) {
            if (row.size() != static_cast<std::size_t>(fscm.model.card(u))) {
                report.push_back({"pmf_shape", fscm.model.name(u) + " PMF length mismatch"});
                continue;
            }
            double s = 0.0;
            bool neg = false;
            for (double p : row) {
                if (p < 0.0) neg = true;
                s += p;
            }
            if (neg)
                report.push_back({"pmf_negative", fscm.model.name(u) + " PMF has negative mass"});
            if (std::abs(s - 1.0) > 1e-9)
                report.push_back({"pmf_not_normalized",
                                  fscm.model.name(u) + " PMF does not sum to 1"});
        }
    }
    return report;
}

std::int64_t canonical_cardinality(int child_card, const std::vector<int>& endo_parent_cards) {
    if (child_card < 1) throw std::invalid_argument("child cardinality must be >= 1");
    std::int64_t configs = 1;
    for (int c : endo_parent_cards) {
        if (c < 1) throw std::invalid_argument("parent cardinality must be >= 1");
        configs = checked_mul(configs, c);
    }
    return checked_pow(child_card, configs);
}

Pscm build_canonical_pscm(const CausalGraph& endo_graph,
                          const std::vector<std::string>& names,
                          const std::vector<int>& cards,
                          const std::vector<std::string>& exo_assignment) {
    const int n = endo_graph.n;
    if (static_cast<int>(names.size()) != n || static_cast<int>(cards.size()) != n ||
        static_cast<int>(exo_assignment.size()) != n)
        throw std::invalid_argument("endogenous metadata length mismatch");

    Pscm model;
    model.vars.resize(static_cast<std::size_t>(n));
    model.equations.resize(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v)
        model.vars[static_cast<std::size_t>(v)] = {names[static_cast<std::size_t>(v)],
                                                   cards[static_cast<std::size_t>(v)],
                                                   Kind::endogenous};

    std::vector<std::vector<VarId>> endo_parents(static_cast<std::size_t>(n));
    for (auto [p, c] : endo_graph.arcs)
        endo_parents[static_cast<std::size_t>(c)].push_back(p);
    for (auto& ps : endo_parents) std::sort(ps.begin(), ps.end());

    // Exogenous variables in order of first appearance; children in
    // ascending endogenous id.
    std::vector<std::string> exo_names;
    std::vector<std::vector<VarId>> exo_children;
    for (int v = 0; v < n; ++v) {
        const std::string& uname = exo_assignment[static_cast<std::size_t>(v)];
        auto it = std::find(exo_names.begin(), exo_names.end(), uname);
        if (it == exo_names.end()) {
            exo_names.push_back(uname);
            exo_children.push_back({v});
        } else {
            exo_children[static_cast<std::size_t>(it - exo_names.begin())].push_back(v);
        }
    }

    // Per-child radix: number of parent->child functions. A shared
    // exogenous parent's joint state is the mixed-radix word over its
    // children, first child least significant.
    std::vector<VarId> exo_of(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> digit_prefix(static_cast<std::size_t>(n), 1);
    std::vector<std::int64_t> digit_radix(static_cast<std::size_t>(n), 1);
    for (std::size_t i = 0; i < exo_names.size(); ++i) {
        std::int64_t total = 1;
        for (VarId v : exo_children[i]) {
            std::vector<int> pc;
            for (VarId p : endo_parents[static_cast<std::size_t>(v)])
                pc.push_back(cards[static_cast<std::size_t>(p)]);
            std::int64_t r = canonical_cardinality(cards[static_cast<std::size_t>(v)], pc);
            digit_prefix[static_cast<std::size_t>(v)] = total;
            digit_radix[static_cast<std::size_t>(v)] = r;
            total = checked_mul(total, r);
        }
        if (total > std::numeric_limits<int>::max())
            throw std::overflow_error("canonical exogenous cardinality exceeds int range");
        VarId uid = static_cast<VarId>(model.vars.size());
        model.vars.push_back({exo_names[i], static_cast<int>(total), Kind::exogenous});
        model.equations.emplace_back(std::nullopt);
        for (VarId v : exo_children[i]) exo_of[static_cast<std::size_t>(v)] = uid;
    }

    for (int v = 0; v < n; ++v) {
        VarId uid = exo_of[static_cast<std::size_t>(v)];
        const auto& eps = endo_parents[static_cast<std::size_t>(v)];
        const int vc = cards[static_cast<std::size_t>(v)];
        const std::int64_t prefix = digit_prefix[static_cast<std::size_t>(v)];
        const std::int64_t radix = digit_radix[static_cast<std::size_t>(v)];

        StructuralEquation eq;
        eq.child = v;
        eq.parents = eps;
        eq.parents.push_back(uid);

        std::size_t n_configs = 1;
        for (VarId p : eps) n_configs *= static_cast<std::size_t>(cards[static_cast<std::size_t>(p)]);
        const std::size_t ucard = static_cast<std::size_t>(model.card(uid));
        eq.table.resize(n_configs * ucard);

        // Powers of |child| addressing the base-|child| digits of the
        // function index; digit p corresponds to parent configuration p.
        std::vector<std::int64_t> pw(n_configs);
        std::int64_t acc = 1;
        for (std::size_t p = 0; p < n_configs; ++p) {
            pw[p] = acc;
            if (p + 1 < n_configs) acc = checked_mul(acc, vc);
        }

        for (std::size_t cfg = 0; cfg < n_configs; ++cfg) {
            for (std::size_t u = 0; u < ucard; ++u) {
                std::int64_t fn = (static_cast<std::int64_t>(u) / prefix) % radix;
                int y = static_cast<int>((fn / pw[cfg]) % vc);
                eq.table[cfg * ucard + u] = y;
            }
        }
        model.equations[static_cast<std::size_t>(v)] = std::move(eq);
    }
    return model;
}

CComponentDecomposition c_components(const Pscm& model) {
    const int n = static_cast<int>(model.vars.size());
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> root = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    auto unite = [&](int a, int b) { parent[static_cast<std::size_t>(root(a))] = root(b); };

    // Keep only exogenous->endogenous arcs, then take connected components.
    for (auto [p, c] : model.arcs())
        if (model.kind(p) == Kind::exogenous) unite(p, c);

    std::map<int, int> comp_index;
    CComponentDecomposition dec;
    auto order = model.topological_order();
    std::map<VarId, int> topo_pos;
    for (std::size_t i = 0; i < order.size(); ++i) topo_pos[order[i]] = static_cast<int>(i);

    for (VarId v : order) {
        int r = root(v);
        if (!comp_index.count(r)) {
            comp_index[r] = static_cast<int>(dec.components.size());
            dec.components.emplace_back();
        }
        int ci = comp_index[r];
        dec.component_of[v] = ci;
        if (model.kind(v) == Kind::exogenous)
            dec.components[static_cast<std::size_t>(ci)].exo.push_back(v);
        else
            dec.components[static_cast<std::size_t>(ci)].endo.push_back(v);
    }

    for (auto& comp : dec.components) {
        std::set<VarId> frontier(comp.endo.begin(), comp.endo.end());
        for (VarId v : comp.endo)
            for (VarId p : model.endo_parents_of(v)) frontier.insert(p);
        comp.frontier.assign(frontier.begin(), frontier.end());
        for (VarId v : comp.endo) {
            std::vector<VarId> pred;
            for (VarId w : comp.frontier)
                if (w != v && topo_pos[w] < topo_pos[v]) pred.push_back(w);
            comp.predecessors[v] = std::move(pred);
        }
    }
    return dec;
}

Factor se_to_cpt(const Pscm& model, VarId child) {
    const auto& eq = model.equations[static_cast<std::size_t>(child)];
    if (!eq) throw std::invalid_argument("se_to_cpt: variable has no structural equation");
    std::vector<VarId> scope = eq->parents;
    scope.push_back(child);
    std::vector<int> cards;
    for (VarId v : scope) cards.push_back(model.card(v));
    Factor f(scope, cards);
    const std::size_t cc = static_cast<std::size_t>(model.card(child));
    for (std::size_t cfg = 0; cfg < eq->table.size(); ++cfg)
        f.values[cfg * cc + static_cast<std::size_t>(eq->table[cfg])] = 1.0;
    return f;
}

std::vector<Factor> fscm_factors(const Fscm& fscm) {
    std::vector<Factor> fs;
    const Pscm& m = fscm.model;
    for (VarId v : m.endogenous()) fs.push_back(se_to_cpt(m, v));
    for (VarId u : m.exogenous()) {
        const ExoPmf& pmf = fscm.exo_pmfs.at(u);
        auto cit = m.exo_condition.find(u);
        if (cit == m.exo_condition.end()) {
            fs.emplace_back(std::vector<VarId>{u}, std::vector<int>{m.card(u)}, pmf.rows.at(0));
        } else {
            VarId w = cit->second;
            std::vector<double> vals;
            vals.reserve(static_cast<std::size_t>(m.card(w)) * static_cast<std::size_t>(m.card(u)));
            for (const auto& row : pmf.rows) vals.insert(vals.end(), row.begin(), row.end());
            fs.emplace_back(std::vector<VarId>{w, u}, std::vector<int>{m.card(w), m.card(u)},
                            std::move(vals));
        }
    }
    return fs;
}

} // namespace cfb
