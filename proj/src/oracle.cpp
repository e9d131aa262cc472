#include "cfb/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "cfb/rng.hpp"

namespace cfb {

namespace {

// Endogenous joint state reached from one exogenous configuration,
// with surgery applied, via plain topological evaluation.
std::map<VarId, int> simulate_do(const Pscm& model, const std::map<VarId, int>& exo_state,
                                 const std::map<VarId, int>& interventions) {
    std::map<VarId, int> st = exo_state;
    for (VarId v : model.topological_order()) {
        if (model.kind(v) != Kind::endogenous) continue;
        auto it = interventions.find(v);
        if (it != interventions.end()) {
            st[v] = it->second;
            continue;
        }
        const auto& eq = model.equations[static_cast<std::size_t>(v)];
        std::vector<int> ps;
        for (VarId p : eq->parents) ps.push_back(st.at(p));
        st[v] = model.se_child_state(v, ps);
    }
    return st;
}

struct Params {
    std::vector<VarId> exo;
    std::vector<int> cards;
    std::vector<std::vector<double>> theta; // one simplex per exogenous variable

    double weight(const std::vector<int>& cfg) const {
        double w = 1.0;
        for (std::size_t i = 0; i < cfg.size(); ++i)
            w *= theta[i][static_cast<std::size_t>(cfg[i])];
        return w;
    }
};

struct Precomputed {
    std::vector<std::vector<int>> configs; // joint exogenous states
    std::vector<int> pattern_of;           // config -> empirical pattern index
    std::vector<double> pattern_freq;      // target probability per pattern
    std::vector<char> target_ind;          // query conjunction indicator
    std::vector<char> evidence_ind;        // evidence conjunction indicator
    bool has_evidence = false;
};

double residual(const Params& p, const Precomputed& pre) {
    std::vector<double> mass(pre.pattern_freq.size(), 0.0);
    for (std::size_t c = 0; c < pre.configs.size(); ++c)
        mass[static_cast<std::size_t>(pre.pattern_of[c])] += p.weight(pre.configs[c]);
    double r = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i)
        r = std::max(r, std::abs(mass[i] - pre.pattern_freq[i]));
    return r;
}

double query_value(const Params& p, const Precomputed& pre, bool& defined) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < pre.configs.size(); ++c) {
        double w = p.weight(pre.configs[c]);
        if (pre.has_evidence) {
            if (!pre.evidence_ind[c]) continue;
            den += w;
            if (pre.target_ind[c]) num += w;
        } else {
            den += w;
            if (pre.target_ind[c]) num += w;
        }
    }
    if (pre.has_evidence && den <= 1e-12) {
        defined = false;
        return 0.0;
    }
    defined = true;
    return num / den;
}

// Moves probability mass between two states of one exogenous simplex.
void perturb(Params& p, Rng& rng, double step) {
    std::size_t ui = rng.next_below(p.theta.size());
    auto& row = p.theta[ui];
    if (row.size() < 2) return;
    std::size_t i = rng.next_below(row.size());
    std::size_t j = rng.next_below(row.size() - 1);
    if (j >= i) ++j;
    double delta = step * rng.next_double() * row[i];
    row[i] -= delta;
    row[j] += delta;
}

} // namespace

OracleBounds brute_force_bounds(const Pscm& model, const Dataset& data, const QuerySpec& spec,
                                const OracleConfig& config) {
    Precomputed pre;
    Params base;
    base.exo = model.exogenous();
    for (VarId u : base.exo) {
        if (model.exo_condition.count(u))
            throw std::invalid_argument("brute_force_bounds: conditioned chances unsupported");
        base.cards.push_back(model.card(u));
    }

    // Every joint exogenous configuration, its induced factual pattern,
    // and the query indicators across the specified worlds.
    std::vector<int> cfg(base.exo.size(), 0);
    Dataset agg = data.aggregated();
    const double n_total = agg.total_count();
    std::map<std::vector<int>, int> pattern_index;
    std::vector<VarId> cols = agg.columns;
    for (const auto& row : agg.rows) {
        if (!agg.row_complete(row))
            throw std::invalid_argument("brute_force_bounds: masked records unsupported");
        auto [it, fresh] = pattern_index.try_emplace(row.states,
                                                     static_cast<int>(pattern_index.size()));
        if (fresh)
            pre.pattern_freq.push_back(row.count / n_total);
        else
            pre.pattern_freq[static_cast<std::size_t>(it->second)] += row.count / n_total;
    }

    pre.has_evidence = !spec.evidence.empty();
    for (;;) {
        std::map<VarId, int> exo_state;
        for (std::size_t i = 0; i < base.exo.size(); ++i) exo_state[base.exo[i]] = cfg[i];

        auto factual = simulate_do(model, exo_state, {});
        std::vector<int> pattern;
        for (VarId v : cols) pattern.push_back(factual.at(v));
        auto [it, fresh] =
            pattern_index.try_emplace(pattern, static_cast<int>(pattern_index.size()));
        if (fresh) pre.pattern_freq.push_back(0.0); // producible but unobserved
        pre.pattern_of.push_back(it->second);

        std::vector<std::map<VarId, int>> world_states;
        for (const auto& w : spec.worlds)
            world_states.push_back(simulate_do(model, exo_state, w.interventions));

        char tgt = 1;
        for (const auto& t : spec.target)
            if (world_states.at(static_cast<std::size_t>(t.world)).at(t.var) != t.state) tgt = 0;
        char ev = 1;
        for (const auto& e : spec.evidence)
            if (world_states.at(static_cast<std::size_t>(e.world)).at(e.var) != e.state) ev = 0;
        pre.target_ind.push_back(tgt);
        pre.evidence_ind.push_back(ev);
        pre.configs.push_back(cfg);

        bool done = true;
        for (std::size_t i = cfg.size(); i-- > 0;) {
            if (++cfg[i] < base.cards[i]) {
                done = false;
                break;
            }
            cfg[i] = 0;
        }
        if (done) break;
    }

    OracleBounds out;
    for (int restart = 0; restart < config.restarts; ++restart) {
        Rng rng(split_seed(config.seed, static_cast<std::uint64_t>(restart)));
        Params p = base;
        for (int c : base.cards) p.theta.push_back(rng.next_simplex(static_cast<std::size_t>(c)));

        // Phase 1: drive the constraint residual down.
        double r = residual(p, pre);
        double step = 0.5;
        for (int it = 0; it < config.feasibility_iterations && r > config.residual_tolerance / 4;
             ++it) {
            Params cand = p;
            perturb(cand, rng, step);
            double rc = residual(cand, pre);
            if (rc < r) {
                p = std::move(cand);
                r = rc;
            }
            step = std::max(0.02, step * 0.999);
        }
        if (r > config.residual_tolerance) continue;

        // Phase 2: push the query to each extreme while staying on the
        // compatible manifold.
        for (int dir = 0; dir < 2; ++dir) {
            Params q = p;
            double rq = r;
            bool defined = false;
            double val = query_value(q, pre, defined);
            if (!defined) continue;
            double s = 0.3;
            for (int it = 0; it < config.search_iterations; ++it) {
                Params cand = q;
                perturb(cand, rng, s);
                double rc = residual(cand, pre);
                if (rc > config.residual_tolerance) {
                    s = std::max(0.01, s * 0.9995);
                    continue;
                }
                bool d2 = false;
                double v2 = query_value(cand, pre, d2);
                if (!d2) continue;
                bool better = dir == 0 ? v2 < val : v2 > val;
                if (better || (v2 == val && rc < rq)) {
                    q = std::move(cand);
                    val = v2;
                    rq = rc;
                }
            }
            out.feasible = true;
            if (dir == 0 && val < out.lower) {
                out.lower = val;
                out.residual_lower = rq;
            }
            if (dir == 1 && val > out.upper) {
                out.upper = val;
                out.residual_upper = rq;
            }
        }
    }
    if (!out.feasible)
        throw std::runtime_error("brute_force_bounds: no compatible chances found");
    return out;
}

} // namespace cfb
