#include "cfb/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "cfb/query.hpp"

namespace cfb {

namespace {

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

int sample_pmf(const std::vector<double>& pmf, Rng& rng) {
    double x = rng.next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        if (x < acc) return static_cast<int>(i);
    }
    return static_cast<int>(pmf.size()) - 1;
}

std::map<VarId, int> sample_exo(const Fscm& truth, Rng& rng) {
    std::map<VarId, int> st;
    for (VarId u : truth.model.exogenous())
        st[u] = sample_pmf(truth.exo_pmfs.at(u).rows.at(0), rng);
    return st;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return std::nan("");
    std::sort(xs.begin(), xs.end());
    double pos = q * static_cast<double>(xs.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, xs.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

} // namespace

double relative_shrink(const Range& base, const Range& refined) {
    if (base.width() <= 0.0)
        throw std::invalid_argument("relative_shrink: zero-width base range");
    return 1.0 - refined.width() / base.width();
}

std::optional<std::pair<double, double>> normalized_bias_effect(const Range& biased,
                                                                const Range& unbiased) {
    double lower_norm = unbiased.lower - 0.0;
    double upper_norm = 1.0 - unbiased.upper;
    if (lower_norm <= 0.0 || upper_norm <= 0.0) return std::nullopt;
    return std::make_pair(std::abs(biased.lower - unbiased.lower) / lower_norm,
                          std::abs(biased.upper - unbiased.upper) / upper_norm);
}

Pscm sample_er_pscm(const BenchConfig& config, Rng& rng) {
    if (config.n_endogenous_min < 2 || config.n_endogenous_max < config.n_endogenous_min)
        throw std::invalid_argument("sample_er_pscm: bad endogenous range");
    if (config.max_exo_card < 2) throw std::invalid_argument("sample_er_pscm: bad exo card");

    for (int attempt = 0; attempt < 500; ++attempt) {
        int target = config.n_endogenous_min +
                     static_cast<int>(rng.next_below(static_cast<std::size_t>(
                         config.n_endogenous_max - config.n_endogenous_min + 1)));
        int m = target + std::max(2, target / 3);

        // Arcs go low index -> high index, so the graph is a DAG.
        std::vector<std::vector<int>> parents(static_cast<std::size_t>(m));
        for (int j = 1; j < m; ++j)
            for (int i = 0; i < j; ++i)
                if (rng.next_double() < config.edge_probability)
                    parents[static_cast<std::size_t>(j)].push_back(i);

        std::vector<bool> is_root(static_cast<std::size_t>(m), false);
        int n_endo = 0;
        for (int j = 0; j < m; ++j) {
            is_root[static_cast<std::size_t>(j)] = parents[static_cast<std::size_t>(j)].empty();
            if (!is_root[static_cast<std::size_t>(j)]) ++n_endo;
        }
        if (n_endo < config.n_endogenous_min || n_endo > config.n_endogenous_max) continue;

        Pscm model;
        std::vector<VarId> id_of(static_cast<std::size_t>(m), -1);
        for (int j = 0; j < m; ++j) {
            VarId id = static_cast<VarId>(model.vars.size());
            id_of[static_cast<std::size_t>(j)] = id;
            Variable var;
            if (is_root[static_cast<std::size_t>(j)]) {
                int card = 2 << rng.next_below(3); // {2, 4, 8}
                card = std::min(card, config.max_exo_card);
                var = {"U" + std::to_string(j), card, Kind::exogenous};
            } else {
                var = {"V" + std::to_string(j), 2, Kind::endogenous};
            }
            model.vars.push_back(var);
            model.equations.emplace_back();
        }

        for (int j = 0; j < m; ++j) {
            if (is_root[static_cast<std::size_t>(j)]) continue;
            std::vector<VarId> endo_parents, exo_parents;
            for (int p : parents[static_cast<std::size_t>(j)]) {
                VarId pid = id_of[static_cast<std::size_t>(p)];
                (is_root[static_cast<std::size_t>(p)] ? exo_parents : endo_parents).push_back(pid);
            }
            // Bounded fan-in keeps factor tables and components tractable.
            while (static_cast<int>(endo_parents.size()) > config.max_endo_indegree)
                endo_parents.erase(endo_parents.begin() +
                                   static_cast<std::ptrdiff_t>(rng.next_below(endo_parents.size())));
            while (exo_parents.size() > 2)
                exo_parents.erase(exo_parents.begin() +
                                  static_cast<std::ptrdiff_t>(rng.next_below(exo_parents.size())));
            if (exo_parents.empty()) {
                // A mechanism needs exogenous input; give it a fresh root.
                VarId u = static_cast<VarId>(model.vars.size());
                int card = 2 << rng.next_below(3);
                card = std::min(card, config.max_exo_card);
                model.vars.push_back({"U" + std::to_string(j) + "f", card, Kind::exogenous});
                model.equations.emplace_back();
                exo_parents.push_back(u);
            }

            VarId child = id_of[static_cast<std::size_t>(j)];
            StructuralEquation eq;
            eq.child = child;
            eq.parents = exo_parents;
            eq.parents.insert(eq.parents.end(), endo_parents.begin(), endo_parents.end());

            std::size_t n_exo_cfg = 1;
            for (VarId u : exo_parents) n_exo_cfg *= static_cast<std::size_t>(model.card(u));
            std::size_t n_endo_cfg = 1;
            for (VarId w : endo_parents) n_endo_cfg *= static_cast<std::size_t>(model.card(w));

            // One deterministic endogenous-parents -> child relation per
            // joint exogenous state, distinct when the function space
            // allows it.
            for (int tries = 0; tries < 200; ++tries) {
                std::set<std::vector<int>> seen;
                eq.table.clear();
                bool saw0 = false, saw1 = false;
                for (std::size_t e = 0; e < n_exo_cfg; ++e) {
                    std::vector<int> fn(n_endo_cfg);
                    for (int inner = 0; inner < 100; ++inner) {
                        for (auto& x : fn) x = static_cast<int>(rng.next_below(2));
                        if (seen.insert(fn).second) break;
                        if (seen.size() >= (n_endo_cfg >= 6 ? n_exo_cfg
                                                            : (1u << n_endo_cfg)))
                            break; // space exhausted; repeats allowed
                    }
                    for (int x : fn) {
                        eq.table.push_back(x);
                        (x ? saw1 : saw0) = true;
                    }
                }
                if (saw0 && saw1) break; // surjective onto {0,1}
            }
            model.equations[static_cast<std::size_t>(child)] = std::move(eq);
        }
        if (validate_pscm(model).empty()) return model;
    }
    throw std::runtime_error("sample_er_pscm: could not sample a valid model");
}

std::optional<Roles> choose_roles(const Pscm& model) {
    // Endogenous children per exogenous variable.
    std::map<VarId, std::vector<VarId>> exo_children;
    for (VarId v : model.endogenous())
        for (VarId u : model.exo_parents_of(v)) exo_children[u].push_back(v);

    std::vector<VarId> order;
    for (VarId v : model.topological_order())
        if (model.kind(v) == Kind::endogenous) order.push_back(v);

    std::map<VarId, std::vector<VarId>> endo_children;
    std::set<VarId> has_child;
    for (VarId v : model.endogenous())
        for (VarId w : model.endo_parents_of(v)) {
            endo_children[w].push_back(v);
            has_child.insert(w);
        }

    for (VarId input : order) {
        bool confounded = false;
        for (VarId u : model.exo_parents_of(input))
            if (exo_children[u].size() > 1) confounded = true;
        if (!confounded) continue;

        // Shortest endogenous paths from the input; a leaf two or more
        // arcs away provides the covariate/target pair.
        std::map<VarId, VarId> pred;
        std::map<VarId, int> dist;
        std::vector<VarId> queue{input};
        dist[input] = 0;
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            VarId v = queue[qi];
            for (VarId w : endo_children[v])
                if (!dist.count(w)) {
                    dist[w] = dist[v] + 1;
                    pred[w] = v;
                    queue.push_back(w);
                }
        }
        for (VarId leaf : queue) {
            if (has_child.count(leaf) || dist[leaf] < 2) continue;
            VarId covariate = leaf;
            while (pred.at(covariate) != input) covariate = pred.at(covariate);
            return Roles{input, covariate, leaf};
        }
    }
    return std::nullopt;
}

Fscm sample_ground_truth(const Pscm& model, Rng& rng) {
    Fscm truth;
    truth.model = model;
    for (VarId u : model.exogenous())
        truth.exo_pmfs[u] = ExoPmf{{rng.next_simplex(static_cast<std::size_t>(model.card(u)))}};
    return truth;
}

SampledStudies sample_datasets(const Fscm& truth, const Roles& roles, const BenchConfig& config,
                               Rng& rng) {
    const Pscm& model = truth.model;
    std::vector<VarId> endo = model.endogenous();
    const int n = config.dataset_size;

    auto record = [&](const std::map<VarId, int>& interv) {
        auto st = simulate_do(model, sample_exo(truth, rng), interv);
        Dataset::Row row;
        for (VarId v : endo) row.states.push_back(st.at(v));
        return row;
    };

    SampledStudies out;
    out.d_o.dataset.columns = endo;
    for (int i = 0; i < n; ++i) out.d_o.dataset.rows.push_back(record({}));
    out.d_o.dataset = out.d_o.dataset.aggregated();

    out.d_i.dataset.columns = endo;
    out.d_i.intervened_vars = {roles.input};
    for (int i = 0; i < n; ++i) out.d_i.dataset.rows.push_back(record({{roles.input, i % 2}}));
    out.d_i.dataset = out.d_i.dataset.aggregated();

    out.d_ib_complete.columns = endo;
    for (int i = 0; i < n; ++i)
        out.d_ib_complete.rows.push_back(record({{roles.covariate, i % 2}}));
    out.d_ib_complete = out.d_ib_complete.aggregated();

    // Random selector over {input, covariate, target}, rejection-sampled
    // into the pre-selection band.
    std::set<VarId> scope_set{roles.input, roles.covariate, roles.target};
    Selector sel;
    sel.scope.assign(scope_set.begin(), scope_set.end());
    std::vector<int> cards;
    std::size_t n_cfg = 1;
    for (VarId v : sel.scope) {
        cards.push_back(model.card(v));
        n_cfg *= static_cast<std::size_t>(model.card(v));
    }
    std::vector<int> cols;
    for (VarId v : sel.scope) cols.push_back(out.d_ib_complete.column_of(v));

    bool found = false;
    for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
        sel.table.assign(n_cfg, 0);
        for (auto& x : sel.table) x = static_cast<int>(rng.next_below(2));
        double kept = 0.0;
        for (const auto& row : out.d_ib_complete.rows) {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < cols.size(); ++i)
                idx = idx * static_cast<std::size_t>(cards[i]) +
                      static_cast<std::size_t>(row.states[static_cast<std::size_t>(cols[i])]);
            if (sel.table[idx]) kept += row.count;
        }
        out.p_s1 = kept / out.d_ib_complete.total_count();
        found = out.p_s1 >= config.selector_band_lo && out.p_s1 <= config.selector_band_hi;
    }
    if (!found) throw std::runtime_error("sample_datasets: selector band unsatisfiable");

    out.d_ib.intervened_vars = {roles.covariate};
    out.d_ib.selector = sel;
    out.d_ib.dataset.columns = endo;
    int cov_col = out.d_ib_complete.column_of(roles.covariate);
    for (const auto& row : out.d_ib_complete.rows) {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < cols.size(); ++i)
            idx = idx * static_cast<std::size_t>(cards[i]) +
                  static_cast<std::size_t>(row.states[static_cast<std::size_t>(cols[i])]);
        Dataset::Row r = row;
        if (!sel.table[idx]) {
            // Masked record: only the administered intervention is known.
            for (std::size_t i = 0; i < r.states.size(); ++i)
                if (static_cast<int>(i) != cov_col) r.states[i] = kMissing;
        }
        out.d_ib.dataset.rows.push_back(std::move(r));
    }
    out.d_ib.dataset = out.d_ib.dataset.aggregated();
    return out;
}

namespace {

Range stage_range(const Pscm& model, std::vector<StudySpec> studies, const QuerySpec& query,
                  const BenchConfig& config, std::uint64_t seed) {
    MergedDataset merged = merge_studies(model, studies);
    AuxiliaryModel aux = build_auxiliary(model, merged, studies);
    attach_local_chances(aux, merged, studies);

    EmccConfig em;
    em.runs = config.runs;
    em.max_iterations = config.max_iterations;
    em.seed = seed;
    em.threads = 1;
    em.classify_against_best = true;
    CompatibleSet set = emcc(aux.model, merged.data, em);
    QueryResult res = counterfactual_range(set, aux, query);
    return Range{res.lower, res.upper};
}

ExperimentRecord run_one_model(const BenchConfig& config, int model_id) {
    ExperimentRecord rec;
    rec.model_id = model_id;
    std::uint64_t model_seed = split_seed(config.seed, static_cast<std::uint64_t>(model_id));
    Rng rng(model_seed);

    try {
        Pscm model;
        Roles roles;
        SampledStudies studies;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            model = sample_er_pscm(config, rng);
            auto r = choose_roles(model);
            if (!r) continue;
            roles = *r;
            Fscm truth = sample_ground_truth(model, rng);
            try {
                studies = sample_datasets(truth, roles, config, rng);
            } catch (const std::runtime_error&) {
                continue;
            }
            ok = true;
        }
        if (!ok) {
            rec.note = "no qualifying model";
            return rec;
        }
        rec.n_endogenous = static_cast<int>(model.endogenous().size());
        rec.roles = roles;
        rec.p_s1 = studies.p_s1;

        QuerySpec query = make_pns(roles.input, roles.target);
        std::vector<VarId> covariate_exo = model.exo_parents_of(roles.covariate);

        const std::vector<std::vector<const StudySpec*>> orderings = {
            {&studies.d_ib, &studies.d_o, &studies.d_i},
            {&studies.d_i, &studies.d_o, &studies.d_ib}};
        const char* names[2] = {"A", "B"};

        std::uint64_t stage_idx = 0;
        for (int o = 0; o < 2; ++o) {
            for (int variant = 0; variant < 2; ++variant) {
                Range prev;
                for (int stage = 1; stage <= 3; ++stage) {
                    std::vector<StudySpec> picked;
                    for (int i = 0; i < stage; ++i) {
                        StudySpec s = *orderings[static_cast<std::size_t>(o)][static_cast<std::size_t>(i)];
                        if (variant == 1) s.local_chance_vars = covariate_exo;
                        picked.push_back(std::move(s));
                    }
                    std::string key = std::string(names[o]) + std::to_string(stage) +
                                      (variant ? "_local" : "_global");
                    Range r = stage_range(model, picked, query, config,
                                          split_seed(model_seed, 1000 + stage_idx++));
                    rec.ranges[key] = r;
                    if (stage > 1 && prev.width() > 0.0)
                        rec.shrinks[key] = relative_shrink(prev, r);
                    prev = r;
                }
            }
        }

        // Bias-effect baseline: the same interventional records without
        // any masking.
        StudySpec unbiased;
        unbiased.dataset = studies.d_ib_complete;
        unbiased.intervened_vars = {roles.covariate};
        Range base = stage_range(model, {unbiased}, query, config,
                                 split_seed(model_seed, 999));
        rec.ranges["U1_global"] = base;
        if (auto eff = normalized_bias_effect(rec.ranges.at("A1_global"), base)) {
            rec.bias_effect_lower = eff->first;
            rec.bias_effect_upper = eff->second;
        }
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.note = e.what();
    }
    return rec;
}

} // namespace

std::vector<ExperimentRecord> run_fusion_experiment(const BenchConfig& config) {
    std::vector<ExperimentRecord> records(static_cast<std::size_t>(config.n_models));
    int n_threads = config.threads > 0
                        ? config.threads
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min(n_threads, config.n_models);
    if (n_threads <= 1) {
        for (int i = 0; i < config.n_models; ++i) records[static_cast<std::size_t>(i)] =
            run_one_model(config, i);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t] {
                for (int i = t; i < config.n_models; i += n_threads)
                    records[static_cast<std::size_t>(i)] = run_one_model(config, i);
            });
        for (auto& th : pool) th.join();
    }
    return records;
}

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
    static const char* stage_keys[] = {"A1_global", "A2_global", "A3_global", "A1_local",
                                       "A2_local",  "A3_local",  "B1_global", "B2_global",
                                       "B3_global", "B1_local",  "B2_local",  "B3_local",
                                       "U1_global"};
    static const char* shrink_keys[] = {"A2_global", "A3_global", "A2_local", "A3_local",
                                        "B2_global", "B3_global", "B2_local", "B3_local"};
    std::ostringstream out;
    out << "model_id,n_endogenous,input,covariate,target,p_s1,ok,note";
    for (const char* k : stage_keys) out << "," << k << "_lo," << k << "_hi";
    for (const char* k : shrink_keys) out << ",shrink_" << k;
    out << ",bias_effect_lower,bias_effect_upper\n";
    for (const auto& r : records) {
        out << r.model_id << "," << r.n_endogenous << "," << r.roles.input << ","
            << r.roles.covariate << "," << r.roles.target << "," << fmt(r.p_s1) << ","
            << (r.ok ? 1 : 0) << "," << r.note;
        for (const char* k : stage_keys) {
            auto it = r.ranges.find(k);
            if (it == r.ranges.end())
                out << ",,";
            else
                out << "," << fmt(it->second.lower) << "," << fmt(it->second.upper);
        }
        for (const char* k : shrink_keys) {
            auto it = r.shrinks.find(k);
            out << ",";
            if (it != r.shrinks.end()) out << fmt(it->second);
        }
        out << ",";
        if (r.bias_effect_lower >= 0.0) out << fmt(r.bias_effect_lower);
        out << ",";
        if (r.bias_effect_upper >= 0.0) out << fmt(r.bias_effect_upper);
        out << "\n";
    }
    return out.str();
}

std::string summary_to_json(const std::vector<ExperimentRecord>& records) {
    nlohmann::json j;
    int n_ok = 0;
    for (const auto& r : records)
        if (r.ok) ++n_ok;
    j["n_models"] = records.size();
    j["n_ok"] = n_ok;

    static const char* shrink_keys[] = {"A2_global", "A3_global", "A2_local", "A3_local",
                                        "B2_global", "B3_global", "B2_local", "B3_local"};
    for (const char* k : shrink_keys) {
        std::vector<double> xs;
        for (const auto& r : records) {
            auto it = r.shrinks.find(k);
            if (r.ok && it != r.shrinks.end()) xs.push_back(it->second);
        }
        nlohmann::json js;
        js["n"] = xs.size();
        js["median"] = quantile(xs, 0.5);
        js["q1"] = quantile(xs, 0.25);
        js["q3"] = quantile(xs, 0.75);
        j["shrink"][k] = js;
    }

    // Bias effect binned by the achieved selection level.
    const double edges[5] = {0.25, 0.375, 0.5, 0.625, 0.75};
    for (int b = 0; b < 4; ++b) {
        std::vector<double> lo, hi;
        for (const auto& r : records) {
            if (!r.ok || r.bias_effect_lower < 0.0) continue;
            bool last = b == 3;
            if (r.p_s1 >= edges[b] && (r.p_s1 < edges[b + 1] || (last && r.p_s1 <= edges[4]))) {
                lo.push_back(r.bias_effect_lower);
                hi.push_back(r.bias_effect_upper);
            }
        }
        nlohmann::json jb;
        jb["p_s1_bin"] = {edges[b], edges[b + 1]};
        jb["n"] = lo.size();
        jb["median_lower_effect"] = quantile(lo, 0.5);
        jb["median_upper_effect"] = quantile(hi, 0.5);
        j["bias_effect_bins"].push_back(jb);
    }
    return j.dump(2) + "\n";
}

} // namespace cfb
