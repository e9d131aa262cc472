// Acceptance gate: twelve scenario criteria with pinned tolerances.
// Each criterion prints exactly one PASS/FAIL line; the exit code is
// the number of failed criteria. Run with criterion numbers as
// arguments to execute a subset, e.g. `cfb_acceptance 6 9`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cfb/bench.hpp"
#include "cfb/em.hpp"
#include "cfb/fusion.hpp"
#include "cfb/inference.hpp"
#include "cfb/io.hpp"
#include "cfb/model.hpp"
#include "cfb/oracle.hpp"
#include "cfb/query.hpp"
#include "cfb/rng.hpp"
#include "support.hpp"

#ifndef CFB_CLI_PATH
#error "CFB_CLI_PATH must point at the built command-line binary"
#endif

using namespace cfb;
using namespace cfb::test;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("criterion %2d [%s] %s  (%s)\n", id, name, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool near(double x, double want, double tol) { return std::abs(x - want) <= tol; }

// ---------------------------------------------------------------------------
// Criteria 1-5 and 12: the worked examples on the drug-trial model.
// All five fits share one configuration; criterion 12 recomputes them
// and compares the serialized result files byte for byte.

struct ExampleFit {
    std::string name;
    QueryResult result;
    std::string file; // serialized result, for the determinism check
};

std::vector<StudySpec> example_studies(int example) {
    ModelDoc doc = drug_trial_doc();
    Selector sel = biased_study_selector();
    BiasedDataset split = partition_by_selector(observational_study(), doc.model, sel);
    StudySpec obs{observational_study(), {}, std::nullopt, 0.0, {}};
    StudySpec biased{split.selected, {}, sel, split.n_unselected, {}};
    StudySpec intv{interventional_study(), {kTreatment}, std::nullopt, 0.0, {}};
    StudySpec biased_local = biased;
    biased_local.local_chance_vars = {doc.model.find("U2")};
    switch (example) {
        case 1: return {obs};
        case 2: return {biased};
        case 4: return {obs, intv};
        case 5: return {biased, intv};
        default: return {biased_local, intv};
    }
}

ExampleFit fit_example(int example) {
    ModelDoc doc = drug_trial_doc();
    EmccConfig cfg;
    cfg.runs = 300;
    cfg.seed = 10;
    cfg.max_iterations = 2000;
    cfg.threads = 0;
    FusedFit f = fit_fused(doc.model, example_studies(example), cfg);
    ExampleFit out;
    out.name = "example" + std::to_string(example);
    out.result = counterfactual_range(f.set, f.aux, pns_treatment_survival());
    out.file = query_result_to_json(out.result, out.name, cfg.seed);
    return out;
}

std::map<int, ExampleFit> g_examples; // filled by criteria 1-5, reused by 12

const ExampleFit& example_fit(int example) {
    auto it = g_examples.find(example);
    if (it == g_examples.end()) it = g_examples.emplace(example, fit_example(example)).first;
    return it->second;
}

void check_example(int id, const char* name, int example, double want_lo, double want_hi,
                   double tol) {
    auto t0 = std::chrono::steady_clock::now();
    const ExampleFit& f = example_fit(example);
    std::ostringstream d;
    d.precision(4);
    d << std::fixed << "range [" << f.result.lower << ", " << f.result.upper << "] vs ["
      << want_lo << ", " << want_hi << "] tol " << tol << ", " << seconds_since(t0) << "s";
    bool pass = near(f.result.lower, want_lo, tol) && near(f.result.upper, want_hi, tol) &&
                seconds_since(t0) <= 300.0;
    if (example == 6) {
        const ExampleFit& prev = example_fit(5);
        double w5 = prev.result.upper - prev.result.lower;
        double w6 = f.result.upper - f.result.lower;
        d << ", width " << w6 << " vs " << w5;
        pass = pass && w6 > w5;
    }
    report(id, name, pass, d.str());
}

// ---------------------------------------------------------------------------
// Criterion 6: brute-force oracle on the two-variable model, full and
// with one exogenous state removed, against the EM ranges.

void criterion_6() {
    ModelDoc doc = pair_doc();
    QuerySpec q = make_pns(0, 1, /*cause_true=*/0, /*cause_false=*/1,
                           /*effect_true=*/0, /*effect_false=*/1);
    Dataset d = pair_observational();
    Pscm reduced = remove_exo_state(doc.model, doc.model.find("U"), 4);

    OracleBounds o_full = brute_force_bounds(doc.model, d, q);
    OracleBounds o_red = brute_force_bounds(reduced, d, q);

    EmccConfig cfg;
    cfg.runs = 300;
    cfg.seed = 11;
    cfg.max_iterations = 2000;
    cfg.threads = 0;
    QueryResult r_full = counterfactual_range(emcc(doc.model, d, cfg), q);
    QueryResult r_red = counterfactual_range(emcc(reduced, d, cfg), q);

    bool pass = o_full.feasible && o_red.feasible;
    pass = pass && near(o_full.lower, 0.00, 0.01) && near(o_full.upper, 0.43, 0.01);
    pass = pass && near(o_red.lower, 0.00, 0.01) && near(o_red.upper, 0.09, 0.01);
    pass = pass && r_full.lower >= o_full.lower - 0.01 && r_full.upper <= o_full.upper + 0.01;
    pass = pass && r_red.lower >= o_red.lower - 0.01 && r_red.upper <= o_red.upper + 0.01;

    std::ostringstream det;
    det.precision(4);
    det << std::fixed << "oracle [" << o_full.lower << ", " << o_full.upper << "] / ["
        << o_red.lower << ", " << o_red.upper << "], em [" << r_full.lower << ", "
        << r_full.upper << "] / [" << r_red.lower << ", " << r_red.upper << "]";
    report(6, "oracle-pair", pass, det.str());
}

// ---------------------------------------------------------------------------
// Criterion 7: interventional-only fit; every converged run's PNS for
// the male stratum must land in the reference interval.

void criterion_7() {
    ModelDoc doc = drug_trial_doc();
    StudySpec intv{interventional_study(), {kTreatment}, std::nullopt, 0.0, {}};
    QuerySpec q = pns_treatment_survival();
    q.evidence.push_back({0, kGender, /*male=*/1});

    EmccConfig cfg;
    cfg.runs = 100;
    cfg.seed = 7;
    cfg.max_iterations = 3000;
    cfg.status_rel_tolerance = 1e-5; // the stratum bounds are point-identified
    cfg.threads = 0;
    FusedFit f = fit_fused(doc.model, {intv}, cfg);
    QueryResult r = counterfactual_range(f.set, f.aux, q);

    int used = 0;
    bool pass = true;
    double lo = 2.0, hi = -1.0;
    for (const auto& pr : r.per_run) {
        if (pr.status != RunStatus::global_max || !pr.defined) continue;
        ++used;
        lo = std::min(lo, pr.value);
        hi = std::max(hi, pr.value);
        pass = pass && pr.value >= 0.28 - 0.02 && pr.value <= 0.49 + 0.02;
    }
    pass = pass && used > 0;
    std::ostringstream det;
    det.precision(4);
    det << std::fixed << "per-run values in [" << lo << ", " << hi << "], " << used
        << " converged runs vs [0.26, 0.51]";
    report(7, "male-stratum", pass, det.str());
}

// ---------------------------------------------------------------------------
// Criterion 8/9 support: random small canonical models and datasets.

Pscm random_small_model(Rng& rng) {
    for (;;) {
        int n = 2 + static_cast<int>(rng.next_below(2)); // 2 or 3 endogenous
        CausalGraph g;
        g.n = n;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (rng.next_double() < 0.5) g.arcs.push_back({a, b});
        std::vector<std::string> names, exo;
        std::vector<int> cards;
        for (int i = 0; i < n; ++i) {
            names.push_back("V" + std::to_string(i));
            cards.push_back(2);
            exo.push_back("U" + std::to_string(i));
        }
        // Half of the models share one exogenous parent between two
        // endogenous variables, giving a proper c-component.
        if (rng.next_double() < 0.5) {
            int a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
            int b = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
            if (a != b) exo[static_cast<std::size_t>(b)] = exo[static_cast<std::size_t>(a)];
        }
        Pscm m;
        try {
            m = build_canonical_pscm(g, names, cards, exo);
        } catch (const std::exception&) {
            continue;
        }
        std::int64_t joint = 1;
        bool small = true;
        for (VarId u : m.exogenous()) {
            if (m.card(u) > 256) small = false;
            joint *= m.card(u);
        }
        if (!small || joint > 20000) continue;
        if (!validate_pscm(m).empty()) continue;
        return m;
    }
}

Fscm random_fscm(const Pscm& model, Rng& rng) {
    Fscm f;
    f.model = model;
    for (VarId u : model.exogenous()) f.exo_pmfs[u] = ExoPmf{{rng.next_simplex(model.card(u))}};
    return f;
}

// Exact expected counts of the endogenous joint at sample size n.
Dataset expected_dataset(const Fscm& truth, double n) {
    std::vector<VarId> exo = truth.model.exogenous();
    std::vector<VarId> endo = truth.model.endogenous();
    std::map<std::vector<int>, double> mass;
    std::vector<int> u_state(exo.size(), 0);
    for (;;) {
        double p = 1.0;
        std::map<VarId, int> assign;
        for (std::size_t i = 0; i < exo.size(); ++i) {
            p *= truth.exo_pmfs.at(exo[i]).rows[0][static_cast<std::size_t>(u_state[i])];
            assign[exo[i]] = u_state[i];
        }
        std::map<VarId, int> sim = truth.model.simulate(assign);
        std::vector<int> key;
        for (VarId v : endo) key.push_back(sim.at(v));
        mass[key] += p;
        std::size_t i = 0;
        for (; i < exo.size(); ++i) {
            if (++u_state[i] < truth.model.card(exo[i])) break;
            u_state[i] = 0;
        }
        if (i == exo.size()) break;
    }
    Dataset d;
    d.columns = endo;
    for (const auto& [key, p] : mass)
        if (p > 1e-12) d.rows.push_back({key, p * n});
    return d;
}

Dataset sampled_dataset(const Fscm& truth, int n, Rng& rng) {
    std::vector<VarId> exo = truth.model.exogenous();
    std::vector<VarId> endo = truth.model.endogenous();
    Dataset d;
    d.columns = endo;
    for (int i = 0; i < n; ++i) {
        std::map<VarId, int> assign;
        for (VarId u : exo) {
            double x = rng.next_double(), acc = 0.0;
            int s = 0;
            const auto& pmf = truth.exo_pmfs.at(u).rows[0];
            for (; s + 1 < static_cast<int>(pmf.size()); ++s) {
                acc += pmf[static_cast<std::size_t>(s)];
                if (x < acc) break;
            }
            assign[u] = s;
        }
        std::map<VarId, int> sim = truth.model.simulate(assign);
        std::vector<int> key;
        for (VarId v : endo) key.push_back(sim.at(v));
        d.rows.push_back({key, 1.0});
    }
    return d.aggregated();
}

// Random scope-1 selector that keeps a nonempty strict subset of the data.
std::optional<Selector> random_selector(const Pscm& model, const Dataset& data, Rng& rng) {
    std::vector<VarId> endo = model.endogenous();
    for (int attempt = 0; attempt < 8; ++attempt) {
        Selector sel;
        sel.scope = {endo[rng.next_below(endo.size())]};
        int keep = static_cast<int>(rng.next_below(2));
        sel.table.assign(static_cast<std::size_t>(model.card(sel.scope[0])), 0);
        sel.table[static_cast<std::size_t>(keep)] = 1;
        BiasedDataset b = partition_by_selector(data, model, sel);
        if (!b.selected.rows.empty() && b.n_unselected > 0) return sel;
    }
    return std::nullopt;
}

// Largest per-stratum total-variation distance between the model
// conditionals P(V | W_V) and the data frequencies.
double max_stratum_tv(const Fscm& fscm, const Dataset& data) {
    CComponentDecomposition dec = c_components(fscm.model);
    double worst = 0.0;
    for (const auto& comp : dec.components) {
        for (VarId v : comp.endo) {
            const std::vector<VarId>& wv = comp.predecessors.at(v);
            std::vector<std::size_t> col_of;
            for (VarId w : wv) {
                auto it = std::find(data.columns.begin(), data.columns.end(), w);
                col_of.push_back(static_cast<std::size_t>(it - data.columns.begin()));
            }
            auto vit = std::find(data.columns.begin(), data.columns.end(), v);
            std::size_t vcol = static_cast<std::size_t>(vit - data.columns.begin());
            std::map<std::vector<int>, std::vector<double>> counts;
            for (const auto& row : data.rows) {
                std::vector<int> ctx;
                for (std::size_t c : col_of) ctx.push_back(row.states[c]);
                auto& cell = counts[ctx];
                cell.resize(static_cast<std::size_t>(fscm.model.card(v)), 0.0);
                cell[static_cast<std::size_t>(row.states[vcol])] += row.count;
            }
            for (const auto& [ctx, cell] : counts) {
                double n_ctx = 0.0;
                for (double c : cell) n_ctx += c;
                std::map<VarId, int> cond;
                for (std::size_t i = 0; i < wv.size(); ++i) cond[wv[i]] = ctx[i];
                double p_ctx = assignment_probability(fscm, cond);
                double tv = 0.0;
                for (int s = 0; s < fscm.model.card(v); ++s) {
                    cond[v] = s;
                    double p = p_ctx > 1e-12
                                   ? assignment_probability(fscm, cond) / p_ctx
                                   : 1.0 / fscm.model.card(v);
                    tv += std::abs(p - cell[static_cast<std::size_t>(s)] / n_ctx);
                }
                worst = std::max(worst, 0.5 * tv);
            }
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Criterion 8: EM properties on 200 random model/dataset pairs: the
// likelihood trace never decreases, no run exceeds the theoretical
// maximum, and runs that reach the maximum on data generated inside the
// family reproduce the empirical conditionals per stratum.

void criterion_8() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    int n_pairs = 0, n_monotone_fail = 0, n_bound_fail = 0;
    int n_family = 0, n_family_converged = 0, n_tv_fail = 0;
    double worst_tv = 0.0;

    auto check_runs = [&](const CompatibleSet& set) {
        for (const auto& r : set.results) {
            for (std::size_t i = 1; i < r.ll_trace.size(); ++i)
                if (r.ll_trace[i] < r.ll_trace[i - 1] - 1e-6) ++n_monotone_fail;
            if (!r.ll_trace.empty() && r.ll_trace.back() > set.ll_star + 1e-6) ++n_bound_fail;
        }
    };

    EmccConfig cfg;
    cfg.runs = 3;
    cfg.max_iterations = 800;
    cfg.ll_tolerance = 1e-9;
    cfg.status_rel_tolerance = 1e-7;
    cfg.init_alpha = 1.0;
    cfg.threads = 0;

    // 60 in-family pairs with exact expected counts at N = 1e4 (these
    // feed the per-stratum check), 60 finite samples, 80 biased pairs.
    for (int i = 0; i < 120; ++i) {
        Pscm model = random_small_model(rng);
        Fscm truth = random_fscm(model, rng);
        bool in_family = i < 60;
        Dataset d =
            in_family ? expected_dataset(truth, 1e4) : sampled_dataset(truth, 500, rng);
        cfg.seed = split_seed(99, static_cast<std::uint64_t>(i));
        CompatibleSet set = emcc(model, d, cfg);
        ++n_pairs;
        check_runs(set);
        if (!in_family) continue;
        ++n_family;
        bool converged = false;
        for (std::size_t r = 0; r < set.results.size(); ++r) {
            if (set.results[r].status != RunStatus::global_max) continue;
            converged = true;
            double tv = max_stratum_tv(set.fscm_of(r), d);
            worst_tv = std::max(worst_tv, tv);
            if (tv > 0.02) ++n_tv_fail;
        }
        if (converged) ++n_family_converged;
    }
    for (int i = 0; i < 80; ++i) {
        Pscm model = random_small_model(rng);
        Fscm truth = random_fscm(model, rng);
        Dataset complete = sampled_dataset(truth, 400, rng);
        std::optional<Selector> sel = random_selector(model, complete, rng);
        if (!sel) {
            complete = sampled_dataset(truth, 400, rng);
            sel = random_selector(model, complete, rng);
            if (!sel) continue;
        }
        auto [model_s, s_var] = embed_selector(model, *sel);
        BiasedDataset b = partition_by_selector(complete, model, *sel);
        Dataset unified = biased_to_records(model_s, s_var, b);
        cfg.seed = split_seed(77, static_cast<std::uint64_t>(i));
        CompatibleSet set = emcc(model_s, unified, cfg);
        ++n_pairs;
        check_runs(set);
    }

    double secs = seconds_since(t0);
    bool pass = n_pairs >= 195 && n_monotone_fail == 0 && n_bound_fail == 0 &&
                n_tv_fail == 0 && n_family_converged >= n_family / 2 && secs <= 900.0;
    std::ostringstream det;
    det.precision(4);
    det << n_pairs << " pairs, monotone fails " << n_monotone_fail << ", bound fails "
        << n_bound_fail << ", worst stratum tv " << std::fixed << worst_tv << " ("
        << n_family_converged << "/" << n_family << " converged), " << std::setprecision(0)
        << secs << "s";
    report(8, "em-properties", pass, det.str());
}

// ---------------------------------------------------------------------------
// Criterion 9: the biased likelihood equals the reduced pattern-table
// likelihood computed by exhaustive enumeration of the exogenous joint.

double enumerated_biased_ll(const Fscm& f, VarId s_var, const BiasedDataset& b) {
    std::vector<VarId> exo = f.model.exogenous();
    std::map<std::vector<int>, double> p_pattern;
    double p_masked = 0.0;
    std::vector<int> u_state(exo.size(), 0);
    for (;;) {
        double p = 1.0;
        std::map<VarId, int> assign;
        for (std::size_t i = 0; i < exo.size(); ++i) {
            p *= f.exo_pmfs.at(exo[i]).rows[0][static_cast<std::size_t>(u_state[i])];
            assign[exo[i]] = u_state[i];
        }
        std::map<VarId, int> sim = f.model.simulate(assign);
        if (sim.at(s_var) == 1) {
            std::vector<int> key;
            for (VarId v : b.selected.columns) key.push_back(sim.at(v));
            p_pattern[key] += p;
        } else {
            p_masked += p;
        }
        std::size_t i = 0;
        for (; i < exo.size(); ++i) {
            if (++u_state[i] < f.model.card(exo[i])) break;
            u_state[i] = 0;
        }
        if (i == exo.size()) break;
    }
    double ll = 0.0;
    for (const auto& row : b.selected.rows) {
        auto it = p_pattern.find(row.states);
        if (it == p_pattern.end() || it->second <= 0.0) return kNegInf;
        ll += row.count * std::log(it->second);
    }
    if (b.n_unselected > 0.0) {
        if (p_masked <= 0.0) return kNegInf;
        ll += b.n_unselected * std::log(p_masked);
    }
    return ll;
}

void criterion_9() {
    Rng rng(515);
    int n_instances = 0;
    double worst = 0.0;
    while (n_instances < 50) {
        Pscm model = random_small_model(rng);
        Fscm truth = random_fscm(model, rng);
        Dataset complete = sampled_dataset(truth, 300, rng);
        std::optional<Selector> sel = random_selector(model, complete, rng);
        if (!sel) continue;
        auto [model_s, s_var] = embed_selector(model, *sel);
        BiasedDataset b = partition_by_selector(complete, model, *sel);
        Fscm eval = random_fscm(model_s, rng);
        double a = log_likelihood_biased(eval, s_var, b);
        double o = enumerated_biased_ll(eval, s_var, b);
        worst = std::max(worst, std::abs(a - o));
        ++n_instances;
    }
    std::ostringstream det;
    det << "50 instances, worst |difference| " << std::scientific << worst;
    report(9, "biased-likelihood", worst <= 1e-9, det.str());
}

// ---------------------------------------------------------------------------
// Criterion 10: the bias sweep over decreasing selection levels yields
// non-decreasing range widths (0.02 slack), exercised through the CLI.

void criterion_10() {
    namespace fs = std::filesystem;
    std::string dir = (fs::temp_directory_path() / "cfb_acceptance_sweep").string();
    fs::create_directories(dir);
    ModelDoc doc = drug_trial_doc();
    write_file(dir + "/model.json", model_to_json(doc));
    write_file(dir + "/obs.csv", dataset_to_csv(observational_study(), doc));
    write_file(dir + "/studies.json", R"([{"dataset": "obs.csv"}])");
    write_file(dir + "/query.json",
               R"({"kind":"PNS","cause":"V1","effect":"V3",
                   "cause_true":"drug","cause_false":"no_drug",
                   "effect_true":"survived","effect_false":"dead"})");

    std::string cmd = std::string(CFB_CLI_PATH) + " bias-sweep --model " + dir +
                      "/model.json --studies " + dir + "/studies.json --query " + dir +
                      "/query.json --levels 1.0 0.75 0.5 0.25 --runs 120 --seed 3 "
                      "--out " + dir + " 2> /dev/null";
    int code = std::system(cmd.c_str());
    bool pass = WIFEXITED(code) && WEXITSTATUS(code) == 0;

    std::vector<double> widths;
    std::ostringstream det;
    det.precision(4);
    det << std::fixed;
    if (pass) {
        std::istringstream in(read_file(dir + "/sweep_ranges.csv"));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("level", 0) == 0) continue;
            double level, p_s1, lo, hi;
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &level, &p_s1, &lo, &hi) == 4)
                widths.push_back(hi - lo);
        }
        pass = widths.size() == 4;
        det << "widths";
        for (std::size_t i = 0; i < widths.size(); ++i) {
            det << (i ? ", " : " ") << widths[i];
            if (i > 0 && widths[i] < widths[i - 1] - 0.02) pass = false;
        }
    } else {
        det << "cli exit " << (WIFEXITED(code) ? WEXITSTATUS(code) : -1);
    }
    report(10, "bias-sweep", pass, det.str());
}

// ---------------------------------------------------------------------------
// Criterion 11: distributional check of the 50-model fusion batch.

double median_of(std::vector<double> xs) {
    if (xs.empty()) return std::nan("");
    std::sort(xs.begin(), xs.end());
    std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

void criterion_11() {
    auto t0 = std::chrono::steady_clock::now();
    BenchConfig cfg;
    cfg.n_models = 50;
    cfg.n_endogenous_max = 12; // desk-scale cap keeps the batch within budget
    cfg.runs = 8;
    cfg.max_iterations = 200;
    cfg.seed = 1;
    cfg.threads = 0;
    std::vector<ExperimentRecord> records = run_fusion_experiment(cfg);

    std::vector<double> shrinks;
    for (const auto& r : records) {
        auto it = r.shrinks.find("A2_global");
        if (r.ok && it != r.shrinks.end()) shrinks.push_back(it->second);
    }
    double med = median_of(shrinks);

    const double edges[5] = {0.25, 0.375, 0.5, 0.625, 0.75};
    std::vector<double> bin_median(4, std::nan(""));
    for (int b = 0; b < 4; ++b) {
        std::vector<double> xs;
        for (const auto& r : records) {
            if (!r.ok || r.bias_effect_lower < 0.0) continue;
            bool last = b == 3;
            if (r.p_s1 >= edges[b] && (r.p_s1 < edges[b + 1] || (last && r.p_s1 <= edges[4]))) {
                xs.push_back(r.bias_effect_lower);
                xs.push_back(r.bias_effect_upper);
            }
        }
        bin_median[static_cast<std::size_t>(b)] = median_of(xs);
    }

    double secs = seconds_since(t0);
    bool pass = !shrinks.empty() && med >= 0.4 && med <= 0.9 && secs <= 7200.0;
    double prev = std::numeric_limits<double>::infinity();
    std::ostringstream det;
    det.precision(3);
    det << std::fixed << "median shrink " << med << " (n=" << shrinks.size()
        << "), bias-effect medians";
    for (double m : bin_median) {
        det << " " << m;
        if (std::isnan(m)) continue; // empty bin: no constraint
        // Qualitative trend with the same slack as the bias sweep.
        if (m > prev + 0.02) pass = false;
        prev = m;
    }
    det << ", " << std::setprecision(0) << secs << "s";
    report(11, "fusion-batch", pass, det.str());
}

// ---------------------------------------------------------------------------
// Criterion 12: the example fits are deterministic: refitting with the
// same configuration reproduces the serialized result files exactly.

void criterion_12() {
    bool pass = true;
    std::string mismatch;
    for (int example : {1, 2, 4, 5, 6}) {
        const ExampleFit& first = example_fit(example);
        ExampleFit again = fit_example(example);
        if (first.file != again.file) {
            pass = false;
            mismatch += " example" + std::to_string(example);
        }
    }
    report(12, "determinism", pass,
           pass ? "five result files byte-identical on refit" : "mismatch:" + mismatch);
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto enabled = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

    if (enabled(1)) check_example(1, "example-1", 1, 0.00, 0.43, 0.03);
    if (enabled(2)) check_example(2, "example-2", 2, 0.00, 0.73, 0.04);
    if (enabled(3)) check_example(3, "example-4", 4, 0.32, 0.42, 0.03);
    if (enabled(4)) check_example(4, "example-5", 5, 0.27, 0.53, 0.04);
    if (enabled(5)) check_example(5, "example-6", 6, 0.20, 0.54, 0.04);
    if (enabled(6)) criterion_6();
    if (enabled(7)) criterion_7();
    if (enabled(8)) criterion_8();
    if (enabled(9)) criterion_9();
    if (enabled(10)) criterion_10();
    if (enabled(11)) criterion_11();
    if (enabled(12)) criterion_12();

    std::printf("%s: %d criterion(s) failed\n", g_failures ? "FAIL" : "OK", g_failures);
    return g_failures;
}
