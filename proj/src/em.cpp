#include "cfb/em.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <thread>

#include "cfb/inference.hpp"
#include "cfb/rng.hpp"

namespace cfb {

namespace {

// Shared per-dataset structure for the E-step. Everything cached here
// is independent of the exogenous chances, so one engine serves all r
// runs.
class EmEngine {
public:
    EmEngine(const Pscm& model, const Dataset& data)
        : model_(model), data_(data.aggregated()), dec_(c_components(model)) {
        endo_ = model_.endogenous();
        exo_ = model_.exogenous();
        build_row_cache();
    }

    const Pscm& model() const { return model_; }

    EmStep step(const ExoChances& theta) const {
        EmStep out;
        // Accumulators: per exogenous variable, per conditioning state.
        std::map<VarId, ExoPmf> acc;
        std::map<VarId, std::vector<double>> mass; // denominator per conditioning state
        for (VarId u : exo_) {
            std::size_t rows = cond_rows(u);
            acc[u].rows.assign(rows, std::vector<double>(static_cast<std::size_t>(model_.card(u)), 0.0));
            mass[u].assign(rows, 0.0);
        }

        double ll = 0.0;
        for (std::size_t ri = 0; ri < data_.rows.size(); ++ri) {
            const auto& row = data_.rows[ri];
            std::map<VarId, std::vector<double>> post;
            double row_ll;
            bool ok = row_cache_[ri].fast
                          ? fast_posterior(ri, theta, post, row_ll)
                          : ve_posterior(ri, theta, post, row_ll);
            if (!ok) {
                out.skipped_records = true;
                continue;
            }
            ll += row.count * row_ll;
            for (VarId u : exo_) {
                std::size_t slot = cond_slot(u, ri);
                auto& a = acc[u].rows[slot];
                const auto& p = post[u];
                for (std::size_t i = 0; i < a.size(); ++i) a[i] += row.count * p[i];
                mass[u][slot] += row.count;
            }
        }

        out.ll = ll;
        for (VarId u : exo_) {
            for (std::size_t j = 0; j < acc[u].rows.size(); ++j) {
                double m = mass[u][j];
                auto& r = acc[u].rows[j];
                if (m > 0.0) {
                    for (double& x : r) x /= m;
                } else {
                    // No record informs this conditioning slot; keep it where it was.
                    r = theta.at(u).rows[j];
                }
            }
            out.theta_next[u] = std::move(acc[u]);
        }
        return out;
    }

private:
    struct RowCache {
        bool fast = false;
        // Fast path: per component, the record-reduced indicator
        // factors (scopes over exogenous variables only).
        std::vector<std::vector<const Factor*>> comp_indicators;
        // VE path: the observation as evidence.
        std::map<VarId, int> evidence;
        // Conditioning slot per exogenous variable (0 when unconditioned).
        std::map<VarId, int> cond;
    };

    std::size_t cond_rows(VarId u) const {
        auto it = model_.exo_condition.find(u);
        return it == model_.exo_condition.end() ? 1u
                                                : static_cast<std::size_t>(model_.card(it->second));
    }

    std::size_t cond_slot(VarId u, std::size_t row_index) const {
        return static_cast<std::size_t>(row_cache_[row_index].cond.at(u));
    }

    Factor theta_factor(const ExoChances& theta, VarId u, int slot) const {
        return Factor({u}, {model_.card(u)}, theta.at(u).rows.at(static_cast<std::size_t>(slot)));
    }

    void build_row_cache() {
        row_cache_.resize(data_.rows.size());
        for (std::size_t ri = 0; ri < data_.rows.size(); ++ri) {
            const auto& row = data_.rows[ri];
            RowCache& rc = row_cache_[ri];
            rc.evidence = data_.row_assignment(row);

            bool complete = true;
            for (VarId v : endo_)
                if (!rc.evidence.count(v)) {
                    complete = false;
                    break;
                }
            rc.fast = complete;

            for (VarId u : exo_) {
                auto it = model_.exo_condition.find(u);
                if (it == model_.exo_condition.end()) {
                    rc.cond[u] = 0;
                } else {
                    auto ev = rc.evidence.find(it->second);
                    if (ev == rc.evidence.end())
                        throw std::runtime_error(
                            "record does not observe the chance-index variable");
                    rc.cond[u] = ev->second;
                }
            }
            if (!rc.fast) continue;

            rc.comp_indicators.resize(dec_.components.size());
            for (std::size_t ci = 0; ci < dec_.components.size(); ++ci)
                for (VarId v : dec_.components[ci].endo)
                    rc.comp_indicators[ci].push_back(indicator_for(v, rc.evidence));
        }
    }

    // Record-reduced indicator of one SE: scope = exogenous parents,
    // value 1 where the mechanism reproduces the observed child state.
    // Deduplicated across rows through a keyed cache.
    const Factor* indicator_for(VarId v, const std::map<VarId, int>& evidence) {
        const auto& eq = *model_.equations[static_cast<std::size_t>(v)];
        std::vector<int> key{v, evidence.at(v)};
        for (VarId p : eq.parents)
            if (model_.kind(p) == Kind::endogenous) key.push_back(evidence.at(p));
        auto it = indicator_cache_.find(key);
        if (it != indicator_cache_.end()) return it->second.get();

        std::vector<VarId> exo_parents;
        std::vector<int> cards;
        for (VarId p : eq.parents)
            if (model_.kind(p) == Kind::exogenous) {
                exo_parents.push_back(p);
                cards.push_back(model_.card(p));
            }
        auto f = std::make_unique<Factor>(exo_parents, cards);
        const std::size_t n = f->size();
        std::vector<int> state(exo_parents.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<int> ps;
            ps.reserve(eq.parents.size());
            std::size_t ei = 0;
            for (VarId p : eq.parents)
                ps.push_back(model_.kind(p) == Kind::endogenous ? evidence.at(p)
                                                                : state[ei++]);
            if (model_.se_child_state(v, ps) == evidence.at(v)) f->values[i] = 1.0;
            for (int d = static_cast<int>(state.size()) - 1; d >= 0; --d) {
                if (++state[static_cast<std::size_t>(d)] < cards[static_cast<std::size_t>(d)]) break;
                state[static_cast<std::size_t>(d)] = 0;
            }
        }
        const Factor* raw = f.get();
        indicator_cache_.emplace(std::move(key), std::move(f));
        return raw;
    }

    // Posterior over each component's exogenous variables from the
    // cached indicators; the per-component partition functions give the
    // record probability. Returns false on a zero-probability record.
    bool fast_posterior(std::size_t ri, const ExoChances& theta,
                        std::map<VarId, std::vector<double>>& post, double& row_ll) const {
        const RowCache& rc = row_cache_[ri];
        row_ll = 0.0;
        for (std::size_t ci = 0; ci < dec_.components.size(); ++ci) {
            const auto& comp = dec_.components[ci];
            if (comp.exo.empty()) continue;
            Factor joint = theta_factor(theta, comp.exo[0], rc.cond.at(comp.exo[0]));
            for (std::size_t k = 1; k < comp.exo.size(); ++k)
                joint = multiply(joint, theta_factor(theta, comp.exo[k], rc.cond.at(comp.exo[k])));
            for (const Factor* ind : rc.comp_indicators[ci]) joint = multiply(joint, *ind);

            double z = joint.total();
            if (z <= 0.0) return false;
            row_ll += std::log(z);
            for (VarId u : comp.exo) {
                Factor m = joint;
                while (m.scope.size() > 1 || (m.scope.size() == 1 && m.scope[0] != u)) {
                    VarId victim = m.scope[0] == u ? m.scope[1] : m.scope[0];
                    m = marginalize(m, victim);
                }
                for (double& x : m.values) x /= z;
                post[u] = std::move(m.values);
            }
        }
        return true;
    }

    // Generic path for masked records: posterior marginals by variable
    // elimination over the whole model.
    bool ve_posterior(std::size_t ri, const ExoChances& theta,
                      std::map<VarId, std::vector<double>>& post, double& row_ll) const {
        const RowCache& rc = row_cache_[ri];
        std::vector<Factor> fs;
        for (VarId v : endo_) fs.push_back(se_to_cpt(model_, v));
        for (VarId u : exo_) {
            auto cit = model_.exo_condition.find(u);
            if (cit == model_.exo_condition.end()) {
                fs.push_back(theta_factor(theta, u, 0));
            } else {
                // The index variable is observed, so the relevant
                // conditional column is already selected.
                fs.push_back(theta_factor(theta, u, rc.cond.at(u)));
            }
        }
        bool have_z = false;
        double z = 0.0;
        for (VarId u : exo_) {
            Factor m = variable_elimination(fs, {u}, rc.evidence);
            double t = m.total();
            if (!have_z) {
                z = t;
                have_z = true;
                if (z <= 0.0) return false;
                row_ll = std::log(z);
            }
            for (double& x : m.values) x /= t > 0.0 ? t : 1.0;
            post[u] = std::move(m.values);
        }
        return true;
    }

    const Pscm& model_;
    Dataset data_;
    CComponentDecomposition dec_;
    std::vector<VarId> endo_, exo_;
    std::vector<RowCache> row_cache_;
    std::map<std::vector<int>, std::unique_ptr<Factor>> indicator_cache_;
};

void jitter(ExoChances& theta, Rng& rng) {
    for (auto& [u, pmf] : theta) {
        for (auto& row : pmf.rows) {
            double total = 0.0;
            for (double& x : row) {
                x *= 1.0 + 0.01 * (2.0 * rng.next_double() - 1.0);
                total += x;
            }
            for (double& x : row) x /= total;
        }
    }
}

EmRunResult run_em_with(const EmEngine& engine, const ExoChances& init, const EmccConfig& config,
                        double ll_star, std::uint64_t restart_seed) {
    EmRunResult res;
    const double status_tol =
        std::max(config.ll_tolerance, config.status_rel_tolerance * std::abs(ll_star));

    bool saw_skip = false;
    ExoChances theta = init;
    bool restarted = false;

    while (true) {
        res.ll_trace.clear();
        double prev_ll = kNegInf;
        bool converged = false;
        for (int it = 0; it < config.max_iterations; ++it) {
            EmStep step = engine.step(theta);
            saw_skip = saw_skip || step.skipped_records;
            res.ll_trace.push_back(step.ll);
            ++res.iterations;
            // A run stops as soon as it enters the global-maximum
            // tolerance band: iterating further only slides the point
            // along the flat optimum, so the band defines the sampling
            // resolution of the compatible set.
            if (step.ll >= ll_star - status_tol) {
                converged = true;
                break;
            }
            if (step.ll - prev_ll <= config.ll_tolerance && it > 0) {
                converged = true;
                break;
            }
            prev_ll = step.ll;
            theta = std::move(step.theta_next);
        }
        double final_ll = res.ll_trace.empty() ? kNegInf : res.ll_trace.back();

        // Reaching the maximum outranks the stopping rule: a run that
        // is within tolerance of ll_star found the optimum even if the
        // per-iteration gain never dropped below the threshold (the
        // optimum can sit on the boundary of the feasible set, where
        // convergence is sublinear).
        if (final_ll >= ll_star - status_tol) {
            res.status = RunStatus::global_max;
        } else if (!converged) {
            res.status = RunStatus::max_iters;
        } else if (!restarted) {
            // A converged point below the maximum is an unstable
            // endpoint; one perturbed restart before labeling it.
            restarted = true;
            Rng rng(restart_seed);
            jitter(theta, rng);
            continue;
        } else {
            res.status = RunStatus::saddle_suspect;
        }
        break;
    }

    if (saw_skip) res.status = RunStatus::incompatible_suspect;
    res.chances = std::move(theta);
    return res;
}

} // namespace

bool CompatibleSet::any_global_max() const {
    for (const auto& r : results)
        if (r.status == RunStatus::global_max) return true;
    return false;
}

Fscm CompatibleSet::fscm_of(std::size_t run) const {
    return Fscm{model, results.at(run).chances};
}

ExoChances initialize_exogenous(const Pscm& model, std::uint64_t seed, double alpha) {
    Rng rng(seed);
    ExoChances theta;
    for (VarId u : model.exogenous()) {
        std::size_t rows = 1;
        auto it = model.exo_condition.find(u);
        if (it != model.exo_condition.end()) rows = static_cast<std::size_t>(model.card(it->second));
        ExoPmf pmf;
        for (std::size_t j = 0; j < rows; ++j) {
            std::vector<double> p = alpha == 1.0 ? rng.next_simplex(model.card(u))
                                                 : rng.next_dirichlet(model.card(u), alpha);
            // Floor entries so that no record starts at probability
            // zero; sparse draws can underflow.
            const double floor = 1e-12;
            double total = 0.0;
            for (double& x : p) {
                x = std::max(x, floor);
                total += x;
            }
            for (double& x : p) x /= total;
            pmf.rows.push_back(std::move(p));
        }
        theta[u] = std::move(pmf);
    }
    return theta;
}

EmStep em_step(const Pscm& model, const ExoChances& theta, const Dataset& data) {
    EmEngine engine(model, data);
    return engine.step(theta);
}

ExoChances em_step_unbiased(const Pscm& model, const ExoChances& theta, const Dataset& data) {
    return em_step(model, theta, data).theta_next;
}

ExoChances em_step_biased(const Pscm& model, VarId selector, const ExoChances& theta,
                          const BiasedDataset& data) {
    return em_step(model, theta, biased_to_records(model, selector, data)).theta_next;
}

EmRunResult run_em(const Pscm& model, const Dataset& data, const ExoChances& init,
                   const EmccConfig& config, double ll_star) {
    EmEngine engine(model, data);
    return run_em_with(engine, init, config, ll_star, split_seed(config.seed, 0x7e57a11));
}

CompatibleSet emcc(const Pscm& model, const Dataset& data, const EmccConfig& config) {
    if (config.runs < 1) throw std::invalid_argument("emcc requires at least one run");
    CompatibleSet set;
    set.model = model;
    set.ll_star = max_log_likelihood(model, data);
    set.status_tolerance =
        std::max(config.ll_tolerance, config.status_rel_tolerance * std::abs(set.ll_star));
    set.results.resize(static_cast<std::size_t>(config.runs));

    EmEngine engine(model, data);
    auto one_run = [&](int i) {
        std::uint64_t run_seed = split_seed(config.seed, static_cast<std::uint64_t>(i));
        ExoChances init =
            config.init ? *config.init
                        : initialize_exogenous(model, run_seed, config.init_alpha);
        set.results[static_cast<std::size_t>(i)] = run_em_with(
            engine, init, config, set.ll_star, split_seed(run_seed, 0x7e57a11));
    };

    int n_threads = config.threads > 0
                        ? config.threads
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min(n_threads, config.runs);
    if (n_threads <= 1) {
        for (int i = 0; i < config.runs; ++i) one_run(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t] {
                for (int i = t; i < config.runs; i += n_threads) one_run(i);
            });
        for (auto& th : pool) th.join();
    }

    if (config.classify_against_best) {
        double best = kNegInf;
        for (const auto& r : set.results)
            if (!r.ll_trace.empty()) best = std::max(best, r.ll_trace.back());
        double tol = std::max(config.ll_tolerance, config.status_rel_tolerance * std::abs(best));
        set.status_tolerance = tol;
        for (auto& r : set.results) {
            if (r.status == RunStatus::incompatible_suspect) continue;
            double final_ll = r.ll_trace.empty() ? kNegInf : r.ll_trace.back();
            r.status =
                final_ll >= best - tol ? RunStatus::global_max : RunStatus::saddle_suspect;
        }
    }
    return set;
}

} // namespace cfb
