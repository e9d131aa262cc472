#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cfb/bench.hpp"
#include "cfb/em.hpp"
#include "cfb/fusion.hpp"
#include "cfb/io.hpp"
#include "cfb/model.hpp"
#include "cfb/query.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1; // incompatibility / undefined conditional / invalid model
constexpr int kInputError = 2;  // unreadable or ill-formed inputs

struct CommonOpts {
    std::string model_path;
    std::string studies_path;
    std::string query_path;
    std::string out_dir = ".";
    int runs = 300;
    std::uint64_t seed = 0;
    int threads = 0;
    double p_s0 = -1.0;
    double n_s0 = -1.0;
    bool assume_worst_bias = false;
};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Fills in the masked-record count for selector studies that do not
// carry one, from --n-s0 / --p-s0 / --assume-worst-bias.
void resolve_unselected(std::vector<cfb::StudySpec>& studies, const CommonOpts& opts) {
    for (auto& st : studies) {
        if (!st.selector || st.n_unselected > 0.0) continue;
        bool has_masked = false;
        for (const auto& row : st.dataset.rows)
            if (!st.dataset.row_complete(row)) has_masked = true;
        if (has_masked) continue;

        double n1 = st.dataset.total_count();
        if (opts.assume_worst_bias) {
            st.n_unselected = 999.0 * n1; // the P(S=0) -> 1 limit, capped
        } else if (opts.n_s0 >= 0.0) {
            st.n_unselected = opts.n_s0;
        } else if (opts.p_s0 >= 0.0) {
            if (opts.p_s0 >= 1.0) throw std::runtime_error("--p-s0 must be below 1");
            st.n_unselected = n1 * opts.p_s0 / (1.0 - opts.p_s0);
        } else {
            throw std::runtime_error(
                "a biased study has no unselected count; pass --n-s0, --p-s0 or "
                "--assume-worst-bias");
        }
    }
}

struct Pipeline {
    cfb::MergedDataset merged;
    cfb::AuxiliaryModel aux;
    cfb::CompatibleSet set;
};

Pipeline run_pipeline(const cfb::ModelDoc& doc, std::vector<cfb::StudySpec> studies,
                      const CommonOpts& opts) {
    Pipeline p;
    p.merged = cfb::merge_studies(doc.model, studies);
    p.aux = cfb::build_auxiliary(doc.model, p.merged, studies);
    cfb::attach_local_chances(p.aux, p.merged, studies);

    cfb::EmccConfig cfg;
    cfg.runs = opts.runs;
    cfg.seed = opts.seed;
    cfg.threads = opts.threads;
    std::cerr << "running " << cfg.runs << " EM restarts...\n";
    p.set = cfb::emcc(p.aux.model, p.merged.data, cfg);
    return p;
}

int cmd_validate(const std::string& model_path) {
    cfb::ModelDoc doc;
    try {
        doc = cfb::load_model(model_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    cfb::ValidationReport report = cfb::validate_pscm(doc.model);
    if (report.empty()) {
        std::cout << "valid\n";
        return kOk;
    }
    for (const auto& v : report) std::cout << v.kind << ": " << v.detail << "\n";
    return kDomainError;
}

int cmd_query(const CommonOpts& opts) {
    cfb::ModelDoc doc;
    std::vector<cfb::StudySpec> studies;
    cfb::QuerySpec query;
    std::string hash_input;
    try {
        std::string model_text = cfb::read_file(opts.model_path);
        std::string studies_text = cfb::read_file(opts.studies_path);
        std::string query_text = cfb::read_file(opts.query_path);
        hash_input = model_text + studies_text + query_text;
        doc = cfb::parse_model(model_text);
        studies = cfb::parse_studies(
            studies_text, doc,
            std::filesystem::path(opts.studies_path).parent_path().string());
        query = cfb::parse_query(query_text, doc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    if (!cfb::validate_pscm(doc.model).empty()) {
        std::cerr << "error: model is not a valid structural causal model\n";
        return kDomainError;
    }

    try {
        resolve_unselected(studies, opts);
        Pipeline p = run_pipeline(doc, studies, opts);
        if (!p.set.any_global_max()) {
            std::cerr << "no run reached the likelihood maximum: the data are incompatible "
                         "with the model; this points to wrong modelling or to insufficient "
                         "data\n";
            return kDomainError;
        }
        cfb::QueryResult res = cfb::counterfactual_range(p.set, p.aux, query);
        std::string hash = cfb::hex64(cfb::fnv1a64(hash_input));
        cfb::write_file(opts.out_dir + "/result.json",
                        cfb::query_result_to_json(res, hash, opts.seed));
        cfb::write_file(opts.out_dir + "/per_run.csv",
                        cfb::query_result_to_csv(res, hash, opts.seed));
        std::cout << "range [" << fmt(res.lower) << ", " << fmt(res.upper) << "]\n";
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDomainError;
    }
}

int cmd_bias_sweep(const CommonOpts& opts, const std::vector<double>& levels) {
    cfb::ModelDoc doc;
    std::vector<cfb::StudySpec> studies;
    cfb::QuerySpec query;
    std::string hash_input;
    try {
        std::string model_text = cfb::read_file(opts.model_path);
        std::string studies_text = cfb::read_file(opts.studies_path);
        std::string query_text = cfb::read_file(opts.query_path);
        hash_input = model_text + studies_text + query_text;
        doc = cfb::parse_model(model_text);
        studies = cfb::parse_studies(
            studies_text, doc,
            std::filesystem::path(opts.studies_path).parent_path().string());
        query = cfb::parse_query(query_text, doc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    if (studies.size() != 1 || !studies[0].intervened_vars.empty() || studies[0].selector) {
        std::cerr << "error: bias-sweep expects a single plain observational study\n";
        return kInputError;
    }

    try {
        cfb::Dataset base = studies[0].dataset.aggregated();
        const double n_total = base.total_count();

        // Selection levels by incremental record removal: patterns leave
        // the selected side one by one, smallest first, so that the
        // requested levels can be approached with the finest steps.
        std::vector<std::size_t> order(base.rows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (base.rows[a].count != base.rows[b].count)
                return base.rows[a].count < base.rows[b].count;
            return base.rows[a].states < base.rows[b].states;
        });

        std::ostringstream runs_csv, ranges_csv;
        std::string hash = cfb::hex64(cfb::fnv1a64(hash_input));
        runs_csv << "# manifest_hash=" << hash << "\n# seed=" << opts.seed << "\n";
        runs_csv << "level,p_s1,run,status,value\n";
        ranges_csv << "# manifest_hash=" << hash << "\n# seed=" << opts.seed << "\n";
        ranges_csv << "level,p_s1,lower,upper\n";

        for (double level : levels) {
            std::vector<bool> kept(base.rows.size(), true);
            double p_s1 = 1.0;
            for (std::size_t oi : order) {
                if (p_s1 <= level) break;
                if (p_s1 - base.rows[oi].count / n_total < level &&
                    std::abs(p_s1 - level) <= std::abs(p_s1 - base.rows[oi].count / n_total - level))
                    break;
                kept[oi] = false;
                p_s1 -= base.rows[oi].count / n_total;
            }

            cfb::StudySpec st = studies[0];
            if (p_s1 < 1.0) {
                cfb::Selector sel;
                sel.scope = base.columns;
                std::vector<int> cards;
                std::size_t n_cfg = 1;
                for (cfb::VarId v : sel.scope) {
                    cards.push_back(doc.model.card(v));
                    n_cfg *= static_cast<std::size_t>(doc.model.card(v));
                }
                sel.table.assign(n_cfg, 0);
                for (std::size_t i = 0; i < base.rows.size(); ++i) {
                    if (!kept[i]) continue;
                    std::size_t idx = 0;
                    for (std::size_t c = 0; c < sel.scope.size(); ++c)
                        idx = idx * static_cast<std::size_t>(cards[c]) +
                              static_cast<std::size_t>(base.rows[i].states[c]);
                    sel.table[idx] = 1;
                }
                cfb::BiasedDataset split =
                    cfb::partition_by_selector(base, doc.model, sel);
                st.dataset = split.selected;
                st.selector = sel;
                st.n_unselected = split.n_unselected;
            }

            Pipeline p = run_pipeline(doc, {st}, opts);
            cfb::QueryResult res = cfb::counterfactual_range(p.set, p.aux, query);
            for (const auto& pr : res.per_run) {
                runs_csv << fmt(level) << "," << fmt(p_s1) << "," << pr.run << ",";
                switch (pr.status) {
                    case cfb::RunStatus::global_max: runs_csv << "global_max"; break;
                    case cfb::RunStatus::saddle_suspect: runs_csv << "saddle_suspect"; break;
                    case cfb::RunStatus::max_iters: runs_csv << "max_iters"; break;
                    case cfb::RunStatus::incompatible_suspect:
                        runs_csv << "incompatible_suspect";
                        break;
                }
                runs_csv << ",";
                if (pr.defined) runs_csv << fmt(pr.value);
                runs_csv << "\n";
            }
            ranges_csv << fmt(level) << "," << fmt(p_s1) << "," << fmt(res.lower) << ","
                       << fmt(res.upper) << "\n";
            std::cerr << "level " << level << ": [" << res.lower << ", " << res.upper << "]\n";
        }
        cfb::write_file(opts.out_dir + "/sweep_runs.csv", runs_csv.str());
        cfb::write_file(opts.out_dir + "/sweep_ranges.csv", ranges_csv.str());
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDomainError;
    }
}

int cmd_bench(const cfb::BenchConfig& config, const std::string& out_dir) {
    try {
        std::vector<cfb::ExperimentRecord> records = cfb::run_fusion_experiment(config);
        cfb::write_file(out_dir + "/bench.csv", cfb::records_to_csv(records));
        cfb::write_file(out_dir + "/summary.json", cfb::summary_to_json(records));
        int ok = 0;
        for (const auto& r : records)
            if (r.ok) ++ok;
        std::cerr << ok << "/" << records.size() << " models completed\n";
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDomainError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual bounds via EM over compatible structural causal models"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* validate = app.add_subcommand("validate", "check a model file");
    std::string validate_model;
    validate->add_option("--model", validate_model, "model JSON")->required();

    auto* query = app.add_subcommand("query", "fuse studies, fit, evaluate a query");
    query->add_option("--model", opts.model_path)->required();
    query->add_option("--studies", opts.studies_path)->required();
    query->add_option("--query", opts.query_path)->required();
    query->add_option("--runs", opts.runs);
    query->add_option("--seed", opts.seed);
    query->add_option("--threads", opts.threads);
    query->add_option("--out", opts.out_dir);
    query->add_option("--p-s0", opts.p_s0, "P(S=0) for biased studies lacking counts");
    query->add_option("--n-s0", opts.n_s0, "masked-record count for biased studies");
    query->add_flag("--assume-worst-bias", opts.assume_worst_bias);

    auto* sweep = app.add_subcommand("bias-sweep", "query ranges across selection levels");
    std::vector<double> levels{1.0, 0.75, 0.5, 0.25};
    sweep->add_option("--model", opts.model_path)->required();
    sweep->add_option("--studies", opts.studies_path)->required();
    sweep->add_option("--query", opts.query_path)->required();
    sweep->add_option("--levels", levels, "target P(S=1) levels");
    sweep->add_option("--runs", opts.runs);
    sweep->add_option("--seed", opts.seed);
    sweep->add_option("--threads", opts.threads);
    sweep->add_option("--out", opts.out_dir);

    auto* bench = app.add_subcommand("bench", "synthetic fusion experiment batch");
    cfb::BenchConfig bcfg;
    std::string bench_out = ".";
    std::string bench_config_path;
    bench->add_option("--config", bench_config_path, "BenchConfig JSON");
    bench->add_option("--models", bcfg.n_models);
    bench->add_option("--runs", bcfg.runs);
    bench->add_option("--seed", bcfg.seed);
    bench->add_option("--threads", bcfg.threads);
    bench->add_option("--dataset-size", bcfg.dataset_size);
    bench->add_option("--edge-probability", bcfg.edge_probability);
    bench->add_option("--out", bench_out);

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) return cmd_validate(validate_model);
    if (query->parsed()) return cmd_query(opts);
    if (sweep->parsed()) return cmd_bias_sweep(opts, levels);
    if (bench->parsed()) {
        if (!bench_config_path.empty()) {
            try {
                auto j = nlohmann::json::parse(cfb::read_file(bench_config_path));
                if (j.contains("n_models")) bcfg.n_models = j["n_models"];
                if (j.contains("n_endogenous_min")) bcfg.n_endogenous_min = j["n_endogenous_min"];
                if (j.contains("n_endogenous_max")) bcfg.n_endogenous_max = j["n_endogenous_max"];
                if (j.contains("edge_probability")) bcfg.edge_probability = j["edge_probability"];
                if (j.contains("max_exo_card")) bcfg.max_exo_card = j["max_exo_card"];
                if (j.contains("dataset_size")) bcfg.dataset_size = j["dataset_size"];
                if (j.contains("runs")) bcfg.runs = j["runs"];
                if (j.contains("max_iterations")) bcfg.max_iterations = j["max_iterations"];
                if (j.contains("seed")) bcfg.seed = j["seed"];
                if (j.contains("threads")) bcfg.threads = j["threads"];
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kInputError;
            }
        }
        if (bcfg.n_models < 1 || bcfg.dataset_size < 1 || bcfg.edge_probability < 0.0 ||
            bcfg.edge_probability > 1.0) {
            std::cerr << "error: invalid bench configuration\n";
            return kInputError;
        }
        return cmd_bench(bcfg, bench_out);
    }
    return kInputError;
}
