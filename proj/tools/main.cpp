// avex: attribute/value extraction pipeline CLI.
//
// Subcommands: prepare, extract, evaluate, export-finetune, report-cost.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "avex/backends.hpp"
#include "avex/demos.hpp"
#include "avex/errors.hpp"
#include "avex/metrics.hpp"
#include "avex/runner.hpp"

using namespace avex;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalFlags {
    std::string config_file;
    uint64_t seed = 42;
    std::string backend = "oracle";
    std::string model = "gpt-4";
    std::string design = "json";
    size_t example_values = 5;
    size_t demos = 10;
    std::string selector = "semsim";
    double mmr_lambda = 0.5;
    std::string train = "large";
    std::string replay_dir;
};

// The config file supplies defaults for any flag not given on the command
// line, plus an optional experiment grid for batch extraction sweeps.
void apply_config(const std::string& file, GlobalFlags& flags, ordered_json& grid) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError(file + ": invalid config JSON: " + std::string(e.what()));
    }
    if (j.contains("seed")) flags.seed = j["seed"].get<uint64_t>();
    if (j.contains("backend")) flags.backend = j["backend"].get<std::string>();
    if (j.contains("model")) flags.model = j["model"].get<std::string>();
    if (j.contains("design")) flags.design = j["design"].get<std::string>();
    if (j.contains("example_values")) flags.example_values = j["example_values"].get<size_t>();
    if (j.contains("demos")) flags.demos = j["demos"].get<size_t>();
    if (j.contains("selector")) flags.selector = j["selector"].get<std::string>();
    if (j.contains("mmr_lambda")) flags.mmr_lambda = j["mmr_lambda"].get<double>();
    if (j.contains("train")) flags.train = j["train"].get<std::string>();
    if (j.contains("replay")) flags.replay_dir = j["replay"].get<std::string>();
    if (j.contains("grid")) grid = j["grid"];
}

std::shared_ptr<ChatBackend> build_chat_backend(const GlobalFlags& flags,
                                                const std::string& test_file, double corrupt_p,
                                                uint64_t corrupt_seed) {
    Dataset oracle_truth;
    if (flags.backend == "oracle") oracle_truth = load_canonical(test_file);
    auto backend = make_backend(flags.backend, oracle_truth, corrupt_p, corrupt_seed);
    if (!flags.replay_dir.empty())
        backend = std::make_shared<ReplayBackend>(flags.replay_dir, backend);
    return backend;
}

int run_extract_once(const GlobalFlags& flags, const std::string& train_file,
                     const std::string& test_file, const std::string& out_dir,
                     const PromptDesign& design, const SelectorConfig& selector,
                     double corrupt_p, uint64_t corrupt_seed, size_t concurrency,
                     const std::string& embedding_cache) {
    ExtractOptions opts;
    opts.train_file = train_file;
    opts.test_file = test_file;
    opts.out_dir = out_dir;
    opts.design = design;
    opts.selector = selector;
    opts.example_value_seed = flags.seed;
    opts.model = flags.model;
    opts.concurrency = concurrency;
    opts.embedding_cache = embedding_cache;

    auto backend = build_chat_backend(flags, test_file, corrupt_p, corrupt_seed);
    HashEmbedder embedder;
    ExtractOutcome outcome = cmd_extract(opts, *backend, embedder);
    std::cout << "wrote " << outcome.results_file.string() << " (" << outcome.extracted
              << " new, " << outcome.resumed << " resumed, " << outcome.parse_failures
              << " parse failures)\n";
    return 0;
}

void print_cost(const CostReport& cost) {
    std::printf("total cost: $%.9f\n", cost.total_dollars());
    if (cost.extracted_pair_count > 0)
        std::printf("cost per 1k extracted A/V pairs: $%.9f (%lld pairs)\n",
                    cost.dollars_per_1k_pairs(),
                    static_cast<long long>(cost.extracted_pair_count));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attribute/value extraction from product titles with chat LLMs"};
    app.require_subcommand(1);
    // Accept the shared flags before or after the subcommand name.
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config_file, "JSON config file with flag defaults");
    app.add_option("--seed", flags.seed, "Random seed");
    app.add_option("--backend", flags.backend, "Chat backend: 'oracle' or a base URL");
    app.add_option("--model", flags.model, "Model name sent to the backend");
    app.add_option("--design", flags.design, "Representation: list|textual|compact|json");
    app.add_option("--example-values", flags.example_values, "Example values per attribute");
    app.add_option("--demos", flags.demos, "Demonstration count (0 = zero-shot)");
    app.add_option("--selector", flags.selector,
                   "Demo selector: fixed|random|semsim|mmr|semsim-avd");
    app.add_option("--mmr-lambda", flags.mmr_lambda, "MMR relevance/diversity balance");
    app.add_option("--train", flags.train, "Training split to use: small|large");
    app.add_option("--replay", flags.replay_dir, "Record/replay store directory");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Import raw data, split and write canonical files");
    std::string raw_path, kind = "canonical", prep_out = "prepared";
    prepare->add_option("--raw", raw_path, "Raw data path")->required();
    prepare->add_option("--kind", kind, "Raw format: oamine|ae110k|canonical");
    prepare->add_option("--out", prep_out, "Output directory");

    // extract
    auto* extract = app.add_subcommand("extract", "Run extraction over the test set");
    std::string data_dir = "prepared", run_out = "runs/run", embedding_cache;
    double corrupt_p = 0.0;
    uint64_t corrupt_seed = 0;
    size_t concurrency = 4;
    extract->add_option("--data", data_dir, "Directory produced by 'prepare'");
    extract->add_option("--out", run_out, "Run output directory");
    extract->add_option("--concurrency", concurrency, "Concurrent backend requests");
    extract->add_option("--corrupt-p", corrupt_p, "Oracle corruption fraction");
    extract->add_option("--corrupt-seed", corrupt_seed, "Oracle corruption seed");
    extract->add_option("--embedding-cache", embedding_cache, "Persisted embedding cache file");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score a run against the test ground truth");
    std::string eval_run = "runs/run", eval_data = "prepared", price_file;
    bool case_insensitive = false, json_report = false;
    evaluate->add_option("--run", eval_run, "Run directory (with results.jsonl)");
    evaluate->add_option("--data", eval_data, "Directory produced by 'prepare'");
    evaluate->add_option("--prices", price_file, "Price table for the cost figure");
    evaluate->add_flag("--case-insensitive", case_insensitive, "Case-insensitive exact match");
    evaluate->add_flag("--json", json_report, "Emit the JSON report instead of the table");

    // export-finetune
    auto* export_ft = app.add_subcommand("export-finetune", "Write a fine-tuning upload JSONL");
    std::string ft_data = "prepared", ft_out = "finetune.jsonl";
    export_ft->add_option("--data", ft_data, "Directory produced by 'prepare'");
    export_ft->add_option("--out", ft_out, "Output JSONL file");

    // report-cost
    auto* report_cost = app.add_subcommand("report-cost", "Cost totals from a run ledger");
    std::string ledger_file, cost_price_file;
    report_cost->add_option("--ledger", ledger_file, "Ledger file from 'extract'")->required();
    report_cost->add_option("--prices", cost_price_file, "Price table JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Map every command-line problem onto the documented usage exit code;
        // --help and --version still exit 0.
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ordered_json grid;
        if (!flags.config_file.empty()) apply_config(flags.config_file, flags, grid);

        std::string train_name = flags.train == "small" ? "train_small.jsonl" : "train_large.jsonl";

        if (prepare->parsed()) {
            PrepareOptions opts;
            opts.raw_path = raw_path;
            opts.kind = kind;
            opts.seed = flags.seed;
            opts.out_dir = prep_out;
            PrepareOutcome outcome = cmd_prepare(opts);
            std::cout << outcome.stats_table;
            std::cout << "wrote canonical splits to " << prep_out << "\n";
        } else if (extract->parsed()) {
            std::string train_file = data_dir + "/" + train_name;
            std::string test_file = data_dir + "/test.jsonl";
            auto make_design = [&](const std::string& d, size_t demos_n) {
                PromptDesign design;
                design.representation = representation_from_string(d);
                design.example_value_count =
                    design.representation == Representation::list ? 0 : flags.example_values;
                design.demonstration_count = demos_n;
                return design;
            };
            auto make_selector = [&](const std::string& s, size_t k) {
                SelectorConfig cfg;
                cfg.strategy = selector_from_string(s);
                cfg.k = k;
                cfg.mmr_lambda = flags.mmr_lambda;
                cfg.seed = flags.seed;
                return cfg;
            };
            if (grid.is_null()) {
                run_extract_once(flags, train_file, test_file, run_out,
                                 make_design(flags.design, flags.demos),
                                 make_selector(flags.selector, flags.demos), corrupt_p,
                                 corrupt_seed, concurrency, embedding_cache);
            } else {
                auto designs = grid.value("designs", ordered_json::array({flags.design}));
                auto selectors = grid.value("selectors", ordered_json::array({flags.selector}));
                auto demo_counts = grid.value("demo_counts", ordered_json::array({flags.demos}));
                for (const auto& d : designs)
                    for (const auto& s : selectors)
                        for (const auto& n : demo_counts) {
                            size_t demos_n = n.get<size_t>();
                            std::string out_dir = run_out + "/" + d.get<std::string>() + "-" +
                                                  s.get<std::string>() + "-" +
                                                  std::to_string(demos_n);
                            run_extract_once(flags, train_file, test_file, out_dir,
                                             make_design(d.get<std::string>(), demos_n),
                                             make_selector(s.get<std::string>(), demos_n),
                                             corrupt_p, corrupt_seed, concurrency,
                                             embedding_cache);
                        }
            }
        } else if (evaluate->parsed()) {
            std::filesystem::path run_dir = eval_run;
            std::filesystem::path ledger =
                price_file.empty() ? std::filesystem::path{} : run_dir / "ledger.json";
            EvaluateOutcome outcome =
                cmd_evaluate(run_dir / "results.jsonl", eval_data + "/test.jsonl",
                             eval_data + "/" + train_name, ledger, price_file, case_insensitive);
            if (json_report)
                std::cout << report_to_json(outcome.report) << "\n";
            else
                std::cout << report_to_table(outcome.report);
            std::printf("overall F1: %.1f%%\n", outcome.report.overall.f1 * 100.0);
            if (outcome.cost) print_cost(*outcome.cost);
        } else if (export_ft->parsed()) {
            if (flags.design != "list" && flags.design != "json")
                throw InvalidArgument("--design must be 'list' or 'json' for export-finetune");
            Dataset train = load_canonical(ft_data + "/" + train_name);
            size_t lines =
                cmd_export_finetune(train, representation_from_string(flags.design),
                                    flags.example_values, flags.seed, ft_out);
            std::cout << "wrote " << lines << " fine-tuning examples to " << ft_out << "\n";
            std::cout << "note: the fine-tuning job itself (epochs, hyperparameters) is run by "
                         "the hosting provider and is outside this tool\n";
        } else if (report_cost->parsed()) {
            print_cost(cmd_report_cost(ledger_file, cost_price_file));
        }
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
