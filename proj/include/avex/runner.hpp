#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avex/backends.hpp"
#include "avex/corpus.hpp"
#include "avex/demos.hpp"
#include "avex/metrics.hpp"
#include "avex/parse.hpp"
#include "avex/prompts.hpp"

namespace avex {

// Everything needed to replay a run given the replay store.
struct RunManifest {
    std::string run_id;
    std::string train_dataset;
    std::string train_hash;
    std::string test_dataset;
    std::string test_hash;
    PromptDesign design;
    SelectorConfig selector;
    uint64_t example_value_seed = 0;
    std::string backend_id;
    std::string model;
    std::string embedder_id;
    std::string price_table_version;
    bool case_insensitive = false;
    std::string started_at;
    std::string finished_at;
    bool complete = false;

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
};

std::string file_content_hash(const std::filesystem::path& file);

// Run-output JSONL line for one offer.
std::string result_to_json(const ExtractionResult& result, const std::string& raw_text);
ExtractionResult result_from_json(const std::string& line);
std::vector<ExtractionResult> load_results(const std::filesystem::path& file);

struct PrepareOptions {
    std::filesystem::path raw_path;
    std::string kind;   // oamine | ae110k | canonical
    uint64_t seed = 42;
    std::filesystem::path out_dir;
};

struct PrepareOutcome {
    SplitBundle bundle;
    DatasetStats full, train_large, train_small, test;
    std::string stats_table;
};

// Writes train_large.jsonl, train_small.jsonl, test.jsonl and stats.json.
PrepareOutcome cmd_prepare(const PrepareOptions& opts);

struct ExtractOptions {
    std::filesystem::path train_file;
    std::filesystem::path test_file;
    std::filesystem::path out_dir;
    PromptDesign design;
    SelectorConfig selector;
    uint64_t example_value_seed = 42;
    std::string model = "gpt-4";
    size_t concurrency = 4;
    std::string price_table_version = "unversioned";
    bool case_insensitive = false;
    std::filesystem::path templates_dir;       // empty -> built-in defaults
    std::filesystem::path embedding_cache;     // empty -> in-memory only
    std::string run_id;                        // empty -> derived from settings
};

struct ExtractOutcome {
    std::filesystem::path results_file;
    std::filesystem::path manifest_file;
    std::filesystem::path ledger_file;
    size_t extracted = 0;
    size_t resumed = 0;   // offers already present in the output file
    size_t parse_failures = 0;
};

// One ExtractionResult per test offer. Interrupted runs are resumable:
// offers already in the output file are skipped. Per-offer parse failures
// are recorded, never abort; fatal backend errors abort with the manifest
// marked incomplete.
ExtractOutcome cmd_extract(const ExtractOptions& opts, ChatBackend& backend,
                           EmbeddingBackend& embedder);

struct EvaluateOutcome {
    EvalReport report;
    std::optional<CostReport> cost;
};

EvaluateOutcome cmd_evaluate(const std::filesystem::path& results_file,
                             const std::filesystem::path& test_file,
                             const std::filesystem::path& train_file,
                             const std::filesystem::path& ledger_file = {},
                             const std::filesystem::path& price_file = {},
                             bool case_insensitive = false);

// Fine-tuning upload file: one {"messages": [...]} line per training offer,
// the terminal assistant message holding the ground-truth JSON. Supported
// designs: list, and json with example values ("json-val").
size_t cmd_export_finetune(const Dataset& train, Representation representation,
                           size_t example_value_count, uint64_t seed,
                           const std::filesystem::path& out_file,
                           const std::filesystem::path& templates_dir = {});

CostReport cmd_report_cost(const std::filesystem::path& ledger_file,
                           const std::filesystem::path& price_file);

// Schema registry used by extraction and evaluation: attributes observed in
// training, extended with attributes present in the test ground truth so
// every truth slot is scoreable.
SchemaRegistry build_joint_registry(const Dataset& train, const Dataset& test);

}  // namespace avex
