#include "avex/runner.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avex/errors.hpp"
#include "avex/random.hpp"
#include "avex/schema.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string iso_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string hex64(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string file_content_hash(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

std::string RunManifest::to_json() const {
    ordered_json j;
    j["run_id"] = run_id;
    j["train_dataset"] = train_dataset;
    j["train_hash"] = train_hash;
    j["test_dataset"] = test_dataset;
    j["test_hash"] = test_hash;
    j["design"]["representation"] = to_string(design.representation);
    j["design"]["example_value_count"] = design.example_value_count;
    j["design"]["demonstration_count"] = design.demonstration_count;
    j["selector"]["strategy"] = to_string(selector.strategy);
    j["selector"]["k"] = selector.k;
    j["selector"]["mmr_lambda"] = selector.mmr_lambda;
    j["selector"]["seed"] = selector.seed;
    j["example_value_seed"] = example_value_seed;
    j["backend_id"] = backend_id;
    j["model"] = model;
    j["embedder_id"] = embedder_id;
    j["price_table_version"] = price_table_version;
    j["case_insensitive"] = case_insensitive;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["complete"] = complete;
    return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.train_dataset = j.at("train_dataset").get<std::string>();
    m.train_hash = j.at("train_hash").get<std::string>();
    m.test_dataset = j.at("test_dataset").get<std::string>();
    m.test_hash = j.at("test_hash").get<std::string>();
    m.design.representation =
        representation_from_string(j.at("design").at("representation").get<std::string>());
    m.design.example_value_count = j["design"]["example_value_count"].get<size_t>();
    m.design.demonstration_count = j["design"]["demonstration_count"].get<size_t>();
    m.selector.strategy = selector_from_string(j.at("selector").at("strategy").get<std::string>());
    m.selector.k = j["selector"]["k"].get<size_t>();
    m.selector.mmr_lambda = j["selector"]["mmr_lambda"].get<double>();
    m.selector.seed = j["selector"]["seed"].get<uint64_t>();
    m.example_value_seed = j.at("example_value_seed").get<uint64_t>();
    m.backend_id = j.at("backend_id").get<std::string>();
    m.model = j.at("model").get<std::string>();
    m.embedder_id = j.value("embedder_id", "");
    m.price_table_version = j.value("price_table_version", "unversioned");
    m.case_insensitive = j.value("case_insensitive", false);
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    m.complete = j.value("complete", false);
    return m;
}

std::string result_to_json(const ExtractionResult& result, const std::string& raw_text) {
    ordered_json j;
    j["offer_id"] = result.offer_id;
    ordered_json values = ordered_json::object();
    for (const auto& [attr, value] : result.values)
        values[attr] = value ? ordered_json(*value) : ordered_json();
    j["values"] = std::move(values);
    j["parse_status"] = to_string(result.parse_status);
    if (!result.dropped_keys.empty()) j["dropped_keys"] = result.dropped_keys;
    j["raw"] = raw_text;
    return j.dump();
}

ExtractionResult result_from_json(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    ExtractionResult r;
    r.offer_id = j.at("offer_id").get<std::string>();
    for (auto& [attr, value] : j.at("values").items())
        r.values[attr] = value.is_null() ? std::optional<std::string>{}
                                         : std::optional<std::string>{value.get<std::string>()};
    r.parse_status = parse_status_from_string(j.at("parse_status").get<std::string>());
    if (j.contains("dropped_keys"))
        for (const auto& k : j["dropped_keys"]) r.dropped_keys.push_back(k.get<std::string>());
    return r;
}

std::vector<ExtractionResult> load_results(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open run output " + file.string());
    std::vector<ExtractionResult> results;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            results.push_back(result_from_json(line));
        } catch (const std::exception& e) {
            throw ParseError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return results;
}

SchemaRegistry build_joint_registry(const Dataset& train, const Dataset& test) {
    std::set<std::string> categories = train.categories;
    categories.insert(test.categories.begin(), test.categories.end());

    SchemaRegistry registry;
    for (const auto& category : categories) {
        std::set<std::string> names;
        for (const auto* offer : train.offers_in(category))
            for (const auto& [attr, _] : offer->truth) names.insert(attr);
        for (const auto* offer : test.offers_in(category))
            for (const auto& [attr, _] : offer->truth) names.insert(attr);
        registry[category] =
            build_schema(train.categories.count(category) ? train : test, category,
                         {names.begin(), names.end()});
    }
    return registry;
}

// -------------------------------------------------------------- prepare

namespace {

std::string stats_row(const std::string& label, const DatasetStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s %10zu %10zu %12zu %10zu %12zu\n", label.c_str(),
                  s.offers, s.unique_categories, s.unique_attributes, s.av_pairs,
                  s.unique_av_pairs);
    return buf;
}

ordered_json stats_json(const DatasetStats& s) {
    ordered_json j;
    j["offers"] = s.offers;
    j["unique_categories"] = s.unique_categories;
    j["unique_attributes"] = s.unique_attributes;
    j["av_pairs"] = s.av_pairs;
    j["unique_av_pairs"] = s.unique_av_pairs;
    return j;
}

}  // namespace

PrepareOutcome cmd_prepare(const PrepareOptions& opts) {
    Dataset full;
    if (opts.kind == "oamine")
        full = import_oamine(opts.raw_path);
    else if (opts.kind == "ae110k")
        full = import_ae110k(opts.raw_path);
    else if (opts.kind == "canonical")
        full = load_canonical(opts.raw_path);
    else
        throw InvalidArgument("unknown dataset kind '" + opts.kind +
                              "' (expected oamine, ae110k or canonical)");

    PrepareOutcome outcome;
    outcome.bundle = split_dataset(full, opts.seed);
    outcome.full = dataset_stats(full);
    outcome.train_large = dataset_stats(outcome.bundle.train_large);
    outcome.train_small = dataset_stats(outcome.bundle.train_small);
    outcome.test = dataset_stats(outcome.bundle.test);

    std::filesystem::create_directories(opts.out_dir);
    save_canonical(outcome.bundle.train_large, opts.out_dir / "train_large.jsonl");
    save_canonical(outcome.bundle.train_small, opts.out_dir / "train_small.jsonl");
    save_canonical(outcome.bundle.test, opts.out_dir / "test.jsonl");

    std::ostringstream table;
    char header[160];
    std::snprintf(header, sizeof(header), "%-14s %10s %10s %12s %10s %12s\n", "split", "offers",
                  "categories", "attributes", "av_pairs", "unique_avs");
    table << header;
    table << stats_row("full", outcome.full) << stats_row("train_large", outcome.train_large)
          << stats_row("train_small", outcome.train_small) << stats_row("test", outcome.test);
    if (!outcome.bundle.uncoverable_attributes.empty()) {
        table << "warning: attributes present in a single offer (cannot cover both sides):\n";
        for (const auto& a : outcome.bundle.uncoverable_attributes) table << "  " << a << "\n";
    }
    outcome.stats_table = table.str();

    ordered_json j;
    j["seed"] = opts.seed;
    j["full"] = stats_json(outcome.full);
    j["train_large"] = stats_json(outcome.train_large);
    j["train_small"] = stats_json(outcome.train_small);
    j["test"] = stats_json(outcome.test);
    j["uncoverable_attributes"] = outcome.bundle.uncoverable_attributes;
    std::ofstream stats_out(opts.out_dir / "stats.json");
    stats_out << j.dump(2) << "\n";
    return outcome;
}

// -------------------------------------------------------------- extract

namespace {

std::string derive_run_id(const ExtractOptions& opts) {
    std::ostringstream ss;
    ss << to_string(opts.design.representation) << "-" << opts.design.example_value_count << "val-"
       << opts.design.demonstration_count << "shot-" << to_string(opts.selector.strategy);
    return ss.str();
}

}  // namespace

ExtractOutcome cmd_extract(const ExtractOptions& opts, ChatBackend& backend,
                           EmbeddingBackend& embedder) {
    Dataset train = load_canonical(opts.train_file);
    Dataset test = load_canonical(opts.test_file);
    SchemaRegistry registry = build_joint_registry(train, test);

    PromptTemplates templates = opts.templates_dir.empty()
                                    ? PromptTemplates::defaults()
                                    : PromptTemplates::load_dir(opts.templates_dir);

    // Example values are attached once per category from the training data.
    std::map<std::string, CategorySchema> prompt_schemas;
    for (auto& [category, schema] : registry) {
        CategorySchema s = schema;
        if (opts.design.example_value_count > 0 && train.categories.count(category))
            s = attach_example_values(train, s, opts.design.example_value_count,
                                      opts.example_value_seed);
        prompt_schemas[category] = std::move(s);
    }

    ExtractOutcome outcome;
    std::filesystem::create_directories(opts.out_dir);
    outcome.results_file = opts.out_dir / "results.jsonl";
    outcome.manifest_file = opts.out_dir / "manifest.json";
    outcome.ledger_file = opts.out_dir / "ledger.json";

    RunManifest manifest;
    manifest.run_id = opts.run_id.empty() ? derive_run_id(opts) : opts.run_id;
    manifest.train_dataset = train.name;
    manifest.train_hash = file_content_hash(opts.train_file);
    manifest.test_dataset = test.name;
    manifest.test_hash = file_content_hash(opts.test_file);
    manifest.design = opts.design;
    manifest.selector = opts.selector;
    manifest.example_value_seed = opts.example_value_seed;
    manifest.backend_id = backend.id();
    manifest.model = opts.model;
    manifest.embedder_id = embedder.id();
    manifest.price_table_version = opts.price_table_version;
    manifest.case_insensitive = opts.case_insensitive;
    manifest.started_at = iso_now();
    auto write_manifest = [&] {
        std::ofstream out(outcome.manifest_file);
        out << manifest.to_json() << "\n";
    };
    write_manifest();

    // Resume: skip offers already in the output file.
    std::set<std::string> done;
    if (std::filesystem::exists(outcome.results_file))
        for (const auto& r : load_results(outcome.results_file)) done.insert(r.offer_id);
    outcome.resumed = done.size();

    EmbeddingCache cache(opts.embedding_cache);
    std::map<std::string, DemoPool> pools;
    bool needs_demos = opts.design.demonstration_count > 0;
    if (needs_demos)
        for (const auto& category : test.categories)
            if (train.categories.count(category))
                pools[category] = build_demo_pool(train, category, embedder, &cache);

    std::vector<const ProductOffer*> pending;
    for (const auto& offer : test.offers)
        if (!done.count(offer.offer_id)) pending.push_back(&offer);

    CostLedger ledger;
    std::ofstream out(outcome.results_file, std::ios::app);
    if (!out) throw IoError("cannot write " + outcome.results_file.string());

    auto process_offer = [&](const ProductOffer& offer) -> std::pair<ExtractionResult, std::string> {
        const CategorySchema& schema = prompt_schemas.at(offer.category);

        ChatPrompt prompt;
        if (needs_demos && pools.count(offer.category) &&
            !pools.at(offer.category).entries.empty()) {
            SelectorConfig cfg = opts.selector;
            cfg.k = opts.design.demonstration_count;
            EmbeddingVector query_embedding = cache.get_or_compute(embedder, offer.title);
            auto demos =
                select_demonstrations(offer, query_embedding, pools.at(offer.category), cfg);
            prompt = demos.empty() ? build_zero_shot(opts.design, schema, offer, templates)
                                   : build_few_shot(opts.design, schema, offer, demos, templates);
        } else {
            prompt = build_zero_shot(opts.design, schema, offer, templates);
        }

        ChatRequest req;
        req.model = opts.model;
        req.messages = std::move(prompt);
        req.temperature = 0.0;

        ChatResponse resp = chat_complete(req, backend, ledger);
        ExtractionResult result = parse_response(resp.text, schema);
        result.offer_id = offer.offer_id;
        return {std::move(result), resp.text};
    };

    // Bounded concurrency: dispatch in chunks, commit in offer order so the
    // output file stays deterministic and resumable.
    size_t window = std::max<size_t>(opts.concurrency, 1);
    try {
        for (size_t base = 0; base < pending.size(); base += window) {
            size_t chunk = std::min(window, pending.size() - base);
            std::vector<std::future<std::pair<ExtractionResult, std::string>>> futures;
            futures.reserve(chunk);
            for (size_t i = 0; i < chunk; ++i)
                futures.push_back(std::async(std::launch::async, process_offer,
                                             std::cref(*pending[base + i])));
            for (auto& f : futures) {
                auto [result, raw] = f.get();
                long long extracted_pairs = 0;
                for (const auto& [_, value] : result.values)
                    if (value) ++extracted_pairs;
                ledger.add_extracted_pairs(extracted_pairs);
                if (result.parse_status == ParseStatus::failed) ++outcome.parse_failures;
                out << result_to_json(result, raw) << "\n";
                ++outcome.extracted;
            }
            out.flush();
        }
    } catch (...) {
        out.flush();
        ledger.save(outcome.ledger_file);
        manifest.finished_at = iso_now();
        manifest.complete = false;
        write_manifest();
        throw;
    }

    ledger.save(outcome.ledger_file);
    manifest.finished_at = iso_now();
    manifest.complete = true;
    write_manifest();
    return outcome;
}

// ------------------------------------------------------------- evaluate

EvaluateOutcome cmd_evaluate(const std::filesystem::path& results_file,
                             const std::filesystem::path& test_file,
                             const std::filesystem::path& train_file,
                             const std::filesystem::path& ledger_file,
                             const std::filesystem::path& price_file, bool case_insensitive) {
    auto results = load_results(results_file);
    if (results.empty())
        throw InvalidArgument("run output " + results_file.string() +
                              " is empty; the run looks incomplete");
    Dataset test = load_canonical(test_file);
    Dataset train = load_canonical(train_file);
    SchemaRegistry registry = build_joint_registry(train, test);

    EvaluateOutcome outcome;
    outcome.report = evaluate_run(results, test, registry, case_insensitive);
    if (!ledger_file.empty() && !price_file.empty())
        outcome.cost = estimate_cost(CostLedger::load(ledger_file), PriceTable::load(price_file));
    return outcome;
}

// -------------------------------------------------------------- export

size_t cmd_export_finetune(const Dataset& train, Representation representation,
                           size_t example_value_count, uint64_t seed,
                           const std::filesystem::path& out_file,
                           const std::filesystem::path& templates_dir) {
    if (representation != Representation::list && representation != Representation::json)
        throw InvalidArgument("fine-tune export supports the designs 'list' and 'json'");

    PromptTemplates templates = templates_dir.empty() ? PromptTemplates::defaults()
                                                      : PromptTemplates::load_dir(templates_dir);
    PromptDesign design;
    design.representation = representation;
    design.example_value_count =
        representation == Representation::json ? example_value_count : 0;

    std::map<std::string, CategorySchema> schemas;
    for (const auto& category : train.categories) {
        CategorySchema schema = build_schema(train, category);
        if (design.example_value_count > 0)
            schema = attach_example_values(train, schema, design.example_value_count, seed);
        schemas[category] = std::move(schema);
    }

    std::ofstream out(out_file);
    if (!out) throw IoError("cannot write " + out_file.string());
    size_t lines = 0;
    for (const auto& offer : train.offers) {
        const CategorySchema& schema = schemas.at(offer.category);
        ChatPrompt prompt = build_zero_shot(design, schema, offer, templates);
        prompt.messages.push_back({MsgRole::assistant, render_truth_json(schema, offer.truth)});
        ordered_json j;
        j["messages"] = ordered_json::parse(prompt_to_json(prompt));
        out << j.dump() << "\n";
        ++lines;
    }
    return lines;
}

CostReport cmd_report_cost(const std::filesystem::path& ledger_file,
                           const std::filesystem::path& price_file) {
    return estimate_cost(CostLedger::load(ledger_file), PriceTable::load(price_file));
}

}  // namespace avex
