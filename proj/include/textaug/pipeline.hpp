#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textaug/cache.hpp"
#include "textaug/corpus.hpp"
#include "textaug/errors.hpp"
#include "textaug/faithfulness.hpp"
#include "textaug/sampler.hpp"

namespace textaug {

struct PipelineConfig {
    std::string corpus_path;
    AnnotationFormat corpus_format = AnnotationFormat::canonical_jsonl;
    std::string cache_path;
    std::string manifest_dir;
    double alpha = 0.6;
    double beta = 0.2;
    int max_attempts = 5;
    std::uint64_t seed = 0;
    int epochs = 1;
    int worker_count = 1;
    bool resume = true;
    bool freeze_sampling = false; // reuse the epoch-0 draw for every epoch
    std::set<Split> splits_to_augment = {Split::train};
    GatewayConfig llm;
    GatewayConfig embedder;
    PromptTemplate prompt;

    void validate() const {
        if (alpha < 0.0 || alpha > 1.0)
            throw ConfigError("alpha must lie in [0, 1]");
        if (beta < 0.0 || beta > 1.0)
            throw ConfigError("beta must lie in [0, 1]");
        if (max_attempts < 1)
            throw ConfigError("max_attempts must be >= 1");
        if (epochs < 1)
            throw ConfigError("epochs must be >= 1");
        if (worker_count < 1)
            throw ConfigError("worker_count must be >= 1");
        if (corpus_path.empty())
            throw ConfigError("corpus_path is required");
        if (cache_path.empty())
            throw ConfigError("cache_path is required");
        if (prompt.instruction.empty())
            throw ConfigError("prompt instruction must be non-empty");
        llm.validate();
        embedder.validate();
    }
};

namespace detail {

inline void gateway_from_json(const nlohmann::json& object, GatewayConfig& config) {
    config.endpoint_url = object.value("endpoint_url", config.endpoint_url);
    config.model_id = object.value("model_id", config.model_id);
    config.api_key = object.value("api_key", config.api_key);
    config.sampling_temperature = object.value("sampling_temperature", config.sampling_temperature);
    config.max_output_tokens = object.value("max_output_tokens", config.max_output_tokens);
    config.transport_retry_limit =
        object.value("transport_retry_limit", config.transport_retry_limit);
    config.requests_per_second_cap =
        object.value("requests_per_second_cap", config.requests_per_second_cap);
    config.request_timeout_ms = object.value("request_timeout_ms", config.request_timeout_ms);
}

inline nlohmann::ordered_json gateway_to_json(const GatewayConfig& config) {
    return {{"endpoint_url", config.endpoint_url},
            {"model_id", config.model_id},
            {"sampling_temperature", config.sampling_temperature},
            {"max_output_tokens", config.max_output_tokens},
            {"transport_retry_limit", config.transport_retry_limit},
            {"requests_per_second_cap", config.requests_per_second_cap},
            {"request_timeout_ms", config.request_timeout_ms}};
}

} // namespace detail

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& object) {
    if (!object.is_object())
        throw ConfigError("pipeline config must be a JSON object");
    PipelineConfig config;
    config.corpus_path = object.value("corpus_path", "");
    if (object.contains("corpus_format"))
        config.corpus_format =
            parse_annotation_format(object.at("corpus_format").get<std::string>());
    config.cache_path = object.value("cache_path", "");
    config.manifest_dir = object.value("manifest_dir", "");
    config.alpha = object.value("alpha", config.alpha);
    config.beta = object.value("beta", config.beta);
    config.max_attempts = object.value("max_attempts", config.max_attempts);
    config.seed = object.value("seed", config.seed);
    config.epochs = object.value("epochs", config.epochs);
    config.worker_count = object.value("worker_count", config.worker_count);
    config.resume = object.value("resume", config.resume);
    config.freeze_sampling = object.value("freeze_sampling", config.freeze_sampling);
    if (object.contains("splits_to_augment")) {
        config.splits_to_augment.clear();
        for (const auto& label : object.at("splits_to_augment"))
            try {
                config.splits_to_augment.insert(parse_split(label.get<std::string>()));
            } catch (const DataError& e) {
                throw ConfigError(e.what());
            }
    }
    if (object.contains("llm"))
        detail::gateway_from_json(object.at("llm"), config.llm);
    if (object.contains("embedder"))
        detail::gateway_from_json(object.at("embedder"), config.embedder);
    if (object.contains("prompt")) {
        const auto& prompt = object.at("prompt");
        config.prompt.instruction = prompt.value("instruction", config.prompt.instruction);
        const std::string order = prompt.value("concat_order", "caption_then_instruction");
        if (order == "caption_then_instruction")
            config.prompt.concat_order = ConcatOrder::caption_then_instruction;
        else if (order == "instruction_then_caption")
            config.prompt.concat_order = ConcatOrder::instruction_then_caption;
        else
            throw ConfigError("unknown concat_order: '" + order + "'");
        if (prompt.contains("system_preamble") && !prompt.at("system_preamble").is_null())
            config.prompt.system_preamble = prompt.at("system_preamble").get<std::string>();
    }
    return config;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    nlohmann::json object;
    try {
        in >> object;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config file: ") + e.what());
    }
    return pipeline_config_from_json(object);
}

inline nlohmann::ordered_json to_json(const PipelineConfig& config) {
    nlohmann::ordered_json splits = nlohmann::ordered_json::array();
    for (Split split : config.splits_to_augment)
        splits.push_back(to_string(split));
    nlohmann::ordered_json prompt{{"instruction", config.prompt.instruction},
                                  {"concat_order",
                                   config.prompt.concat_order ==
                                           ConcatOrder::caption_then_instruction
                                       ? "caption_then_instruction"
                                       : "instruction_then_caption"}};
    if (config.prompt.system_preamble)
        prompt["system_preamble"] = *config.prompt.system_preamble;
    return {{"corpus_path", config.corpus_path},
            {"corpus_format", to_string(config.corpus_format)},
            {"cache_path", config.cache_path},
            {"manifest_dir", config.manifest_dir},
            {"alpha", config.alpha},
            {"beta", config.beta},
            {"max_attempts", config.max_attempts},
            {"seed", config.seed},
            {"epochs", config.epochs},
            {"worker_count", config.worker_count},
            {"resume", config.resume},
            {"freeze_sampling", config.freeze_sampling},
            {"splits_to_augment", splits},
            {"llm", detail::gateway_to_json(config.llm)},
            {"embedder", detail::gateway_to_json(config.embedder)},
            {"prompt", prompt}};
}

struct PipelineGateways {
    std::shared_ptr<ChatClient> llm;
    std::shared_ptr<EmbedClient> embedder;
};

/// Optional run instrumentation. `cancelled` is polled before each record is
/// claimed, so a run can be stopped cleanly mid-corpus (the cache keeps every
/// completed record).
struct RunHooks {
    std::function<bool()> cancelled;
    std::function<void(const AugmentationOutcome&, std::size_t done, std::size_t total)> on_record;
};

struct RunReport {
    std::size_t corpus_records = 0;
    std::size_t selected_records = 0;
    std::size_t cached_terminal = 0; // terminal before this run started
    std::size_t processed = 0;       // records worked on in this run
    std::size_t accepted = 0;
    std::size_t fallback = 0;
    std::size_t errored = 0;
    std::size_t unprocessed = 0; // left behind by cancellation or abort
    bool completed = true;
    nlohmann::ordered_json stats; // cache-derived statistics document
};

/// Statistics document shared by `run_augment` and the `report` subcommand:
/// terminal-state counts, per-attempt acceptance, and the first-attempt
/// similarity distribution at bin width 0.05.
inline nlohmann::ordered_json report_from_cache(const CacheContents& contents) {
    const auto states = replay_cache(contents.entries);
    const int max_attempts = contents.header.max_attempts;

    std::size_t accepted = 0, fallback = 0, in_progress = 0;
    std::map<int, std::size_t> attempts_per_record;
    for (const auto& [id, state] : states) {
        if (const CacheEntry* hit = state.accepted_entry()) {
            ++accepted;
            ++attempts_per_record[hit->attempt];
        } else if (state.terminal(max_attempts)) {
            ++fallback;
            ++attempts_per_record[state.attempts_recorded()];
        } else {
            ++in_progress;
        }
    }
    const std::size_t terminal = accepted + fallback;

    SimilarityHistogram histogram(0.05);
    for (const auto& entry : contents.entries)
        if (entry.attempt == 1 && entry.similarity)
            histogram.add(*entry.similarity);

    std::map<int, std::pair<std::size_t, std::size_t>> per_attempt; // attempt -> {candidates, accepted}
    for (const auto& entry : contents.entries) {
        auto& bucket = per_attempt[entry.attempt];
        ++bucket.first;
        if (entry.accepted)
            ++bucket.second;
    }

    nlohmann::ordered_json bins = nlohmann::ordered_json::array();
    for (const auto& [bin, count] : histogram.bins())
        bins.push_back({{"lower_edge", histogram.lower_edge(bin)}, {"count", count}});

    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (const auto& [attempt, bucket] : per_attempt)
        curve.push_back({{"attempt", attempt},
                         {"candidates", bucket.first},
                         {"accepted", bucket.second},
                         {"acceptance_rate", bucket.first == 0
                                                 ? 0.0
                                                 : static_cast<double>(bucket.second) /
                                                       static_cast<double>(bucket.first)}});

    nlohmann::ordered_json attempts_hist = nlohmann::ordered_json::object();
    for (const auto& [attempts, count] : attempts_per_record)
        attempts_hist[std::to_string(attempts)] = count;

    return {{"records", states.size()},
            {"entries", contents.entries.size()},
            {"accepted_records", accepted},
            {"fallback_records", fallback},
            {"in_progress_records", in_progress},
            {"acceptance_rate",
             terminal == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(terminal)},
            {"fallback_rate",
             terminal == 0 ? 0.0 : static_cast<double>(fallback) / static_cast<double>(terminal)},
            {"first_attempt",
             {{"count", histogram.total()},
              {"fraction_at_or_above_0.6", histogram.fraction_at_or_above(0.6)},
              {"histogram", {{"bin_width", histogram.bin_width()}, {"bins", bins}}}}},
            {"attempts_per_record", attempts_hist},
            {"per_attempt_acceptance", curve},
            {"alpha", contents.header.alpha},
            {"max_attempts", contents.header.max_attempts},
            {"models", {{"llm", contents.header.llm_model},
                        {"embedder", contents.header.embed_model}}}};
}

namespace detail {

/// Flushes per-record entry batches to the cache strictly in corpus order,
/// regardless of worker completion order, so cache bytes are reproducible
/// for a given configuration.
class OrderedCacheFlusher {
public:
    OrderedCacheFlusher(CacheWriter& writer, std::size_t record_count)
        : writer_(writer), ready_(record_count, false), pending_(record_count) {}

    void record_done(std::size_t index, std::vector<CacheEntry> entries) {
        std::lock_guard<std::mutex> lock(mutex_);
        pending_[index] = std::move(entries);
        ready_[index] = true;
        while (frontier_ < ready_.size() && ready_[frontier_]) {
            for (const auto& entry : pending_[frontier_])
                writer_.append(entry);
            pending_[frontier_].clear();
            ++frontier_;
        }
        writer_.flush();
    }

private:
    CacheWriter& writer_;
    std::mutex mutex_;
    std::vector<bool> ready_;
    std::vector<std::vector<CacheEntry>> pending_;
    std::size_t frontier_ = 0;
};

inline AugmentationOutcome outcome_from_state(const CaptionRecord& record,
                                              const RecordState& state, int max_attempts) {
    AugmentationOutcome outcome;
    outcome.text_id = record.text_id;
    if (const CacheEntry* hit = state.accepted_entry()) {
        outcome.status = OutcomeStatus::accepted;
        outcome.final_text = hit->candidate_text;
        outcome.similarity = hit->similarity;
        outcome.attempts_used = hit->attempt;
    } else {
        outcome.status = OutcomeStatus::fallback_original;
        outcome.final_text = record.text;
        outcome.attempts_used = std::min(state.attempts_recorded(), max_attempts);
    }
    return outcome;
}

inline std::vector<CacheEntry> entries_from_outcome(const AugmentationOutcome& outcome,
                                                    const PipelineConfig& config) {
    std::vector<CacheEntry> entries;
    entries.reserve(outcome.attempts.size());
    for (const auto& attempt : outcome.attempts) {
        CacheEntry entry;
        entry.text_id = outcome.text_id;
        entry.attempt = attempt.attempt;
        entry.candidate_text = attempt.candidate_text;
        entry.similarity = attempt.similarity;
        entry.accepted = attempt.accepted;
        entry.model_id = config.llm.model_id;
        entry.embed_model_id = config.embedder.model_id;
        entry.prompt_hash = attempt.prompt_hash;
        entry.timestamp = utc_timestamp();
        entries.push_back(std::move(entry));
    }
    return entries;
}

inline std::vector<CaptionRecord> load_and_check_corpus(const PipelineConfig& config) {
    const auto records = load_annotations(config.corpus_path, config.corpus_format);
    const CorpusReport report = validate_corpus(records);
    if (!report.clean()) {
        std::ostringstream message;
        message << "corpus failed validation:"
                << " duplicate_text_ids=" << report.duplicate_text_ids.size()
                << " duplicate_pairs=" << report.duplicate_image_text_pairs.size()
                << " empty_captions=" << report.empty_captions.size();
        throw DataError(message.str());
    }
    return records;
}

} // namespace detail

/// Runs the rewrite -> filter -> retry stage over every selected-split record
/// that lacks a terminal outcome, persisting each attempt to the append-only
/// cache. Resumable: completed records are never reworked, and a record
/// interrupted mid-budget continues from its next attempt number.
inline RunReport run_augment(const PipelineConfig& config, const PipelineGateways& gateways,
                             const RunHooks& hooks = {}) {
    config.validate();
    if (!gateways.llm || !gateways.embedder)
        throw ConfigError("run_augment requires both gateways");

    const auto corpus = detail::load_and_check_corpus(config);
    std::vector<const CaptionRecord*> selected;
    for (const auto& record : corpus)
        if (config.splits_to_augment.count(record.split))
            selected.push_back(&record);

    // Replay any existing cache; refuse a cache built under a different
    // filter threshold or budget, since its verdicts would not be comparable.
    std::map<std::string, RecordState> states;
    namespace fs = std::filesystem;
    if (fs::exists(config.cache_path)) {
        if (!config.resume) {
            fs::remove(config.cache_path);
        } else {
            CacheContents existing = load_cache(config.cache_path);
            if (!existing.entries.empty() || !existing.header.created.empty()) {
                if (existing.header.alpha != config.alpha)
                    throw ConfigError("cache was built with alpha=" +
                                      std::to_string(existing.header.alpha) +
                                      "; rerun with the same alpha or a fresh cache");
                if (existing.header.max_attempts != config.max_attempts)
                    throw ConfigError("cache was built with max_attempts=" +
                                      std::to_string(existing.header.max_attempts) +
                                      "; rerun with the same budget or a fresh cache");
            }
            states = replay_cache(existing.entries);
        }
    }

    CacheHeader header;
    header.alpha = config.alpha;
    header.max_attempts = config.max_attempts;
    header.llm_model = config.llm.model_id;
    header.embed_model = config.embedder.model_id;
    header.created = utc_timestamp();
    CacheWriter writer(config.cache_path, header);
    detail::OrderedCacheFlusher flusher(writer, selected.size());

    RunReport report;
    report.corpus_records = corpus.size();
    report.selected_records = selected.size();

    std::vector<std::optional<AugmentationOutcome>> outcomes(selected.size());
    std::atomic<std::size_t> next_index{0};
    std::atomic<std::size_t> done_count{0};
    std::atomic<bool> aborted{false};
    std::exception_ptr run_error;
    std::mutex error_mutex;
    std::mutex hook_mutex;

    auto worker = [&] {
        AugmentContext context{*gateways.llm, *gateways.embedder, config.prompt};
        while (!aborted.load(std::memory_order_relaxed)) {
            if (hooks.cancelled && hooks.cancelled())
                break;
            const std::size_t index = next_index.fetch_add(1, std::memory_order_relaxed);
            if (index >= selected.size())
                break;
            const CaptionRecord& record = *selected[index];

            AugmentationOutcome outcome;
            std::vector<CacheEntry> new_entries;
            const auto state_it = states.find(record.text_id);
            const bool was_terminal =
                state_it != states.end() && state_it->second.terminal(config.max_attempts);
            try {
                if (was_terminal) {
                    outcome = detail::outcome_from_state(record, state_it->second,
                                                         config.max_attempts);
                } else {
                    const int already =
                        state_it == states.end() ? 0 : state_it->second.attempts_recorded();
                    outcome = augment_with_retry(record, config.alpha, config.max_attempts,
                                                 context, already);
                    new_entries = detail::entries_from_outcome(outcome, config);
                }
            } catch (...) {
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!run_error)
                        run_error = std::current_exception();
                }
                aborted.store(true, std::memory_order_relaxed);
                flusher.record_done(index, {});
                break;
            }

            flusher.record_done(index, std::move(new_entries));
            outcomes[index] = outcome;
            const std::size_t done = done_count.fetch_add(1, std::memory_order_relaxed) + 1;
            if (hooks.on_record) {
                std::lock_guard<std::mutex> lock(hook_mutex);
                hooks.on_record(outcome, done, selected.size());
            }
        }
    };

    if (config.worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(config.worker_count));
        for (int i = 0; i < config.worker_count; ++i)
            threads.emplace_back(worker);
        for (auto& thread : threads)
            thread.join();
    }
    writer.flush();

    if (run_error)
        std::rethrow_exception(run_error); // partial cache stays on disk

    for (std::size_t i = 0; i < selected.size(); ++i) {
        if (!outcomes[i]) {
            ++report.unprocessed;
            continue;
        }
        const auto& outcome = *outcomes[i];
        const auto state_it = states.find(outcome.text_id);
        if (state_it != states.end() && state_it->second.terminal(config.max_attempts))
            ++report.cached_terminal;
        else
            ++report.processed;
        switch (outcome.status) {
        case OutcomeStatus::accepted: ++report.accepted; break;
        case OutcomeStatus::fallback_original: ++report.fallback; break;
        case OutcomeStatus::gateway_error: ++report.errored; break;
        }
    }
    report.completed = report.unprocessed == 0;
    report.stats = report_from_cache(load_cache(config.cache_path));
    return report;
}

/// Derives terminal outcomes for the train split from the cache; errors list
/// the text_ids still lacking one.
inline std::map<std::string, AugmentationOutcome>
outcomes_from_cache(const std::vector<CaptionRecord>& corpus, const CacheContents& contents) {
    const auto states = replay_cache(contents.entries);
    std::map<std::string, AugmentationOutcome> outcomes;
    for (const auto& record : corpus) {
        const auto it = states.find(record.text_id);
        if (it == states.end() || !it->second.terminal(contents.header.max_attempts))
            continue;
        outcomes.emplace(record.text_id, detail::outcome_from_state(record, it->second,
                                                                    contents.header.max_attempts));
    }
    return outcomes;
}

/// Materializes one manifest file per epoch under manifest_dir. Deterministic
/// under (seed, epoch); a rerun reproduces the files byte for byte.
inline std::vector<std::string> run_sample(const PipelineConfig& config) {
    config.validate();
    if (config.manifest_dir.empty())
        throw ConfigError("manifest_dir is required for sampling");

    const auto corpus = detail::load_and_check_corpus(config);
    const CacheContents contents = load_cache(config.cache_path);
    const auto outcomes = outcomes_from_cache(corpus, contents);

    namespace fs = std::filesystem;
    fs::create_directories(config.manifest_dir);

    std::vector<std::string> paths;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const long long draw_epoch = config.freeze_sampling ? 0 : epoch;
        EpochManifest manifest =
            materialize_epoch(corpus, outcomes, draw_epoch, config.beta, config.seed);
        manifest.epoch = epoch;

        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%04d.jsonl", epoch);
        const std::string path = (fs::path(config.manifest_dir) / name).string();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write manifest: " + path);
        out << write_epoch_manifest(manifest);
        if (!out)
            throw DataError("failed writing manifest: " + path);
        paths.push_back(path);
    }
    return paths;
}

/// Builds the statistics document for an existing cache file.
inline nlohmann::ordered_json run_report(const std::string& cache_path) {
    return report_from_cache(load_cache(cache_path));
}

} // namespace textaug
