// textaug: rewrite image-caption corpora through an LLM endpoint, filter
// unfaithful rewrites by embedding similarity, and emit balanced-sampled
// training manifests. `--mock` routes both gateways to the in-process
// deterministic testkit so every stage runs offline.

#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "textaug/corpus.hpp"
#include "textaug/errors.hpp"
#include "textaug/feature_io.hpp"
#include "textaug/http_backends.hpp"
#include "textaug/pipeline.hpp"
#include "textaug/retrieval_math.hpp"
#include "textaug/testkit.hpp"

namespace {

using namespace textaug;

struct MockOptions {
    bool enabled = false;
    std::uint64_t seed = 0;
    double garbage_rate = 0.0;
    double fault_rate = 0.0;
};

PipelineGateways make_gateways(PipelineConfig& config, const MockOptions& mock) {
    if (mock.enabled) {
        testkit::MockProfile profile;
        profile.seed = mock.seed;
        profile.garbage_rate = mock.garbage_rate;
        profile.failure_rate = mock.fault_rate;
        config.llm.model_id = testkit::kMockChatModelId;
        config.embedder.model_id = testkit::kMockEmbedModelId;
        return {std::make_shared<ChatClient>(
                    std::make_shared<testkit::MockChatBackend>(profile, config.prompt.instruction),
                    config.llm),
                std::make_shared<EmbedClient>(std::make_shared<testkit::MockEmbedBackend>(),
                                              config.embedder)};
    }

    if (auto url = env_var("TEXTAUG_LLM_URL"))
        config.llm.endpoint_url = *url;
    if (auto key = env_var("TEXTAUG_LLM_API_KEY"))
        config.llm.api_key = *key;
    if (auto url = env_var("TEXTAUG_EMBED_URL"))
        config.embedder.endpoint_url = *url;
    if (auto key = env_var("TEXTAUG_EMBED_API_KEY"))
        config.embedder.api_key = *key;
    if (config.llm.endpoint_url.empty())
        throw ConfigError("no LLM endpoint configured (set llm.endpoint_url or TEXTAUG_LLM_URL, "
                          "or pass --mock)");
    if (config.embedder.endpoint_url.empty())
        throw ConfigError("no embedding endpoint configured (set embedder.endpoint_url or "
                          "TEXTAUG_EMBED_URL, or pass --mock)");
    return {std::make_shared<ChatClient>(std::make_shared<HttpChatBackend>(), config.llm),
            std::make_shared<EmbedClient>(std::make_shared<HttpEmbedBackend>(), config.embedder)};
}

int run_validate(const std::string& corpus_path, const std::string& format_name) {
    const auto records =
        load_annotations(corpus_path, parse_annotation_format(format_name));
    const CorpusReport report = validate_corpus(records);
    std::cout << to_json(report).dump(2) << "\n";
    return report.clean() ? kExitSuccess : kExitDataError;
}

int run_eval(const std::string& images_path, const std::string& texts_path, double tau,
             std::vector<std::size_t> ks, const std::string& score_name) {
    const auto images = load_feature_jsonl(images_path);
    const auto texts = load_feature_jsonl(texts_path);
    if (images.size() != texts.size() || images.empty())
        throw DataError("eval requires equal, non-zero image and text counts (got " +
                        std::to_string(images.size()) + " images, " +
                        std::to_string(texts.size()) + " texts)");

    ScoreKind kind;
    if (score_name == "cosine")
        kind = ScoreKind::cosine;
    else if (score_name == "dot")
        kind = ScoreKind::dot;
    else
        throw ConfigError("unknown score kind: '" + score_name + "'");

    std::vector<FeatureVector> image_features, text_features;
    for (const auto& record : images)
        image_features.push_back(record.features);
    for (const auto& record : texts)
        text_features.push_back(record.features);

    const SimilarityMatrix s = mixed_similarity_matrix(image_features, text_features, kind);
    const GroundTruth gt = identity_ground_truth(texts, images);

    if (ks.empty())
        for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}})
            if (k <= s.size())
                ks.push_back(k);

    nlohmann::ordered_json ranks = nlohmann::ordered_json::object();
    for (std::size_t k : ks)
        ranks["rank_" + std::to_string(k)] = rank_k(s, gt, k);

    nlohmann::ordered_json out{
        {"queries", s.size()},
        {"score", score_name},
        {"ranks", ranks},
        {"mAP", mean_average_precision(s, gt)},
        {"tau", tau},
        {"loss_image_to_text", contrastive_loss_image_to_text(s, tau)},
        {"loss_text_to_image", contrastive_loss_text_to_image(s, tau)}};
    std::cout << out.dump(2) << "\n";
    return kExitSuccess;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-backed caption augmentation pipeline for image-text retrieval corpora"};
    app.require_subcommand(1);

    std::string config_path;
    std::string corpus_path, corpus_format = "canonical_jsonl";
    std::string cache_path, manifest_dir;
    double alpha = -1.0, beta = -1.0;
    std::int64_t seed = -1;
    int epochs = -1, max_attempts = -1, workers = -1;
    bool resume_on = false, resume_off = false, freeze_sampling = false;
    std::vector<std::string> augment_splits;
    MockOptions mock;

    auto add_config_options = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config file (JSON)");
        cmd->add_option("--corpus", corpus_path, "annotation file (overrides config)");
        cmd->add_option("--format", corpus_format,
                        "annotation format: canonical_jsonl | cuhk_pedes_json");
        cmd->add_option("--cache", cache_path, "attempt cache path (JSONL)");
        cmd->add_option("--alpha", alpha, "similarity acceptance threshold");
        cmd->add_option("--beta", beta, "augmented-text sampling threshold");
        cmd->add_option("--seed", seed, "sampling seed");
        cmd->add_option("--epochs", epochs, "number of epoch manifests");
        cmd->add_option("--max-attempts", max_attempts, "rewrite attempts per caption");
        cmd->add_option("--workers", workers, "concurrent pipeline workers");
    };

    auto build_config = [&](bool format_given) {
        PipelineConfig config;
        if (!config_path.empty())
            config = load_pipeline_config(config_path);
        if (!corpus_path.empty())
            config.corpus_path = corpus_path;
        if (format_given || config_path.empty())
            config.corpus_format = parse_annotation_format(corpus_format);
        if (!cache_path.empty())
            config.cache_path = cache_path;
        if (!manifest_dir.empty())
            config.manifest_dir = manifest_dir;
        if (alpha >= 0)
            config.alpha = alpha;
        if (beta >= 0)
            config.beta = beta;
        if (seed >= 0)
            config.seed = static_cast<std::uint64_t>(seed);
        if (epochs > 0)
            config.epochs = epochs;
        if (max_attempts > 0)
            config.max_attempts = max_attempts;
        if (workers > 0)
            config.worker_count = workers;
        if (resume_off)
            config.resume = false;
        else if (resume_on)
            config.resume = true;
        if (freeze_sampling)
            config.freeze_sampling = true;
        if (!augment_splits.empty()) {
            config.splits_to_augment.clear();
            for (const auto& label : augment_splits)
                config.splits_to_augment.insert(parse_split(label));
        }
        return config;
    };

    // augment
    auto* augment = app.add_subcommand("augment", "rewrite captions and filter by faithfulness");
    add_config_options(augment);
    augment->add_flag("--resume", resume_on, "replay the existing cache (default)");
    augment->add_flag("--no-resume", resume_off, "discard any existing cache and start fresh");
    augment->add_option("--augment-split", augment_splits,
                        "splits to augment (default: train); repeatable");
    augment->add_flag("--mock", mock.enabled, "use the in-process deterministic mock gateways");
    augment->add_option("--mock-seed", mock.seed, "mock determinism seed");
    augment->add_option("--mock-garbage-rate", mock.garbage_rate,
                        "fraction of garbled mock completions");
    augment->add_option("--mock-fault-rate", mock.fault_rate,
                        "fraction of injected mock transport faults");

    // sample
    auto* sample = app.add_subcommand("sample", "materialize per-epoch training manifests");
    add_config_options(sample);
    sample->add_option("--manifest-dir", manifest_dir, "output directory for epoch manifests");
    sample->add_flag("--freeze-sampling", freeze_sampling,
                     "reuse the epoch-0 draw for every epoch");

    // report
    auto* report = app.add_subcommand("report", "summarize an attempt cache");
    std::string report_cache;
    report->add_option("--cache", report_cache, "attempt cache path")->required();

    // validate
    auto* validate = app.add_subcommand("validate", "check an annotation file");
    std::string validate_corpus_path, validate_format = "canonical_jsonl";
    validate->add_option("--corpus", validate_corpus_path, "annotation file")->required();
    validate->add_option("--format", validate_format,
                         "annotation format: canonical_jsonl | cuhk_pedes_json");

    // eval
    auto* eval = app.add_subcommand("eval", "retrieval metrics over feature fixtures");
    std::string images_path, texts_path, score_name = "cosine";
    double tau = 0.07;
    std::vector<std::size_t> ks;
    eval->add_option("--images", images_path, "image feature fixture (JSONL)")->required();
    eval->add_option("--texts", texts_path, "text feature fixture (JSONL)")->required();
    eval->add_option("--tau", tau, "softmax temperature");
    eval->add_option("--k", ks, "Rank-K cutoffs (default: 1,5,10 where valid)");
    eval->add_option("--score", score_name, "pair score: cosine | dot");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitSuccess : kExitConfigError;
    }

    try {
        if (augment->parsed()) {
            PipelineConfig config = build_config(augment->count("--format") > 0);
            PipelineGateways gateways = make_gateways(config, mock);
            const RunReport run = run_augment(config, gateways);
            nlohmann::ordered_json summary{{"corpus_records", run.corpus_records},
                                           {"selected_records", run.selected_records},
                                           {"cached_terminal", run.cached_terminal},
                                           {"processed", run.processed},
                                           {"accepted", run.accepted},
                                           {"fallback", run.fallback},
                                           {"errored", run.errored},
                                           {"completed", run.completed},
                                           {"stats", run.stats}};
            std::cout << summary.dump(2) << "\n";
            return kExitSuccess;
        }
        if (sample->parsed()) {
            PipelineConfig config = build_config(sample->count("--format") > 0);
            const auto paths = run_sample(config);
            nlohmann::ordered_json out{{"manifests", paths}};
            std::cout << out.dump(2) << "\n";
            return kExitSuccess;
        }
        if (report->parsed()) {
            std::cout << run_report(report_cache).dump(2) << "\n";
            return kExitSuccess;
        }
        if (validate->parsed())
            return run_validate(validate_corpus_path, validate_format);
        if (eval->parsed())
            return run_eval(images_path, texts_path, tau, ks, score_name);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const GatewayError& e) {
        std::cerr << "gateway error: " << e.what() << "\n";
        return kExitGatewayError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitSuccess;
}
