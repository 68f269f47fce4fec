#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textaug/corpus.hpp"
#include "textaug/errors.hpp"
#include "textaug/faithfulness.hpp"
#include "textaug/hashing.hpp"

namespace textaug {

enum class TextSource { original, augmented };

inline const char* to_string(TextSource source) {
    return source == TextSource::original ? "original" : "augmented";
}

inline TextSource parse_text_source(std::string_view label) {
    if (label == "original") return TextSource::original;
    if (label == "augmented") return TextSource::augmented;
    throw DataError("unknown text source: '" + std::string(label) + "'");
}

/// Per-record Bernoulli draw between original and augmented text.
struct BssChoice {
    std::string text_id;
    long long epoch = 0;
    double r = 0.0;   // uniform draw, strictly inside (0, 1)
    double beta = 0.0;
    TextSource selected = TextSource::original;
};

inline std::uint64_t sampling_hash(std::uint64_t seed, long long epoch, std::string_view text_id) {
    std::uint64_t h = fnv1a64_u64(seed);
    h = fnv1a64_u64(static_cast<std::uint64_t>(epoch), h);
    h = fnv1a64(text_id, h);
    return splitmix64(h);
}

/// Deterministic selection: r is derived from hash(seed, epoch, text_id) and
/// the augmented text is chosen iff r <= beta. r never touches 0 or 1, so
/// beta = 0 yields no augmented rows and beta = 1 yields no original rows.
/// Records without an accepted augmentation stay original regardless of r.
inline BssChoice balanced_select(const std::string& text_id, long long epoch, double beta,
                                 std::uint64_t seed, bool has_augmentation) {
    if (beta < 0.0 || beta > 1.0)
        throw std::invalid_argument("beta must lie in [0, 1]");

    BssChoice choice;
    choice.text_id = text_id;
    choice.epoch = epoch;
    choice.beta = beta;
    choice.r = unit_open(sampling_hash(seed, epoch, text_id));
    choice.selected = (has_augmentation && choice.r <= beta) ? TextSource::augmented
                                                             : TextSource::original;
    return choice;
}

struct ManifestRow {
    std::string text_id;
    std::string image_id;
    std::string identity_id;
    std::string chosen_text;
    TextSource source = TextSource::original;

    bool operator==(const ManifestRow&) const = default;
};

/// Per-epoch training list after balanced sampling; one row per train record,
/// in corpus order.
struct EpochManifest {
    long long epoch = 0;
    std::uint64_t seed = 0;
    double beta = 0.0;
    std::vector<ManifestRow> rows;

    bool operator==(const EpochManifest&) const = default;
};

/// Materializes the training list for one epoch over the train split.
/// Every train record must have a terminal outcome; the chosen text is the
/// accepted augmentation when selected, the original otherwise.
inline EpochManifest materialize_epoch(const std::vector<CaptionRecord>& corpus,
                                       const std::map<std::string, AugmentationOutcome>& outcomes,
                                       long long epoch, double beta, std::uint64_t seed) {
    if (beta < 0.0 || beta > 1.0)
        throw std::invalid_argument("beta must lie in [0, 1]");

    std::vector<std::string> missing;
    for (const auto& record : corpus)
        if (record.split == Split::train && outcomes.find(record.text_id) == outcomes.end())
            missing.push_back(record.text_id);
    if (!missing.empty()) {
        std::string message = "missing augmentation outcomes for " +
                              std::to_string(missing.size()) + " train record(s):";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i)
            message += " " + missing[i];
        if (missing.size() > 20)
            message += " ...";
        throw DataError(message);
    }

    EpochManifest manifest;
    manifest.epoch = epoch;
    manifest.seed = seed;
    manifest.beta = beta;
    for (const auto& record : corpus) {
        if (record.split != Split::train)
            continue;
        const auto& outcome = outcomes.at(record.text_id);
        const bool has_augmentation = outcome.status == OutcomeStatus::accepted;
        const BssChoice choice = balanced_select(record.text_id, epoch, beta, seed,
                                                 has_augmentation);

        ManifestRow row;
        row.text_id = record.text_id;
        row.image_id = record.image_id;
        row.identity_id = record.identity_id;
        row.source = choice.selected;
        row.chosen_text = choice.selected == TextSource::augmented ? outcome.final_text
                                                                   : record.text;
        manifest.rows.push_back(std::move(row));
    }
    return manifest;
}

inline double empirical_rate(const EpochManifest& manifest) {
    if (manifest.rows.empty())
        throw std::invalid_argument("empirical_rate of an empty manifest");
    std::size_t augmented = 0;
    for (const auto& row : manifest.rows)
        if (row.source == TextSource::augmented)
            ++augmented;
    return static_cast<double>(augmented) / static_cast<double>(manifest.rows.size());
}

/// JSONL serialization: a header line {epoch, seed, beta}, then one row
/// object per line. Byte-identical for identical inputs.
inline std::string write_epoch_manifest(const EpochManifest& manifest) {
    std::string out;
    out += nlohmann::ordered_json{{"epoch", manifest.epoch},
                                  {"seed", manifest.seed},
                                  {"beta", manifest.beta}}
               .dump();
    out += '\n';
    for (const auto& row : manifest.rows) {
        out += nlohmann::ordered_json{{"text_id", row.text_id},
                                      {"image_id", row.image_id},
                                      {"identity_id", row.identity_id},
                                      {"chosen_text", row.chosen_text},
                                      {"source", to_string(row.source)}}
                   .dump();
        out += '\n';
    }
    return out;
}

inline EpochManifest parse_epoch_manifest(const std::string& serialized) {
    EpochManifest manifest;
    std::size_t line_start = 0;
    bool saw_header = false;
    std::size_t line_number = 0;
    while (line_start < serialized.size()) {
        std::size_t line_end = serialized.find('\n', line_start);
        if (line_end == std::string::npos)
            line_end = serialized.size();
        std::string_view line(serialized.data() + line_start, line_end - line_start);
        ++line_number;
        if (!line.empty()) {
            nlohmann::json object;
            try {
                object = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw DataError("manifest line " + std::to_string(line_number) + ": " + e.what());
            }
            if (!saw_header) {
                manifest.epoch = object.at("epoch").get<long long>();
                manifest.seed = object.at("seed").get<std::uint64_t>();
                manifest.beta = object.at("beta").get<double>();
                saw_header = true;
            } else {
                ManifestRow row;
                row.text_id = object.at("text_id").get<std::string>();
                row.image_id = object.at("image_id").get<std::string>();
                row.identity_id = object.at("identity_id").get<std::string>();
                row.chosen_text = object.at("chosen_text").get<std::string>();
                row.source = parse_text_source(object.at("source").get<std::string>());
                manifest.rows.push_back(std::move(row));
            }
        }
        line_start = line_end + 1;
    }
    if (!saw_header)
        throw DataError("manifest has no header line");
    return manifest;
}

} // namespace textaug
