#pragma once

#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textaug/errors.hpp"
#include "textaug/retrieval_math.hpp"

namespace textaug {

/// One row of a feature fixture: an id, an optional identity label, and the
/// feature vector. When identity is omitted it defaults to the id, which
/// makes the diagonal the only relevant match.
struct FeatureRecord {
    std::string id;
    std::string identity;
    FeatureVector features;
};

/// Fixture format: JSONL, one object per line with keys
/// {"id": str, "identity": str (optional), "vector": [numbers]}.
inline std::vector<FeatureRecord> parse_feature_jsonl(const std::string& raw) {
    std::vector<FeatureRecord> records;
    std::size_t line_start = 0;
    std::size_t line_number = 0;
    while (line_start < raw.size()) {
        std::size_t line_end = raw.find('\n', line_start);
        if (line_end == std::string::npos)
            line_end = raw.size();
        std::string_view line(raw.data() + line_start, line_end - line_start);
        ++line_number;
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            nlohmann::json object;
            try {
                object = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw DataError("feature line " + std::to_string(line_number) + ": " + e.what());
            }
            try {
                FeatureRecord record;
                record.id = object.at("id").get<std::string>();
                record.identity = object.value("identity", record.id);
                record.features.values = object.at("vector").get<std::vector<double>>();
                if (record.features.values.empty())
                    throw DataError("feature line " + std::to_string(line_number) +
                                    ": empty vector");
                records.push_back(std::move(record));
            } catch (const nlohmann::json::exception& e) {
                throw DataError("feature line " + std::to_string(line_number) + ": " + e.what());
            }
        }
        line_start = line_end + 1;
    }
    return records;
}

inline std::vector<FeatureRecord> load_feature_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open feature file: " + path);
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_feature_jsonl(raw);
}

/// Identity-level relevance: image column j is relevant to text query i iff
/// they share an identity. Every query must match at least one image.
inline GroundTruth identity_ground_truth(const std::vector<FeatureRecord>& texts,
                                         const std::vector<FeatureRecord>& images) {
    std::map<std::string, std::vector<std::size_t>> by_identity;
    for (std::size_t j = 0; j < images.size(); ++j)
        by_identity[images[j].identity].push_back(j);

    GroundTruth gt;
    gt.relevant.reserve(texts.size());
    for (const auto& text : texts) {
        const auto it = by_identity.find(text.identity);
        if (it == by_identity.end())
            throw DataError("text '" + text.id + "' (identity '" + text.identity +
                            "') matches no image");
        gt.relevant.push_back(it->second);
    }
    return gt;
}

} // namespace textaug
