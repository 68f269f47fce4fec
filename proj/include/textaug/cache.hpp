#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textaug/errors.hpp"

namespace textaug {

/// One rewrite attempt persisted for resumability and audit. Append-only;
/// (text_id, attempt) is unique within a cache file.
struct CacheEntry {
    std::string text_id;
    int attempt = 1;
    std::string candidate_text; // sanitized; empty if sanitization rejected
    std::optional<double> similarity;
    bool accepted = false;
    std::string model_id;
    std::string embed_model_id;
    std::string prompt_hash;
    std::string timestamp;
};

/// First line of a cache file: the parameters the cache was built with.
/// Replay needs max_attempts to tell fallback from in-progress records.
struct CacheHeader {
    int version = 1;
    double alpha = 0.6;
    int max_attempts = 5;
    std::string llm_model;
    std::string embed_model;
    std::string created;
};

inline constexpr const char* kCacheKind = "textaug_cache";

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
    std::tm parts{};
    gmtime_r(&seconds, &parts);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buffer;
}

inline nlohmann::ordered_json to_json(const CacheHeader& header) {
    return {{"kind", kCacheKind},
            {"version", header.version},
            {"alpha", header.alpha},
            {"max_attempts", header.max_attempts},
            {"llm_model", header.llm_model},
            {"embed_model", header.embed_model},
            {"created", header.created}};
}

inline nlohmann::ordered_json to_json(const CacheEntry& entry) {
    nlohmann::ordered_json object{{"text_id", entry.text_id},
                                  {"attempt", entry.attempt},
                                  {"candidate_text", entry.candidate_text}};
    if (entry.similarity)
        object["similarity"] = *entry.similarity;
    else
        object["similarity"] = nullptr;
    object["accepted"] = entry.accepted;
    object["model_id"] = entry.model_id;
    object["embed_model_id"] = entry.embed_model_id;
    object["prompt_hash"] = entry.prompt_hash;
    object["timestamp"] = entry.timestamp;
    return object;
}

struct CacheContents {
    CacheHeader header;
    std::vector<CacheEntry> entries;
};

namespace detail {

inline CacheHeader header_from_json(const nlohmann::json& object, std::size_t line_number) {
    if (!object.is_object() || object.value("kind", "") != kCacheKind)
        throw DataError("cache line " + std::to_string(line_number) +
                        ": expected a cache header line");
    CacheHeader header;
    header.version = object.value("version", 1);
    header.alpha = object.value("alpha", 0.6);
    header.max_attempts = object.value("max_attempts", 5);
    header.llm_model = object.value("llm_model", "");
    header.embed_model = object.value("embed_model", "");
    header.created = object.value("created", "");
    return header;
}

inline CacheEntry entry_from_json(const nlohmann::json& object, std::size_t line_number) {
    try {
        CacheEntry entry;
        entry.text_id = object.at("text_id").get<std::string>();
        entry.attempt = object.at("attempt").get<int>();
        entry.candidate_text = object.at("candidate_text").get<std::string>();
        if (!object.at("similarity").is_null())
            entry.similarity = object.at("similarity").get<double>();
        entry.accepted = object.at("accepted").get<bool>();
        entry.model_id = object.value("model_id", "");
        entry.embed_model_id = object.value("embed_model_id", "");
        entry.prompt_hash = object.value("prompt_hash", "");
        entry.timestamp = object.value("timestamp", "");
        return entry;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("cache line " + std::to_string(line_number) + ": " + e.what());
    }
}

} // namespace detail

/// Loads a cache file. A missing-on-disk or zero-length file is an empty
/// cache; any unparseable line is a DataError naming the line number.
inline CacheContents load_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open cache file: " + path);

    CacheContents contents;
    std::string line;
    std::size_t line_number = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        nlohmann::json object;
        try {
            object = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("cache line " + std::to_string(line_number) + ": " + e.what());
        }
        if (!saw_header) {
            contents.header = detail::header_from_json(object, line_number);
            saw_header = true;
        } else {
            contents.entries.push_back(detail::entry_from_json(object, line_number));
        }
    }
    return contents;
}

/// Append-only cache writer. Writes the header when creating a fresh file;
/// appends entries as records complete.
class CacheWriter {
public:
    CacheWriter(const std::string& path, const CacheHeader& header) {
        bool fresh = true;
        {
            std::ifstream probe(path, std::ios::binary);
            if (probe && probe.peek() != std::ifstream::traits_type::eof())
                fresh = false;
        }
        out_.open(path, std::ios::binary | std::ios::app);
        if (!out_)
            throw DataError("cannot open cache for writing: " + path);
        if (fresh) {
            out_ << to_json(header).dump() << '\n';
            out_.flush();
        }
    }

    void append(const CacheEntry& entry) {
        out_ << to_json(entry).dump() << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

/// Per-record view of the cache. A record is terminal once an attempt was
/// accepted or the attempt budget is spent; anything else is in progress
/// and will be resumed.
struct RecordState {
    std::vector<CacheEntry> entries; // sorted by attempt

    const CacheEntry* accepted_entry() const {
        for (const auto& entry : entries)
            if (entry.accepted)
                return &entry;
        return nullptr;
    }

    bool terminal(int max_attempts) const {
        return accepted_entry() != nullptr ||
               entries.size() >= static_cast<std::size_t>(max_attempts);
    }

    int attempts_recorded() const { return static_cast<int>(entries.size()); }
};

inline std::map<std::string, RecordState> replay_cache(const std::vector<CacheEntry>& entries) {
    std::map<std::string, RecordState> states;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& entry : entries) {
        if (!seen.insert({entry.text_id, entry.attempt}).second)
            throw DataError("cache holds duplicate (text_id, attempt): " + entry.text_id + "#" +
                            std::to_string(entry.attempt));
        states[entry.text_id].entries.push_back(entry);
    }
    for (auto& [id, state] : states)
        std::sort(state.entries.begin(), state.entries.end(),
                  [](const CacheEntry& a, const CacheEntry& b) { return a.attempt < b.attempt; });
    return states;
}

/// Canonical content view for determinism checks: entries sorted by
/// (text_id, attempt) with timestamps stripped, header without `created`.
inline std::string cache_canonical_dump(const CacheContents& contents) {
    CacheHeader header = contents.header;
    header.created.clear();
    std::vector<CacheEntry> entries = contents.entries;
    std::sort(entries.begin(), entries.end(), [](const CacheEntry& a, const CacheEntry& b) {
        return std::tie(a.text_id, a.attempt) < std::tie(b.text_id, b.attempt);
    });
    std::string out = to_json(header).dump();
    out += '\n';
    for (auto& entry : entries) {
        entry.timestamp.clear();
        out += to_json(entry).dump();
        out += '\n';
    }
    return out;
}

} // namespace textaug
