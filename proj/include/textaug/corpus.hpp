#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textaug/errors.hpp"

namespace textaug {

enum class Split { train, val, test };

inline const char* to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

inline Split parse_split(std::string_view label) {
    if (label == "train") return Split::train;
    if (label == "val" || label == "valid" || label == "validation") return Split::val;
    if (label == "test") return Split::test;
    throw DataError("unknown split label: '" + std::string(label) + "'");
}

/// One (image, identity, caption) annotation row; the unit of augmentation.
struct CaptionRecord {
    std::string text_id;
    std::string image_id;
    std::string identity_id;
    std::string image_path;
    Split split = Split::train;
    std::string text;

    bool operator==(const CaptionRecord&) const = default;
};

// Training-side tokenizers truncate captions at this length; ingestion only
// flags longer ones.
inline constexpr std::size_t kCaptionTokenLimit = 77;

struct CorpusReport {
    std::size_t record_count = 0;
    std::vector<std::string> duplicate_text_ids;
    std::vector<std::string> duplicate_image_text_pairs; // text_ids of repeated (image_id, text)
    std::vector<std::string> empty_captions;             // text_ids
    std::vector<std::string> overlong_captions;          // text_ids with > kCaptionTokenLimit tokens
    std::map<Split, std::size_t> split_counts;

    bool clean() const {
        return duplicate_text_ids.empty() && duplicate_image_text_pairs.empty() &&
               empty_captions.empty();
    }
};

enum class AnnotationFormat { cuhk_pedes_json, canonical_jsonl };

inline AnnotationFormat parse_annotation_format(std::string_view name) {
    if (name == "cuhk_pedes_json") return AnnotationFormat::cuhk_pedes_json;
    if (name == "canonical_jsonl") return AnnotationFormat::canonical_jsonl;
    throw ConfigError("unknown annotation format: '" + std::string(name) + "'");
}

inline const char* to_string(AnnotationFormat format) {
    return format == AnnotationFormat::cuhk_pedes_json ? "cuhk_pedes_json" : "canonical_jsonl";
}

class ParseError : public DataError {
public:
    ParseError(std::size_t byte_offset, const std::string& message)
        : DataError("parse error at byte " + std::to_string(byte_offset) + ": " + message),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class FieldError : public DataError {
public:
    FieldError(std::size_t record_index, const std::string& field, const std::string& message)
        : DataError("record " + std::to_string(record_index) + ", field '" + field +
                    "': " + message),
          record_index_(record_index), field_(field) {}

    std::size_t record_index() const { return record_index_; }
    const std::string& field() const { return field_; }

private:
    std::size_t record_index_;
    std::string field_;
};

class ValidationError : public DataError {
public:
    using DataError::DataError;
};

inline bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Trims and collapses internal whitespace runs to single spaces. Case and
/// punctuation are preserved so the text stays a stable cache key.
inline std::string normalize_caption(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        if (is_space_byte(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

inline std::size_t token_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_space_byte(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

namespace detail {

inline std::string json_type_name(const nlohmann::json& value) {
    return std::string(value.type_name());
}

inline const nlohmann::json& require_field(const nlohmann::json& object, std::size_t record_index,
                                           const char* field) {
    auto it = object.find(field);
    if (it == object.end())
        throw FieldError(record_index, field, "missing required field");
    return *it;
}

inline std::string require_string(const nlohmann::json& object, std::size_t record_index,
                                  const char* field) {
    const auto& value = require_field(object, record_index, field);
    if (!value.is_string())
        throw FieldError(record_index, field, "expected string, got " + json_type_name(value));
    return value.get<std::string>();
}

inline std::vector<CaptionRecord> parse_cuhk_pedes(const std::string& raw) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.byte, e.what());
    }
    if (!doc.is_array())
        throw ParseError(0, "expected a top-level JSON array of annotation records");

    std::vector<CaptionRecord> records;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& entry = doc[i];
        if (!entry.is_object())
            throw FieldError(i, "<record>", "expected object, got " + json_type_name(entry));

        const std::string file_path = require_string(entry, i, "file_path");
        const auto& id_value = require_field(entry, i, "id");
        std::string identity;
        if (id_value.is_string())
            identity = id_value.get<std::string>();
        else if (id_value.is_number_integer())
            identity = std::to_string(id_value.get<long long>());
        else if (id_value.is_number_unsigned())
            identity = std::to_string(id_value.get<unsigned long long>());
        else
            throw FieldError(i, "id", "expected string or integer, got " + json_type_name(id_value));

        Split split;
        try {
            split = parse_split(require_string(entry, i, "split"));
        } catch (const DataError& e) {
            throw ValidationError("record " + std::to_string(i) + ": " + e.what());
        }

        const auto& captions = require_field(entry, i, "captions");
        if (!captions.is_array())
            throw FieldError(i, "captions", "expected array, got " + json_type_name(captions));

        for (std::size_t k = 0; k < captions.size(); ++k) {
            if (!captions[k].is_string())
                throw FieldError(i, "captions", "caption " + std::to_string(k) + " is not a string");
            CaptionRecord record;
            record.image_id = file_path;
            record.image_path = file_path;
            record.identity_id = identity;
            record.split = split;
            record.text = normalize_caption(captions[k].get<std::string>());
            record.text_id = file_path + "#" + std::to_string(k);
            records.push_back(std::move(record));
        }
    }
    return records;
}

inline std::vector<CaptionRecord> parse_canonical_jsonl(const std::string& raw) {
    std::vector<CaptionRecord> records;
    std::size_t line_start = 0;
    std::size_t record_index = 0;
    while (line_start < raw.size()) {
        std::size_t line_end = raw.find('\n', line_start);
        if (line_end == std::string::npos)
            line_end = raw.size();
        std::string_view line(raw.data() + line_start, line_end - line_start);

        bool blank = true;
        for (char c : line)
            if (!is_space_byte(c)) { blank = false; break; }
        if (!blank) {
            nlohmann::json object;
            try {
                object = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(line_start + (e.byte > 0 ? e.byte - 1 : 0), e.what());
            }
            if (!object.is_object())
                throw FieldError(record_index, "<record>", "expected object");

            CaptionRecord record;
            record.text_id = require_string(object, record_index, "text_id");
            record.image_id = require_string(object, record_index, "image_id");
            record.identity_id = require_string(object, record_index, "identity_id");
            record.image_path = require_string(object, record_index, "image_path");
            try {
                record.split = parse_split(require_string(object, record_index, "split"));
            } catch (const FieldError&) {
                throw;
            } catch (const DataError& e) {
                throw ValidationError("record " + std::to_string(record_index) + ": " + e.what());
            }
            record.text = normalize_caption(require_string(object, record_index, "text"));
            records.push_back(std::move(record));
            ++record_index;
        }
        line_start = line_end + 1;
    }
    return records;
}

} // namespace detail

/// Parses an annotation stream into caption records, one per caption.
/// Multi-caption source records fan out to consecutive rows whose text_ids
/// are suffixed "#0", "#1", ... Source ordering is preserved.
inline std::vector<CaptionRecord> parse_annotations(const std::string& raw,
                                                    AnnotationFormat format) {
    return format == AnnotationFormat::cuhk_pedes_json ? detail::parse_cuhk_pedes(raw)
                                                       : detail::parse_canonical_jsonl(raw);
}

inline std::vector<CaptionRecord> load_annotations(const std::string& path,
                                                   AnnotationFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open annotation file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_annotations(buffer.str(), format);
}

/// Reports every invariant violation without mutating the records.
inline CorpusReport validate_corpus(const std::vector<CaptionRecord>& records) {
    CorpusReport report;
    report.record_count = records.size();
    report.split_counts = {{Split::train, 0}, {Split::val, 0}, {Split::test, 0}};

    std::set<std::string> seen_ids;
    std::set<std::string> flagged_ids;
    std::set<std::pair<std::string, std::string>> seen_pairs;
    for (const auto& record : records) {
        ++report.split_counts[record.split];
        if (!seen_ids.insert(record.text_id).second && flagged_ids.insert(record.text_id).second)
            report.duplicate_text_ids.push_back(record.text_id);
        if (!seen_pairs.insert({record.image_id, record.text}).second)
            report.duplicate_image_text_pairs.push_back(record.text_id);
        if (normalize_caption(record.text).empty())
            report.empty_captions.push_back(record.text_id);
        else if (token_count(record.text) > kCaptionTokenLimit)
            report.overlong_captions.push_back(record.text_id);
    }
    return report;
}

inline nlohmann::ordered_json to_json(const CorpusReport& report) {
    nlohmann::ordered_json splits;
    for (const auto& [split, count] : report.split_counts)
        splits[to_string(split)] = count;
    return nlohmann::ordered_json{{"record_count", report.record_count},
                                  {"duplicate_text_ids", report.duplicate_text_ids},
                                  {"duplicate_image_text_pairs", report.duplicate_image_text_pairs},
                                  {"empty_captions", report.empty_captions},
                                  {"overlong_captions", report.overlong_captions},
                                  {"split_counts", splits},
                                  {"clean", report.clean()}};
}

/// Serializes records as canonical JSONL: one object per line, fixed key
/// order, LF endings, newline-terminated. parse(write(x)) == x.
inline std::string write_manifest(const std::vector<CaptionRecord>& records) {
    std::set<std::string> seen_ids;
    std::set<std::pair<std::string, std::string>> seen_pairs;
    std::string out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& record = records[i];
        if (normalize_caption(record.text).empty())
            throw ValidationError("record " + std::to_string(i) + ": empty caption");
        if (record.text != normalize_caption(record.text))
            throw ValidationError("record " + std::to_string(i) + ": caption not normalized");
        if (!seen_ids.insert(record.text_id).second)
            throw ValidationError("record " + std::to_string(i) + ": duplicate text_id '" +
                                  record.text_id + "'");
        if (!seen_pairs.insert({record.image_id, record.text}).second)
            throw ValidationError("record " + std::to_string(i) +
                                  ": duplicate (image_id, text) pair");

        nlohmann::ordered_json line{{"text_id", record.text_id},
                                    {"image_id", record.image_id},
                                    {"identity_id", record.identity_id},
                                    {"image_path", record.image_path},
                                    {"split", to_string(record.split)},
                                    {"text", record.text}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

inline void save_manifest(const std::vector<CaptionRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open manifest for writing: " + path);
    out << write_manifest(records);
    if (!out)
        throw DataError("failed writing manifest: " + path);
}

} // namespace textaug
