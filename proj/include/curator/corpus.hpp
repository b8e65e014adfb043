#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/errors.hpp"

namespace curator {

enum class SourceKind {
    web,
    code,
    encyclopedia,
    academic,
    qa_forum,
    book,
    news,
    legal,
    patent,
    edu_assessment,
};

inline constexpr std::array<SourceKind, 10> kAllSources = {
    SourceKind::web,     SourceKind::code, SourceKind::encyclopedia, SourceKind::academic,
    SourceKind::qa_forum, SourceKind::book, SourceKind::news,         SourceKind::legal,
    SourceKind::patent,  SourceKind::edu_assessment,
};

std::string_view to_string(SourceKind kind);
std::optional<SourceKind> source_from_string(std::string_view name);

struct Document {
    std::string id;
    std::string text;
    SourceKind source = SourceKind::web;
    std::string language = "en";
    nlohmann::json meta = nlohmann::json::object();

    // Length in code points, the unit every threshold downstream uses.
    std::size_t length() const;
};

nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& record, std::size_t line_no = 0);

struct RuleHit {
    std::string rule_id;
    double measured = 0.0;
    double threshold = 0.0;
};

struct FilterVerdict {
    bool passed = true;
    std::vector<RuleHit> rule_hits;  // rejecting hits only; passed <=> empty
    int stage = 1;
};

struct StageStats {
    std::uint64_t input_count = 0;
    std::uint64_t output_count = 0;
    std::map<std::string, std::uint64_t> reject_histogram;
    std::string config_digest;
};

struct Manifest {
    std::string run_id;
    std::string created_at;
    std::vector<std::pair<std::string, StageStats>> stages;

    bool has_stage(std::string_view name) const;
};

Manifest append_manifest(Manifest manifest, const std::string& stage_name, StageStats stats);

nlohmann::json to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);
// Loads the manifest if present, otherwise starts a fresh one for run_id.
Manifest open_or_create_manifest(const std::filesystem::path& path, const std::string& run_id);

struct ReaderOptions {
    bool lenient = false;         // record errors and keep going instead of throwing
    bool check_duplicates = true; // track ids to surface DuplicateId
};

struct RecordError {
    std::size_t line_no = 0;
    std::size_t byte_offset = 0;
    std::string message;
};

// Streaming line-delimited reader; one JSON record per line.
class DocumentReader {
public:
    DocumentReader(std::istream& in, ReaderOptions options = {});
    explicit DocumentReader(const std::filesystem::path& path, ReaderOptions options = {});

    // Next document in file order; nullopt at end of stream. In strict mode
    // malformed records throw; in lenient mode they are recorded in errors()
    // and skipped.
    std::optional<Document> next();

    const std::vector<RecordError>& errors() const { return errors_; }

private:
    std::ifstream owned_;
    std::istream* in_;
    ReaderOptions options_;
    std::size_t line_no_ = 0;
    std::size_t byte_offset_ = 0;
    std::unordered_set<std::string> seen_ids_;
    std::vector<RecordError> errors_;
};

std::vector<Document> read_document_stream(const std::filesystem::path& path,
                                           ReaderOptions options = {});

std::uint64_t write_document_stream(std::span<const Document> docs, std::ostream& out);
std::uint64_t write_document_stream(std::span<const Document> docs,
                                    const std::filesystem::path& path);

}  // namespace curator
