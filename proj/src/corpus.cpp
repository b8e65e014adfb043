#include "curator/corpus.hpp"

#include <algorithm>
#include <ctime>

#include "curator/unicode.hpp"

namespace curator {

namespace {

constexpr std::array<std::string_view, 10> kSourceNames = {
    "web",  "code", "encyclopedia", "academic", "qa_forum",
    "book", "news", "legal",        "patent",   "edu_assessment",
};

std::string now_iso8601() {
    if (const char* fixed = std::getenv("CURATOR_CREATED_AT")) return fixed;
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string_view to_string(SourceKind kind) {
    return kSourceNames[static_cast<std::size_t>(kind)];
}

std::optional<SourceKind> source_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
        if (kSourceNames[i] == name) return static_cast<SourceKind>(i);
    }
    return std::nullopt;
}

std::size_t Document::length() const { return uni::codepoint_count(text); }

nlohmann::json to_json(const Document& doc) {
    return nlohmann::json{
        {"id", doc.id},
        {"text", doc.text},
        {"source", to_string(doc.source)},
        {"language", doc.language},
        {"meta", doc.meta.is_null() ? nlohmann::json::object() : doc.meta},
    };
}

Document document_from_json(const nlohmann::json& record, std::size_t line_no) {
    if (!record.is_object()) throw MalformedRecord(line_no, 0, "record is not an object");
    for (const char* key : {"id", "text", "source", "language"}) {
        if (!record.contains(key)) throw MissingField(key, line_no);
    }
    Document doc;
    if (!record["id"].is_string() || record["id"].get<std::string>().empty())
        throw MalformedRecord(line_no, 0, "id must be a non-empty string");
    doc.id = record["id"].get<std::string>();
    if (!record["text"].is_string())
        throw MalformedRecord(line_no, 0, "text must be a string");
    doc.text = record["text"].get<std::string>();
    const auto source = source_from_string(record["source"].get_ref<const std::string&>());
    if (!source)
        throw MalformedRecord(line_no, 0,
                              "unknown source \"" + record["source"].get<std::string>() + "\"");
    doc.source = *source;
    doc.language = record["language"].get<std::string>();
    if (record.contains("meta")) {
        if (!record["meta"].is_object())
            throw MalformedRecord(line_no, 0, "meta must be an object");
        doc.meta = record["meta"];
    }
    return doc;
}

bool Manifest::has_stage(std::string_view name) const {
    return std::any_of(stages.begin(), stages.end(),
                       [&](const auto& s) { return s.first == name; });
}

Manifest append_manifest(Manifest manifest, const std::string& stage_name, StageStats stats) {
    if (manifest.has_stage(stage_name)) throw DuplicateStage(stage_name);
    manifest.stages.emplace_back(stage_name, std::move(stats));
    return manifest;
}

nlohmann::json to_json(const Manifest& manifest) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& [name, stats] : manifest.stages) {
        stages.push_back({
            {"stage_name", name},
            {"input_count", stats.input_count},
            {"output_count", stats.output_count},
            {"reject_histogram", stats.reject_histogram},
            {"config_digest", stats.config_digest},
        });
    }
    return nlohmann::json{
        {"run_id", manifest.run_id},
        {"created_at", manifest.created_at},
        {"stages", stages},
    };
}

Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    for (const auto& s : j.at("stages")) {
        StageStats stats;
        stats.input_count = s.at("input_count").get<std::uint64_t>();
        stats.output_count = s.at("output_count").get<std::uint64_t>();
        stats.config_digest = s.at("config_digest").get<std::string>();
        for (const auto& [rule, count] : s.at("reject_histogram").items()) {
            stats.reject_histogram[rule] = count.get<std::uint64_t>();
        }
        m.stages.emplace_back(s.at("stage_name").get<std::string>(), std::move(stats));
    }
    return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open manifest for writing: " + path.string());
    out << to_json(manifest).dump(2) << '\n';
    if (!out) throw IoFailure("failed writing manifest: " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestMissing(path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoFailure("cannot parse manifest " + path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

Manifest open_or_create_manifest(const std::filesystem::path& path, const std::string& run_id) {
    if (std::filesystem::exists(path)) return load_manifest(path);
    Manifest m;
    m.run_id = run_id;
    m.created_at = now_iso8601();
    return m;
}

DocumentReader::DocumentReader(std::istream& in, ReaderOptions options)
    : in_(&in), options_(options) {}

DocumentReader::DocumentReader(const std::filesystem::path& path, ReaderOptions options)
    : owned_(path), in_(&owned_), options_(options) {
    if (!owned_) throw IoFailure("cannot open document stream: " + path.string());
}

std::optional<Document> DocumentReader::next() {
    std::string line;
    while (std::getline(*in_, line)) {
        ++line_no_;
        const std::size_t offset = byte_offset_;
        byte_offset_ += line.size() + 1;
        if (line.empty()) continue;
        try {
            nlohmann::json record;
            try {
                record = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw MalformedRecord(line_no_, offset, e.what());
            }
            Document doc = document_from_json(record, line_no_);
            if (options_.check_duplicates && !seen_ids_.insert(doc.id).second)
                throw DuplicateId(doc.id);
            return doc;
        } catch (const Error& e) {
            if (!options_.lenient) throw;
            errors_.push_back({line_no_, offset, e.what()});
        }
    }
    return std::nullopt;
}

std::vector<Document> read_document_stream(const std::filesystem::path& path,
                                           ReaderOptions options) {
    DocumentReader reader(path, options);
    std::vector<Document> docs;
    while (auto doc = reader.next()) docs.push_back(std::move(*doc));
    return docs;
}

std::uint64_t write_document_stream(std::span<const Document> docs, std::ostream& out) {
    std::uint64_t written = 0;
    for (const auto& doc : docs) {
        nlohmann::json record;
        try {
            record = to_json(doc);
            out << record.dump() << '\n';
        } catch (const nlohmann::json::exception& e) {
            throw NonSerializableMeta(doc.id, e.what());
        }
        if (!out) throw IoFailure("write failed after " + std::to_string(written) + " records");
        ++written;
    }
    return written;
}

std::uint64_t write_document_stream(std::span<const Document> docs,
                                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open output stream: " + path.string());
    return write_document_stream(docs, out);
}

}  // namespace curator
