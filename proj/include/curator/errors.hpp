#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace curator {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedRecord : Error {
    MalformedRecord(std::size_t line, std::size_t offset, const std::string& what)
        : Error("malformed record at line " + std::to_string(line) + " (byte offset " +
                std::to_string(offset) + "): " + what),
          line_no(line),
          byte_offset(offset) {}
    std::size_t line_no;
    std::size_t byte_offset;
};

struct MissingField : Error {
    MissingField(const std::string& name, std::size_t line)
        : Error("missing field \"" + name + "\" at line " + std::to_string(line)),
          field(name),
          line_no(line) {}
    std::string field;
    std::size_t line_no;
};

struct DuplicateId : Error {
    explicit DuplicateId(const std::string& doc_id)
        : Error("duplicate document id \"" + doc_id + "\""), id(doc_id) {}
    std::string id;
};

struct DuplicateStage : Error {
    explicit DuplicateStage(const std::string& stage)
        : Error("stage \"" + stage + "\" already present in manifest"), stage_name(stage) {}
    std::string stage_name;
};

struct IoFailure : Error {
    using Error::Error;
};

struct NonSerializableMeta : Error {
    explicit NonSerializableMeta(const std::string& doc_id, const std::string& why)
        : Error("document \"" + doc_id + "\" has non-serializable meta: " + why), id(doc_id) {}
    std::string id;
};

struct ConfigInvalid : Error {
    ConfigInvalid(const std::string& key_, const std::string& reason)
        : Error("invalid config key \"" + key_ + "\": " + reason), key(key_) {}
    std::string key;
};

struct EmptyCorpus : Error {
    EmptyCorpus() : Error("corpus is empty") {}
};

struct EmptyText : Error {
    EmptyText() : Error("text is empty") {}
};

struct ModelRequired : Error {
    explicit ModelRequired(const std::string& what) : Error(what) {}
};

struct MissingMeta : Error {
    explicit MissingMeta(const std::string& key_)
        : Error("document meta lacks required key \"" + key_ + "\""), key(key_) {}
    std::string key;
};

struct MissingAuthorStats : Error {
    MissingAuthorStats() : Error("author stats required but not supplied") {}
};

struct UnknownProfile : Error {
    explicit UnknownProfile(const std::string& name)
        : Error("unknown book profile \"" + name + "\""), profile(name) {}
    std::string profile;
};

struct EmptyShingleSet : Error {
    EmptyShingleSet() : Error("shingle set is empty") {}
};

struct SignatureLengthMismatch : Error {
    SignatureLengthMismatch() : Error("minhash signature lengths differ") {}
};

struct StepOutOfRange : Error {
    StepOutOfRange(std::uint64_t step, std::uint64_t total)
        : Error("step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]") {}
};

struct PadTooSmall : Error {
    PadTooSmall(std::size_t pad_to, std::size_t current)
        : Error("pad_to " + std::to_string(pad_to) + " smaller than vocabulary size " +
                std::to_string(current)) {}
};

struct ProviderUnavailable : Error {
    using Error::Error;
};

struct ProtocolViolation : Error {
    using Error::Error;
};

struct TokenOutOfVocab : Error {
    explicit TokenOutOfVocab(long long id)
        : Error("token id " + std::to_string(id) + " outside model vocabulary") {}
};

struct GeneratorFailure : Error {
    using Error::Error;
};

struct ScorerFailure : Error {
    using Error::Error;
};

struct QualityRejected : Error {
    using Error::Error;
};

struct UnscoredEntity : Error {
    explicit UnscoredEntity(const std::string& name)
        : Error("entity \"" + name + "\" has no score"), entity(name) {}
    std::string entity;
};

struct EmptyIndex : Error {
    EmptyIndex() : Error("retrieval index is empty") {}
};

struct MissingReward : Error {
    explicit MissingReward(const std::string& pair_id)
        : Error("preference pair \"" + pair_id + "\" has no reward"), id(pair_id) {}
    std::string id;
};

struct TokenizationMismatch : Error {
    TokenizationMismatch() : Error("policy and reference scorer tokenizations differ") {}
};

struct NonFiniteLoss : Error {
    NonFiniteLoss() : Error("loss is not finite") {}
};

struct ManifestMissing : Error {
    explicit ManifestMissing(const std::string& path)
        : Error("manifest not found: " + path) {}
};

}  // namespace curator
