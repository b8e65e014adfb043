// Scriptable model provider speaking the line protocol on stdin/stdout:
//   {"op": ..., "payload": ...} -> {"ok": true, "result": ...}
// Modes:
//   provider_stub builtin <corpus.txt>   serve a token n-gram fit on the file
//   provider_stub canned <replies.json>  fixed replies per op / per prompt

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/model.hpp"
#include "curator/ngram.hpp"

using curator::model::ModelClient;
using curator::model::TokenNgramModel;
using nlohmann::json;

namespace {

json handle_builtin(const ModelClient& client, const json& request) {
    const auto op = request.at("op").get<std::string>();
    const auto& payload = request.at("payload");
    if (op == "detect_language") {
        static const auto scorer = curator::filters::LanguageScorer::builtin();
        json scores = json::array();
        for (const auto& s : scorer.detect(payload.at("text").get<std::string>())) {
            scores.push_back({{"language", s.language}, {"score", s.score}});
        }
        return {{"ok", true}, {"result", {{"scores", scores}}}};
    }
    if (op == "sequence_logprob") {
        const auto scored =
            client.sequence_logprob(payload.at("tokens").get<std::vector<long long>>());
        return {{"ok", true}, {"result", {{"logprobs", scored.logprobs}}}};
    }
    if (op == "encode") {
        return {{"ok", true},
                {"result", {{"tokens", client.encode_text(payload.at("text"))}}}};
    }
    if (op == "generate") {
        return {{"ok", true},
                {"result",
                 {{"text", client.generate(payload.at("prompt"), payload.at("max_tokens"),
                                           payload.at("seed"))}}}};
    }
    if (op == "judge") {
        return {{"ok", true},
                {"result",
                 {{"verdict", client.judge(payload.at("question"), payload.at("reference"),
                                           payload.at("candidate"))}}}};
    }
    return {{"ok", false}, {"error", "unknown op " + op}};
}

json handle_canned(const json& script, const json& request) {
    const auto op = request.at("op").get<std::string>();
    if (op == "generate") {
        const auto prompt = request.at("payload").at("prompt").get<std::string>();
        if (script.contains("generate") && script["generate"].contains(prompt)) {
            return {{"ok", true}, {"result", {{"text", script["generate"][prompt]}}}};
        }
        return {{"ok", true},
                {"result", {{"text", script.value("generate_default", "stub reply")}}}};
    }
    if (op == "judge") {
        return {{"ok", true}, {"result", {{"verdict", script.value("judge_default", 1)}}}};
    }
    return {{"ok", false}, {"error", "canned mode does not script op " + op}};
}

}  // namespace

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(false);
    if (argc < 3) {
        std::cerr << "usage: provider_stub builtin <corpus.txt> | canned <replies.json>\n";
        return 1;
    }
    const std::string mode = argv[1];
    ModelClient builtin = ModelClient::builtin(TokenNgramModel::uniform(8), "stub");
    json script;
    if (mode == "builtin") {
        std::ifstream in(argv[2]);
        std::vector<std::string> corpus;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) corpus.push_back(line);
        }
        builtin = ModelClient::builtin(TokenNgramModel::fit(corpus, 3, 0.1), "stub_corpus");
    } else if (mode == "canned") {
        std::ifstream in(argv[2]);
        in >> script;
    } else {
        std::cerr << "unknown mode " << mode << "\n";
        return 1;
    }

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        json reply;
        try {
            const auto request = json::parse(line);
            reply = mode == "builtin" ? handle_builtin(builtin, request)
                                      : handle_canned(script, request);
        } catch (const std::exception& e) {
            reply = {{"ok", false}, {"error", e.what()}};
        }
        std::cout << reply.dump() << "\n" << std::flush;
    }
    return 0;
}
