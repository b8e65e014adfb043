// curator: corpus curation and curriculum construction pipeline.
// Every stage is a subcommand reading/writing line-delimited document
// streams, appending to a shared run manifest.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "curator/align.hpp"
#include "curator/config.hpp"
#include "curator/corpus.hpp"
#include "curator/dedup.hpp"
#include "curator/filters.hpp"
#include "curator/hashing.hpp"
#include "curator/longtail.hpp"
#include "curator/mixture.hpp"
#include "curator/model.hpp"
#include "curator/parallel.hpp"
#include "curator/report.hpp"
#include "curator/sft.hpp"
#include "curator/tokenizer.hpp"
#include "curator/unicode.hpp"

using namespace curator;
using nlohmann::json;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string manifest_path = "curator_manifest.json";
    std::string run_id = "run";
    std::string stage_name;  // override for the manifest entry
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;  // 0 -> take from config
    bool quiet = false;
};

struct Cli {
    GlobalArgs globals;
    config::PipelineConfig cfg;

    void finalize_config() {
        if (!globals.config_path.empty())
            cfg = config::PipelineConfig::load(globals.config_path);
        if (globals.seed_set) cfg.seed = globals.seed;
        if (globals.workers > 0) cfg.workers = globals.workers;
        if (!globals.run_id.empty()) cfg.run_id = globals.run_id;
        cfg.validate();
    }

    void note(const std::string& message) const {
        if (!globals.quiet) std::cerr << message << "\n";
    }

    std::uint64_t stage_seed(const std::string& label) const {
        return hashing::labeled_seed(cfg.seed, label);
    }

    void record_stage(const std::string& default_name, StageStats stats) const {
        const auto name = globals.stage_name.empty() ? default_name : globals.stage_name;
        stats.config_digest = cfg.digest();
        auto manifest = open_or_create_manifest(globals.manifest_path, cfg.run_id);
        manifest = append_manifest(std::move(manifest), name, std::move(stats));
        save_manifest(manifest, globals.manifest_path);
    }
};

std::vector<Document> read_docs(const std::string& path, bool lenient,
                                std::vector<RecordError>* errors = nullptr) {
    ReaderOptions options;
    options.lenient = lenient;
    std::vector<Document> docs;
    if (path == "-") {
        DocumentReader reader(std::cin, options);
        while (auto doc = reader.next()) docs.push_back(std::move(*doc));
        if (errors) *errors = reader.errors();
    } else {
        DocumentReader reader(std::filesystem::path(path), options);
        while (auto doc = reader.next()) docs.push_back(std::move(*doc));
        if (errors) *errors = reader.errors();
    }
    return docs;
}

void write_docs(std::span<const Document> docs, const std::string& path) {
    if (path == "-") {
        write_document_stream(docs, std::cout);
        return;
    }
    // Temp-and-rename so failed runs leave no partial output behind.
    const auto tmp = path + ".tmp";
    write_document_stream(docs, std::filesystem::path(tmp));
    std::filesystem::rename(tmp, path);
}

void write_text(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open " + path);
    out << content;
}

std::string provider_command(const Cli& cli) {
    if (const char* env = std::getenv("CURATOR_PROVIDER_CMD")) return env;
    return cli.cfg.model.provider_command;
}

model::ModelClient make_provider_or(const Cli& cli, model::ModelClient fallback) {
    const auto command = provider_command(cli);
    if (command.empty()) return fallback;
    std::optional<std::filesystem::path> cache;
    if (!cli.cfg.model.cache_dir.empty()) cache = cli.cfg.model.cache_dir;
    return model::ModelClient::external(command, cache, cli.cfg.model.timeout_ms);
}

// ---------------------------------------------------------------------------

int cmd_filter(Cli& cli, const std::string& input, const std::string& output,
               const std::string& source_name, int stage, const std::string& rejects_path,
               bool lenient, const std::string& reference_corpus) {
    const auto source = source_from_string(source_name);
    if (!source) throw ConfigInvalid("source", "unknown source \"" + source_name + "\"");

    std::vector<RecordError> read_errors;
    const auto docs = read_docs(input, lenient, &read_errors);
    for (const auto& err : read_errors)
        std::cerr << "warn: skipped record at line " << err.line_no << ": " << err.message
                  << "\n";

    std::optional<filters::CharNGramModel> lm;
    std::optional<filters::LanguageScorer> lid;
    if (*source == SourceKind::web && stage == 2) {
        if (reference_corpus.empty())
            throw ConfigInvalid("reference-corpus", "web stage 2 needs a reference corpus");
        const auto reference = read_docs(reference_corpus, false);
        lm = filters::CharNGramModel::fit(reference, 5, 0.1);
        lid = filters::LanguageScorer::builtin();
    }

    filters::FilterEnv env{cli.cfg.filters, lm ? &*lm : nullptr, lid ? &*lid : nullptr};
    struct Outcome {
        FilterVerdict verdict;
        std::optional<Document> cleaned;
    };
    std::vector<Outcome> outcomes(docs.size());
    parallel_for(docs.size(), cli.cfg.workers, [&](std::size_t i) {
        Document doc = docs[i];
        doc.source = *source;
        if (*source == SourceKind::web) {
            outcomes[i].verdict =
                filters::filter_web(doc, stage, cli.cfg.filters, env.lm, env.lid);
        } else {
            auto result = filters::apply_source_chain(doc, env);
            outcomes[i].verdict = std::move(result.verdict);
            outcomes[i].cleaned = std::move(result.cleaned);
        }
    });

    std::vector<Document> kept;
    StageStats stats;
    stats.input_count = docs.size();
    std::string rejects;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (outcomes[i].verdict.passed) {
            kept.push_back(outcomes[i].cleaned ? *outcomes[i].cleaned : docs[i]);
            continue;
        }
        bool counted = false;
        for (const auto& hit : outcomes[i].verdict.rule_hits) {
            if (!counted) {
                ++stats.reject_histogram[hit.rule_id];  // first hit owns the reject
                counted = true;
            }
            rejects += json{{"id", docs[i].id},
                            {"rule_id", hit.rule_id},
                            {"measured", hit.measured},
                            {"threshold", hit.threshold}}
                           .dump() +
                       "\n";
        }
    }
    stats.output_count = kept.size();
    write_docs(kept, output);
    // The reject ledger lands alongside the output unless directed elsewhere.
    std::string ledger_path = rejects_path;
    if (ledger_path.empty() && output != "-") ledger_path = output + ".rejects.jsonl";
    if (!ledger_path.empty()) write_text(ledger_path, rejects);

    cli.record_stage("filter:" + source_name +
                         (*source == SourceKind::web ? ":stage" + std::to_string(stage) : ""),
                     stats);
    cli.note("filter: " + std::to_string(docs.size()) + " in, " + std::to_string(kept.size()) +
             " out");
    return 0;
}

int cmd_dedup(Cli& cli, const std::string& input, const std::string& output,
              const std::string& ledger_path) {
    const auto docs = read_docs(input, false);
    auto params = cli.cfg.dedup;
    params.workers = cli.cfg.workers;
    params.seed = hashing::mix(cli.cfg.seed, hashing::hash64("dedup"));

    // Exact dedup within slices, then near-duplicate removal corpus-wide.
    std::vector<Document> exact_kept;
    dedup::DedupLedger ledger;
    std::size_t exact_removed = 0;
    for (std::size_t begin = 0; begin < docs.size(); begin += params.slice_size) {
        const auto end = std::min(docs.size(), begin + params.slice_size);
        auto slice = dedup::exact_dedup_slice(
            std::span<const Document>(docs.data() + begin, end - begin));
        exact_removed += slice.ledger.removed_count();
        for (auto& [kept_id, removed] : slice.ledger.removed) {
            auto& all = ledger.removed[kept_id];
            all.insert(all.end(), removed.begin(), removed.end());
        }
        for (auto& [id, sim] : slice.ledger.similarity) ledger.similarity[id] = sim;
        exact_kept.insert(exact_kept.end(), slice.kept.begin(), slice.kept.end());
    }

    auto result = dedup::lsh_dedup(exact_kept, params);
    for (auto& [kept_id, removed] : result.ledger.removed) {
        auto& all = ledger.removed[kept_id];
        all.insert(all.end(), removed.begin(), removed.end());
    }
    for (auto& [id, sim] : result.ledger.similarity) ledger.similarity[id] = sim;

    write_docs(result.kept, output);
    if (!ledger_path.empty()) {
        std::ofstream out(ledger_path);
        dedup::write_ledger(ledger, out);
    }

    StageStats stats;
    stats.input_count = docs.size();
    stats.output_count = result.kept.size();
    if (exact_removed > 0) stats.reject_histogram["exact_duplicate"] = exact_removed;
    if (result.ledger.removed_count() > 0)
        stats.reject_histogram["near_duplicate"] = result.ledger.removed_count();
    cli.record_stage("dedup", stats);
    cli.note("dedup: " + std::to_string(docs.size()) + " in, " +
             std::to_string(result.kept.size()) + " out");
    return 0;
}

int cmd_mix(Cli& cli, bool table2, const std::string& specs_path, const std::string& out_path,
            std::size_t draws, const std::string& schedule_out) {
    std::vector<mixture::SourceSpec> specs;
    if (table2) {
        specs = mixture::reference_mixture_specs();
    } else {
        std::ifstream in(specs_path);
        if (!in) throw IoFailure("cannot open specs: " + specs_path);
        json j;
        in >> j;
        for (const auto& row : j) {
            specs.push_back({row.at("name").get<std::string>(),
                             row.at("raw_tokens").get<double>(),
                             row.at("epochs").get<double>()});
        }
    }
    const auto plan = mixture::build_mixture_plan(specs);
    const auto stage_plan =
        mixture::plan_stages(mixture::reference_stage_settings(), 1.0);

    std::cout << mixture::render_mixture_table(plan);
    if (!cli.globals.quiet) std::cout << "\n" << mixture::render_stage_table(stage_plan);
    if (!out_path.empty()) {
        json out = {{"mixture", mixture::to_json(plan)},
                    {"stages", mixture::to_json(stage_plan)}};
        write_text(out_path, out.dump(2) + "\n");
    }
    if (draws > 0 && !schedule_out.empty()) {
        const auto schedule =
            mixture::sample_schedule(plan, draws, cli.stage_seed("sample_schedule"));
        std::string lines;
        for (const auto& name : schedule) lines += name + "\n";
        write_text(schedule_out, lines);
    }
    StageStats stats;
    stats.input_count = specs.size();
    stats.output_count = specs.size();
    cli.record_stage("mix", stats);
    return 0;
}

int cmd_pack(Cli& cli, const std::string& input, const std::string& output,
             std::uint64_t context_length, const std::string& source_label) {
    std::ifstream in_file;
    std::istream* in = &std::cin;
    if (input != "-") {
        in_file.open(input);
        if (!in_file) throw IoFailure("cannot open " + input);
        in = &in_file;
    }
    std::vector<std::vector<mixture::TokenId>> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(*in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto record = json::parse(line);
            docs.push_back(record.at("tokens").get<std::vector<mixture::TokenId>>());
        } catch (const json::exception& e) {
            throw MalformedRecord(line_no, 0, e.what());
        }
    }

    mixture::PackOptions options;
    options.context_length = context_length;
    options.use_separator = cli.cfg.mixture.use_separator;
    options.separator_token = cli.cfg.mixture.separator_token;
    options.source = source_label;
    const auto result = mixture::pack_stream(docs, options);

    std::string out_lines;
    for (const auto& sample : result.samples) {
        out_lines += json{{"source", sample.source}, {"tokens", sample.token_ids}}.dump() + "\n";
    }
    write_text(output, out_lines);

    StageStats stats;
    stats.input_count = docs.size();
    stats.output_count = result.samples.size();
    cli.record_stage("pack:" + source_label, stats);
    cli.note("pack: " + std::to_string(result.samples.size()) + " samples, " +
             std::to_string(result.dropped_tail) + " tail tokens dropped");
    return 0;
}

int cmd_lr(const Cli&, double max_lr, double min_lr, std::uint64_t total,
           std::uint64_t warmup, std::int64_t step, std::size_t table) {
    mixture::LrSchedule sched{max_lr, min_lr, total, warmup};
    if (step >= 0) {
        std::cout << mixture::lr_at(static_cast<std::uint64_t>(step), sched) << "\n";
        return 0;
    }
    for (std::size_t i = 0; i <= table; ++i) {
        const auto s = total * i / std::max<std::size_t>(table, 1);
        std::cout << s << "\t" << mixture::lr_at(s, sched) << "\n";
    }
    return 0;
}

int cmd_tok_train(Cli& cli, const std::string& input, const std::string& base_path,
                  const std::string& out_path, std::size_t target, std::size_t pad_to) {
    const auto docs = read_docs(input, false);
    tokenizer::TokenizerSpec base;
    if (base_path.empty()) {
        std::vector<std::string> texts;
        for (const auto& doc : docs) texts.push_back(doc.text);
        base = tokenizer::char_base_spec(texts);
    } else {
        base = tokenizer::TokenizerSpec::load(base_path);
    }
    tokenizer::WordPieceOptions options;
    options.target_new_tokens = target;
    options.unit = cli.cfg.tokenizer.extension_unit == "whole_word"
                       ? tokenizer::ExtensionUnit::whole_word
                       : tokenizer::ExtensionUnit::subword;
    const auto extension = tokenizer::train_wordpiece_extension(docs, options, base);
    const auto pad = pad_to > 0 ? pad_to
                     : cli.cfg.tokenizer.pad_to > 0
                         ? cli.cfg.tokenizer.pad_to
                         : base.size() + extension.size();
    const auto merged = tokenizer::merge_and_pad(base, extension, pad);
    merged.save(out_path);

    StageStats stats;
    stats.input_count = docs.size();
    stats.output_count = merged.size();
    cli.record_stage("tok-train", stats);
    cli.note("tok-train: " + std::to_string(extension.size()) + " new tokens, vocabulary " +
             std::to_string(merged.size()));
    return 0;
}

int cmd_tok_eval(Cli& cli, const std::string& vocab_path,
                 const std::vector<std::string>& corpus_args, const std::string& out_path) {
    const auto spec = tokenizer::TokenizerSpec::load(vocab_path);
    std::map<std::string, std::vector<Document>> corpora;
    for (const auto& arg : corpus_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid("corpus", "expected name=path, got \"" + arg + "\"");
        corpora[arg.substr(0, eq)] = read_docs(arg.substr(eq + 1), false);
    }
    const auto report = tokenizer::compression_ratio(spec, corpora);
    std::cout << tokenizer::render_compression_table(report);
    if (!out_path.empty()) {
        json rows = json::array();
        for (const auto& row : report.rows) {
            rows.push_back({{"corpus", row.name},
                            {"bytes", row.bytes},
                            {"tokens", row.tokens},
                            {"bytes_per_token", row.ratio}});
        }
        write_text(out_path, json{{"rows", rows},
                                  {"aggregate_bytes_per_token", report.aggregate.ratio}}
                                 .dump(2) +
                                 "\n");
    }
    StageStats stats;
    stats.input_count = corpora.size();
    stats.output_count = corpora.size();
    cli.record_stage("tok-eval", stats);
    return 0;
}

int cmd_probe(Cli& cli, const std::string& encyclopedia_path, const std::string& sample_path,
              const std::string& dpre_path, const std::string& templates_path,
              const std::string& out_path) {
    const auto encyclopedia = read_docs(encyclopedia_path, false);
    const auto sample = read_docs(sample_path, false);
    const auto dpre = read_docs(dpre_path, false);
    const auto templates = longtail::load_templates(templates_path);

    auto entities =
        longtail::build_entity_list(encyclopedia, cli.cfg.longtail.entities, sample);
    std::vector<std::string> names;
    for (const auto& e : entities) names.push_back(e.name);
    for (auto& e : entities) {
        e.related = longtail::related_entities(e.name, e.description, names,
                                               cli.cfg.longtail.min_cooccur);
    }

    // Offline defaults: generator and model-under-test are builtin n-grams;
    // an external provider (env/config) replaces all three roles.
    std::vector<std::string> gen_texts;
    for (const auto& d : encyclopedia) gen_texts.push_back(d.text);
    std::vector<std::string> mut_texts;
    for (const auto& d : dpre) mut_texts.push_back(d.text);
    const auto generator = make_provider_or(
        cli, model::ModelClient::builtin(model::TokenNgramModel::fit(gen_texts, 3, 0.1),
                                         "probe_generator"));
    const auto student = make_provider_or(
        cli, model::ModelClient::builtin(model::TokenNgramModel::fit(mut_texts, 3, 0.1),
                                         "model_under_test"));
    auto judge = make_provider_or(
        cli, model::ModelClient::builtin(model::TokenNgramModel::uniform(4), "judge"));
    judge.judge_f1_cut = cli.cfg.model.judge_f1_cut;

    const auto index = longtail::TfidfIndex::build(dpre);
    auto probe_cfg = cli.cfg.longtail.probe;
    probe_cfg.seed = cli.stage_seed("probe");

    std::vector<longtail::ProbeRound> rounds;
    longtail::ProbeWorld world;
    world.sample_entities = [&](int) { return entities; };
    world.generator = [&]() -> const model::ModelClient& { return generator; };
    world.judge = [&]() -> const model::ModelClient& { return judge; };
    world.model_under_test = [&]() -> const model::ModelClient& { return student; };
    world.train = {};  // production training is external; the CLI only reports
    world.on_round = [&](const longtail::ProbeRound& round) { rounds.push_back(round); };

    auto emit = [&] {
        json report = json::array();
        for (const auto& round : rounds) {
            std::set<std::string> weak(round.weak.begin(), round.weak.end());
            json per_entity = json::array();
            for (const auto& [name, score] : round.entity_scores) {
                per_entity.push_back(
                    {{"entity", name}, {"score", score}, {"weak", weak.count(name) > 0}});
            }
            report.push_back({{"round", round.round},
                              {"epsilon", round.epsilon},
                              {"entities", per_entity},
                              {"weak", round.weak},
                              {"retrieved", round.retrieved},
                              {"mean_score_before", round.mean_score_before},
                              {"mean_score_after", round.mean_score_after}});
        }
        // The builtin F1 judge is a stand-in for an external judge model;
        // the report says which one produced the verdicts.
        write_text(out_path, json{{"judge", judge.digest()}, {"rounds", report}}.dump(2) + "\n");
        StageStats stats;
        stats.input_count = entities.size();
        stats.output_count = rounds.empty() ? 0 : rounds.back().weak.size();
        cli.record_stage("probe", stats);
    };

    try {
        longtail::run_probe_loop(world, index, templates, probe_cfg);
    } catch (...) {
        emit();  // partial rounds still reach the report and manifest
        throw;
    }
    emit();
    cli.note("probe: " + std::to_string(rounds.size()) + " rounds");
    return 0;
}

int cmd_sft_synth(Cli& cli, const std::string& input, const std::string& topics_path,
                  const std::string& prompts_path, const std::string& output) {
    const auto docs = read_docs(input, false);
    std::vector<sft::Instruction> instructions;
    for (const auto& doc : docs) instructions.push_back(sft::instruction_from_document(doc));
    const auto topics = sft::load_topics(topics_path);
    const auto prompts = sft::PromptSet::load(prompts_path);

    std::vector<std::string> texts;
    for (const auto& i : instructions) texts.push_back(i.user_text());
    const auto generator = make_provider_or(
        cli,
        model::ModelClient::builtin(model::TokenNgramModel::fit(texts, 3, 0.1), "sft_gen"));

    const auto pairs = sft::select_similar_pairs(instructions, cli.cfg.sft.similarity_floor);
    std::vector<Document> out_docs;
    std::size_t rejected = 0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto seed = cli.stage_seed("sft_synth:" + std::to_string(p));
        try {
            auto merged = sft::merge_instructions(instructions[pairs[p].first],
                                                  instructions[pairs[p].second], generator,
                                                  prompts);
            auto multi = sft::to_multiturn(merged, topics, seed, generator, prompts);
            auto enhanced = sft::enhance_complexity(multi, generator, prompts);
            out_docs.push_back(sft::to_document(enhanced));
        } catch (const QualityRejected&) {
            ++rejected;
        }
    }
    write_docs(out_docs, output);

    StageStats stats;
    stats.input_count = instructions.size();
    stats.output_count = out_docs.size();
    if (rejected > 0) stats.reject_histogram["quality_gate"] = rejected;
    cli.record_stage("sft-synth", stats);
    cli.note("sft-synth: " + std::to_string(pairs.size()) + " pairs, " +
             std::to_string(out_docs.size()) + " synthesized");
    return 0;
}

int cmd_sft_score(Cli& cli, const std::string& input, const std::string& output,
                  const std::string& vocab_path) {
    const auto docs = read_docs(input, false);
    std::vector<sft::Instruction> instructions;
    for (const auto& doc : docs) instructions.push_back(sft::instruction_from_document(doc));

    std::vector<std::string> texts;
    for (const auto& instr : instructions) {
        for (const auto& turn : instr.turns) texts.push_back(turn.text);
    }
    tokenizer::TokenizerSpec spec = vocab_path.empty()
                                        ? tokenizer::char_base_spec(texts)
                                        : tokenizer::TokenizerSpec::load(vocab_path);
    const auto scorer = make_provider_or(
        cli, model::ModelClient::builtin(
                 model::TokenNgramModel::fit(texts, cli.cfg.model.order,
                                             cli.cfg.model.smoothing),
                 "sft_scorer"));

    const std::array<double, 3> lambdas = {cli.cfg.sft.lambda_turn, cli.cfg.sft.lambda_length,
                                           cli.cfg.sft.lambda_loss};
    std::vector<Document> out_docs(docs.size());
    parallel_for(docs.size(), cli.cfg.workers, [&](std::size_t i) {
        const auto score = sft::comp_score(instructions[i], scorer, lambdas, spec);
        auto doc = sft::to_document(instructions[i]);
        doc.meta["comp"] = score.comp;
        doc.meta["comp_turns"] = score.turn_count;
        doc.meta["comp_length"] = score.length_tokens;
        doc.meta["comp_loss"] = score.loss;
        out_docs[i] = std::move(doc);
    });
    write_docs(out_docs, output);

    StageStats stats;
    stats.input_count = docs.size();
    stats.output_count = out_docs.size();
    cli.record_stage("sft-score", stats);
    return 0;
}

int cmd_sft_split(Cli& cli, const std::string& input, const std::string& out_simple,
                  const std::string& out_complex, double quantile, double threshold,
                  bool threshold_set) {
    const auto docs = read_docs(input, false);
    std::vector<sft::CurriculumItem> items;
    for (const auto& doc : docs) {
        sft::CurriculumItem item;
        item.instruction = sft::instruction_from_document(doc);
        if (doc.meta.contains("comp")) item.comp = doc.meta["comp"].get<double>();
        items.push_back(std::move(item));
    }
    const auto split = sft::split_curriculum(
        items, threshold_set ? std::optional<double>(threshold) : std::nullopt, quantile);

    auto emit = [](const std::vector<sft::CurriculumItem>& part, const std::string& path) {
        std::vector<Document> out;
        for (const auto& item : part) {
            auto doc = sft::to_document(item.instruction);
            if (item.comp) doc.meta["comp"] = *item.comp;
            out.push_back(std::move(doc));
        }
        write_docs(out, path);
    };
    emit(split.simple, out_simple);
    emit(split.complex, out_complex);

    StageStats stats;
    stats.input_count = items.size();
    stats.output_count = items.size();
    cli.record_stage("sft-split", stats);
    cli.note("sft-split: " + std::to_string(split.simple.size()) + " simple, " +
             std::to_string(split.complex.size()) + " complex, threshold " +
             std::to_string(split.threshold));
    return 0;
}

int cmd_align_filter(Cli& cli, const std::string& input, const std::string& output,
                     long long min_gap) {
    const auto pairs = align::read_pair_stream(input);
    const auto kept = align::filter_by_agreement(pairs, min_gap);
    align::write_pair_stream(kept, output);

    StageStats stats;
    stats.input_count = pairs.size();
    stats.output_count = kept.size();
    if (pairs.size() > kept.size())
        stats.reject_histogram["agreement_gap"] = pairs.size() - kept.size();
    cli.record_stage("align-filter", stats);
    return 0;
}

// Offline default scorers: a shared-corpus pair of n-grams where the policy
// has seen the chosen responses once more than the reference.
std::pair<model::ModelClient, model::ModelClient> default_align_scorers(
    const Cli& cli, std::span<const align::PreferencePair> pairs) {
    std::vector<std::string> corpus;
    for (const auto& p : pairs) {
        corpus.push_back(p.prompt);
        corpus.push_back(p.chosen);
        corpus.push_back(p.rejected);
    }
    auto boosted = corpus;
    for (const auto& p : pairs) boosted.push_back(p.chosen);
    return {model::ModelClient::builtin(
                model::TokenNgramModel::fit(boosted, cli.cfg.model.order,
                                            cli.cfg.model.smoothing),
                "align_policy"),
            model::ModelClient::builtin(
                model::TokenNgramModel::fit(corpus, cli.cfg.model.order,
                                            cli.cfg.model.smoothing),
                "align_reference")};
}

int cmd_align_reward(Cli& cli, const std::string& input, const std::string& output,
                     const std::string& policy_cmd, const std::string& reference_cmd) {
    auto pairs = align::read_pair_stream(input);
    auto [policy, reference] = default_align_scorers(cli, pairs);
    std::optional<std::filesystem::path> cache;
    if (!cli.cfg.model.cache_dir.empty()) cache = cli.cfg.model.cache_dir;
    if (!policy_cmd.empty())
        policy = model::ModelClient::external(policy_cmd, cache, cli.cfg.model.timeout_ms);
    if (!reference_cmd.empty())
        reference = model::ModelClient::external(reference_cmd, cache, cli.cfg.model.timeout_ms);

    for (auto& pair : pairs) align::dpo_reward(pair, policy, reference);
    align::write_pair_stream(pairs, output);

    StageStats stats;
    stats.input_count = pairs.size();
    stats.output_count = pairs.size();
    cli.record_stage("align-reward", stats);
    return 0;
}

int cmd_align_rounds(Cli& cli, const std::string& input, const std::string& out_dir,
                     const std::vector<std::string>& snapshot_cmds, int simulated_rounds) {
    auto pairs = align::read_pair_stream(input);
    std::vector<model::ModelClient> snapshots;
    if (!snapshot_cmds.empty()) {
        std::optional<std::filesystem::path> cache;
        if (!cli.cfg.model.cache_dir.empty()) cache = cli.cfg.model.cache_dir;
        for (const auto& cmd : snapshot_cmds)
            snapshots.push_back(
                model::ModelClient::external(cmd, cache, cli.cfg.model.timeout_ms));
    } else {
        // Simulated snapshots: progressively larger boosts on the chosen
        // responses stand in for per-round policy training.
        std::vector<std::string> corpus;
        for (const auto& p : pairs) {
            corpus.push_back(p.prompt);
            corpus.push_back(p.chosen);
            corpus.push_back(p.rejected);
        }
        for (int r = 0; r < simulated_rounds; ++r) {
            auto boosted = corpus;
            for (int b = 0; b < r * 2; ++b)
                for (const auto& p : pairs) boosted.push_back(p.chosen);
            snapshots.push_back(model::ModelClient::builtin(
                model::TokenNgramModel::fit(boosted, cli.cfg.model.order,
                                            cli.cfg.model.smoothing),
                "snapshot" + std::to_string(r)));
        }
    }
    auto [_, reference] = default_align_scorers(cli, pairs);

    std::filesystem::create_directories(out_dir);
    const auto reports =
        align::run_alignment_rounds(pairs, reference, snapshots, cli.cfg.align.rounds);

    json round_report = json::array();
    for (const auto& report : reports) {
        round_report.push_back({{"round", report.round},
                                {"delta", report.delta},
                                {"evaluated", report.evaluated},
                                {"retained", report.retained},
                                {"reward_deciles", report.reward_deciles}});
        std::vector<align::PreferencePair> retained;
        for (const auto& pair : pairs) {
            if (std::find(report.retained_ids.begin(), report.retained_ids.end(), pair.id) !=
                report.retained_ids.end())
                retained.push_back(pair);
        }
        align::write_pair_stream(
            retained, std::filesystem::path(out_dir) /
                          ("round" + std::to_string(report.round) + ".jsonl"));
    }
    write_text((std::filesystem::path(out_dir) / "rounds.json").string(),
               round_report.dump(2) + "\n");

    StageStats stats;
    stats.input_count = pairs.size();
    stats.output_count = reports.empty() ? 0 : reports.back().retained;
    cli.record_stage("align-rounds", stats);
    cli.note("align-rounds: " + std::to_string(reports.size()) + " rounds");
    return 0;
}

int cmd_report(Cli& cli, const std::string& manifest_path, const std::string& format) {
    const auto manifest =
        load_manifest(manifest_path.empty() ? cli.globals.manifest_path : manifest_path);
    if (format == "structured") {
        std::cout << report::render_structured(manifest).dump(2) << "\n";
    } else {
        std::cout << report::render_text(manifest);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corpus curation and curriculum construction pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags are accepted after the subcommand name

    Cli cli;
    app.add_option("--config", cli.globals.config_path, "pipeline config file (JSON)");
    app.add_option("--manifest", cli.globals.manifest_path, "run manifest path");
    app.add_option("--run-id", cli.globals.run_id, "run identifier");
    app.add_option("--stage-name", cli.globals.stage_name, "override the manifest stage name");
    app.add_option("--seed", cli.globals.seed, "global seed")
        ->each([&](const std::string&) { cli.globals.seed_set = true; });
    app.add_option("--workers", cli.globals.workers, "worker threads");
    app.add_flag("--quiet", cli.globals.quiet, "data-only stdout, no diagnostics");
    std::string cache_dir_flag;
    app.add_option("--cache-dir", cache_dir_flag, "provider reply cache directory");

    // filter
    auto* filter = app.add_subcommand("filter", "apply a source rule chain");
    std::string f_in, f_out, f_source, f_rejects, f_reference;
    int f_stage = 1;
    bool f_lenient = false;
    filter->add_option("input", f_in)->required();
    filter->add_option("output", f_out)->required();
    filter->add_option("--source", f_source, "source chain")->required();
    filter->add_option("--stage", f_stage, "web stage 1|2|3");
    filter->add_option("--rejects", f_rejects, "reject ledger path");
    filter->add_option("--reference-corpus", f_reference, "stage-2 reference corpus");
    filter->add_flag("--lenient", f_lenient, "skip malformed records");

    // dedup
    auto* dedup_cmd = app.add_subcommand("dedup", "exact + near-duplicate removal");
    std::string d_in, d_out, d_ledger;
    dedup_cmd->add_option("input", d_in)->required();
    dedup_cmd->add_option("output", d_out)->required();
    dedup_cmd->add_option("--ledger", d_ledger, "duplicate ledger path");

    // mix
    auto* mix = app.add_subcommand("mix", "mixture weights and stage plans");
    bool m_table2 = false;
    std::string m_specs, m_out, m_schedule_out;
    std::size_t m_draws = 0;
    mix->add_flag("--table2", m_table2, "use the published mixture rows");
    mix->add_option("--specs", m_specs, "source spec file (JSON array)");
    mix->add_option("--out", m_out, "plan file");
    mix->add_option("--draws", m_draws, "sample schedule draws");
    mix->add_option("--schedule-out", m_schedule_out, "schedule output path");

    // pack
    auto* pack = app.add_subcommand("pack", "pack token streams into samples");
    std::string p_in, p_out, p_source = "web";
    std::uint64_t p_context = 2048;
    pack->add_option("input", p_in)->required();
    pack->add_option("output", p_out)->required();
    pack->add_option("--context-length", p_context, "sample length");
    pack->add_option("--source", p_source, "source label");

    // lr
    auto* lr = app.add_subcommand("lr", "learning-rate schedule values");
    double lr_max = 3e-4, lr_min = 3e-5;
    std::uint64_t lr_total = 100000, lr_warmup = 100;
    std::int64_t lr_step = -1;
    std::size_t lr_table = 0;
    lr->add_option("--max", lr_max);
    lr->add_option("--min", lr_min);
    lr->add_option("--total-steps", lr_total);
    lr->add_option("--warmup-steps", lr_warmup);
    lr->add_option("--step", lr_step, "print the value at one step");
    lr->add_option("--table", lr_table, "print a table of N+1 rows");

    // tok-train
    auto* tok_train = app.add_subcommand("tok-train", "learn a vocabulary extension");
    std::string tt_in, tt_base, tt_out;
    std::size_t tt_target = 100, tt_pad = 0;
    tok_train->add_option("input", tt_in)->required();
    tok_train->add_option("--base", tt_base, "base vocabulary file");
    tok_train->add_option("--out", tt_out, "output vocabulary")->required();
    tok_train->add_option("--target", tt_target, "new tokens to learn");
    tok_train->add_option("--pad-to", tt_pad, "pad vocabulary to this size");

    // tok-eval
    auto* tok_eval = app.add_subcommand("tok-eval", "compression ratios");
    std::string te_vocab, te_out;
    std::vector<std::string> te_corpora;
    tok_eval->add_option("--vocab", te_vocab)->required();
    tok_eval->add_option("--corpus", te_corpora, "name=path, repeatable");
    tok_eval->add_option("--out", te_out, "report file");

    // probe
    auto* probe = app.add_subcommand("probe", "long-tail knowledge probe");
    std::string pr_enc, pr_sample, pr_dpre, pr_templates, pr_out;
    probe->add_option("--encyclopedia", pr_enc)->required();
    probe->add_option("--sample", pr_sample)->required();
    probe->add_option("--dpre", pr_dpre)->required();
    probe->add_option("--templates", pr_templates)->required();
    probe->add_option("--out", pr_out)->required();

    // sft-synth / sft-score / sft-split
    auto* synth = app.add_subcommand("sft-synth", "complex multi-turn synthesis");
    std::string ss_in, ss_topics, ss_prompts, ss_out;
    synth->add_option("input", ss_in)->required();
    synth->add_option("output", ss_out)->required();
    synth->add_option("--topics", ss_topics)->required();
    synth->add_option("--prompts", ss_prompts)->required();

    auto* score = app.add_subcommand("sft-score", "instruction complexity scoring");
    std::string sc_in, sc_out, sc_vocab;
    score->add_option("input", sc_in)->required();
    score->add_option("output", sc_out)->required();
    score->add_option("--vocab", sc_vocab, "tokenizer vocabulary");

    auto* split = app.add_subcommand("sft-split", "simple/complex curriculum split");
    std::string sp_in, sp_simple, sp_complex;
    double sp_quantile = 0.5, sp_threshold = 0.0;
    bool sp_threshold_set = false;
    split->add_option("input", sp_in)->required();
    split->add_option("--out-simple", sp_simple)->required();
    split->add_option("--out-complex", sp_complex)->required();
    split->add_option("--quantile", sp_quantile);
    split->add_option("--threshold", sp_threshold)
        ->each([&](const std::string&) { sp_threshold_set = true; });

    // align
    auto* a_filter = app.add_subcommand("align-filter", "agreement-gap filter");
    std::string af_in, af_out;
    long long af_gap = -1;
    a_filter->add_option("input", af_in)->required();
    a_filter->add_option("output", af_out)->required();
    a_filter->add_option("--min-gap", af_gap);

    auto* a_reward = app.add_subcommand("align-reward", "DPO rewards per pair");
    std::string ar_in, ar_out, ar_policy, ar_reference;
    a_reward->add_option("input", ar_in)->required();
    a_reward->add_option("output", ar_out)->required();
    a_reward->add_option("--policy-cmd", ar_policy, "external policy provider");
    a_reward->add_option("--reference-cmd", ar_reference, "external reference provider");

    auto* a_rounds = app.add_subcommand("align-rounds", "easy-to-hard alignment rounds");
    std::string ao_in, ao_dir;
    std::vector<std::string> ao_snapshots;
    int ao_simulated = 3;
    a_rounds->add_option("input", ao_in)->required();
    a_rounds->add_option("--out-dir", ao_dir)->required();
    a_rounds->add_option("--snapshot-cmd", ao_snapshots, "per-round provider, repeatable");
    a_rounds->add_option("--simulated-rounds", ao_simulated);

    // report
    auto* rep = app.add_subcommand("report", "render the run manifest");
    std::string rp_manifest, rp_format = "text";
    rep->add_option("--manifest", rp_manifest);
    rep->add_option("--format", rp_format)->check(CLI::IsMember({"text", "structured"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        cli.finalize_config();
        if (!cache_dir_flag.empty()) cli.cfg.model.cache_dir = cache_dir_flag;
        if (filter->parsed())
            return cmd_filter(cli, f_in, f_out, f_source, f_stage, f_rejects, f_lenient,
                              f_reference);
        if (dedup_cmd->parsed()) return cmd_dedup(cli, d_in, d_out, d_ledger);
        if (mix->parsed()) return cmd_mix(cli, m_table2, m_specs, m_out, m_draws,
                                          m_schedule_out);
        if (pack->parsed()) return cmd_pack(cli, p_in, p_out, p_context, p_source);
        if (lr->parsed()) return cmd_lr(cli, lr_max, lr_min, lr_total, lr_warmup, lr_step,
                                        lr_table);
        if (tok_train->parsed()) return cmd_tok_train(cli, tt_in, tt_base, tt_out, tt_target,
                                                      tt_pad);
        if (tok_eval->parsed()) return cmd_tok_eval(cli, te_vocab, te_corpora, te_out);
        if (probe->parsed())
            return cmd_probe(cli, pr_enc, pr_sample, pr_dpre, pr_templates, pr_out);
        if (synth->parsed()) return cmd_sft_synth(cli, ss_in, ss_topics, ss_prompts, ss_out);
        if (score->parsed()) return cmd_sft_score(cli, sc_in, sc_out, sc_vocab);
        if (split->parsed())
            return cmd_sft_split(cli, sp_in, sp_simple, sp_complex, sp_quantile, sp_threshold,
                                 sp_threshold_set);
        if (a_filter->parsed())
            return cmd_align_filter(cli, af_in, af_out,
                                    af_gap >= 0 ? af_gap : cli.cfg.align.min_gap);
        if (a_reward->parsed())
            return cmd_align_reward(cli, ar_in, ar_out, ar_policy, ar_reference);
        if (a_rounds->parsed())
            return cmd_align_rounds(cli, ao_in, ao_dir, ao_snapshots, ao_simulated);
        if (rep->parsed()) return cmd_report(cli, rp_manifest, rp_format);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const ProviderUnavailable& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 2;
    } catch (const ProtocolViolation& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 2;
    } catch (const model::Timeout& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 2;
    } catch (const GeneratorFailure& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 2;
    } catch (const ScorerFailure& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
