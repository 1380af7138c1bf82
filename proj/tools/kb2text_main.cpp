#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kb2text/corpus.hpp"
#include "kb2text/error.hpp"
#include "kb2text/generation.hpp"
#include "kb2text/io_util.hpp"
#include "kb2text/ir_index.hpp"
#include "kb2text/kn_lm.hpp"
#include "kb2text/metrics.hpp"
#include "kb2text/model.hpp"
#include "kb2text/synthetic.hpp"
#include "kb2text/trainer.hpp"
#include "kb2text/vocab.hpp"

#include "run_config.hpp"

namespace kb2text::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void require_exists(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw MissingArtifactError(what + " not found: " + path);
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (!path.empty()) cfg = load_run_config(path);
    return cfg;
}

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

// ---------------------------------------------------------------------------
// Combined vocabulary artifact: target-side and KB-side vocabularies in one
// JSON file so train/generate always agree on both.

void save_vocab_pair(const std::string& path, const Vocab& target, const Vocab& kb) {
    ordered_json j;
    j["format"] = "kb2text-vocab-pair";
    j["target"] = nlohmann::json::parse(target.to_json_string());
    j["kb"] = nlohmann::json::parse(kb.to_json_string());
    atomic_write_file(path, j.dump() + "\n");
}

std::pair<Vocab, Vocab> load_vocab_pair(const std::string& path) {
    require_exists(path, "vocabulary");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
        return {Vocab::from_json_string(j.at("target").dump()),
                Vocab::from_json_string(j.at("kb").dump())};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("vocabulary " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Generation output lines (shared schema across the model and baselines).

struct GenRecord {
    std::string id;
    std::string text;
    bool complete = true;
};

std::vector<GenRecord> read_generations(const std::string& path) {
    require_exists(path, "generations");
    std::vector<GenRecord> out;
    for_each_line(path, [&](const std::string& line, long line_no) {
        try {
            const auto j = nlohmann::json::parse(line);
            GenRecord r;
            r.id = j.at("example_id").get<std::string>();
            r.text = j.at("text").get<std::string>();
            r.complete = j.value("complete", true);
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("generations: ") + e.what(), line_no);
        }
    });
    return out;
}

std::vector<TripleSetExample> read_examples(const std::string& path) {
    require_exists(path, "corpus");
    return read_corpus_jsonl(path);
}

// ---------------------------------------------------------------------------
// synth: seeded synthetic article generator for pipeline exercises.

struct SynthArgs {
    std::string config;
    std::string out;
    std::string heldout_out;
    std::string labels_out;
    std::string config_out;
    int n = 100;
    uint64_t seed = 0;
    bool seed_set = false;
    SyntheticSchema schema;
};

void cmd_synth(const SynthArgs& a) {
    Timer timer;
    RunConfig cfg = load_config(a.config);
    if (a.seed_set) cfg.seed = a.seed;
    cfg.finalize();

    SyntheticSchema schema = a.schema;
    schema.language = cfg.language;
    const SyntheticCorpus corpus = generate_synthetic_corpus(cfg.seed, a.n, schema);

    std::vector<std::string> outputs{a.out};
    write_articles_jsonl(a.out, corpus.train_articles);
    if (!a.heldout_out.empty()) {
        write_articles_jsonl(a.heldout_out, corpus.heldout_articles);
        outputs.push_back(a.heldout_out);
    }
    if (!a.labels_out.empty()) {
        ordered_json j(corpus.rare_labels);
        atomic_write_file(a.labels_out, j.dump() + "\n");
        outputs.push_back(a.labels_out);
    }
    if (!a.config_out.empty()) {
        // Frequency cutoff adapted to the generated corpus; placeholders are
        // far rarer here than in full-size data, so admit them all.
        ordered_json j;
        j["language"] = corpus.build.language;
        j["build"] = {{"max_words", corpus.build.max_words},
                      {"placeholder_min_count", 1},
                      {"r_max", corpus.build.r_max}};
        atomic_write_file(a.config_out, j.dump(2) + "\n");
        outputs.push_back(a.config_out);
    }
    write_manifest(manifest_path(a.out), "synth", cfg, {}, outputs, timer.seconds());
    std::cout << "synth: " << corpus.train_articles.size() << " train articles, "
              << corpus.heldout_articles.size() << " heldout articles\n";
}

// ---------------------------------------------------------------------------
// build-corpus

struct BuildArgs {
    std::string config;
    std::string in;
    std::string out;
    std::string stats;
    std::string report;
    int max_words = -1;
    bool no_copy_actions = false;
    bool drop_unaligned = false;
};

void cmd_build_corpus(const BuildArgs& a) {
    Timer timer;
    RunConfig cfg = load_config(a.config);
    cfg.finalize();
    require_exists(a.in, "articles");

    BuildOptions opt;
    opt.language = cfg.language;
    opt.fallback_chain = cfg.fallback_chain;
    opt.max_words = a.max_words >= 0 ? a.max_words : cfg.max_words;
    opt.r_max = cfg.r_max;
    opt.copy_actions = a.no_copy_actions ? false : cfg.copy_actions;
    opt.keep_unaligned = a.drop_unaligned ? false : cfg.keep_unaligned;

    const std::vector<RawArticle> articles = read_articles_jsonl(a.in);
    BuildResult result = build_corpus(articles, opt);
    write_corpus_jsonl(a.out, result.examples);
    std::vector<std::string> outputs{a.out};
    if (!a.stats.empty()) {
        atomic_write_file(a.stats, stats_to_json(corpus_stats(result.examples)) + "\n");
        outputs.push_back(a.stats);
    }
    if (!a.report.empty()) {
        atomic_write_file(a.report, result.report.to_json() + "\n");
        outputs.push_back(a.report);
    }
    write_manifest(manifest_path(a.out), "build-corpus", cfg, {a.in}, outputs, timer.seconds());
    std::cout << "build-corpus: " << result.examples.size() << " examples from "
              << articles.size() << " articles\n";
}

// ---------------------------------------------------------------------------
// build-vocab

struct VocabArgs {
    std::string config;
    std::string in;
    std::string out;
    int max_words = -1;
    int placeholder_min_count = -1;
    int max_kb_ids = -1;
};

void cmd_build_vocab(const VocabArgs& a) {
    Timer timer;
    RunConfig cfg = load_config(a.config);
    cfg.finalize();
    const std::vector<TripleSetExample> corpus = read_examples(a.in);
    if (corpus.empty()) throw ArgumentError("build-vocab: corpus is empty");

    std::vector<TokenSeq> summaries;
    summaries.reserve(corpus.size());
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    const int max_words = a.max_words >= 0 ? a.max_words : cfg.max_words;
    const int min_count =
        a.placeholder_min_count >= 0 ? a.placeholder_min_count : cfg.placeholder_min_count;
    const int max_kb = a.max_kb_ids >= 0 ? a.max_kb_ids : cfg.max_kb_ids;

    const Vocab target = Vocab::build(summaries, max_words, min_count);
    const Vocab kb = build_kb_vocab(corpus, max_kb);
    save_vocab_pair(a.out, target, kb);
    write_manifest(manifest_path(a.out), "build-vocab", cfg, {a.in}, {a.out}, timer.seconds());
    std::cout << "build-vocab: target " << target.size() << " tokens ("
              << target.placeholder_count() << " placeholders), kb " << kb.size() << " ids\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config;
    std::string corpus;
    std::string valid;
    std::string vocab;
    std::string out;
    std::string log;
    int epochs = -1;
    double lr = -1;
    int batch_size = -1;
    int d_hidden = -1;
};

void cmd_train(const TrainArgs& a) {
    Timer timer;
    RunConfig cfg = load_config(a.config);
    if (a.d_hidden > 0) cfg.d_hidden = a.d_hidden;
    cfg.finalize();
    if (a.epochs > 0) cfg.train.max_epochs = a.epochs;
    if (a.lr > 0) cfg.train.learning_rate = static_cast<real>(a.lr);
    if (a.batch_size > 0) cfg.train.batch_size = a.batch_size;
    cfg.train.seed = cfg.seed;

    const std::vector<TripleSetExample> train_corpus = read_examples(a.corpus);
    const std::vector<TripleSetExample> valid_corpus =
        a.valid.empty() ? train_corpus : read_examples(a.valid);
    auto [target, kb] = load_vocab_pair(a.vocab);

    ModelConfig model_cfg;
    model_cfg.enc.vocab_kb = kb.size();
    model_cfg.enc.d_emb = cfg.d_emb;
    model_cfg.enc.d_triple = cfg.d_triple;
    model_cfg.enc.d_hidden = cfg.d_hidden;
    model_cfg.enc.r_max = cfg.r_max;
    model_cfg.enc.activation = activation_from_string(cfg.activation);
    model_cfg.enc.combine = combine_from_string(cfg.combine);
    model_cfg.dec.vocab_ext = target.size();
    model_cfg.dec.d_hidden = cfg.d_hidden;
    model_cfg.dec.d_emb_out = cfg.d_emb_out;
    model_cfg.dec.n_layers = cfg.n_layers;
    model_cfg.validate();

    const auto train_set = encode_corpus(train_corpus, kb, target, cfg.r_max);
    const auto valid_set = encode_corpus(valid_corpus, kb, target, cfg.r_max);

    const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
    TrainResult result;
    {
        std::ofstream log(log_path);
        if (!log) throw IoError("train: cannot open log " + log_path);
        result = train(model_cfg, cfg.train, train_set, valid_set, &log);
    }

    CheckpointMeta meta;
    meta.epoch = result.best_epoch;
    meta.valid_nll = result.best_valid_nll;
    meta.kb_vocab_hash = kb.content_hash();
    meta.target_vocab_hash = target.content_hash();
    meta.train_config_json = cfg.train.to_json_string();
    save_checkpoint(a.out, result.best, meta, &result.adam);
    write_manifest(manifest_path(a.out), "train", cfg, {a.corpus, a.valid, a.vocab},
                   {a.out, log_path}, timer.seconds());
    std::cout << "train: best epoch " << result.best_epoch << ", valid nll/token "
              << result.best_valid_nll << "\n";
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
    std::string config;
    std::string corpus;
    std::string vocab;
    std::string checkpoint;
    std::string out;
    int beam_size = -1;
    int max_len = -1;
};

void cmd_generate(const GenerateArgs& a) {
    Timer timer;
    RunConfig cfg = load_config(a.config);
    cfg.finalize();
    if (a.beam_size > 0) cfg.beam_size = a.beam_size;
    if (a.max_len > 0) cfg.max_len = a.max_len;

    const std::vector<TripleSetExample> corpus = read_examples(a.corpus);
    auto [target, kb] = load_vocab_pair(a.vocab);
    LoadedCheckpoint ckpt =
        load_checkpoint_checked(a.checkpoint, kb.content_hash(), target.content_hash());

    GenerationConfig gen_cfg;
    gen_cfg.beam_size = cfg.beam_size;
    gen_cfg.max_len = cfg.max_len;
    gen_cfg.prefer_complete = cfg.prefer_complete;
    gen_cfg.seed = cfg.seed;

    std::vector<std::string> lines;
    lines.reserve(corpus.size());
    for (const auto& ex : corpus) {
        const EncodedExample encoded = encode_example(ex, kb, target, cfg.r_max);
        const GenerationResult result = generate(ckpt.model, encoded, ex, target, gen_cfg);
        lines.push_back(generation_to_json(ex.main_entity, result));
    }
    write_generations_jsonl(a.out, lines);
    write_manifest(manifest_path(a.out), "generate", cfg, {a.corpus, a.vocab, a.checkpoint},
                   {a.out}, timer.seconds());
    std::cout << "generate: " << lines.size() << " summaries\n";
}

// ---------------------------------------------------------------------------
// baseline {kn | kn-ext | ir | ir-ext}

struct BaselineArgs {
    std::string config;
    std::string system;
    std::string train_corpus;
    std::string test_corpus;
    std::string out;
    std::string model_out;
};

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::string baseline_line(const std::string& id, const std::vector<std::string>& raw_tokens,
                          const std::vector<std::string>& text, bool complete, double log_prob,
                          long unresolved) {
    ordered_json j;
    j["example_id"] = id;
    j["raw_tokens"] = raw_tokens;
    j["text"] = join_tokens(text);
    j["complete"] = complete;
    j["log_prob"] = log_prob;
    j["unresolved_placeholders"] = unresolved;
    return j.dump();
}

void cmd_baseline(const BaselineArgs& a) {
    Timer timer;
    RunConfig cfg = load_config(a.config);
    cfg.finalize();
    const bool ext = a.system == "kn-ext" || a.system == "ir-ext";
    const bool is_kn = a.system == "kn" || a.system == "kn-ext";

    const std::vector<TripleSetExample> train_corpus = read_examples(a.train_corpus);
    const std::vector<TripleSetExample> test_corpus = read_examples(a.test_corpus);
    if (train_corpus.empty()) throw ArgumentError("baseline: training corpus is empty");

    std::vector<std::string> lines;
    lines.reserve(test_corpus.size());
    std::vector<std::string> outputs{a.out};

    if (is_kn) {
        std::vector<std::vector<std::string>> sentences;
        sentences.reserve(train_corpus.size());
        for (const auto& ex : train_corpus) {
            if (ext)
                sentences.push_back(to_canonical(ex.extended_summary));
            else
                sentences.push_back(ex.raw_summary);
        }
        KnConfig kn_cfg;
        kn_cfg.order = cfg.kn_order;
        const KnModel model = KnModel::train(sentences, kn_cfg);
        if (!a.model_out.empty()) {
            model.save(a.model_out);
            outputs.push_back(a.model_out);
        }
        // One unconditioned most-probable summary, resolved per example.
        const KnGeneration gen =
            kn_generate(model, cfg.kn_beam, cfg.max_len, cfg.prefer_complete);
        const TokenSeq tokens = to_tokens(gen.tokens);
        for (const auto& ex : test_corpus) {
            Rng rng = Rng(cfg.seed).derive(fnv1a(ex.main_entity));
            ResolveStats stats;
            const std::vector<std::string> text =
                resolve_copy_actions(tokens, ex.triples, ex.main_entity, rng, &stats);
            lines.push_back(baseline_line(ex.main_entity, gen.tokens, text, gen.complete,
                                          gen.log_prob, stats.unresolved_placeholders));
        }
    } else {
        IrConfig ir_cfg;
        ir_cfg.exact_svd_limit = cfg.ir_exact_limit;
        ir_cfg.seed = cfg.seed;
        if (cfg.ir_k > 0) {
            ir_cfg.k = cfg.ir_k;
        } else {
            std::unordered_map<std::string, bool> terms;
            for (const auto& ex : train_corpus)
                for (const auto& term : triple_terms(ex.triples)) terms[term] = true;
            ir_cfg.k = static_cast<int>(
                std::min({size_t{128}, train_corpus.size(), terms.size()}));
        }
        const IrIndex index = ir_build(train_corpus, ir_cfg);
        if (!a.model_out.empty()) {
            index.save(a.model_out);
            outputs.push_back(a.model_out);
        }
        for (const auto& ex : test_corpus) {
            const IrRetrieval hit = ir_retrieve(index, ex.triples);
            const TripleSetExample& found = train_corpus[static_cast<size_t>(hit.doc)];
            if (ext) {
                Rng rng = Rng(cfg.seed).derive(fnv1a(ex.main_entity));
                ResolveStats stats;
                const std::vector<std::string> text = resolve_copy_actions(
                    found.extended_summary, ex.triples, ex.main_entity, rng, &stats);
                lines.push_back(baseline_line(ex.main_entity,
                                              to_canonical(found.extended_summary), text, true,
                                              hit.similarity, stats.unresolved_placeholders));
            } else {
                lines.push_back(baseline_line(ex.main_entity, found.raw_summary,
                                              found.raw_summary, true, hit.similarity, 0));
            }
        }
    }
    write_generations_jsonl(a.out, lines);
    write_manifest(manifest_path(a.out), "baseline-" + a.system, cfg,
                   {a.train_corpus, a.test_corpus}, outputs, timer.seconds());
    std::cout << "baseline " << a.system << ": " << lines.size() << " summaries\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string config;
    std::string references;
    std::vector<std::string> systems;  // name=path
    std::string out;
    bool table = false;
};

void cmd_eval(const EvalArgs& a) {
    Timer timer;
    RunConfig cfg = load_config(a.config);
    cfg.finalize();
    const std::vector<TripleSetExample> refs = read_examples(a.references);
    std::unordered_map<std::string, const TripleSetExample*> by_id;
    for (const auto& ex : refs) by_id[ex.main_entity] = &ex;
    const CategoryAssignment categories =
        assign_categories(refs, static_cast<size_t>(cfg.max_categories));

    ordered_json combined;
    combined["references"] = a.references;
    combined["systems"] = ordered_json::object();
    std::vector<std::pair<std::string, EvalReport>> reports;
    std::vector<std::string> inputs{a.references};

    for (const auto& spec : a.systems) {
        const size_t eq = spec.find('=');
        const std::string name =
            eq == std::string::npos
                ? std::filesystem::path(spec).stem().string()
                : spec.substr(0, eq);
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        inputs.push_back(path);

        std::vector<EvalItem> items;
        for (const auto& record : read_generations(path)) {
            const auto it = by_id.find(record.id);
            if (it == by_id.end())
                throw FormatError("eval: generation id " + record.id + " not in references");
            EvalItem item;
            item.id = record.id;
            item.candidate = split_tokens(record.text);
            item.reference = it->second->raw_summary;
            item.complete = record.complete;
            const auto cat = categories.by_example.find(record.id);
            item.category = cat == categories.by_example.end() ? "other" : cat->second;
            items.push_back(std::move(item));
        }
        EvalReport report =
            evaluate(items, static_cast<size_t>(cfg.max_categories), !cfg.strict_bleu);
        combined["systems"][name] = nlohmann::json::parse(report.to_json_string());
        reports.emplace_back(name, std::move(report));
    }

    atomic_write_file(a.out, combined.dump() + "\n");
    write_manifest(manifest_path(a.out), "eval", cfg, inputs, {a.out}, timer.seconds());

    if (a.table) {
        char row[256];
        std::snprintf(row, sizeof(row), "%-12s %8s %8s %8s %8s %8s %8s %6s\n", "system",
                      "BLEU 1", "BLEU 2", "BLEU 3", "BLEU 4", "ROUGE_L", "METEOR", "excl%%");
        std::cout << row;
        for (const auto& [name, report] : reports) {
            const double pct =
                report.total == 0
                    ? 0
                    : 100.0 * static_cast<double>(report.excluded) /
                          static_cast<double>(report.total);
            std::snprintf(row, sizeof(row),
                          "%-12s %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f %6.2f\n", name.c_str(),
                          report.bleu_n[0] * 100, report.bleu_n[1] * 100,
                          report.bleu_n[2] * 100, report.bleu_n[3] * 100, report.rouge_l * 100,
                          report.meteor * 100, pct);
            std::cout << row;
        }
    } else {
        for (const auto& [name, report] : reports)
            std::cout << "eval " << name << ": BLEU-4 " << report.bleu_n[3] * 100 << "\n";
    }
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
    std::string in;
    std::string out;
};

void cmd_stats(const StatsArgs& a) {
    const std::vector<TripleSetExample> corpus = read_examples(a.in);
    const std::string json = stats_to_json(corpus_stats(corpus));
    if (!a.out.empty()) atomic_write_file(a.out, json + "\n");
    std::cout << json << "\n";
}

}  // namespace
}  // namespace kb2text::cli

int main(int argc, char** argv) {
    using namespace kb2text;
    using namespace kb2text::cli;

    CLI::App app{"Data-to-text toolkit: triple-set summarisation, baselines, evaluation"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded synthetic article set");
    synth_cmd->add_option("--config", synth.config, "Run config JSON");
    synth_cmd->add_option("--out", synth.out, "Training articles JSONL")->required();
    synth_cmd->add_option("--heldout-out", synth.heldout_out, "Held-out articles JSONL");
    synth_cmd->add_option("--labels-out", synth.labels_out, "Planted rare labels JSON");
    synth_cmd->add_option("--config-out", synth.config_out,
                          "Suggested build config for this corpus");
    synth_cmd->add_option("--n", synth.n, "Training articles");
    synth_cmd
        ->add_option_function<uint64_t>(
            "--seed", [&synth](const uint64_t& v) {
                synth.seed = v;
                synth.seed_set = true;
            },
            "Seed override")
        ->expected(1);
    synth_cmd->add_option("--categories", synth.schema.n_categories, "Instance types");
    synth_cmd->add_option("--frequent-attrs", synth.schema.n_frequent_attrs,
                          "Frequent attribute pool per category");
    synth_cmd->add_option("--rare-rate", synth.schema.rare_entity_rate,
                          "Probability of a fresh rare attribute");
    synth_cmd->add_option("--multi-token-rate", synth.schema.multi_token_label_rate,
                          "Probability a rare label spans two tokens");
    synth_cmd->add_option("--max-distractors", synth.schema.max_distractors,
                          "Unmentioned triples per example");
    synth_cmd->add_option("--heldout", synth.schema.n_heldout, "Held-out articles");
    synth_cmd->add_option("--heldout-rare-rate", synth.schema.heldout_rare_rate,
                          "Rare-attribute rate on the held-out split");

    BuildArgs build;
    auto* build_cmd = app.add_subcommand("build-corpus", "Build examples from raw articles");
    build_cmd->add_option("--config", build.config, "Run config JSON");
    build_cmd->add_option("--in", build.in, "Articles JSONL")->required();
    build_cmd->add_option("--out", build.out, "Corpus JSONL")->required();
    build_cmd->add_option("--stats", build.stats, "Corpus statistics JSON");
    build_cmd->add_option("--report", build.report, "Build report JSON");
    build_cmd->add_option("--max-words", build.max_words, "Frequent-token cutoff override");
    build_cmd->add_flag("--no-copy-actions", build.no_copy_actions,
                        "Ablation: keep raw words only");
    build_cmd->add_flag("--drop-unaligned", build.drop_unaligned,
                        "Drop summaries without any matched triple");

    VocabArgs vocab;
    auto* vocab_cmd = app.add_subcommand("build-vocab", "Build target and KB vocabularies");
    vocab_cmd->add_option("--config", vocab.config, "Run config JSON");
    vocab_cmd->add_option("--in", vocab.in, "Corpus JSONL")->required();
    vocab_cmd->add_option("--out", vocab.out, "Vocabulary JSON")->required();
    vocab_cmd->add_option("--max-words", vocab.max_words, "Target budget override");
    vocab_cmd->add_option("--placeholder-min-count", vocab.placeholder_min_count,
                          "Placeholder admission threshold override");
    vocab_cmd->add_option("--max-kb-ids", vocab.max_kb_ids, "KB vocabulary budget override");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train the triple-to-text model");
    train_cmd->add_option("--config", train.config, "Run config JSON");
    train_cmd->add_option("--corpus", train.corpus, "Training corpus JSONL")->required();
    train_cmd->add_option("--valid", train.valid, "Validation corpus JSONL");
    train_cmd->add_option("--vocab", train.vocab, "Vocabulary JSON")->required();
    train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
    train_cmd->add_option("--log", train.log, "Epoch log JSONL");
    train_cmd->add_option("--epochs", train.epochs, "Epoch override");
    train_cmd->add_option("--lr", train.lr, "Learning-rate override");
    train_cmd->add_option("--batch-size", train.batch_size, "Batch-size override");
    train_cmd->add_option("--d-hidden", train.d_hidden, "Hidden-size override");

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Generate summaries with a checkpoint");
    gen_cmd->add_option("--config", gen.config, "Run config JSON");
    gen_cmd->add_option("--corpus", gen.corpus, "Query corpus JSONL")->required();
    gen_cmd->add_option("--vocab", gen.vocab, "Vocabulary JSON")->required();
    gen_cmd->add_option("--checkpoint", gen.checkpoint, "Model checkpoint")->required();
    gen_cmd->add_option("--out", gen.out, "Generations JSONL")->required();
    gen_cmd->add_option("--beam-size", gen.beam_size, "Beam size override");
    gen_cmd->add_option("--max-len", gen.max_len, "Length limit override");

    BaselineArgs baseline;
    auto* baseline_cmd = app.add_subcommand("baseline", "Train and run a baseline system");
    baseline_cmd->add_option("--config", baseline.config, "Run config JSON");
    baseline_cmd
        ->add_option("system", baseline.system, "One of kn, kn-ext, ir, ir-ext")
        ->required()
        ->check(CLI::IsMember({"kn", "kn-ext", "ir", "ir-ext"}));
    baseline_cmd->add_option("--train-corpus", baseline.train_corpus, "Training corpus JSONL")
        ->required();
    baseline_cmd->add_option("--test-corpus", baseline.test_corpus, "Query corpus JSONL")
        ->required();
    baseline_cmd->add_option("--out", baseline.out, "Generations JSONL")->required();
    baseline_cmd->add_option("--model-out", baseline.model_out, "Persist the trained model");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score generations against references");
    eval_cmd->add_option("--config", eval.config, "Run config JSON");
    eval_cmd->add_option("--references", eval.references, "Reference corpus JSONL")->required();
    eval_cmd->add_option("--system", eval.systems, "name=generations.jsonl (repeatable)")
        ->required();
    eval_cmd->add_option("--out", eval.out, "Combined report JSON")->required();
    eval_cmd->add_flag("--table", eval.table, "Print a systems-by-metrics table");

    StatsArgs stats;
    auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
    stats_cmd->add_option("--in", stats.in, "Corpus JSONL")->required();
    stats_cmd->add_option("--out", stats.out, "Statistics JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) cmd_synth(synth);
        if (build_cmd->parsed()) cmd_build_corpus(build);
        if (vocab_cmd->parsed()) cmd_build_vocab(vocab);
        if (train_cmd->parsed()) cmd_train(train);
        if (gen_cmd->parsed()) cmd_generate(gen);
        if (baseline_cmd->parsed()) cmd_baseline(baseline);
        if (eval_cmd->parsed()) cmd_eval(eval);
        if (stats_cmd->parsed()) cmd_stats(stats);
    } catch (const MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const VocabHashError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
