#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <sstream>
#include <vector>

#include "kb2text/trainer.hpp"

using namespace kb2text;

namespace {

ModelConfig micro_config(int vocab_kb, int vocab_ext) {
    ModelConfig cfg;
    cfg.enc.vocab_kb = vocab_kb;
    cfg.enc.d_emb = 3;
    cfg.enc.d_triple = 4;
    cfg.enc.d_hidden = 4;
    cfg.enc.r_max = 4;
    cfg.dec.vocab_ext = vocab_ext;
    cfg.dec.d_hidden = 4;
    cfg.dec.d_emb_out = 3;
    cfg.dec.n_layers = 1;
    return cfg;
}

Triple make_triple(std::string s, std::string p, std::string o) {
    Triple t;
    t.subject_id = std::move(s);
    t.property_id = std::move(p);
    t.object_id = std::move(o);
    t.subject_label = t.subject_id;
    t.property_label = t.property_id;
    t.object_label = t.object_id;
    return t;
}

std::vector<TripleSetExample> toy_corpus() {
    std::vector<TripleSetExample> out;
    TripleSetExample a;
    a.main_entity = "Q1";
    a.triples = {make_triple("Q1", "P1", "Q2"), make_triple("Q1", "P2", "Q3")};
    a.raw_summary = {"unu", "du"};
    a.extended_summary = to_tokens({"<start>", "unu", "du", "<end>"});
    out.push_back(a);

    TripleSetExample b;
    b.main_entity = "Q2";
    b.triples = {make_triple("Q2", "P1", "Q3")};
    b.raw_summary = {"du", "tri", "kvar"};
    b.extended_summary = to_tokens({"<start>", "du", "tri", "kvar", "<end>"});
    out.push_back(b);

    TripleSetExample c;
    c.main_entity = "Q3";
    c.triples = {make_triple("Q3", "P2", "Q1")};
    c.raw_summary = {"tri", "unu"};
    c.extended_summary = to_tokens({"<start>", "tri", "unu", "<end>"});
    out.push_back(c);
    return out;
}

bool models_equal(const ModelParams& a, const ModelParams& b) {
    bool equal = true;
    std::vector<const Matrix*> av, bv;
    a.cvisit([&](const std::string&, const Tensor& t, bool) { av.push_back(&t.v); });
    b.cvisit([&](const std::string&, const Tensor& t, bool) { bv.push_back(&t.v); });
    if (av.size() != bv.size()) return false;
    for (size_t i = 0; i < av.size(); ++i)
        if (!(*av[i] == *bv[i])) equal = false;
    a.cvisit_bn([&](const std::string&, const BatchNormState&) {});
    return equal;
}

}  // namespace

TEST_CASE("train config validates and round trips through JSON") {
    TrainConfig cfg;
    cfg.batch_size = 7;
    cfg.learning_rate = real(0.003);
    cfg.l2_coeff = real(0.05);
    cfg.max_epochs = 11;
    cfg.init_range = real(0.01);
    cfg.seed = 99;
    cfg.eval_every = 3;
    cfg.early_stop_patience = 2;
    cfg.validate();

    TrainConfig back = TrainConfig::from_json_string(cfg.to_json_string());
    CHECK(back.batch_size == 7);
    CHECK(back.learning_rate == doctest::Approx(0.003));
    CHECK(back.l2_coeff == doctest::Approx(0.05));
    CHECK(back.max_epochs == 11);
    CHECK(back.seed == 99);
    CHECK(back.eval_every == 3);
    CHECK(back.early_stop_patience == 2);

    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    CHECK_THROWS_AS(TrainConfig::from_json_string("not json"), FormatError);
}

TEST_CASE("init_params draws inside the range and keeps batch norm neutral") {
    ModelConfig cfg = micro_config(6, 8);
    ModelParams m = init_params(cfg, real(0.01), 5);

    bool any_nonzero = false;
    m.cvisit([&](const std::string&, const Tensor& t, bool) {
        for (size_t i = 0; i < t.v.size(); ++i) {
            CHECK(std::abs(t.v[i]) <= 0.01);
            if (t.v[i] != 0) any_nonzero = true;
        }
    });
    CHECK(any_nonzero);
    m.cvisit_bn([&](const std::string&, const BatchNormState& bn) {
        for (size_t i = 0; i < bn.gamma.size(); ++i) CHECK(bn.gamma[i] == 1.0);
        for (size_t i = 0; i < bn.beta.size(); ++i) CHECK(bn.beta[i] == 0.0);
    });

    ModelParams same = init_params(cfg, real(0.01), 5);
    ModelParams other = init_params(cfg, real(0.01), 6);
    CHECK(models_equal(m, same));
    CHECK_FALSE(models_equal(m, other));
}

TEST_CASE("build_kb_vocab collects ids from the triples") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    // ids: Q1 Q2 Q3 P1 P2 plus the five specials
    CHECK(kb.size() == 10);
    CHECK(kb.lookup("Q1") >= 5);
    CHECK(kb.lookup("P2") >= 5);
    CHECK(kb.lookup("Q99") == -1);
}

TEST_CASE("encode_example orders triples canonically and encodes the target") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);

    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    TripleSetExample shuffled = corpus[0];
    std::swap(shuffled.triples[0], shuffled.triples[1]);
    EncodedExample a = encode_example(corpus[0], kb, target, 4);
    EncodedExample b = encode_example(shuffled, kb, target, 4);
    REQUIRE(a.triples.size() == 2);
    for (size_t i = 0; i < a.triples.size(); ++i) {
        CHECK(a.triples[i].s == b.triples[i].s);
        CHECK(a.triples[i].p == b.triples[i].p);
        CHECK(a.triples[i].o == b.triples[i].o);
    }

    REQUIRE(a.target.size() == 4);
    CHECK(a.target.front() == Vocab::kStart);
    CHECK(a.target.back() == Vocab::kEnd);

    // r_max truncation applies after the canonical sort.
    EncodedExample cut = encode_example(corpus[0], kb, target, 1);
    CHECK(cut.triples.size() == 1);

    TripleSetExample empty;
    empty.main_entity = "Q0";
    CHECK_THROWS_AS(encode_example(empty, kb, target, 4), ArgumentError);
}

TEST_CASE("a zero-weight model scores every token uniformly") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig cfg = micro_config(kb.size(), target.size());
    ModelParams model(cfg);  // all weights zero
    auto encoded = encode_corpus(corpus, kb, target, cfg.enc.r_max);

    BatchLoss l = batch_loss(model, encoded, real(0), NormMode::eval);
    // Logits are identically zero, so each step costs ln(V).
    const long expect_tokens = (4 - 1) + (5 - 1) + (4 - 1);
    CHECK(l.tokens == expect_tokens);
    CHECK(l.nll ==
          doctest::Approx(expect_tokens * std::log(target.size())).epsilon(1e-12));
    CHECK(l.l2 == 0.0);
    CHECK(l.total == l.nll);
}

TEST_CASE("eval-mode loss is additive over duplicated examples") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig cfg = micro_config(kb.size(), target.size());
    ModelParams model = init_params(cfg, real(0.05), 11);
    auto encoded = encode_corpus(corpus, kb, target, cfg.enc.r_max);

    BatchLoss one = batch_loss(model, {encoded[0]}, real(0), NormMode::eval);
    BatchLoss two = batch_loss(model, {encoded[0], encoded[0]}, real(0), NormMode::eval);
    CHECK(two.nll == 2 * one.nll);
    CHECK(two.tokens == 2 * one.tokens);

    // Eval mode never touches parameters or running statistics.
    ModelParams before = init_params(cfg, real(0.05), 11);
    batch_loss(before, encoded, real(0.5), NormMode::eval);
    CHECK(models_equal(before, init_params(cfg, real(0.05), 11)));
}

TEST_CASE("full-model gradients match finite differences") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig cfg = micro_config(kb.size(), target.size());
    ModelParams model = init_params(cfg, real(0.1), 21);
    auto encoded = encode_corpus(corpus, kb, target, cfg.enc.r_max);
    const real l2 = real(0.1);

    auto loss = [&]() { return batch_loss(model, encoded, l2, NormMode::train).total; };

    batch_loss(model, encoded, l2, NormMode::train);  // fills gradient buffers

    std::vector<GradCheckTensor> tensors;
    std::vector<std::unique_ptr<std::string>> names;
    model.visit([&](const std::string& name, Tensor& t, bool) {
        tensors.push_back({name, &t.v, &t.g});
    });
    model.visit_bn([&](const std::string& name, BatchNormState& bn) {
        tensors.push_back({name + ".gamma", &bn.gamma, &bn.gamma_grad});
        tensors.push_back({name + ".beta", &bn.beta, &bn.beta_grad});
    });

    auto res = gradient_check(loss, tensors, 1e-5, 40);
    CAPTURE(res.worst_tensor);
    CAPTURE(res.worst_analytic);
    CAPTURE(res.worst_numeric);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("training is deterministic for a fixed seed") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig mcfg = micro_config(kb.size(), target.size());
    auto encoded = encode_corpus(corpus, kb, target, mcfg.enc.r_max);

    TrainConfig tcfg;
    tcfg.batch_size = 2;
    tcfg.learning_rate = real(0.01);
    tcfg.l2_coeff = real(0.01);
    tcfg.max_epochs = 3;
    tcfg.init_range = real(0.05);
    tcfg.seed = 7;

    TrainResult a = train(mcfg, tcfg, encoded, encoded);
    TrainResult b = train(mcfg, tcfg, encoded, encoded);
    CHECK(models_equal(a.best, b.best));
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.best_valid_nll == b.best_valid_nll);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_nll == b.history[i].train_nll);
        CHECK(a.history[i].valid_nll == b.history[i].valid_nll);
    }

    TrainConfig other = tcfg;
    other.seed = 8;
    TrainResult c = train(mcfg, other, encoded, encoded);
    CHECK_FALSE(models_equal(a.best, c.best));
}

TEST_CASE("zero learning rate leaves the model at its initialisation") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig mcfg = micro_config(kb.size(), target.size());
    auto encoded = encode_corpus(corpus, kb, target, mcfg.enc.r_max);

    TrainConfig tcfg;
    tcfg.batch_size = 3;
    tcfg.learning_rate = real(0);
    tcfg.max_epochs = 2;
    tcfg.init_range = real(0.05);
    tcfg.seed = 3;

    TrainResult r = train(mcfg, tcfg, encoded, encoded);
    ModelParams fresh = init_params(mcfg, tcfg.init_range, tcfg.seed);
    // Weight tensors never move. (Batch-norm running statistics do, by
    // design: they are estimates, not trained parameters.)
    bool weights_equal = true;
    std::vector<const Matrix*> av, bv;
    r.best.cvisit([&](const std::string&, const Tensor& t, bool) { av.push_back(&t.v); });
    fresh.cvisit([&](const std::string&, const Tensor& t, bool) { bv.push_back(&t.v); });
    REQUIRE(av.size() == bv.size());
    for (size_t i = 0; i < av.size(); ++i)
        if (!(*av[i] == *bv[i])) weights_equal = false;
    CHECK(weights_equal);
}

TEST_CASE("training writes epoch logs and improves the loss on a single example") {
    auto corpus = toy_corpus();
    corpus.resize(1);
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries = {corpus[0].extended_summary};
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig mcfg = micro_config(kb.size(), target.size());
    mcfg.enc.d_hidden = 16;
    mcfg.dec.d_hidden = 16;
    auto encoded = encode_corpus(corpus, kb, target, mcfg.enc.r_max);

    TrainConfig tcfg;
    tcfg.batch_size = 1;
    tcfg.learning_rate = real(0.01);
    tcfg.l2_coeff = real(0);
    tcfg.max_epochs = 300;
    tcfg.init_range = real(0.05);
    tcfg.seed = 13;
    tcfg.early_stop_patience = 300;

    std::ostringstream log;
    TrainResult r = train(mcfg, tcfg, encoded, encoded, &log);

    REQUIRE(!r.history.empty());
    CHECK(r.best_valid_nll < 0.01);  // per-token NLL after memorising one example
    CHECK(r.history.front().valid_nll_per_token > r.best_valid_nll);

    // One JSON object per epoch.
    long lines = 0;
    std::string line;
    std::istringstream in(log.str());
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == static_cast<long>(r.history.size()));
}

TEST_CASE("checkpoints round trip bitwise with metadata and adam state") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig mcfg = micro_config(kb.size(), target.size());
    auto encoded = encode_corpus(corpus, kb, target, mcfg.enc.r_max);

    TrainConfig tcfg;
    tcfg.batch_size = 2;
    tcfg.learning_rate = real(0.01);
    tcfg.max_epochs = 2;
    tcfg.init_range = real(0.05);
    tcfg.seed = 17;
    TrainResult r = train(mcfg, tcfg, encoded, encoded);

    CheckpointMeta meta;
    meta.epoch = r.best_epoch;
    meta.valid_nll = r.best_valid_nll;
    meta.kb_vocab_hash = kb.content_hash();
    meta.target_vocab_hash = target.content_hash();
    meta.train_config_json = tcfg.to_json_string();

    const auto path = std::filesystem::temp_directory_path() / "kb2t_ckpt_test.bin";
    save_checkpoint(path, r.best, meta, &r.adam);

    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(models_equal(loaded.model, r.best));
    CHECK(loaded.meta.epoch == meta.epoch);
    CHECK(loaded.meta.valid_nll == meta.valid_nll);
    CHECK(loaded.meta.kb_vocab_hash == meta.kb_vocab_hash);
    CHECK(loaded.meta.target_vocab_hash == meta.target_vocab_hash);
    CHECK(loaded.meta.train_config_json == meta.train_config_json);
    REQUIRE(loaded.adam.size() == r.adam.size());
    for (const auto& [name, st] : r.adam) {
        REQUIRE(loaded.adam.count(name) == 1);
        CHECK(loaded.adam.at(name).m == st.m);
        CHECK(loaded.adam.at(name).v == st.v);
        CHECK(loaded.adam.at(name).step_count == st.step_count);
    }

    // Running statistics survive the trip too.
    std::vector<Vector> lhs, rhs;
    loaded.model.cvisit_bn([&](const std::string&, const BatchNormState& bn) {
        lhs.push_back(bn.running_mean);
        lhs.push_back(bn.running_var);
    });
    r.best.cvisit_bn([&](const std::string&, const BatchNormState& bn) {
        rhs.push_back(bn.running_mean);
        rhs.push_back(bn.running_var);
    });
    CHECK(lhs == rhs);

    CHECK_NOTHROW(load_checkpoint_checked(path, kb.content_hash(), target.content_hash()));
    CHECK_THROWS_AS(load_checkpoint_checked(path, kb.content_hash() + 1, target.content_hash()),
                    VocabHashError);
    CHECK_THROWS_AS(load_checkpoint_checked(path, kb.content_hash(), 123), VocabHashError);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), MissingArtifactError);
}

TEST_CASE("corrupted checkpoints are rejected") {
    auto corpus = toy_corpus();
    Vocab kb = build_kb_vocab(corpus, 100);
    std::vector<TokenSeq> summaries;
    for (const auto& ex : corpus) summaries.push_back(ex.extended_summary);
    Vocab target = Vocab::build(summaries, 100, 1);

    ModelConfig mcfg = micro_config(kb.size(), target.size());
    ModelParams model = init_params(mcfg, real(0.01), 1);
    CheckpointMeta meta;

    const auto path = std::filesystem::temp_directory_path() / "kb2t_ckpt_corrupt.bin";
    save_checkpoint(path, model, meta, nullptr);

    // Flip the magic.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    // Truncate the blob section.
    save_checkpoint(path, model, meta, nullptr);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 16);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);
}
