#include "kb2text/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "json.hpp"

#include "kb2text/error.hpp"
#include "kb2text/rng.hpp"

namespace kb2text {

using ordered_json = nlohmann::ordered_json;

void TrainConfig::validate() const {
    if (batch_size < 1) throw ArgumentError("train config: batch_size must be positive");
    if (learning_rate < 0) throw ArgumentError("train config: learning_rate must be >= 0");
    if (l2_coeff < 0) throw ArgumentError("train config: l2_coeff must be >= 0");
    if (max_epochs < 1) throw ArgumentError("train config: max_epochs must be positive");
    if (!(init_range > 0)) throw ArgumentError("train config: init_range must be positive");
    if (early_stop_patience < 1)
        throw ArgumentError("train config: early_stop_patience must be positive");
    if (eval_every < 0) throw ArgumentError("train config: eval_every must be >= 0");
}

std::string TrainConfig::to_json_string() const {
    ordered_json j;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["l2_coeff"] = l2_coeff;
    j["max_epochs"] = max_epochs;
    j["init_range"] = init_range;
    j["seed"] = seed;
    j["eval_every"] = eval_every;
    j["early_stop_patience"] = early_stop_patience;
    return j.dump();
}

TrainConfig TrainConfig::from_json_string(const std::string& s) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("train config: invalid JSON: ") + e.what());
    }
    TrainConfig cfg;
    auto get = [&](const char* name, auto& field) {
        if (j.contains(name)) field = j.at(name).get<std::decay_t<decltype(field)>>();
    };
    get("batch_size", cfg.batch_size);
    get("learning_rate", cfg.learning_rate);
    get("l2_coeff", cfg.l2_coeff);
    get("max_epochs", cfg.max_epochs);
    get("init_range", cfg.init_range);
    get("seed", cfg.seed);
    get("eval_every", cfg.eval_every);
    get("early_stop_patience", cfg.early_stop_patience);
    cfg.validate();
    return cfg;
}

ModelParams init_params(const ModelConfig& cfg, real init_range, uint64_t seed) {
    if (!(init_range > 0)) throw ArgumentError("init_params: init_range must be positive");
    ModelParams model(cfg);
    Rng rng(seed);
    model.visit([&](const std::string&, Tensor& t, bool) {
        for (size_t i = 0; i < t.v.size(); ++i)
            t.v[i] = static_cast<real>(rng.uniform(-init_range, init_range));
    });
    return model;
}

Vocab build_kb_vocab(const std::vector<TripleSetExample>& corpus, int max_ids) {
    std::vector<TokenSeq> pseudo;
    pseudo.reserve(corpus.size());
    for (const auto& ex : corpus) {
        TokenSeq seq;
        for (const auto& t : ex.triples) {
            seq.push_back(Token::word(t.subject_id));
            seq.push_back(Token::word(t.property_id));
            seq.push_back(Token::word(t.object_id));
        }
        pseudo.push_back(std::move(seq));
    }
    return Vocab::build(pseudo, max_ids, 1);
}

EncodedExample encode_example(const TripleSetExample& ex, const Vocab& kb_vocab,
                              const Vocab& target_vocab, int r_max) {
    if (ex.triples.empty())
        throw ArgumentError("encode_example: " + ex.main_entity + " has no triples");

    std::vector<Triple> sorted = ex.triples;
    std::sort(sorted.begin(), sorted.end(), [](const Triple& a, const Triple& b) {
        return std::tie(a.property_id, a.object_id, a.subject_id) <
               std::tie(b.property_id, b.object_id, b.subject_id);
    });
    if (static_cast<int>(sorted.size()) > r_max) sorted.resize(static_cast<size_t>(r_max));

    EncodedExample out;
    out.id = ex.main_entity;
    for (const auto& t : sorted) {
        IndexTriple it;
        it.s = kb_vocab.encode_token(Token::word(t.subject_id));
        it.p = kb_vocab.encode_token(Token::word(t.property_id));
        it.o = kb_vocab.encode_token(Token::word(t.object_id));
        out.triples.push_back(it);
    }
    out.target = target_vocab.encode(ex.extended_summary);
    return out;
}

std::vector<EncodedExample> encode_corpus(const std::vector<TripleSetExample>& corpus,
                                          const Vocab& kb_vocab, const Vocab& target_vocab,
                                          int r_max) {
    std::vector<EncodedExample> out;
    out.reserve(corpus.size());
    for (const auto& ex : corpus) out.push_back(encode_example(ex, kb_vocab, target_vocab, r_max));
    return out;
}

BatchLoss batch_loss(ModelParams& model, const std::vector<EncodedExample>& batch,
                     real l2_coeff, NormMode mode) {
    if (batch.empty()) throw ArgumentError("batch_loss: empty batch");
    const bool training = mode == NormMode::train;
    if (training) model.zero_grad();

    std::vector<std::vector<IndexTriple>> sets;
    sets.reserve(batch.size());
    for (const auto& ex : batch) sets.push_back(ex.triples);

    EncoderCache enc_cache;
    Matrix h_fe = encoder_forward(model.enc, sets, mode, training ? &enc_cache : nullptr);

    BatchLoss loss;
    Matrix grad_h_fe(batch.size(), h_fe.cols());
    for (size_t b = 0; b < batch.size(); ++b) {
        const auto& target = batch[b].target;
        if (target.size() < 2) continue;  // nothing to score

        Vector h0(h_fe.cols());
        for (size_t j = 0; j < h0.size(); ++j) h0[j] = h_fe(b, j);
        DecoderState state = initial_state(model.dec, h0);

        const size_t steps = target.size() - 1;
        DecoderSequenceCache seq;
        std::vector<Vector> grad_logits(steps);
        if (training) seq.steps.resize(steps);

        for (size_t t = 0; t < steps; ++t) {
            Vector logits = decode_step(model.dec, state, target[t],
                                        training ? &seq.steps[t] : nullptr);
            const int gold = target[t + 1];
            if (gold == Vocab::kPad) continue;  // masked target position
            Vector logp = log_softmax(logits);
            loss.nll -= static_cast<double>(logp[static_cast<size_t>(gold)]);
            ++loss.tokens;
            if (training) {
                Vector& gl = grad_logits[t];
                gl.resize(logits.size());
                for (size_t i = 0; i < gl.size(); ++i) gl[i] = std::exp(logp[i]);
                gl[static_cast<size_t>(gold)] -= real(1);
            }
        }

        if (training) {
            Vector gh = decoder_backward(model.dec, seq, grad_logits);
            for (size_t j = 0; j < gh.size(); ++j) grad_h_fe(b, j) = gh[j];
        }
    }

    if (training) encoder_backward(model.enc, enc_cache, grad_h_fe);

    if (l2_coeff > 0) {
        model.visit([&](const std::string&, Tensor& t, bool is_weight) {
            if (!is_weight) return;
            double sq = 0;
            for (size_t i = 0; i < t.v.size(); ++i) {
                sq += static_cast<double>(t.v[i]) * static_cast<double>(t.v[i]);
                if (training) t.g[i] += real(2) * l2_coeff * t.v[i];
            }
            loss.l2 += static_cast<double>(l2_coeff) * sq;
        });
    }
    loss.total = loss.nll + loss.l2;
    return loss;
}

namespace {

struct ValidScore {
    double nll = 0;
    long tokens = 0;
};

ValidScore validate_nll(ModelParams& model, const std::vector<EncodedExample>& valid,
                        int batch_size) {
    ValidScore score;
    for (size_t start = 0; start < valid.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(valid.size(), start + static_cast<size_t>(batch_size));
        std::vector<EncodedExample> b(valid.begin() + static_cast<long>(start),
                                      valid.begin() + static_cast<long>(end));
        BatchLoss l = batch_loss(model, b, real(0), NormMode::eval);
        score.nll += l.nll;
        score.tokens += l.tokens;
    }
    return score;
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& valid_set, std::ostream* log) {
    cfg.validate();
    model_cfg.validate();
    if (train_set.empty()) throw ArgumentError("train: empty training corpus");
    if (valid_set.empty()) throw ArgumentError("train: empty validation corpus");

    ModelParams model = init_params(model_cfg, cfg.init_range, cfg.seed);
    std::map<std::string, AdamState> adam;

    TrainResult result;
    Rng rng(cfg.seed);
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int epochs_since_best = 0;
    long batches_done = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng epoch_rng = rng.derive(static_cast<uint64_t>(epoch));
        epoch_rng.shuffle(order);

        double epoch_nll = 0, epoch_l2 = 0;
        long epoch_tokens = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<EncodedExample> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

            BatchLoss l = batch_loss(model, batch, cfg.l2_coeff, NormMode::train);
            if (!std::isfinite(l.total)) {
                double max_grad = 0;
                model.visit([&](const std::string&, Tensor& t, bool) {
                    for (size_t i = 0; i < t.g.size(); ++i)
                        max_grad = std::max(max_grad, std::abs(static_cast<double>(t.g[i])));
                });
                std::string ids;
                for (const auto& ex : batch) ids += (ids.empty() ? "" : ", ") + ex.id;
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch [" + ids +
                                   "], max |grad| = " + std::to_string(max_grad));
            }
            epoch_nll += l.nll;
            epoch_l2 += l.l2;
            epoch_tokens += l.tokens;

            model.visit([&](const std::string& name, Tensor& t, bool) {
                auto& st = adam.try_emplace(name, t.v.rows(), t.v.cols()).first->second;
                adam_step(t.v, t.g, st, cfg.learning_rate, name);
            });
            model.visit_bn([&](const std::string& name, BatchNormState& s) {
                auto& gs = adam.try_emplace(name + ".gamma", s.gamma.rows(), s.gamma.cols())
                               .first->second;
                adam_step(s.gamma, s.gamma_grad, gs, cfg.learning_rate, name + ".gamma");
                auto& bs = adam.try_emplace(name + ".beta", s.beta.rows(), s.beta.cols())
                               .first->second;
                adam_step(s.beta, s.beta_grad, bs, cfg.learning_rate, name + ".beta");
            });

            ++batches_done;
            if (log && cfg.eval_every > 0 && batches_done % cfg.eval_every == 0) {
                ValidScore mid = validate_nll(model, valid_set, cfg.batch_size);
                ordered_json j;
                j["epoch"] = epoch;
                j["batch"] = batches_done;
                j["valid_nll"] = mid.nll;
                j["valid_nll_per_token"] = mid.tokens > 0 ? mid.nll / mid.tokens : 0;
                (*log) << j.dump() << "\n";
            }
        }

        ValidScore vs = validate_nll(model, valid_set, cfg.batch_size);
        const auto t1 = std::chrono::steady_clock::now();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_nll = epoch_nll;
        rec.train_l2 = epoch_l2;
        rec.train_total = epoch_nll + epoch_l2;
        rec.train_nll_per_token = epoch_tokens > 0 ? epoch_nll / epoch_tokens : 0;
        rec.valid_nll = vs.nll;
        rec.valid_nll_per_token = vs.tokens > 0 ? vs.nll / vs.tokens : 0;
        rec.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.history.push_back(rec);

        if (log) {
            ordered_json j;
            j["epoch"] = rec.epoch;
            j["train_nll"] = rec.train_nll;
            j["train_l2"] = rec.train_l2;
            j["train_total"] = rec.train_total;
            j["train_nll_per_token"] = rec.train_nll_per_token;
            j["valid_nll"] = rec.valid_nll;
            j["valid_nll_per_token"] = rec.valid_nll_per_token;
            j["seconds"] = rec.seconds;
            (*log) << j.dump() << "\n";
        }

        if (result.best_epoch < 0 || rec.valid_nll_per_token < result.best_valid_nll) {
            result.best_valid_nll = rec.valid_nll_per_token;
            result.best_epoch = epoch;
            result.best = model;
            result.adam = adam;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    return result;
}

}  // namespace kb2text
