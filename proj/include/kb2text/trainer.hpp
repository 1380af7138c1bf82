#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "kb2text/corpus.hpp"
#include "kb2text/model.hpp"
#include "kb2text/vocab.hpp"

namespace kb2text {

struct TrainConfig {
    int batch_size = 85;
    real learning_rate = real(1e-5);
    real l2_coeff = real(0.1);
    int max_epochs = 20;
    real init_range = real(0.001);
    uint64_t seed = 1;
    int eval_every = 0;  // batches between mid-epoch validation passes; 0 disables
    int early_stop_patience = 5;

    void validate() const;
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& s);
};

// Every trainable weight drawn from U(-init_range, +init_range); batch-norm
// gamma stays 1 and beta 0.
ModelParams init_params(const ModelConfig& cfg, real init_range, uint64_t seed);

// KB-side vocabulary over the entity/property ids occurring in the triples.
Vocab build_kb_vocab(const std::vector<TripleSetExample>& corpus, int max_ids);

struct EncodedExample {
    std::string id;                    // main entity, for diagnostics
    std::vector<IndexTriple> triples;  // canonical (property, object, subject) order
    std::vector<int> target;           // encoded extended summary, <start>...<end>
};

EncodedExample encode_example(const TripleSetExample& ex, const Vocab& kb_vocab,
                              const Vocab& target_vocab, int r_max);
std::vector<EncodedExample> encode_corpus(const std::vector<TripleSetExample>& corpus,
                                          const Vocab& kb_vocab, const Vocab& target_vocab,
                                          int r_max);

struct BatchLoss {
    double total = 0;  // nll + l2
    double nll = 0;    // summed over tokens
    double l2 = 0;
    long tokens = 0;
};

// Teacher-forced loss over a batch. Train mode accumulates gradients into the
// parameter buffers (zeroing them first) and includes the L2 term; eval mode
// leaves parameters and running statistics untouched.
BatchLoss batch_loss(ModelParams& model, const std::vector<EncodedExample>& batch,
                     real l2_coeff, NormMode mode);

struct EpochRecord {
    int epoch = 0;
    double train_nll = 0, train_l2 = 0, train_total = 0;
    double train_nll_per_token = 0;
    double valid_nll = 0, valid_nll_per_token = 0;
    double seconds = 0;
};

struct TrainResult {
    ModelParams best;
    std::map<std::string, AdamState> adam;
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_valid_nll = 0;  // per-token NLL of the best epoch
};

// Seeded shuffling per epoch, Adam updates per batch, per-epoch validation,
// early stopping on validation NLL. NaN loss aborts with the batch ids and
// the largest gradient magnitude in the diagnostic message. Optional log
// receives one JSON line per epoch.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& valid_set,
                  std::ostream* log = nullptr);

}  // namespace kb2text
