#ifndef PCRED_PIPELINE_H_
#define PCRED_PIPELINE_H_

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pcred/config.h"
#include "pcred/corpus.h"
#include "pcred/eval.h"
#include "pcred/model.h"
#include "pcred/tokenizer.h"

namespace pcred {

// Decoupled weight decay Adam. Decay skips vectors (biases, norms).
class AdamW {
 public:
  explicit AdamW(double weight_decay = 0.01, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);
  // Updates every trainable parameter that has a gradient.
  void step(nn::ParameterStore& store, double lr);
  long steps() const { return t_; }

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<ag::Matrix> m_, v_;
};

// Scales every trainable gradient so their joint L2 norm is at most
// max_norm. Returns the norm before clipping.
double clip_grad_norm(nn::ParameterStore& store, double max_norm);

// Stops once the score has not strictly improved for `patience`
// consecutive evaluations.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true when `score` is a new best.
  bool update(int epoch, double score);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_score_ = -1.0;
};

struct TrainData {
  std::vector<Instance> train;
  std::vector<RelationLabel> train_labels;
  std::vector<Instance> validation;
  std::vector<RelationLabel> validation_labels;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_score;
};

struct TrainResult {
  int best_epoch = 0;
  double best_score = -1.0;
  int epochs_run = 0;
  bool stopped_early = false;
  std::vector<EpochRecord> history;
};

struct EvaluationOutput {
  Predictions predictions;
  RelationSelections selections;
  ScoreReport report;
};

// Multi-triplet micro-F1 when the partition has multi-triplet sentences,
// otherwise single-triplet accuracy.
double validation_score(const ScoreReport& report);

// Runs selection, filtering, decoding and scoring over `instances` with
// every label of `labels` as a candidate.
EvaluationOutput evaluate(const Model& model, const Tokenizer& tokenizer,
                          std::span<const Instance> instances,
                          std::span<const RelationLabel> labels,
                          const RunConfig& config,
                          Rng* random_selector = nullptr);

using BestCallback = std::function<void(const Model&, const EpochRecord&)>;

// Mini-batch training with per-epoch candidate resampling, linear warm-up
// and decay, and early stopping on the validation score. `on_best` fires
// after every evaluation that sets a new best. Without validation data the
// loop runs all epochs and never evaluates.
TrainResult train(Model& model, const Tokenizer& tokenizer,
                  const TrainData& data, const RunConfig& config,
                  const BestCallback& on_best = {});

// Model shape implied by a run configuration and vocabulary size.
ModelConfig model_config_for(const RunConfig& config, int vocab_size);

// --- checkpoints ---
// Directory layout: weights.bin, model.json, vocab.txt, run.cfg, best.json.
struct BestRecord {
  int epoch = 0;
  double score = 0.0;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
};

struct Checkpoint {
  std::unique_ptr<Model> model;
  std::unique_ptr<WordPieceTokenizer> tokenizer;
  RunConfig config;
  BestRecord best;
};

void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const WordPieceTokenizer& tokenizer,
                     const RunConfig& config, const BestRecord& best);
// Throws LoadError when the stored run configuration disagrees with the
// stored model shape.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Tokenizer for a run: the configured vocabulary file, the pretrained
// directory's vocab.txt, or a whole-word vocabulary over the corpus.
std::unique_ptr<WordPieceTokenizer> make_tokenizer(const RunConfig& config,
                                                   const Corpus& corpus);

// Fresh model for a run; with encoder=pretrained, encoder weights are read
// from pretrained_dir.
std::unique_ptr<Model> make_model(const RunConfig& config,
                                  const WordPieceTokenizer& tokenizer);

// --- prediction files ---
// Sentences to tag: JSONL {"id": optional, "tokens": [...]}; ParseError
// with the line number on malformed lines.
std::vector<Instance> parse_sentences(std::istream& in);
std::vector<RelationLabel> load_labels(const std::filesystem::path& path);

// JSONL, one line per instance: {"id", "triplets": [{"head", "tail",
// "label", "score"}]} with head/tail as word index lists.
void write_predictions(std::ostream& out, std::span<const Instance> instances,
                       const Predictions& predictions);

// Attention maps of one instance as JSON.
std::string attention_json(const Instance& instance, const AugmentedGroup& group,
                           const Tokenizer& tokenizer,
                           std::span<const nn::AttentionRecord> records);

}  // namespace pcred

#endif  // PCRED_PIPELINE_H_
