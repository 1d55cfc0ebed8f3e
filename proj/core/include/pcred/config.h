#ifndef PCRED_CONFIG_H_
#define PCRED_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pcred {

// Every run hyperparameter. Defaults are the reference settings for FewRel;
// `apply_preset("wikizsl")` switches group size and max triplets to 6.
struct RunConfig {
  // data
  std::string corpus;
  std::string split_dir;
  std::string output_dir;
  int fold = 0;

  // optimisation
  int batch_size = 16;
  int max_epochs = 10;
  double learning_rate = 5e-5;
  double weight_decay = 0.01;
  double max_grad_norm = 1.0;  // global clipping; 0 disables
  double warmup_ratio = 0.2;
  int patience = 4;
  int eval_every = 1;
  std::uint64_t seed = 42;

  // model
  std::string encoder = "tiny";  // tiny | pretrained
  std::string pretrained_dir;    // checkpoint directory for `pretrained`
  std::string vocab;             // vocabulary file; built from data if empty
  bool lowercase = true;
  int hidden_size = 16;
  int layers = 2;
  int heads = 2;
  int intermediate_size = 64;
  int decoder_heads = 2;
  double init_std = 0.02;
  bool freeze_word_embeddings = false;
  std::string device = "cpu";

  // selection, decoding and loss
  int max_seq_length = 100;
  int max_span_length = 15;
  double relation_threshold = 0.5;
  double boundary_threshold = 0.4;
  int group_size = 5;
  int max_triplets = 4;
  double loss_weight = 1.0;
  double null_weight = 1.0;

  // Sets one key from its text value; ConfigError on unknown keys or bad
  // values.
  void set(std::string_view key, std::string_view value);
  // "key=value"
  void apply_override(std::string_view assignment);
  void apply_preset(std::string_view dataset);
  // Range checks on every field.
  void validate() const;

  // Flat "key = value" text, one line per key, keys sorted.
  std::string to_text() const;
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static std::vector<std::string> keys();
};

// Learning-rate multiplier for linear warm-up over warmup_ratio of the steps
// followed by linear decay to zero.
double lr_multiplier(long step, long total_steps, double warmup_ratio);

}  // namespace pcred

#endif  // PCRED_CONFIG_H_
