#include "pcred/pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "pcred/errors.h"

namespace pcred {
namespace {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json history_json(const std::vector<EpochRecord>& history) {
  json out = json::array();
  for (const auto& r : history) {
    json e = {{"epoch", r.epoch}, {"train_loss", r.train_loss}};
    e["validation_score"] =
        r.validation_score ? json(*r.validation_score) : json(nullptr);
    out.push_back(e);
  }
  return out;
}

std::vector<std::string> kept_relations(const ModelOutput& out,
                                        std::span<const RelationLabel> cands) {
  std::vector<std::string> kept;
  for (int i : out.decision.kept_indices) kept.push_back(cands[i].text);
  return kept;
}

}  // namespace

AdamW::AdamW(double weight_decay, double beta1, double beta2, double eps)
    : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(nn::ParameterStore& store, double lr) {
  const auto& params = store.parameters();
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
      m_.push_back(ag::Matrix::Zero(p.var.value().rows(), p.var.value().cols()));
      v_.push_back(m_.back());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.trainable) continue;
    const ag::Matrix& g = p.var.grad();
    if (g.size() == 0) continue;
    ag::Var var = p.var;
    ag::Matrix& w = var.mutable_value();
    if (w.rows() > 1 && w.cols() > 1 && weight_decay_ > 0.0) {
      w *= 1.0 - lr * weight_decay_;
    }
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    w.array() -= lr * (m_[i].array() / c1) /
                 ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double clip_grad_norm(nn::ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& p : store.parameters()) {
    if (p.trainable && p.var.grad().size() > 0) sq += p.var.grad().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / (norm + 1e-6);
    for (const auto& p : store.parameters()) {
      if (!p.trainable || p.var.grad().size() == 0) continue;
      ag::Var var = p.var;
      var.mutable_grad() *= factor;
    }
  }
  return norm;
}

bool EarlyStopping::update(int epoch, double score) {
  if (best_epoch_ == 0 || score > best_score_) {
    best_score_ = score;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

double validation_score(const ScoreReport& report) {
  return report.multi_sentences > 0 ? report.f1 : report.acc;
}

EvaluationOutput evaluate(const Model& model, const Tokenizer& tokenizer,
                          std::span<const Instance> instances,
                          std::span<const RelationLabel> labels,
                          const RunConfig& config, Rng* random_selector) {
  const auto candidates = all_candidates(labels);
  const InferenceConfig inference{config.boundary_threshold,
                                  config.max_span_length};
  EvaluationOutput out;
  for (const auto& instance : instances) {
    const auto group =
        build_group(instance, candidates, tokenizer, config.max_seq_length);
    const auto result = model.predict(group, config.relation_threshold,
                                      inference, nullptr, random_selector);
    out.predictions[instance.id] = result.triplets;
    out.selections[instance.id] = kept_relations(result, candidates);
  }
  out.report = score_partition(out.predictions, instances);
  add_relation_scores(out.report, out.selections, instances);
  return out;
}

TrainResult train(Model& model, const Tokenizer& tokenizer,
                  const TrainData& data, const RunConfig& config,
                  const BestCallback& on_best) {
  config.validate();
  if (data.train.empty()) throw ConfigError("no training instances");
  Rng rng(config.seed);
  const long n = static_cast<long>(data.train.size());
  const long per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total = per_epoch * config.max_epochs;
  AdamW optimizer(config.weight_decay);
  EarlyStopping stopping(config.patience);
  TrainResult result;
  std::vector<std::size_t> order(data.train.size());
  long step = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (long b = 0; b < per_epoch; ++b) {
      const auto first = static_cast<std::size_t>(b * config.batch_size);
      const auto last = std::min(order.size(),
                                 first + static_cast<std::size_t>(config.batch_size));
      std::vector<const Instance*> batch;
      std::vector<AugmentedGroup> groups;
      for (std::size_t k = first; k < last; ++k) {
        const Instance& instance = data.train[order[k]];
        const auto candidates = sample_candidates(
            instance, data.train_labels, config.group_size, rng);
        groups.push_back(build_group(instance, candidates, tokenizer,
                                     config.max_seq_length));
        batch.push_back(&instance);
      }
      model.parameters().zero_grad();
      ag::Var loss = batch_loss(model, batch, groups, config.loss_weight,
                                config.null_weight);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) throw NumericError("non-finite training loss");
      ag::backward(loss);
      clip_grad_norm(model.parameters(), config.max_grad_norm);
      optimizer.step(model.parameters(),
                     config.learning_rate *
                         lr_multiplier(step, total, config.warmup_ratio));
      ++step;
      loss_sum += value;
    }
    model.parameters().zero_grad();

    EpochRecord record{epoch, loss_sum / static_cast<double>(per_epoch), {}};
    const bool evaluate_now =
        !data.validation.empty() &&
        (epoch % config.eval_every == 0 || epoch == config.max_epochs);
    bool improved = false;
    if (evaluate_now) {
      const auto eval = evaluate(model, tokenizer, data.validation,
                                 data.validation_labels, config);
      record.validation_score = validation_score(eval.report);
      improved = stopping.update(epoch, *record.validation_score);
    }
    result.history.push_back(record);
    result.epochs_run = epoch;
    spdlog::info("epoch {} loss {:.5f}{}", epoch, record.train_loss,
                 record.validation_score
                     ? fmt::format(" validation {:.4f}", *record.validation_score)
                     : std::string());
    if (improved && on_best) on_best(model, record);
    if (evaluate_now && stopping.should_stop()) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  result.best_epoch = stopping.best_epoch();
  result.best_score = stopping.best_score();
  return result;
}

ModelConfig model_config_for(const RunConfig& config, int vocab_size) {
  ModelConfig mc;
  mc.encoder.vocab_size = vocab_size;
  mc.encoder.hidden_size = config.hidden_size;
  mc.encoder.layers = config.layers;
  mc.encoder.heads = config.heads;
  mc.encoder.intermediate_size = config.intermediate_size;
  mc.encoder.max_positions = std::max(config.max_seq_length, 1);
  mc.encoder.freeze_word_embeddings = config.freeze_word_embeddings;
  mc.decoder.hidden_size = config.hidden_size;
  mc.decoder.max_triplets = config.max_triplets;
  mc.decoder.heads = config.decoder_heads;
  mc.init_seed = config.seed;
  mc.init_std = config.init_std;
  return mc;
}

std::unique_ptr<WordPieceTokenizer> make_tokenizer(const RunConfig& config,
                                                   const Corpus& corpus) {
  if (config.encoder == "pretrained") {
    return std::make_unique<WordPieceTokenizer>(
        Vocabulary::load(std::filesystem::path(config.pretrained_dir) /
                         "vocab.txt"),
        config.lowercase);
  }
  if (!config.vocab.empty()) {
    return std::make_unique<WordPieceTokenizer>(Vocabulary::load(config.vocab),
                                                config.lowercase);
  }
  std::vector<std::string> texts;
  for (const auto& instance : corpus.instances) {
    texts.insert(texts.end(), instance.words.begin(), instance.words.end());
  }
  for (const auto& label : corpus.labels.labels()) texts.push_back(label.text);
  return std::make_unique<WordPieceTokenizer>(
      build_vocabulary(texts, config.lowercase), config.lowercase);
}

std::unique_ptr<Model> make_model(const RunConfig& config,
                                  const WordPieceTokenizer& tokenizer) {
  if (config.encoder != "pretrained") {
    return std::make_unique<Model>(
        model_config_for(config, tokenizer.vocab_size()));
  }
  const std::filesystem::path dir(config.pretrained_dir);
  ModelConfig mc = ModelConfig::from_json(read_file(dir / "model.json"));
  if (mc.encoder.vocab_size != tokenizer.vocab_size()) {
    throw LoadError("pretrained vocabulary size does not match model.json");
  }
  mc.encoder.freeze_word_embeddings = config.freeze_word_embeddings;
  mc.decoder.hidden_size = mc.encoder.hidden_size;
  mc.decoder.max_triplets = config.max_triplets;
  mc.decoder.heads = config.decoder_heads;
  mc.init_seed = config.seed;
  mc.init_std = config.init_std;
  auto model = std::make_unique<Model>(mc);
  const auto n = model->parameters().load(dir / "weights.bin", false);
  spdlog::info("loaded {} pretrained tensors from {}", n, dir.string());
  return model;
}

void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const WordPieceTokenizer& tokenizer,
                     const RunConfig& config, const BestRecord& best) {
  std::filesystem::create_directories(dir);
  model.save(dir);
  tokenizer.vocabulary().save(dir / "vocab.txt");
  config.save(dir / "run.cfg");
  json b = {{"epoch", best.epoch},
            {"score", best.score},
            {"seed", best.seed},
            {"history", history_json(best.history)}};
  write_file(dir / "best.json", b.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw LoadError("checkpoint directory not found: " + dir.string());
  }
  Checkpoint ck;
  ck.config = RunConfig::load(dir / "run.cfg");
  ck.tokenizer = std::make_unique<WordPieceTokenizer>(
      Vocabulary::load(dir / "vocab.txt"), ck.config.lowercase);
  ck.model = Model::load(dir);
  const auto& mc = ck.model->config();
  if (mc.encoder.vocab_size != ck.tokenizer->vocab_size()) {
    throw LoadError("checkpoint vocabulary does not match model");
  }
  if (mc.decoder.max_triplets != ck.config.max_triplets ||
      mc.decoder.heads != ck.config.decoder_heads) {
    throw LoadError("checkpoint run.cfg does not match decoder shape");
  }
  if (ck.config.encoder != "pretrained" &&
      (mc.encoder.hidden_size != ck.config.hidden_size ||
       mc.encoder.layers != ck.config.layers ||
       mc.encoder.heads != ck.config.heads ||
       mc.encoder.intermediate_size != ck.config.intermediate_size)) {
    throw LoadError("checkpoint run.cfg does not match encoder shape");
  }
  if (mc.encoder.max_positions < ck.config.max_seq_length) {
    throw LoadError("checkpoint max_seq_length exceeds position table");
  }
  const auto best_path = dir / "best.json";
  if (std::filesystem::exists(best_path)) {
    try {
      const json b = json::parse(read_file(best_path));
      ck.best.epoch = b.at("epoch");
      ck.best.score = b.at("score");
      ck.best.seed = b.value("seed", std::uint64_t{0});
      for (const auto& e : b.value("history", json::array())) {
        EpochRecord r{e.at("epoch"), e.at("train_loss"), {}};
        if (!e.at("validation_score").is_null()) {
          r.validation_score = e.at("validation_score").get<double>();
        }
        ck.best.history.push_back(r);
      }
    } catch (const json::exception& e) {
      throw LoadError(std::string("bad best.json: ") + e.what());
    }
  }
  return ck;
}

std::vector<Instance> parse_sentences(std::istream& in) {
  std::vector<Instance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Instance instance;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw ParseError("expected a JSON object", line_no);
      instance.words = j.at("tokens").get<std::vector<std::string>>();
      instance.id = j.contains("id")
                        ? (j["id"].is_string() ? j["id"].get<std::string>()
                                               : j["id"].dump())
                        : std::to_string(line_no);
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (instance.words.empty()) throw ParseError("empty tokens", line_no);
    out.push_back(std::move(instance));
  }
  return out;
}

std::vector<RelationLabel> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LabelSet set;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    set.add(line.substr(b, e - b + 1));
  }
  if (set.empty()) throw InputError("no labels in " + path.string());
  return set.labels();
}

void write_predictions(std::ostream& out, std::span<const Instance> instances,
                       const Predictions& predictions) {
  auto indices = [](const WordSpan& s) {
    json a = json::array();
    for (int i = s.start; i <= s.end; ++i) a.push_back(i);
    return a;
  };
  for (const auto& instance : instances) {
    json line = {{"id", instance.id}, {"tokens", instance.words}};
    json triplets = json::array();
    if (auto it = predictions.find(instance.id); it != predictions.end()) {
      for (const auto& t : it->second) {
        triplets.push_back({{"head", indices(t.head)},
                            {"tail", indices(t.tail)},
                            {"label", t.relation.text},
                            {"score", t.score}});
      }
    }
    line["triplets"] = std::move(triplets);
    out << line.dump() << '\n';
  }
}

std::string attention_json(const Instance& instance, const AugmentedGroup& group,
                           const Tokenizer& tokenizer,
                           std::span<const nn::AttentionRecord> records) {
  json rows = json::array();
  for (int r = 0; r < group.size(); ++r) {
    json tokens = json::array();
    for (std::size_t p = 0; p < group.token_ids[r].size(); ++p) {
      if (!group.attention_mask[r][p]) break;
      tokens.push_back(tokenizer.token(group.token_ids[r][p]));
    }
    rows.push_back({{"relation", group.candidates[r].text}, {"tokens", tokens}});
  }
  json maps = json::array();
  for (const auto& rec : records) {
    json heads = json::array();
    for (const auto& m : rec.heads) {
      json rows_json = json::array();
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows_json.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
      }
      heads.push_back(std::move(rows_json));
    }
    maps.push_back({{"tag", rec.tag}, {"heads", std::move(heads)}});
  }
  json out = {{"id", instance.id},
              {"words", instance.words},
              {"rows", std::move(rows)},
              {"attention", std::move(maps)}};
  return out.dump() + "\n";
}

}  // namespace pcred
