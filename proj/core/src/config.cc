#include "pcred/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pcred/errors.h"

namespace pcred {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const std::string s = trim(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("invalid value '" + s + "' for " + std::string(key));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("invalid boolean '" + s + "' for " + std::string(key));
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Field {
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(T RunConfig::*member) {
  Field f;
  f.set = [member](RunConfig& c, std::string_view key, std::string_view v) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*member = trim(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*member = parse_bool(key, v);
    } else {
      c.*member = parse_number<T>(key, v);
    }
  };
  f.get = [member](const RunConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*member;
    } else if constexpr (std::is_same_v<T, bool>) {
      return c.*member ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_double(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  return f;
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const auto* table = new std::map<std::string, Field, std::less<>>{
      {"corpus", field(&RunConfig::corpus)},
      {"split_dir", field(&RunConfig::split_dir)},
      {"output_dir", field(&RunConfig::output_dir)},
      {"fold", field(&RunConfig::fold)},
      {"batch_size", field(&RunConfig::batch_size)},
      {"max_epochs", field(&RunConfig::max_epochs)},
      {"learning_rate", field(&RunConfig::learning_rate)},
      {"weight_decay", field(&RunConfig::weight_decay)},
      {"warmup_ratio", field(&RunConfig::warmup_ratio)},
      {"patience", field(&RunConfig::patience)},
      {"eval_every", field(&RunConfig::eval_every)},
      {"seed", field(&RunConfig::seed)},
      {"encoder", field(&RunConfig::encoder)},
      {"pretrained_dir", field(&RunConfig::pretrained_dir)},
      {"vocab", field(&RunConfig::vocab)},
      {"lowercase", field(&RunConfig::lowercase)},
      {"hidden_size", field(&RunConfig::hidden_size)},
      {"layers", field(&RunConfig::layers)},
      {"heads", field(&RunConfig::heads)},
      {"intermediate_size", field(&RunConfig::intermediate_size)},
      {"decoder_heads", field(&RunConfig::decoder_heads)},
      {"init_std", field(&RunConfig::init_std)},
      {"freeze_word_embeddings", field(&RunConfig::freeze_word_embeddings)},
      {"device", field(&RunConfig::device)},
      {"max_seq_length", field(&RunConfig::max_seq_length)},
      {"max_span_length", field(&RunConfig::max_span_length)},
      {"relation_threshold", field(&RunConfig::relation_threshold)},
      {"boundary_threshold", field(&RunConfig::boundary_threshold)},
      {"group_size", field(&RunConfig::group_size)},
      {"max_triplets", field(&RunConfig::max_triplets)},
      {"loss_weight", field(&RunConfig::loss_weight)},
      {"null_weight", field(&RunConfig::null_weight)},
      {"max_grad_norm", field(&RunConfig::max_grad_norm)},
  };
  return *table;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "preset") {
    apply_preset(trim(value));
    return;
  }
  auto it = fields().find(key);
  if (it == fields().end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  it->second.set(*this, key, value);
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) +
                      "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::apply_preset(std::string_view dataset) {
  if (dataset == "fewrel") {
    group_size = 5;
    max_triplets = 4;
  } else if (dataset == "wikizsl" || dataset == "wiki-zsl") {
    group_size = 6;
    max_triplets = 6;
  } else {
    throw ConfigError("unknown dataset preset '" + std::string(dataset) + "'");
  }
}

void RunConfig::validate() const {
  auto unit = [](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string(name) + " must lie in [0, 1]");
    }
  };
  auto positive = [](const char* name, long v) {
    if (v < 1) throw ConfigError(std::string(name) + " must be positive");
  };
  unit("relation_threshold", relation_threshold);
  unit("boundary_threshold", boundary_threshold);
  unit("warmup_ratio", warmup_ratio);
  unit("loss_weight", loss_weight);
  positive("batch_size", batch_size);
  positive("max_epochs", max_epochs);
  positive("patience", patience);
  positive("eval_every", eval_every);
  positive("max_seq_length", max_seq_length);
  positive("max_span_length", max_span_length);
  positive("group_size", group_size);
  positive("max_triplets", max_triplets);
  positive("hidden_size", hidden_size);
  positive("heads", heads);
  positive("decoder_heads", decoder_heads);
  positive("intermediate_size", intermediate_size);
  if (layers < 0) throw ConfigError("layers must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (null_weight < 0.0) throw ConfigError("null_weight must be >= 0");
  if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be >= 0");
  if (fold < 0) throw ConfigError("fold must be non-negative");
  if (encoder != "tiny" && encoder != "pretrained") {
    throw ConfigError("encoder must be 'tiny' or 'pretrained'");
  }
  if (encoder == "pretrained" && pretrained_dir.empty()) {
    throw ConfigError("encoder=pretrained needs pretrained_dir");
  }
  if (device != "cpu") {
    throw ConfigError("device '" + device + "' unavailable; only cpu is built");
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, f] : fields()) {
    out += key + " = " + f.get(*this) + "\n";
  }
  return out;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) +
                        ": expected key = value");
    }
    config.set(trim(std::string_view(line).substr(0, eq)),
               std::string_view(line).substr(eq + 1));
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text();
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, f] : fields()) out.push_back(key);
  return out;
}

double lr_multiplier(long step, long total_steps, double warmup_ratio) {
  if (total_steps <= 0) return 0.0;
  const double warmup = warmup_ratio * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s < warmup) return s / warmup;
  const double remaining = static_cast<double>(total_steps) - warmup;
  if (remaining <= 0.0) return 0.0;
  return std::max(0.0, (static_cast<double>(total_steps) - s) / remaining);
}

}  // namespace pcred
