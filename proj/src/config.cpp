#include "advmask/config.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "advmask/errors.hpp"
#include "json.hpp"

namespace advmask::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t consumed = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &consumed);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  if (consumed != value.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return parsed;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + value +
                      "'");
  }
  std::size_t consumed = 0;
  unsigned long long parsed = 0;
  try {
    parsed = std::stoull(value, &consumed);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + value +
                      "'");
  }
  if (consumed != value.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + value +
                      "'");
  }
  return parsed;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace

void set_key(RunConfig& config, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  auto str = [](std::string RunConfig::* field) {
    return Setter([field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; });
  };
  auto num = [](double RunConfig::* field) {
    return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
      c.*field = parse_double(k, v);
    });
  };
  auto size = [](std::size_t RunConfig::* field) {
    return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
      c.*field = static_cast<std::size_t>(parse_unsigned(k, v));
    });
  };
  auto flag = [](bool RunConfig::* field) {
    return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
      c.*field = parse_bool(k, v);
    });
  };

  static const std::map<std::string, Setter> kSetters = {
      {"source", str(&RunConfig::source_path)},
      {"target", str(&RunConfig::target_path)},
      {"out_dir", str(&RunConfig::out_dir)},
      {"checkpoint", str(&RunConfig::checkpoint_path)},
      {"vocab", str(&RunConfig::vocab_path)},
      {"metrics", str(&RunConfig::metrics_path)},
      {"baseline_metrics", str(&RunConfig::baseline_metrics_path)},
      {"stopwords", str(&RunConfig::stopwords_path)},
      {"strategy", str(&RunConfig::strategy)},
      {"mask_ratio", num(&RunConfig::mask_ratio)},
      {"beta", num(&RunConfig::beta)},
      {"temperature", num(&RunConfig::temperature)},
      {"lr", num(&RunConfig::learning_rate)},
      {"generator_lr", num(&RunConfig::generator_lr)},
      {"batch_size", size(&RunConfig::batch_size)},
      {"steps", size(&RunConfig::steps)},
      {"task_epochs", size(&RunConfig::task_epochs)},
      {"mc_samples", size(&RunConfig::mc_samples)},
      {"per_sentence_beta", flag(&RunConfig::per_sentence_beta)},
      {"head_only", flag(&RunConfig::head_only)},
      {"hidden_size", size(&RunConfig::hidden_size)},
      {"num_layers", size(&RunConfig::num_layers)},
      {"num_heads", size(&RunConfig::num_heads)},
      {"ffn_size", size(&RunConfig::ffn_size)},
      {"max_seq_len", size(&RunConfig::max_seq_len)},
      {"dropout", num(&RunConfig::dropout)},
      {"gen_hidden_size", size(&RunConfig::gen_hidden_size)},
      {"gen_dropout", num(&RunConfig::gen_dropout)},
      {"min_count", size(&RunConfig::min_count)},
      {"source_sentences", size(&RunConfig::source_sentences)},
      {"target_sentences", size(&RunConfig::target_sentences)},
      {"pool_sentences", size(&RunConfig::pool_sentences)},
      {"shared_fraction", num(&RunConfig::shared_fraction)},
      {"entity_span_rate", num(&RunConfig::entity_span_rate)},
      {"planted_tokens", size(&RunConfig::planted_tokens)},
      {"planted_rate", num(&RunConfig::planted_rate)},
      {"planted_entity_rate", num(&RunConfig::planted_entity_rate)},
      {"subset_n", size(&RunConfig::subset_n)},
      {"subset_k", size(&RunConfig::subset_k)},
      {"subset_draws", size(&RunConfig::subset_draws)},
      {"seed",
       Setter([](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = parse_unsigned(k, v);
       })},
  };

  auto it = kSetters.find(key);
  if (it == kSetters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(config, key, value);
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_number) +
                        ": expected key=value, got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_number) + ": empty key");
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

RunConfig make_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig config;
  for (const auto& [key, value] : file_entries) set_key(config, key, value);
  for (const auto& [key, value] : overrides) set_key(config, key, value);
  return config;
}

std::string config_json(const RunConfig& c) {
  nlohmann::json j;
  j["source"] = c.source_path;
  j["target"] = c.target_path;
  j["out_dir"] = c.out_dir;
  j["checkpoint"] = c.checkpoint_path;
  j["vocab"] = c.vocab_path;
  j["metrics"] = c.metrics_path;
  j["baseline_metrics"] = c.baseline_metrics_path;
  j["stopwords"] = c.stopwords_path;
  j["strategy"] = c.strategy;
  j["mask_ratio"] = c.mask_ratio;
  j["beta"] = c.beta;
  j["temperature"] = c.temperature;
  j["lr"] = c.learning_rate;
  j["generator_lr"] = c.generator_lr;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["task_epochs"] = c.task_epochs;
  j["mc_samples"] = c.mc_samples;
  j["per_sentence_beta"] = c.per_sentence_beta;
  j["head_only"] = c.head_only;
  j["hidden_size"] = c.hidden_size;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["ffn_size"] = c.ffn_size;
  j["max_seq_len"] = c.max_seq_len;
  j["dropout"] = c.dropout;
  j["gen_hidden_size"] = c.gen_hidden_size;
  j["gen_dropout"] = c.gen_dropout;
  j["min_count"] = c.min_count;
  j["source_sentences"] = c.source_sentences;
  j["target_sentences"] = c.target_sentences;
  j["pool_sentences"] = c.pool_sentences;
  j["shared_fraction"] = c.shared_fraction;
  j["entity_span_rate"] = c.entity_span_rate;
  j["planted_tokens"] = c.planted_tokens;
  j["planted_rate"] = c.planted_rate;
  j["planted_entity_rate"] = c.planted_entity_rate;
  j["subset_n"] = c.subset_n;
  j["subset_k"] = c.subset_k;
  j["subset_draws"] = c.subset_draws;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

}  // namespace advmask::cli
