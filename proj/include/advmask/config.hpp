#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace advmask::cli {

// Flat bag of every tunable the command-line tool accepts. Each subcommand
// reads the subset it needs and ignores the rest, so one config file can
// drive a whole pipeline run.
struct RunConfig {
  // Paths.
  std::string source_path;
  std::string target_path;
  std::string out_dir = ".";
  std::string checkpoint_path;       // input checkpoint for finetune / eval
  std::string vocab_path;            // input vocabulary for finetune / eval
  std::string metrics_path;          // analyze: metrics CSV under study
  std::string baseline_metrics_path; // analyze: comparison metrics CSV
  std::string stopwords_path;        // analyze: optional stopword list

  // Masking strategy and schedule.
  std::string strategy = "adv";
  double mask_ratio = 0.15;
  double beta = 0.3;
  double temperature = 1.0;
  double learning_rate = 5e-5;
  double generator_lr = 0.0;  // 0 follows learning_rate
  std::size_t batch_size = 32;
  std::size_t steps = 500;
  std::size_t task_epochs = 3;
  std::size_t mc_samples = 1;
  bool per_sentence_beta = false;
  bool head_only = false;

  // Encoder shape.
  std::size_t hidden_size = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  std::size_t ffn_size = 256;
  std::size_t max_seq_len = 128;
  double dropout = 0.1;

  // Selection network shape.
  std::size_t gen_hidden_size = 256;
  double gen_dropout = 0.1;

  std::size_t min_count = 1;

  // Synthetic corpus shape.
  std::size_t source_sentences = 2000;
  std::size_t target_sentences = 2000;
  std::size_t pool_sentences = 0;
  double shared_fraction = 0.3;
  double entity_span_rate = 0.35;
  std::size_t planted_tokens = 6;
  double planted_rate = 0.25;
  double planted_entity_rate = 0.5;

  // Subset sampler checks.
  std::size_t subset_n = 8;
  std::size_t subset_k = 3;
  std::size_t subset_draws = 200000;

  std::uint64_t seed = 1;
};

// Applies one key=value assignment. Unknown keys and unparsable values raise
// ConfigError naming the key.
void set_key(RunConfig& config, const std::string& key, const std::string& value);

// Reads key=value lines; '#' starts a comment, blank lines are skipped.
// Returned in file order. Missing file raises ConfigError.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

// Defaults, then file entries, then overrides, so later sources win.
RunConfig make_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

// Resolved snapshot of every field as JSON with sorted keys; equal configs
// produce identical bytes.
std::string config_json(const RunConfig& config);

}  // namespace advmask::cli
