#include "advmask/commands.hpp"

#include <algorithm>
#include <memory>
#include <tuple>
#include <unordered_set>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "advmask/adversarial.hpp"
#include "advmask/checkpoint.hpp"
#include "advmask/corpus.hpp"
#include "advmask/errors.hpp"
#include "advmask/generator.hpp"
#include "advmask/masking.hpp"
#include "advmask/mlm.hpp"
#include "advmask/rng.hpp"
#include "advmask/stats.hpp"
#include "advmask/subset.hpp"
#include "advmask/task_eval.hpp"
#include "json.hpp"

namespace advmask::cli {

namespace fs = std::filesystem;

namespace {

void require_key(const std::string& value, const std::string& key, const std::string& command) {
  if (value.empty()) throw ConfigError(command + " requires " + key + "=<path>");
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw DataError(what + " not found: " + path);
}

fs::path ensure_out_dir(const RunConfig& config) {
  fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::vector<corpus::TokenSequence> load_corpus(const std::string& path, const std::string& what) {
  require_file(path, what);
  std::vector<corpus::TokenSequence> corpus_data = corpus::read_jsonl(path);
  if (corpus_data.empty()) throw DataError(what + " is empty: " + path);
  for (std::size_t i = 0; i < corpus_data.size(); ++i) {
    if (corpus_data[i].tokens.empty()) {
      throw DataError(what + ": sentence " + std::to_string(i + 1) + " has no tokens (" + path +
                      ")");
    }
  }
  return corpus_data;
}

void truncate_corpus(std::vector<corpus::TokenSequence>& corpus_data, std::size_t max_len) {
  for (corpus::TokenSequence& seq : corpus_data) {
    if (seq.size() <= max_len) continue;
    seq.tokens.resize(max_len);
    if (!seq.ids.empty()) seq.ids.resize(max_len);
    if (!seq.tags.empty()) seq.tags.resize(max_len);
    if (!seq.labels.empty()) seq.labels.resize(max_len);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

mlm::MlmConfig model_config(const RunConfig& config, std::size_t vocab_size) {
  mlm::MlmConfig mc;
  mc.vocab_size = vocab_size;
  mc.hidden_size = config.hidden_size;
  mc.num_layers = config.num_layers;
  mc.num_heads = config.num_heads;
  mc.ffn_size = config.ffn_size;
  mc.max_seq_len = config.max_seq_len;
  mc.dropout = config.dropout;
  return mc;
}

// Metrics CSV rows keyed by the fixed version-1 header.
std::vector<std::vector<double>> read_metrics_rows(const std::string& path) {
  require_file(path, "metrics file");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("metrics file is empty: " + path);
  if (line == std::string(adversarial::kMetricsCsvHeader) + "\r") line.pop_back();
  if (line != adversarial::kMetricsCsvHeader) {
    throw DataError("unrecognized metrics header in " + path + ": '" + line + "'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t consumed = 0;
        row.push_back(std::stod(cell, &consumed));
        if (consumed != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_number) + ": bad cell '" + cell + "'");
      }
    }
    if (row.size() != 7) {
      throw DataError(path + ":" + std::to_string(line_number) + ": expected 7 columns, got " +
                      std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("metrics file has no rows: " + path);
  return rows;
}

double column_mean(const std::vector<std::vector<double>>& rows, std::size_t col) {
  double sum = 0.0;
  for (const auto& row : rows) sum += row[col];
  return sum / static_cast<double>(rows.size());
}

std::uint64_t subset_mask(std::span<const std::size_t> indices) {
  std::uint64_t mask = 0;
  for (std::size_t i : indices) mask |= (std::uint64_t{1} << i);
  return mask;
}

}  // namespace

// ---------------------------------------------------------------------------
// gen-data

int cmd_gen_data(const RunConfig& config) {
  corpus::SyntheticConfig sc;
  sc.source_sentences = config.source_sentences;
  sc.target_sentences = config.target_sentences;
  sc.pool_sentences = config.pool_sentences;
  sc.shared_fraction = config.shared_fraction;
  sc.entity_span_rate = config.entity_span_rate;
  sc.planted_tokens = config.planted_tokens;
  sc.planted_rate = config.planted_rate;
  sc.planted_entity_rate = config.planted_entity_rate;
  sc.validate();

  fs::path dir = ensure_out_dir(config);
  RngStream rng(config.seed, "data");
  corpus::SyntheticCorpora corpora = corpus::generate_synthetic_shift(sc, rng);

  corpus::write_jsonl((dir / "source.jsonl").string(), corpora.source);
  corpus::write_jsonl((dir / "target.jsonl").string(), corpora.target);
  if (!corpora.pool.empty()) corpus::write_jsonl((dir / "pool.jsonl").string(), corpora.pool);

  nlohmann::json manifest;
  manifest["seed"] = config.seed;
  manifest["source_sentences"] = corpora.source.size();
  manifest["target_sentences"] = corpora.target.size();
  manifest["pool_sentences"] = corpora.pool.size();
  manifest["shared_fraction"] = sc.shared_fraction;
  manifest["entity_span_rate"] = sc.entity_span_rate;
  manifest["planted_tokens"] = corpora.planted;
  manifest["planted_rate"] = sc.planted_rate;
  manifest["planted_entity_rate"] = sc.planted_entity_rate;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "wrote " << corpora.source.size() << " source and " << corpora.target.size()
            << " target sentences to " << dir.string() << "\n";
  if (!corpora.pool.empty()) std::cout << "wrote " << corpora.pool.size() << " pool sentences\n";
  return 0;
}

// ---------------------------------------------------------------------------
// domain-tune

int cmd_domain_tune(const RunConfig& config) {
  require_key(config.source_path, "source", "domain-tune");
  require_key(config.target_path, "target", "domain-tune");
  masking::Strategy strategy = masking::parse_strategy(config.strategy);

  std::vector<corpus::TokenSequence> source = load_corpus(config.source_path, "source corpus");
  std::vector<corpus::TokenSequence> target = load_corpus(config.target_path, "target corpus");

  std::vector<corpus::TokenSequence> all;
  all.reserve(source.size() + target.size());
  all.insert(all.end(), source.begin(), source.end());
  all.insert(all.end(), target.begin(), target.end());
  corpus::Vocabulary vocab = corpus::Vocabulary::build(all, config.min_count);

  corpus::apply_vocab(source, vocab);
  corpus::apply_vocab(target, vocab);
  truncate_corpus(source, config.max_seq_len);
  truncate_corpus(target, config.max_seq_len);

  // Balanced epoch template: the smaller corpus is oversampled once up
  // front, then the trainer reshuffles this fixed mixture every epoch.
  RngStream mix_rng(config.seed, "mix");
  std::vector<corpus::TokenSequence> mixture;
  for (const corpus::TokenSequence* seq : corpus::mix_domains(source, target, mix_rng)) {
    mixture.push_back(*seq);
  }

  corpus::UnigramLM source_lm(source, vocab.size());
  corpus::UnigramLM target_lm(target, vocab.size());

  RngStream init_rng(config.seed, "init");
  mlm::MlmModel model(model_config(config, vocab.size()), init_rng);

  std::unique_ptr<adversarial::PuzzleGenerator> generator;
  if (strategy.needs_generator()) {
    adversarial::GeneratorConfig gc;
    gc.input_size = config.hidden_size;
    gc.hidden_size = config.gen_hidden_size;
    gc.dropout = config.gen_dropout;
    RngStream gen_rng(config.seed, "gen_init");
    generator = std::make_unique<adversarial::PuzzleGenerator>(gc, gen_rng);
  }

  adversarial::AdversarialConfig ac;
  ac.beta = config.beta;
  ac.mask_ratio = config.mask_ratio;
  ac.mc_samples = config.mc_samples;
  ac.temperature = config.temperature;
  ac.model_lr = config.learning_rate;
  ac.generator_lr = config.generator_lr > 0.0 ? config.generator_lr : config.learning_rate;
  ac.batch_size = config.batch_size;
  ac.max_steps = config.steps;
  ac.per_sentence_beta = config.per_sentence_beta;

  adversarial::TrainResult result = adversarial::train_adversarial(mixture, model, generator.get(), strategy, ac,
                                                 &source_lm, &target_lm, config.seed);

  fs::path dir = ensure_out_dir(config);
  corpus::save_vocab((dir / "vocab.txt").string(), vocab);
  nd::save_checkpoint((dir / "model.ckpt").string(), model.named_parameters());
  if (generator) {
    nd::save_checkpoint((dir / "generator.ckpt").string(), generator->named_parameters());
  }
  adversarial::write_metrics_csv((dir / "metrics.csv").string(), result.metrics);

  nlohmann::json run = nlohmann::json::parse(config_json(config));
  run["resolved"] = {{"vocab_size", vocab.size()},
                     {"strategy", masking::strategy_name(strategy)},
                     {"mixture_sentences", mixture.size()},
                     {"generator_updates", result.generator_updates}};
  write_text(dir / "run.json", run.dump(2) + "\n");

  const adversarial::StepMetrics& last = result.metrics.back();
  std::cout << "domain-tune finished: " << result.metrics.size() << " steps, final loss "
            << last.mlm_loss << ", " << result.generator_updates << " generator updates\n";
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// finetune

int cmd_finetune(const RunConfig& config) {
  require_key(config.source_path, "source", "finetune");
  require_key(config.checkpoint_path, "checkpoint", "finetune");
  require_key(config.vocab_path, "vocab", "finetune");

  require_file(config.vocab_path, "vocabulary");
  corpus::Vocabulary vocab = corpus::load_vocab(config.vocab_path);
  std::vector<corpus::TokenSequence> corpus_data = load_corpus(config.source_path, "task corpus");
  corpus::apply_vocab(corpus_data, vocab);
  truncate_corpus(corpus_data, config.max_seq_len);

  RngStream init_rng(config.seed, "init");
  mlm::MlmModel model(model_config(config, vocab.size()), init_rng);
  require_file(config.checkpoint_path, "checkpoint");
  nd::load_checkpoint_into(config.checkpoint_path, model.named_parameters());

  RngStream head_rng(config.seed, "head_init");
  task_eval::TaggerHead head(config.hidden_size, head_rng);

  task_eval::FinetuneConfig fc;
  fc.epochs = config.task_epochs;
  fc.batch_size = config.batch_size;
  fc.learning_rate = config.learning_rate;
  fc.full_model = !config.head_only;
  task_eval::FinetuneResult result = task_eval::finetune_task(model, head, corpus_data, fc, config.seed);

  fs::path dir = ensure_out_dir(config);
  std::vector<std::pair<std::string, nd::NodePtr>> params = model.named_parameters();
  for (auto& entry : head.named_parameters()) params.push_back(entry);
  nd::save_checkpoint((dir / "task.ckpt").string(), params);

  nlohmann::json summary = nlohmann::json::parse(config_json(config));
  summary["resolved"] = {{"vocab_size", vocab.size()}, {"epoch_losses", result.epoch_losses}};
  write_text(dir / "task.json", summary.dump(2) + "\n");

  std::cout << "finetune finished: " << result.epoch_losses.size() << " epochs";
  if (!result.epoch_losses.empty()) std::cout << ", final loss " << result.epoch_losses.back();
  std::cout << "\nartifacts in " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const RunConfig& config) {
  require_key(config.target_path, "target", "eval");
  require_key(config.source_path, "source", "eval");
  require_key(config.checkpoint_path, "checkpoint", "eval");
  require_key(config.vocab_path, "vocab", "eval");

  require_file(config.vocab_path, "vocabulary");
  corpus::Vocabulary vocab = corpus::load_vocab(config.vocab_path);
  std::vector<corpus::TokenSequence> target = load_corpus(config.target_path, "eval corpus");
  truncate_corpus(target, config.max_seq_len);

  // OOV status is judged against the surface forms of the task training set.
  std::vector<corpus::TokenSequence> source = load_corpus(config.source_path, "task corpus");
  corpus::Vocabulary source_vocab = corpus::Vocabulary::build(source);

  RngStream init_rng(config.seed, "init");
  mlm::MlmModel model(model_config(config, vocab.size()), init_rng);
  RngStream head_rng(config.seed, "head_init");
  task_eval::TaggerHead head(config.hidden_size, head_rng);
  std::vector<std::pair<std::string, nd::NodePtr>> params = model.named_parameters();
  for (auto& entry : head.named_parameters()) params.push_back(entry);
  require_file(config.checkpoint_path, "checkpoint");
  nd::load_checkpoint_into(config.checkpoint_path, params);

  std::vector<task_eval::TokenPrediction> predictions = task_eval::predict(model, head, target, vocab);
  task_eval::EvalReport report = task_eval::score_predictions(predictions, source_vocab);

  fs::path dir = ensure_out_dir(config);
  task_eval::write_predictions((dir / "predictions.txt").string(), predictions);
  write_text(dir / "report.json", task_eval::report_json(report));

  std::cout << task_eval::report_table(report);
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

AnalyzeResult analyze_runs(const RunConfig& config) {
  AnalyzeResult result;
  bool any = false;

  if (!config.metrics_path.empty() || !config.baseline_metrics_path.empty()) {
    require_key(config.metrics_path, "metrics", "analyze");
    require_key(config.baseline_metrics_path, "baseline_metrics", "analyze");
    auto rows = read_metrics_rows(config.metrics_path);
    auto baseline = read_metrics_rows(config.baseline_metrics_path);
    result.has_metrics = true;
    result.metrics_density_mean = column_mean(rows, 6);
    result.baseline_density_mean = column_mean(baseline, 6);
    result.density_gap = result.metrics_density_mean - result.baseline_density_mean;
    result.metrics_final_loss = rows.back()[1];
    result.baseline_final_loss = baseline.back()[1];
    any = true;
  }

  if (!config.source_path.empty() || !config.target_path.empty()) {
    require_key(config.source_path, "source", "analyze");
    require_key(config.target_path, "target", "analyze");
    std::vector<corpus::TokenSequence> source = load_corpus(config.source_path, "source corpus");
    std::vector<corpus::TokenSequence> target = load_corpus(config.target_path, "target corpus");

    std::unordered_set<std::string> stopwords;
    if (!config.stopwords_path.empty()) {
      require_file(config.stopwords_path, "stopword list");
      stopwords = corpus::load_stopwords(config.stopwords_path);
    }
    result.overlap_percent = corpus::vocab_overlap(source, target, stopwords);

    std::vector<corpus::TokenSequence> all;
    all.reserve(source.size() + target.size());
    all.insert(all.end(), source.begin(), source.end());
    all.insert(all.end(), target.begin(), target.end());
    corpus::Vocabulary vocab = corpus::Vocabulary::build(all);
    corpus::apply_vocab(source, vocab);
    corpus::apply_vocab(target, vocab);
    corpus::UnigramLM source_lm(source, vocab.size());
    corpus::UnigramLM target_lm(target, vocab.size());
    double sum = 0.0;
    std::size_t count = 0;
    for (const corpus::TokenSequence& seq : target) {
      for (std::size_t id : seq.ids) {
        sum += corpus::density_ratio(source_lm, target_lm, id);
        ++count;
      }
    }
    result.target_shift_mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    result.has_corpus = true;
    any = true;
  }

  if (!any) {
    throw ConfigError(
        "analyze needs metrics= and baseline_metrics= (run comparison) or source= and target= "
        "(corpus comparison)");
  }
  return result;
}

int cmd_analyze(const RunConfig& config) {
  AnalyzeResult result = analyze_runs(config);
  std::cout.precision(6);
  if (result.has_metrics) {
    std::cout << "masked-token density ratio: run " << result.metrics_density_mean
              << ", baseline " << result.baseline_density_mean << ", gap " << result.density_gap
              << (result.density_gap > 0.0 ? " (run masks more target-shifted tokens)\n" : "\n");
    std::cout << "final loss: run " << result.metrics_final_loss << ", baseline "
              << result.baseline_final_loss << "\n";
  }
  if (result.has_corpus) {
    std::cout << "vocabulary overlap: " << result.overlap_percent << "%\n";
    std::cout << "mean target-token density ratio: " << result.target_shift_mean << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sample-subsets

std::vector<CheckResult> run_subset_checks(const RunConfig& config) {
  const std::size_t n = config.subset_n;
  const std::size_t k = config.subset_k;
  const std::size_t draws = config.subset_draws;
  if (n == 0 || k == 0 || k > n) throw ConfigError("subset checks need 1 <= subset_k <= subset_n");
  if (n > 20) throw ConfigError("subset checks enumerate the support; subset_n must be <= 20");
  if (draws < 1000) throw ConfigError("subset_draws must be at least 1000");

  RngStream pi_rng(config.seed, "pi");
  std::vector<double> pi(n);
  for (double& p : pi) p = pi_rng.uniform(0.05, 0.95);
  subset::SelectionProbs probs(pi);
  subset::SubsetDistribution dist(probs, k);
  auto support = subset::enumerate_support(probs, k);

  std::vector<CheckResult> checks;

  {
    // Partition function against a direct product sum over the support.
    double direct = 0.0;
    for (const auto& [indices, ignored] : support) {
      (void)ignored;
      std::vector<bool> in(n, false);
      for (std::size_t i : indices) in[i] = true;
      double product = 1.0;
      for (std::size_t i = 0; i < n; ++i) product *= in[i] ? probs[i] : 1.0 - probs[i];
      direct += product;
    }
    double dp = std::exp(dist.log_partition());
    double rel = std::abs(dp - direct) / direct;
    checks.push_back({"partition_vs_enumeration", rel <= 1e-10, rel, 1e-10});
  }

  {
    // log q(S) equals the sum of sequential step log-probabilities.
    RngStream rng(config.seed, "chain");
    std::size_t chain_draws = std::min<std::size_t>(10000, draws);
    double worst = 0.0;
    for (std::size_t d = 0; d < chain_draws; ++d) {
      subset::SampledSubset s = subset::sample_hard(dist, rng);
      std::vector<bool> in(n, false);
      for (std::size_t i : s.indices) in[i] = true;
      double chain = 0.0;
      std::size_t chosen = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double step = dist.step_probability(i, chosen);
        chain += in[i] ? std::log(step) : std::log1p(-step);
        if (in[i]) ++chosen;
      }
      worst = std::max(worst, std::abs(chain - dist.log_prob(s.indices)));
    }
    checks.push_back({"chain_identity", worst <= 1e-8, worst, 1e-8});
  }

  std::unordered_map<std::uint64_t, double> exact;
  for (const auto& [indices, prob] : support) exact[subset_mask(indices)] = prob;

  auto empirical_tv = [&](const char* stream, bool relaxed) {
    RngStream rng(config.seed, stream);
    std::unordered_map<std::uint64_t, std::size_t> counts;
    std::vector<std::size_t> position_counts(n, 0);
    for (std::size_t d = 0; d < draws; ++d) {
      subset::SampledSubset s = relaxed ? subset::sample_relaxed(dist, 0.7, rng)
                                        : subset::sample_hard(dist, rng);
      ++counts[subset_mask(s.indices)];
      for (std::size_t i : s.indices) ++position_counts[i];
    }
    double tv = 0.0;
    for (const auto& [mask, prob] : exact) {
      auto it = counts.find(mask);
      double emp = it == counts.end() ? 0.0 : static_cast<double>(it->second) / draws;
      tv += std::abs(emp - prob);
    }
    for (const auto& [mask, count] : counts) {
      if (!exact.count(mask)) tv += static_cast<double>(count) / draws;  // impossible subset
    }
    return std::make_tuple(0.5 * tv, counts, position_counts);
  };

  auto [hard_tv, hard_counts, hard_positions] = empirical_tv("draws", false);
  checks.push_back({"sampler_tv", hard_tv < 0.01, hard_tv, 0.01});

  {
    // Chi-square goodness of fit over the support, pooling cells until each
    // bin expects at least 5 counts. A draw outside the support fails outright.
    bool impossible_seen = false;
    for (const auto& [mask, count] : hard_counts) {
      (void)count;
      if (!exact.count(mask)) impossible_seen = true;
    }
    std::vector<std::pair<double, double>> cells;  // expected, observed
    for (const auto& [mask, prob] : exact) {
      auto it = hard_counts.find(mask);
      double observed = it == hard_counts.end() ? 0.0 : static_cast<double>(it->second);
      cells.emplace_back(prob * static_cast<double>(draws), observed);
    }
    std::sort(cells.begin(), cells.end());
    std::vector<std::pair<double, double>> bins;
    double expected_acc = 0.0;
    double observed_acc = 0.0;
    for (const auto& [expected, observed] : cells) {
      expected_acc += expected;
      observed_acc += observed;
      if (expected_acc >= 5.0) {
        bins.emplace_back(expected_acc, observed_acc);
        expected_acc = observed_acc = 0.0;
      }
    }
    if (expected_acc > 0.0 && !bins.empty()) {
      bins.back().first += expected_acc;
      bins.back().second += observed_acc;
    }
    double p = 0.0;
    if (bins.size() >= 2) {
      double x2 = 0.0;
      for (const auto& [expected, observed] : bins) {
        x2 += (observed - expected) * (observed - expected) / expected;
      }
      p = stats::chi_square_sf(x2, static_cast<double>(bins.size()) - 1.0);
    }
    checks.push_back({"sampler_chi_square", !impossible_seen && p >= 0.001, p, 0.001});
  }

  {
    std::vector<double> inclusion = dist.inclusion_probabilities();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double emp = static_cast<double>(hard_positions[i]) / draws;
      worst = std::max(worst, std::abs(emp - inclusion[i]));
    }
    checks.push_back({"marginals", worst <= 0.005, worst, 0.005});

    double sum = 0.0;
    for (double v : inclusion) sum += v;
    double gap = std::abs(sum - static_cast<double>(k));
    checks.push_back({"marginal_sum", gap <= 1e-8, gap, 1e-8});
  }

  {
    // Forced moves: probability exactly 1 when the suffix must all be taken,
    // exactly 0 once the quota is filled.
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      // Reachable states only: chosen fits in the prefix and the suffix can
      // still complete the quota.
      std::size_t lo = k + j > n ? k - (n - j) : 0;
      for (std::size_t chosen = lo; chosen <= std::min(j, k); ++chosen) {
        double step = dist.step_probability(j, chosen);
        if (chosen == k) {
          worst = std::max(worst, std::abs(step - 0.0));
        } else if (n - j == k - chosen) {
          worst = std::max(worst, std::abs(step - 1.0));
        }
      }
    }
    checks.push_back({"forced_moves", worst == 0.0, worst, 0.0});
  }

  {
    // Replaying the recorded noise must reproduce the draw bit for bit.
    RngStream rng(config.seed, "relaxed");
    std::size_t mismatches = 0;
    for (std::size_t d = 0; d < 100; ++d) {
      subset::SampledSubset s = subset::sample_relaxed(dist, 0.7, rng);
      subset::SampledSubset r = subset::replay_relaxed(dist, 0.7, s.noise);
      if (r.indices != s.indices || r.relaxed_log_prob != s.relaxed_log_prob) ++mismatches;
    }
    checks.push_back(
        {"relaxed_replay", mismatches == 0, static_cast<double>(mismatches), 0.0});
  }

  {
    auto [relaxed_tv, counts, positions] = empirical_tv("relaxed_draws", true);
    (void)counts;
    (void)positions;
    checks.push_back({"relaxed_tv", relaxed_tv < 0.01, relaxed_tv, 0.01});
  }

  return checks;
}

int cmd_sample_subsets(const RunConfig& config) {
  std::vector<CheckResult> checks = run_subset_checks(config);
  bool all_passed = true;
  std::cout << "subset sampler checks: n=" << config.subset_n << " K=" << config.subset_k
            << " draws=" << config.subset_draws << " seed=" << config.seed << "\n";
  for (const CheckResult& check : checks) {
    all_passed = all_passed && check.passed;
    std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name
              << " statistic=" << check.statistic << " threshold=" << check.threshold << "\n";
  }
  std::cout << (all_passed ? "all checks passed\n" : "CHECKS FAILED\n");
  return all_passed ? 0 : 1;
}

}  // namespace advmask::cli
