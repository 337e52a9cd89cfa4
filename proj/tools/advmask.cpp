// Command-line front end: one binary, subcommand style. Every option maps
// onto a RunConfig key, so a config file and command-line flags share one
// vocabulary; flags win over the file, --set wins over named flags.

#include <deque>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "advmask/commands.hpp"
#include "advmask/config.hpp"
#include "advmask/errors.hpp"

namespace {

using advmask::cli::RunConfig;

class ConfigBuilder {
 public:
  explicit ConfigBuilder(CLI::App* cmd) {
    cmd->add_option("--config", config_file_, "key=value config file (flags override it)");
    cmd->add_option("--set", sets_, "extra key=value override, repeatable")
        ->take_all()
        ->expected(-1);
  }

  void option(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& help) {
    storage_.emplace_back();
    CLI::Option* opt = cmd->add_option(flag, storage_.back(), help);
    tracked_.push_back({opt, key, &storage_.back()});
  }

  void toggle(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& help) {
    CLI::Option* opt = cmd->add_flag(flag, help);
    tracked_.push_back({opt, key, nullptr});
  }

  RunConfig resolve() const {
    std::vector<std::pair<std::string, std::string>> file_entries;
    if (!config_file_.empty()) file_entries = advmask::cli::read_config_file(config_file_);
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const Tracked& t : tracked_) {
      if (t.opt->count() == 0) continue;
      overrides.emplace_back(t.key, t.value ? *t.value : "true");
    }
    for (const std::string& entry : sets_) {
      std::size_t eq = entry.find('=');
      if (eq == std::string::npos) {
        throw advmask::ConfigError("--set expects key=value, got '" + entry + "'");
      }
      overrides.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
    }
    return advmask::cli::make_config(file_entries, overrides);
  }

 private:
  struct Tracked {
    CLI::Option* opt;
    std::string key;
    std::string* value;  // null marks a boolean flag
  };

  std::string config_file_;
  std::vector<std::string> sets_;
  std::deque<std::string> storage_;  // stable addresses for option targets
  std::vector<Tracked> tracked_;
};

void add_model_shape(ConfigBuilder& b, CLI::App* cmd) {
  b.option(cmd, "--hidden-size", "hidden_size", "encoder hidden size");
  b.option(cmd, "--num-layers", "num_layers", "encoder layers");
  b.option(cmd, "--num-heads", "num_heads", "attention heads");
  b.option(cmd, "--ffn-size", "ffn_size", "feed-forward inner size");
  b.option(cmd, "--max-seq-len", "max_seq_len", "maximum sentence length; longer input is cut");
  b.option(cmd, "--dropout", "dropout", "encoder dropout rate");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial masking workbench"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<ConfigBuilder>> builders;
  auto builder = [&](CLI::App* cmd) -> ConfigBuilder& {
    builders.push_back(std::make_unique<ConfigBuilder>(cmd));
    return *builders.back();
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic domain-shift corpus pair");
  {
    ConfigBuilder& b = builder(gen);
    b.option(gen, "--out-dir", "out_dir", "output directory");
    b.option(gen, "--seed", "seed", "master seed");
    b.option(gen, "--source-sentences", "source_sentences", "source corpus size");
    b.option(gen, "--target-sentences", "target_sentences", "target corpus size");
    b.option(gen, "--pool-sentences", "pool_sentences", "extra target-domain pool size");
    b.option(gen, "--shared-fraction", "shared_fraction", "fraction of word pools shared");
    b.option(gen, "--entity-span-rate", "entity_span_rate", "entity-template sentence rate");
    b.option(gen, "--planted-tokens", "planted_tokens", "number of target-only planted tokens");
    b.option(gen, "--planted-rate", "planted_rate", "target sentences carrying a planted token");
    b.option(gen, "--planted-entity-rate", "planted_entity_rate",
             "planted tokens landing inside entity spans");
  }

  CLI::App* tune = app.add_subcommand("domain-tune", "masked-LM training on a domain mixture");
  {
    ConfigBuilder& b = builder(tune);
    b.option(tune, "--source", "source", "source-domain JSONL corpus");
    b.option(tune, "--target", "target", "target-domain JSONL corpus");
    b.option(tune, "--out-dir", "out_dir", "output directory");
    b.option(tune, "--strategy", "strategy",
             "masking strategy: random, pos, ent, adv, mix-pos, mix-ent, mix-adv");
    b.option(tune, "--steps", "steps", "training steps");
    b.option(tune, "--batch-size", "batch_size", "sentences per step");
    b.option(tune, "--lr", "lr", "model learning rate");
    b.option(tune, "--generator-lr", "generator_lr", "selection network learning rate (0 = lr)");
    b.option(tune, "--beta", "beta", "selection network update probability");
    b.option(tune, "--mask-ratio", "mask_ratio", "fraction of positions hidden per sentence");
    b.option(tune, "--temperature", "temperature", "relaxed sampler temperature");
    b.option(tune, "--mc-samples", "mc_samples", "masked sets per sentence per step");
    b.toggle(tune, "--per-sentence-beta", "per_sentence_beta",
             "flip the update coin per sentence instead of per batch");
    b.option(tune, "--gen-hidden-size", "gen_hidden_size", "selection network hidden size");
    b.option(tune, "--gen-dropout", "gen_dropout", "selection network dropout");
    b.option(tune, "--min-count", "min_count", "vocabulary frequency floor");
    b.option(tune, "--seed", "seed", "master seed");
    add_model_shape(b, tune);
  }

  CLI::App* fine = app.add_subcommand("finetune", "train the span tagger on labeled data");
  {
    ConfigBuilder& b = builder(fine);
    b.option(fine, "--source", "source", "labeled JSONL training corpus");
    b.option(fine, "--checkpoint", "checkpoint", "encoder checkpoint from domain-tune");
    b.option(fine, "--vocab", "vocab", "vocabulary file from domain-tune");
    b.option(fine, "--out-dir", "out_dir", "output directory");
    b.option(fine, "--epochs", "task_epochs", "training epochs");
    b.option(fine, "--batch-size", "batch_size", "sentences per update");
    b.option(fine, "--lr", "lr", "learning rate");
    b.toggle(fine, "--head-only", "head_only", "freeze the encoder, train only the tagger head");
    b.option(fine, "--seed", "seed", "master seed");
    add_model_shape(b, fine);
  }

  CLI::App* eval = app.add_subcommand("eval", "score the tagger on a labeled corpus");
  {
    ConfigBuilder& b = builder(eval);
    b.option(eval, "--target", "target", "labeled JSONL evaluation corpus");
    b.option(eval, "--source", "source",
             "task training corpus; its surface forms define the OOV split");
    b.option(eval, "--checkpoint", "checkpoint", "tagger checkpoint from finetune");
    b.option(eval, "--vocab", "vocab", "vocabulary file from domain-tune");
    b.option(eval, "--out-dir", "out_dir", "output directory");
    b.option(eval, "--seed", "seed", "master seed");
    add_model_shape(b, eval);
  }

  CLI::App* analyze = app.add_subcommand("analyze", "compare saved runs or corpora");
  {
    ConfigBuilder& b = builder(analyze);
    b.option(analyze, "--metrics", "metrics", "metrics CSV of the run under study");
    b.option(analyze, "--baseline-metrics", "baseline_metrics", "metrics CSV to compare against");
    b.option(analyze, "--source", "source", "source-domain JSONL corpus");
    b.option(analyze, "--target", "target", "target-domain JSONL corpus");
    b.option(analyze, "--stopwords", "stopwords", "stopword list for the overlap measure");
  }

  CLI::App* subsets = app.add_subcommand("sample-subsets", "verify the fixed-size subset sampler");
  {
    ConfigBuilder& b = builder(subsets);
    b.option(subsets, "--n", "subset_n", "number of positions");
    b.option(subsets, "--k", "subset_k", "subset cardinality");
    b.option(subsets, "--draws", "subset_draws", "samples per empirical check");
    b.option(subsets, "--seed", "seed", "master seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  std::size_t index = 0;
  for (CLI::App* cmd : {gen, tune, fine, eval, analyze, subsets}) {
    if (cmd == chosen) break;
    ++index;
  }

  try {
    RunConfig config = builders[index]->resolve();
    if (chosen == gen) return advmask::cli::cmd_gen_data(config);
    if (chosen == tune) return advmask::cli::cmd_domain_tune(config);
    if (chosen == fine) return advmask::cli::cmd_finetune(config);
    if (chosen == eval) return advmask::cli::cmd_eval(config);
    if (chosen == analyze) return advmask::cli::cmd_analyze(config);
    return advmask::cli::cmd_sample_subsets(config);
  } catch (const advmask::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const advmask::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const advmask::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
