#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ctxtag/config.hpp"
#include "ctxtag/study.hpp"

namespace fs = std::filesystem;
using namespace ctxtag;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "key=value config file")
      ->required();
  cmd->add_option("-D,--set", args.overrides,
                  "override a config key, e.g. -D seed=7 (flag wins over file)");
}

RunConfig load_config(const CommonArgs& args) {
  return RunConfig::load(args.config_path, args.overrides);
}

std::string out_dir_of(const RunConfig& cfg) {
  const std::string out = cfg.get_str("out_dir");
  fs::create_directories(out);
  return out;
}

void write_lm_log(const std::string& path, const LmLossLog& log) {
  std::ostringstream ss;
  ss << "# step\tloss\n";
  for (const auto& [step, loss] : log) ss << step << "\t" << loss << "\n";
  write_file(path, ss.str());
}

int cmd_pretrain(const RunConfig& cfg) {
  cfg.require_keys({"lm.corpus", "out_dir"});
  cfg.require_paths_exist({"lm.corpus"});
  const LMTrainConfig lm = lm_config_from(cfg);
  CharStream stream = load_char_stream(split_list(cfg.get_str("lm.corpus"), ','));
  if (cfg.has("lm.corpus_id")) stream.source_id = cfg.get_str("lm.corpus_id");
  const int min_freq = cfg.get_int("lm.min_freq", 1);
  const std::string out = out_dir_of(cfg);

  LmLossLog fwd_log, bwd_log;
  CharLMCheckpoint fwd =
      train_lm(stream, LmDirection::Forward, lm, min_freq, &fwd_log);
  CharLMCheckpoint bwd =
      train_lm(stream, LmDirection::Backward, lm, min_freq, &bwd_log);
  save_checkpoint(fwd, (fs::path(out) / "lm_fwd.bin").string());
  save_checkpoint(bwd, (fs::path(out) / "lm_bwd.bin").string());
  write_lm_log((fs::path(out) / "loss_fwd.log").string(), fwd_log);
  write_lm_log((fs::path(out) / "loss_bwd.log").string(), bwd_log);
  write_manifest(out, cfg, {"lineage: " + lineage_string(fwd)});
  std::cout << "wrote " << out << "/lm_fwd.bin and lm_bwd.bin (vocab "
            << fwd.vocab.size() << ", H " << fwd.hidden_dim << ")\n";
  return 0;
}

int cmd_continue(const RunConfig& cfg) {
  cfg.require_keys({"lm.base_fwd", "lm.base_bwd", "lm.corpus", "out_dir"});
  cfg.require_paths_exist({"lm.base_fwd", "lm.base_bwd", "lm.corpus"});
  CharLMCheckpoint fwd = load_checkpoint(cfg.get_str("lm.base_fwd"));
  CharLMCheckpoint bwd = load_checkpoint(cfg.get_str("lm.base_bwd"));

  RunConfig filled = cfg;
  if (!cfg.has("lm.hidden_dim"))
    filled.set("lm.hidden_dim", std::to_string(fwd.hidden_dim));
  if (!cfg.has("lm.embed_dim"))
    filled.set("lm.embed_dim", std::to_string(fwd.embed_dim));
  const LMTrainConfig lm = lm_config_from(filled);

  CharStream stream = load_char_stream(split_list(cfg.get_str("lm.corpus"), ','));
  if (cfg.has("lm.corpus_id")) stream.source_id = cfg.get_str("lm.corpus_id");
  const std::string out = out_dir_of(cfg);

  LmLossLog fwd_log, bwd_log;
  continue_pretrain(fwd, stream, lm, &fwd_log);
  continue_pretrain(bwd, stream, lm, &bwd_log);
  save_checkpoint(fwd, (fs::path(out) / "lm_fwd.bin").string());
  save_checkpoint(bwd, (fs::path(out) / "lm_bwd.bin").string());
  write_lm_log((fs::path(out) / "loss_fwd.log").string(), fwd_log);
  write_lm_log((fs::path(out) / "loss_bwd.log").string(), bwd_log);
  write_manifest(out, cfg, {"lineage: " + lineage_string(fwd)});
  std::cout << "continued pair written to " << out << " (lineage "
            << lineage_string(fwd) << ")\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  cfg.require_keys({"corpus.train", "stack", "out_dir"});
  cfg.require_paths_exist({"corpus.train", "corpus.dev", "corpus.test"});
  for (const auto& path : stack_paths(cfg.get_str("stack"))) {
    if (!fs::exists(path))
      throw ConfigError("stack path does not exist: " + path);
  }
  const TagTrainConfig tcfg = tag_config_from(cfg);
  const TaggedCorpus corpus = corpus_from_config(cfg);
  EmbedderStack stack = build_stack(cfg.get_str("stack"), tcfg.pooling);
  const std::string out = out_dir_of(cfg);

  TagTrainLog log;
  TaggerModel model = train_tagger(corpus, stack, tcfg, &log);
  save_tagger(model, (fs::path(out) / "tagger.bin").string());

  std::ostringstream curve;
  curve << "# epoch\ttrain_loss\tdev_f1\n";
  for (size_t e = 0; e < log.train_loss.size(); ++e) {
    curve << (e + 1) << "\t" << log.train_loss[e] << "\t"
          << (e < log.dev_f1.size() ? std::to_string(log.dev_f1[e]) : "-")
          << "\n";
  }
  curve << "# best epoch: " << log.best_epoch << "\n";
  write_file((fs::path(out) / "dev_curve.log").string(), curve.str());
  write_manifest(out, cfg, {"corpus: " + corpus.name});
  std::cout << "wrote " << out << "/tagger.bin (best epoch " << log.best_epoch
            << ")\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  cfg.require_keys({"tagger.model", "stack", "out_dir"});
  cfg.require_paths_exist(
      {"tagger.model", "corpus.train", "corpus.dev", "corpus.test",
       "eval.external_rows"});
  for (const auto& path : stack_paths(cfg.get_str("stack"))) {
    if (!fs::exists(path))
      throw ConfigError("stack path does not exist: " + path);
  }
  TaggerModel model = load_tagger(cfg.get_str("tagger.model"));
  const TaggedCorpus corpus = corpus_from_config(cfg);
  if (TagSet::from_entity_types(corpus.tag_set) != model.tag_set)
    throw DataError("tag-set mismatch: model was trained for a different "
                    "entity-type inventory than corpus '" + corpus.name + "'");
  EmbedderStack stack = build_stack(cfg.get_str("stack"), model.pooling);
  model.check_signature(stack);

  const std::string split = cfg.get_str("eval.split", "test");
  const std::vector<Sentence>* sentences = &corpus.test;
  if (split == "train") sentences = &corpus.train;
  else if (split == "dev") sentences = &corpus.dev;
  else if (split != "test") throw ConfigError("eval.split must be train|dev|test");

  stack.reset_memory();
  std::vector<std::vector<std::string>> predicted;
  for (int i = 0; i < static_cast<int>(sentences->size()); ++i)
    predicted.push_back(predict(model, stack, (*sentences)[i], {split, i}));
  EvalReport report = evaluate(*sentences, predicted);
  report.corpus_name = corpus.name;
  report.model_description = cfg.get_str("stack");

  std::vector<ExternalRow> external;
  if (cfg.has("eval.external_rows")) {
    // lines: dataset model... f1  (first field dataset, last field F1)
    std::istringstream in(read_file(cfg.get_str("eval.external_rows")));
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::vector<std::string> fields;
      std::string f;
      while (ls >> f) fields.push_back(f);
      if (fields.size() < 3) continue;
      std::string model_label = fields[1];
      for (size_t i = 2; i + 1 < fields.size(); ++i) model_label += " " + fields[i];
      external.push_back({fields[0], model_label, std::stod(fields.back())});
    }
  }

  const std::string out = out_dir_of(cfg);
  write_file((fs::path(out) / "report.json").string(), report_to_json(report));
  StudyReport sr;
  sr.rows.push_back({corpus.name, report.model_description, report});
  write_file((fs::path(out) / "table.md").string(), render_study(sr, external));
  write_manifest(out, cfg);
  std::cout << "F1 " << report.f1 << " (P " << report.precision << ", R "
            << report.recall << ") on " << corpus.name << "/" << split << "\n";
  return 0;
}

int cmd_embed(const RunConfig& cfg) {
  cfg.require_keys({"stack", "out_dir"});
  cfg.require_paths_exist({"corpus.train", "corpus.dev", "corpus.test"});
  for (const auto& path : stack_paths(cfg.get_str("stack"))) {
    if (!fs::exists(path))
      throw ConfigError("stack path does not exist: " + path);
  }
  const TaggedCorpus corpus = corpus_from_config(cfg);
  EmbedderStack stack =
      build_stack(cfg.get_str("stack"),
                  parse_pool_op(cfg.get_str("pooling", "mean")));
  const std::string out = out_dir_of(cfg);

  std::ostringstream ss;
  ss.precision(17);
  auto dump_split = [&](const std::string& name,
                        const std::vector<Sentence>& sentences) {
    stack.reset_memory();
    for (int i = 0; i < static_cast<int>(sentences.size()); ++i) {
      const std::vector<Matrix> vecs = stack.embed(sentences[i], {name, i});
      for (int t = 0; t < static_cast<int>(vecs.size()); ++t) {
        ss << name << " " << i << " " << t;
        for (real v : vecs[t].data()) ss << " " << v;
        ss << "\n";
      }
    }
  };
  dump_split("train", corpus.train);
  dump_split("dev", corpus.dev);
  dump_split("test", corpus.test);
  write_file((fs::path(out) / "vectors.txt").string(), ss.str());
  write_manifest(out, cfg);
  std::cout << "wrote " << out << "/vectors.txt (dim " << stack.dim() << ")\n";
  return 0;
}

int cmd_merge(const RunConfig& cfg) {
  cfg.require_keys({"corpus.train", "corpus_b.train", "out_dir"});
  cfg.require_paths_exist({"corpus.train", "corpus.dev", "corpus.test",
                           "corpus_b.train", "corpus_b.dev", "corpus_b.test"});
  const TaggedCorpus a = corpus_from_config(cfg, "corpus");
  const TaggedCorpus b = corpus_from_config(cfg, "corpus_b");
  const TaggedCorpus merged = merge_corpora(a, b);
  const std::string out = out_dir_of(cfg);
  write_file((fs::path(out) / "train.conll").string(), write_conll(merged.train));
  write_file((fs::path(out) / "dev.conll").string(), write_conll(merged.dev));
  write_file((fs::path(out) / "test.conll").string(), write_conll(merged.test));
  write_manifest(out, cfg, {"merged corpus: " + merged.name});
  std::cout << "wrote merged corpus '" << merged.name << "' ("
            << merged.train.size() << " train sentences) to " << out << "\n";
  return 0;
}

int cmd_study(const RunConfig& cfg) {
  cfg.require_keys({"study.kind", "out_dir"});
  cfg.require_paths_exist({"corpus.train", "corpus.dev", "corpus.test",
                           "corpus_b.train", "corpus_b.dev", "corpus_b.test"});
  const StudySpec spec = StudySpec::from_config(cfg);
  // validate every stack/stage path before any side effect
  if (spec.kind == StudyKind::Merging || cfg.has("stack")) {
    if (cfg.has("stack")) {
      for (const auto& path : stack_paths(cfg.get_str("stack"))) {
        if (!fs::exists(path))
          throw ConfigError("stack path does not exist: " + path);
      }
    }
  }
  for (const auto& stage : spec.stages) {
    for (const auto& path : {stage.fwd_path, stage.bwd_path}) {
      if (!fs::exists(path))
        throw ConfigError("study stage path does not exist: " + path);
    }
  }
  for (const auto& stack : spec.stacks) {
    for (const auto& path : stack_paths(stack.decl)) {
      if (!fs::exists(path))
        throw ConfigError("stack path does not exist: " + path);
    }
  }

  const std::string out = out_dir_of(cfg);
  const StudyReport sr = run_study(spec, cfg, out);
  std::cout << render_study(sr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"character-LM contextual embeddings + BiLSTM-CRF sequence labeling"};
  app.require_subcommand(1);

  CommonArgs args;
  int (*handler)(const RunConfig&) = nullptr;

  const std::vector<std::pair<std::string, std::pair<std::string, int (*)(const RunConfig&)>>>
      commands = {
          {"pretrain", {"pretrain a forward/backward char-LM pair", cmd_pretrain}},
          {"continue", {"continue pretraining an existing pair", cmd_continue}},
          {"train", {"fine-tune a tagger on a labeled corpus", cmd_train}},
          {"evaluate", {"score a tagger on a corpus split", cmd_evaluate}},
          {"embed", {"dump per-token vectors in the external-vectors format", cmd_embed}},
          {"merge", {"merge two corpora into combined train/dev splits", cmd_merge}},
          {"study", {"run a pretrain-amount / stacking / merging study", cmd_study}},
      };
  for (const auto& [name, entry] : commands) {
    CLI::App* cmd = app.add_subcommand(name, entry.first);
    add_common(cmd, args);
    auto fn = entry.second;
    cmd->callback([&handler, fn] { handler = fn; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return handler(load_config(args));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
