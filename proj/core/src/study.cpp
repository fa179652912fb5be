#include "ctxtag/study.hpp"

#include <cctype>
#include <filesystem>

namespace ctxtag {
namespace fs = std::filesystem;

StudyKind parse_study_kind(const std::string& name) {
  if (name == "pretrain-amount") return StudyKind::PretrainAmount;
  if (name == "stacking") return StudyKind::Stacking;
  if (name == "merging") return StudyKind::Merging;
  throw ConfigError("unknown study kind '" + name +
                    "' (expected pretrain-amount|stacking|merging)");
}

StudySpec StudySpec::from_config(const RunConfig& cfg) {
  StudySpec spec;
  spec.kind = parse_study_kind(cfg.get_str("study.kind"));
  switch (spec.kind) {
    case StudyKind::PretrainAmount: {
      // "V1:fwd.ckpt,bwd.ckpt; V2:fwd.ckpt,bwd.ckpt; ..."
      for (const auto& entry : split_list(cfg.get_str("study.stages"), ';')) {
        const size_t colon = entry.find(':');
        if (colon == std::string::npos)
          throw ConfigError("study stage '" + entry + "': expected LABEL:fwd,bwd");
        const auto paths = split_list(entry.substr(colon + 1), ',');
        if (paths.size() != 2)
          throw ConfigError("study stage '" + entry + "': expected two checkpoints");
        spec.stages.push_back({entry.substr(0, colon), paths[0], paths[1]});
      }
      if (spec.stages.size() < 2)
        throw ConfigError("pretrain-amount study needs at least 2 LM stages");
      break;
    }
    case StudyKind::Stacking: {
      // "LABEL=decl | LABEL=decl | ..."
      for (const auto& entry : split_list(cfg.get_str("study.stacks"), '|')) {
        const size_t eq = entry.find('=');
        if (eq == std::string::npos)
          throw ConfigError("study stack '" + entry + "': expected LABEL=stack-decl");
        spec.stacks.push_back({entry.substr(0, eq), entry.substr(eq + 1)});
      }
      if (spec.stacks.empty())
        throw ConfigError("stacking study needs at least one stack");
      break;
    }
    case StudyKind::Merging:
      cfg.require_keys({"corpus.train", "corpus.test", "corpus_b.train",
                        "corpus_b.test"});
      break;
  }
  return spec;
}

std::string lineage_string(const CharLMCheckpoint& ckpt) {
  std::string out;
  for (const auto& rec : ckpt.lineage) {
    if (!out.empty()) out += " -> ";
    out += rec.corpus_id + ":" + std::to_string(rec.steps);
  }
  return out;
}

void write_manifest(const std::string& out_dir, const RunConfig& cfg,
                    const std::vector<std::string>& extra_lines) {
  std::string text = "# run manifest\n" + cfg.to_text();
  for (const auto& line : extra_lines) text += "# " + line + "\n";
  write_file((fs::path(out_dir) / "manifest.txt").string(), text);
}

namespace {

std::string sanitize(const std::string& label) {
  std::string out;
  for (char c : label)
    out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

StudyRow run_leg(const std::string& dataset_label, const std::string& model_label,
                 const TaggedCorpus& corpus, const std::string& stack_decl,
                 const RunConfig& cfg, const std::string& out_dir) {
  const TagTrainConfig tcfg = tag_config_from(cfg);
  EmbedderStack stack = build_stack(stack_decl, tcfg.pooling);
  TagTrainLog log;
  TaggerModel model = train_tagger(corpus, stack, tcfg, &log);

  stack.reset_memory();
  std::vector<std::vector<std::string>> predicted;
  predicted.reserve(corpus.test.size());
  for (int i = 0; i < static_cast<int>(corpus.test.size()); ++i)
    predicted.push_back(predict(model, stack, corpus.test[i], {"test", i}));
  EvalReport report = evaluate(corpus.test, predicted);
  report.corpus_name = dataset_label;
  report.model_description = model_label;

  const fs::path leg_dir =
      fs::path(out_dir) / ("leg_" + sanitize(dataset_label) + "_" + sanitize(model_label));
  fs::create_directories(leg_dir);
  save_tagger(model, (leg_dir / "model.bin").string());
  write_file((leg_dir / "report.json").string(), report_to_json(report));

  return StudyRow{dataset_label, model_label, std::move(report)};
}

}  // namespace

StudyReport run_study(const StudySpec& spec, const RunConfig& cfg,
                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  StudyReport sr;

  switch (spec.kind) {
    case StudyKind::PretrainAmount: {
      const TaggedCorpus corpus = corpus_from_config(cfg);
      for (const auto& stage : spec.stages) {
        const std::string decl =
            "contextual:" + stage.fwd_path + "," + stage.bwd_path;
        sr.rows.push_back(run_leg(corpus.name, stage.label, corpus, decl, cfg,
                                  out_dir));
      }
      break;
    }
    case StudyKind::Stacking: {
      const TaggedCorpus corpus = corpus_from_config(cfg);
      for (const auto& stack : spec.stacks) {
        sr.rows.push_back(
            run_leg(corpus.name, stack.label, corpus, stack.decl, cfg, out_dir));
      }
      break;
    }
    case StudyKind::Merging: {
      const TaggedCorpus a = corpus_from_config(cfg, "corpus");
      const TaggedCorpus b = corpus_from_config(cfg, "corpus_b");
      const std::string stack_decl = cfg.get_str("stack");
      const std::string model_label = cfg.get_str("stack");
      // four legs, each evaluated only on its own test split
      sr.rows.push_back(run_leg(a.name, model_label, a, stack_decl, cfg, out_dir));
      sr.rows.push_back(run_leg(a.name + " (+" + b.name + ")", model_label,
                                merge_corpora(a, b), stack_decl, cfg, out_dir));
      sr.rows.push_back(run_leg(b.name, model_label, b, stack_decl, cfg, out_dir));
      sr.rows.push_back(run_leg(b.name + " (+" + a.name + ")", model_label,
                                merge_corpora(b, a), stack_decl, cfg, out_dir));
      break;
    }
  }

  write_file((fs::path(out_dir) / "study_table.md").string(), render_study(sr));
  write_manifest(out_dir, cfg);
  return sr;
}

}  // namespace ctxtag
