#pragma once

#include <string>
#include <vector>

#include "ctxtag/config.hpp"
#include "ctxtag/eval.hpp"

namespace ctxtag {

enum class StudyKind { PretrainAmount, Stacking, Merging };
StudyKind parse_study_kind(const std::string& name);

// One of the three experiment shapes: sweep LM pretraining stages, sweep
// embedder stacks, or merge two corpora and score each on its own test.
struct StudySpec {
  StudyKind kind = StudyKind::Stacking;

  struct Stage {
    std::string label;  // e.g. "V1"
    std::string fwd_path, bwd_path;
  };
  std::vector<Stage> stages;  // pretrain-amount: >= 2

  struct StackDecl {
    std::string label;
    std::string decl;
  };
  std::vector<StackDecl> stacks;  // stacking: >= 1

  // merging uses the corpus/corpus_b config sections; validated on build
  static StudySpec from_config(const RunConfig& cfg);
};

// Runs every leg sequentially, writes per-leg reports, models and the
// rendered table under out_dir, and returns the collected rows.
StudyReport run_study(const StudySpec& spec, const RunConfig& cfg,
                      const std::string& out_dir);

// Config snapshot + provenance lines, written next to every run's outputs.
void write_manifest(const std::string& out_dir, const RunConfig& cfg,
                    const std::vector<std::string>& extra_lines = {});

// Lineage rendering for manifests: "corpus_id:steps -> ...".
std::string lineage_string(const CharLMCheckpoint& ckpt);

}  // namespace ctxtag
