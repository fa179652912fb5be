#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctxtag/charlm.hpp"
#include "ctxtag/corpus.hpp"
#include "ctxtag/embeddings.hpp"
#include "ctxtag/tagger.hpp"

namespace ctxtag {

// Flat key=value experiment config. Lines are "key = value"; '#' starts a
// comment; unknown keys are rejected. Command-line overrides win over file
// values.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig from_text(const std::string& text,
                             const std::string& source = "config");
  static RunConfig load(const std::string& path,
                        const std::vector<std::string>& overrides = {});

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key) const;  // throws if missing
  std::string get_str(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Every listed key, if present, must name an existing file.
  void require_paths_exist(const std::vector<std::string>& path_keys) const;
  void require_keys(const std::vector<std::string>& keys) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // Config snapshot for run manifests.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& value, char sep);

LMTrainConfig lm_config_from(const RunConfig& cfg);
TagTrainConfig tag_config_from(const RunConfig& cfg);

// Loads the three splits named by <prefix>.train/.dev/.test (dev optional).
TaggedCorpus corpus_from_config(const RunConfig& cfg,
                                const std::string& prefix = "corpus");

// Stack declaration: semicolon-separated entries, in stack order:
//   contextual:FWD.ckpt,BWD.ckpt
//   pooled:FWD.ckpt,BWD.ckpt      (pool op from the `pooling` key)
//   static:TABLE.txt
//   external:VECTORS.txt
EmbedderStack build_stack(const std::string& decl, PoolOp pooling);

// Paths referenced by a stack declaration (for upfront validation).
std::vector<std::string> stack_paths(const std::string& decl);

}  // namespace ctxtag
