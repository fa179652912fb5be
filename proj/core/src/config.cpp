#include "ctxtag/config.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

namespace ctxtag {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed", "out_dir",
      // LM pretraining / continuation
      "lm.corpus", "lm.corpus_id", "lm.hidden_dim", "lm.embed_dim",
      "lm.seq_len", "lm.batch_size", "lm.lr", "lm.lr_anneal", "lm.patience",
      "lm.steps", "lm.min_freq", "lm.holdout_frac", "lm.eval_interval",
      "lm.log_interval", "lm.base_fwd", "lm.base_bwd",
      // benchmark corpus (and second corpus for merging)
      "corpus.name", "corpus.train", "corpus.dev", "corpus.test",
      "corpus.token_col", "corpus.label_col",
      "corpus_b.name", "corpus_b.train", "corpus_b.dev", "corpus_b.test",
      // embedder stack
      "stack", "pooling",
      // tagger fine-tuning
      "tagger.lr", "tagger.lr_anneal", "tagger.patience", "tagger.max_epochs",
      "tagger.batch_size", "tagger.clip_norm", "tagger.hidden_dim",
      "tagger.reproj_max", "tagger.forbid_illegal", "tagger.log_interval",
      "tagger.model",
      // evaluation / rendering
      "eval.split", "eval.external_rows",
      // studies
      "study.kind", "study.stages", "study.stacks",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key))
    throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

RunConfig RunConfig::from_text(const std::string& text,
                               const std::string& source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + " line " + std::to_string(line_no) +
                        ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg = from_text(read_file(path), path);
  for (const auto& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + ov + "': expected key=value");
    cfg.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
  return cfg;
}

std::string RunConfig::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

std::string RunConfig::get_str(const std::string& key,
                               const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + it->second + "'");
  }
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key,
                                 std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + it->second + "'");
  }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config key '" + key + "': bad boolean '" + it->second + "'");
}

void RunConfig::require_keys(const std::vector<std::string>& keys) const {
  for (const auto& key : keys) {
    if (!has(key)) throw ConfigError("missing required config key '" + key + "'");
  }
}

void RunConfig::require_paths_exist(
    const std::vector<std::string>& path_keys) const {
  for (const auto& key : path_keys) {
    if (!has(key)) continue;
    for (const auto& path : split_list(get_str(key), ',')) {
      if (!std::filesystem::exists(path))
        throw ConfigError("config key '" + key + "': path does not exist: " + path);
    }
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> split_list(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::string current;
  for (char c : value) {
    if (c == sep) {
      current = trim(current);
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  current = trim(current);
  if (!current.empty()) out.push_back(current);
  return out;
}

LMTrainConfig lm_config_from(const RunConfig& cfg) {
  LMTrainConfig lm;
  lm.seq_len = cfg.get_int("lm.seq_len", lm.seq_len);
  lm.batch_size = cfg.get_int("lm.batch_size", lm.batch_size);
  lm.lr = cfg.get_double("lm.lr", lm.lr);
  lm.lr_anneal = cfg.get_double("lm.lr_anneal", lm.lr_anneal);
  lm.patience = cfg.get_int("lm.patience", lm.patience);
  lm.steps = cfg.get_int("lm.steps", lm.steps);
  lm.seed = cfg.get_u64("seed", lm.seed);
  lm.hidden_dim = cfg.get_int("lm.hidden_dim", lm.hidden_dim);
  lm.embed_dim = cfg.get_int("lm.embed_dim", lm.embed_dim);
  lm.holdout_frac = cfg.get_double("lm.holdout_frac", lm.holdout_frac);
  lm.eval_interval = cfg.get_int("lm.eval_interval", lm.eval_interval);
  lm.log_interval = cfg.get_int("lm.log_interval", lm.log_interval);
  if (lm.seq_len <= 0 || lm.batch_size <= 0 || lm.lr <= 0 || lm.steps < 0 ||
      lm.hidden_dim <= 0 || lm.embed_dim <= 0 || lm.lr_anneal <= 0 ||
      lm.lr_anneal > 1)
    throw ConfigError("invalid LM training hyperparameters");
  return lm;
}

TagTrainConfig tag_config_from(const RunConfig& cfg) {
  TagTrainConfig t;
  t.lr = cfg.get_double("tagger.lr", t.lr);
  t.lr_anneal = cfg.get_double("tagger.lr_anneal", t.lr_anneal);
  t.patience = cfg.get_int("tagger.patience", t.patience);
  t.max_epochs = cfg.get_int("tagger.max_epochs", t.max_epochs);
  t.batch_size = cfg.get_int("tagger.batch_size", t.batch_size);
  t.clip_norm = cfg.get_double("tagger.clip_norm", t.clip_norm);
  t.seed = cfg.get_u64("seed", t.seed);
  t.hidden_dim = cfg.get_int("tagger.hidden_dim", t.hidden_dim);
  t.reproj_max = cfg.get_int("tagger.reproj_max", t.reproj_max);
  t.pooling = parse_pool_op(cfg.get_str("pooling", "mean"));
  t.forbid_illegal = cfg.get_bool("tagger.forbid_illegal", t.forbid_illegal);
  t.log_interval = cfg.get_int("tagger.log_interval", t.log_interval);
  if (t.lr <= 0 || t.max_epochs < 0 || t.batch_size <= 0 || t.clip_norm <= 0 ||
      t.hidden_dim <= 0 || t.lr_anneal <= 0 || t.lr_anneal > 1)
    throw ConfigError("invalid tagger training hyperparameters");
  return t;
}

TaggedCorpus corpus_from_config(const RunConfig& cfg, const std::string& prefix) {
  const int token_col = cfg.get_int("corpus.token_col", 0);
  const int label_col = cfg.get_int("corpus.label_col", -1);
  auto load_split = [&](const std::string& key) -> std::vector<Sentence> {
    if (!cfg.has(key)) return {};
    return parse_conll(read_file(cfg.get_str(key)), token_col, label_col);
  };
  return TaggedCorpus::from_splits(
      cfg.get_str(prefix + ".name", prefix), load_split(prefix + ".train"),
      load_split(prefix + ".dev"), load_split(prefix + ".test"));
}

namespace {

struct StackEntry {
  std::string kind;
  std::vector<std::string> args;
};

std::vector<StackEntry> parse_stack_decl(const std::string& decl) {
  std::vector<StackEntry> out;
  for (const auto& entry : split_list(decl, ';')) {
    const size_t colon = entry.find(':');
    if (colon == std::string::npos)
      throw ConfigError("stack entry '" + entry + "': expected kind:paths");
    StackEntry se;
    se.kind = entry.substr(0, colon);
    se.args = split_list(entry.substr(colon + 1), ',');
    if (se.kind != "contextual" && se.kind != "pooled" && se.kind != "static" &&
        se.kind != "external")
      throw ConfigError("stack entry '" + entry + "': unknown kind '" +
                        se.kind + "'");
    const size_t want = (se.kind == "contextual" || se.kind == "pooled") ? 2 : 1;
    if (se.args.size() != want)
      throw ConfigError("stack entry '" + entry + "': expected " +
                        std::to_string(want) + " path(s)");
    out.push_back(std::move(se));
  }
  if (out.empty()) throw ConfigError("empty stack declaration");
  return out;
}

}  // namespace

std::vector<std::string> stack_paths(const std::string& decl) {
  std::vector<std::string> out;
  for (const auto& entry : parse_stack_decl(decl))
    out.insert(out.end(), entry.args.begin(), entry.args.end());
  return out;
}

EmbedderStack build_stack(const std::string& decl, PoolOp pooling) {
  std::vector<std::shared_ptr<Embedder>> parts;
  for (const auto& entry : parse_stack_decl(decl)) {
    if (entry.kind == "contextual" || entry.kind == "pooled") {
      auto fwd = std::make_shared<CharLMCheckpoint>(load_checkpoint(entry.args[0]));
      auto bwd = std::make_shared<CharLMCheckpoint>(load_checkpoint(entry.args[1]));
      if (entry.kind == "contextual") {
        parts.push_back(std::make_shared<ContextualEmbedder>(fwd, bwd));
      } else {
        parts.push_back(
            std::make_shared<PooledContextualEmbedder>(fwd, bwd, pooling));
      }
    } else if (entry.kind == "static") {
      parts.push_back(
          std::make_shared<StaticEmbedder>(load_static_table(entry.args[0])));
    } else {
      parts.push_back(std::make_shared<ExternalEmbedder>(
          load_external_vectors(entry.args[0])));
    }
  }
  return EmbedderStack(std::move(parts));
}

}  // namespace ctxtag
