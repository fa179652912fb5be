#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctxtag/charlm.hpp"
#include "ctxtag/corpus.hpp"

namespace ctxtag {

enum class PoolOp : std::uint8_t { Mean = 0, Min = 1, Max = 2 };
PoolOp parse_pool_op(const std::string& name);
std::string pool_op_name(PoolOp op);

enum class EmbedderKind : std::uint8_t {
  Contextual = 0,
  PooledContextual = 1,
  Static = 2,
  External = 3,
};

// Where a sentence sits in its corpus; external-vector lookup is keyed on it.
struct SentencePosition {
  std::string split;  // "train" | "dev" | "test"
  int sent_idx = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbedderKind kind() const = 0;
  virtual int dim() const = 0;
  // One dim() x 1 column per token.
  virtual std::vector<Matrix> embed(const Sentence& s,
                                    const SentencePosition& pos) = 0;
  virtual void reset_memory() {}
};

// Contextual string embedding from a forward/backward LM pair: the sentence
// is rendered as "\n" + tokens joined by single spaces + " "; token t gets
// [forward hidden at its last character; backward hidden at its first
// character], a 2H column. Pure function of (checkpoints, sentence).
std::vector<Matrix> contextual_string_embed(const CharLMCheckpoint& fwd,
                                            const CharLMCheckpoint& bwd,
                                            const Sentence& s);

class ContextualEmbedder : public Embedder {
 public:
  ContextualEmbedder(std::shared_ptr<CharLMCheckpoint> fwd,
                     std::shared_ptr<CharLMCheckpoint> bwd);
  EmbedderKind kind() const override { return EmbedderKind::Contextual; }
  int dim() const override { return 2 * fwd_->hidden_dim; }
  std::vector<Matrix> embed(const Sentence& s,
                            const SentencePosition& pos) override;

 private:
  std::shared_ptr<CharLMCheckpoint> fwd_, bwd_;
  // The checkpoints are frozen, so per-sentence results are cacheable.
  std::map<std::string, std::vector<Matrix>> cache_;
};

// Cross-sentence memory of contextual embeddings keyed by exact token
// surface string. Single-writer during updates.
class PooledMemory {
 public:
  struct Aggregate {
    int count = 0;
    Matrix mean, min, max;
  };

  void update(const std::string& word, const Matrix& current);
  // Aggregate for `word` under `op`; word must be present.
  Matrix pooled(const std::string& word, PoolOp op) const;
  bool contains(const std::string& word) const { return entries_.count(word) > 0; }
  size_t size() const { return entries_.size(); }
  void reset() { entries_.clear(); }

 private:
  std::map<std::string, Aggregate> entries_;
};

// Update-then-read: `current` joins the aggregate first, so the first
// occurrence of a word pools to itself. Output is [pooled; current], 4H.
Matrix pooled_embed(PooledMemory& mem, PoolOp pool,
                    const std::string& token_text, const Matrix& current);

class PooledContextualEmbedder : public Embedder {
 public:
  PooledContextualEmbedder(std::shared_ptr<CharLMCheckpoint> fwd,
                           std::shared_ptr<CharLMCheckpoint> bwd, PoolOp pool);
  EmbedderKind kind() const override { return EmbedderKind::PooledContextual; }
  int dim() const override { return 2 * base_.dim(); }
  std::vector<Matrix> embed(const Sentence& s,
                            const SentencePosition& pos) override;
  void reset_memory() override { memory_.reset(); }
  PooledMemory& memory() { return memory_; }

 private:
  ContextualEmbedder base_;
  PoolOp pool_;
  PooledMemory memory_;
};

// Exact-match lookup table; a lowercase fallback is tried before declaring
// OOV, and OOV yields the zero vector.
struct StaticTable {
  std::map<std::string, Matrix> vectors;
  int dim = 0;
};

// Text format: one "word v1 ... vd" entry per line, optional "count dim"
// first-line header.
StaticTable load_static_table(const std::string& path);
StaticTable parse_static_table(const std::string& text,
                               const std::string& source = "table");
Matrix static_lookup(const StaticTable& table, const std::string& token_text);

class StaticEmbedder : public Embedder {
 public:
  explicit StaticEmbedder(StaticTable table) : table_(std::move(table)) {}
  EmbedderKind kind() const override { return EmbedderKind::Static; }
  int dim() const override { return table_.dim; }
  std::vector<Matrix> embed(const Sentence& s,
                            const SentencePosition& pos) override;

 private:
  StaticTable table_;
};

// Precomputed per-token vectors keyed by (split, sentence, token). Files
// must cover every token they claim; a missing key is a coverage error,
// never a zero fallback.
struct ExternalVectors {
  std::map<std::tuple<std::string, int, int>, Matrix> vectors;
  int dim = 0;
};

// Text format: lines "split sent_idx tok_idx v1 ... vd"; duplicates are a
// load error.
ExternalVectors load_external_vectors(const std::string& path);
ExternalVectors parse_external_vectors(const std::string& text,
                                       const std::string& source = "vectors");
const Matrix& external_embed(const ExternalVectors& ev, const std::string& split,
                             int sent_idx, int tok_idx);

class ExternalEmbedder : public Embedder {
 public:
  explicit ExternalEmbedder(ExternalVectors vectors)
      : vectors_(std::move(vectors)) {}
  EmbedderKind kind() const override { return EmbedderKind::External; }
  int dim() const override { return vectors_.dim; }
  std::vector<Matrix> embed(const Sentence& s,
                            const SentencePosition& pos) override;

 private:
  ExternalVectors vectors_;
};

// Ordered concatenation of embedders, reported as an "X + Y" stack.
class EmbedderStack {
 public:
  EmbedderStack() = default;
  explicit EmbedderStack(std::vector<std::shared_ptr<Embedder>> parts)
      : parts_(std::move(parts)) {}

  int dim() const;
  size_t size() const { return parts_.size(); }
  const std::vector<std::shared_ptr<Embedder>>& parts() const { return parts_; }

  // Per token, component outputs concatenated in stack order.
  std::vector<Matrix> embed(const Sentence& s, const SentencePosition& pos);
  void reset_memory();

  // (kind, dim) pairs; taggers validate against this at load time.
  std::vector<std::pair<EmbedderKind, int>> signature() const;

 private:
  std::vector<std::shared_ptr<Embedder>> parts_;
};

}  // namespace ctxtag
