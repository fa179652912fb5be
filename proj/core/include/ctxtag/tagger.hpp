#pragma once

#include <string>
#include <vector>

#include "ctxtag/corpus.hpp"
#include "ctxtag/embeddings.hpp"
#include "ctxtag/lstm.hpp"

namespace ctxtag {

// Transitions into START / out of STOP, and (optionally) BIO-illegal
// transitions, use this large negative constant instead of -inf to keep the
// arithmetic finite.
inline constexpr real kForbiddenScore = static_cast<real>(-1e4);

// BIO labels in sorted order plus virtual START/STOP indices used only in
// the transition table.
class TagSet {
 public:
  TagSet() = default;
  static TagSet from_entity_types(const std::set<std::string>& types);
  static TagSet from_labels(std::vector<std::string> sorted_labels);

  int size() const { return static_cast<int>(labels_.size()); }  // K
  int start_index() const { return size(); }
  int stop_index() const { return size() + 1; }
  const std::string& label(int idx) const { return labels_[idx]; }
  const std::vector<std::string>& labels() const { return labels_; }
  int index_of(const std::string& label) const;  // throws DataError if absent

  bool operator==(const TagSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct TaggerModel {
  TagSet tag_set;
  std::vector<std::pair<EmbedderKind, int>> embed_signature;
  PoolOp pooling = PoolOp::Mean;
  int input_dim = 0;   // D, stacked embedding width
  int reproj_dim = 0;  // R
  int hidden_dim = 0;  // W per direction
  bool has_reproj = false;
  bool forbid_illegal = false;

  ParamNode reproj_w, reproj_b;  // R x D, R x 1 (absent when !has_reproj)
  LstmCellParams fwd, bwd;       // R -> W
  ParamNode emit_w, emit_b;      // K x 2W, K x 1
  ParamNode trans;               // (K+2) x (K+2)

  std::vector<ParamNode*> params();
  void check_signature(const EmbedderStack& stack) const;
};

struct TagTrainConfig {
  double lr = 0.1;
  double lr_anneal = 0.5;
  int patience = 2;
  int max_epochs = 20;
  int batch_size = 8;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  int hidden_dim = 32;
  int reproj_max = 256;  // reprojection kicks in when stacked dim exceeds it
  PoolOp pooling = PoolOp::Mean;
  bool reset_memory_each_epoch = true;
  bool forbid_illegal = false;  // hard-forbid BIO-illegal transitions
  int log_interval = 0;
};

TaggerModel init_tagger(const TagSet& tags, const EmbedderStack& stack,
                        const TagTrainConfig& cfg);

// Reproject -> BiLSTM -> affine; returns a T x K differentiable score
// matrix over the sentence's stacked token vectors.
Var emissions(TaggerModel& m, const std::vector<Matrix>& token_vectors);

// Gold-path score: sum of emissions along the path plus START/adjacent/STOP
// transitions.
double score_path(const Matrix& e, const Matrix& trans,
                  const std::vector<int>& tags, int start_index,
                  int stop_index);
Var score_path_var(const Var& e, const Var& trans, const std::vector<int>& tags,
                   int start_index, int stop_index);

// Log-partition over all K^T paths via the forward recursion in log space.
double crf_log_partition(const Matrix& e, const Matrix& trans, int start_index,
                         int stop_index);
// Differentiable version; the backward pass uses forward-backward marginals.
Var crf_log_partition_var(const Var& e, const Var& trans, int start_index,
                          int stop_index);

// logZ - score_path(gold); >= 0 up to roundoff.
Var crf_nll(const Var& e, const Var& trans, const std::vector<int>& gold_tags,
            int start_index, int stop_index);

// Argmax path; ties broken toward the lowest tag index at each backpointer
// decision.
std::pair<std::vector<int>, double> viterbi(const Matrix& e, const Matrix& trans,
                                            int start_index, int stop_index);

struct TagTrainLog {
  std::vector<double> dev_f1;  // one entry per epoch
  std::vector<double> train_loss;
  int best_epoch = -1;  // 1-based; -1 when no dev selection happened
};

// Fine-tunes a tagger on corpus.train with SGD + clipping; after each epoch
// dev span-F1 decides annealing and best-model selection (ties to the
// earlier epoch). Embedder parameters are frozen throughout.
TaggerModel train_tagger(const TaggedCorpus& corpus, EmbedderStack& stack,
                         const TagTrainConfig& cfg, TagTrainLog* log = nullptr);

std::vector<std::string> predict(TaggerModel& m, EmbedderStack& stack,
                                 const Sentence& s,
                                 const SentencePosition& pos = {"test", 0});

// Model file: magic "CTXTAG1\0", header (tag set, dims, embed signature,
// pooling), parameters in declared order; roundtrip is byte-exact.
void save_tagger(const TaggerModel& m, const std::string& path);
TaggerModel load_tagger(const std::string& path);

}  // namespace ctxtag
