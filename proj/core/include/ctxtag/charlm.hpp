#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxtag/corpus.hpp"
#include "ctxtag/lstm.hpp"

namespace ctxtag {

// Character vocabulary with three reserved ids. The vocabulary freezes at
// first pretraining; continuation maps unseen characters to UNK.
class CharVocabulary {
 public:
  static constexpr int kUnkId = 0;
  static constexpr int kSentinelId = 1;
  static constexpr int kNewlineId = 2;

  CharVocabulary() = default;

  int id_of(char32_t c) const;
  int size() const { return static_cast<int>(id_to_char_.size()); }
  // Reserved ids report placeholder codepoints; see checkpoint format notes.
  char32_t char_of(int id) const { return id_to_char_[id]; }

  std::vector<int> encode(const std::vector<char32_t>& chars) const;

  static CharVocabulary from_chars(const std::vector<char32_t>& ordered_chars);
  const std::vector<char32_t>& table() const { return id_to_char_; }

  bool operator==(const CharVocabulary&) const = default;

 private:
  std::vector<char32_t> id_to_char_;
  std::map<char32_t, int> char_to_id_;
};

// Chars with frequency >= min_freq, ids ordered by descending frequency then
// ascending codepoint, after the reserved ids.
CharVocabulary build_char_vocab(const CharStream& stream, int min_freq);

enum class LmDirection : std::uint8_t { Forward = 0, Backward = 1 };

struct LineageRecord {
  std::string corpus_id;
  std::uint64_t steps = 0;
  bool operator==(const LineageRecord&) const = default;
};

struct CharLMCheckpoint {
  LmDirection direction = LmDirection::Forward;
  CharVocabulary vocab;
  int embed_dim = 0;
  int hidden_dim = 0;
  ParamNode char_embed;  // V x E
  LstmCellParams lstm;   // E -> H
  ParamNode out_proj;    // V x H
  ParamNode out_bias;    // V x 1
  std::vector<LineageRecord> lineage;

  std::vector<ParamNode*> params();
};

struct LMTrainConfig {
  int seq_len = 32;       // truncated-BPTT window
  int batch_size = 8;
  double lr = 0.5;
  double lr_anneal = 0.5;   // factor applied when held-out loss stalls
  int patience = 1;         // evaluations without improvement before anneal
  int steps = 1000;
  std::uint64_t seed = 1;
  int hidden_dim = 64;
  int embed_dim = 16;
  double clip_norm = 5.0;
  double holdout_frac = 0.0;  // tail fraction of the stream held out for
                              // anneal decisions; 0 disables annealing
  int eval_interval = 100;
  int log_interval = 0;       // 0 = silent
};

// (step, training loss) samples collected during pretraining.
using LmLossLog = std::vector<std::pair<int, double>>;

// Fresh pretraining: builds the vocabulary from the stream, initializes
// parameters from the seed, then trains next-character cross-entropy with
// truncated BPTT. Backward models train on the reversed stream. Hidden state
// carries across windows within a batch lane and resets at sentinels.
CharLMCheckpoint train_lm(const CharStream& stream, LmDirection direction,
                          const LMTrainConfig& config, int min_freq = 1,
                          LmLossLog* loss_log = nullptr);

// Resumes training from existing parameters; vocabulary is frozen, lineage
// is appended, direction unchanged.
void continue_pretrain(CharLMCheckpoint& ckpt, const CharStream& stream,
                       const LMTrainConfig& config,
                       LmLossLog* loss_log = nullptr);

// exp(mean next-char negative log-likelihood); every character including
// the first (predicted from the zero state) counts.
double perplexity(const CharLMCheckpoint& ckpt, const CharStream& stream);

// Mean per-char cross-entropy in nats over the stream (same pass as
// perplexity, without the exp).
double cross_entropy(const CharLMCheckpoint& ckpt, const CharStream& stream);

// Hidden state after consuming chars[0..=t] (forward) or after consuming the
// reversed sequence down to position t (backward). One H x 1 column each.
std::vector<Matrix> hidden_states(const CharLMCheckpoint& ckpt,
                                  const std::vector<int>& char_ids);

// Checkpoint file: magic "CTXLM1\0", little-endian header (version,
// precision, direction, dims, vocab table, lineage), then parameter matrices
// in declaration order, row-major. Roundtrip is byte-exact.
void save_checkpoint(const CharLMCheckpoint& ckpt, const std::string& path);
CharLMCheckpoint load_checkpoint(const std::string& path);

}  // namespace ctxtag
