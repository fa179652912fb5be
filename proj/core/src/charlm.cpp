#include "ctxtag/charlm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "ctxtag/io.hpp"
#include "ctxtag/optim.hpp"

namespace ctxtag {
namespace {

constexpr char kMagic[] = "CTXLM1";  // 7 bytes on disk including the NUL
constexpr std::uint32_t kVersion = 1;
// Placeholder codepoint stored for the UNK id in the vocab table.
constexpr char32_t kUnkPlaceholder = 0x110000;

// Row r of a V x E embedding matrix as an E x 1 column, differentiable.
Var embed_row(const Var& table, int row) {
  const int e = table->value.cols();
  Matrix out(e, 1);
  for (int c = 0; c < e; ++c) out.at(c, 0) = table->value.at(row, c);
  return make_node(std::move(out), {table}, [row](Node& n) {
    Node& t = *n.parents[0];
    if (!t.requires_grad) return;
    t.ensure_grad();
    for (int c = 0; c < n.value.rows(); ++c)
      t.grad.at(row, c) += n.grad.at(c, 0);
  });
}

}  // namespace

int CharVocabulary::id_of(char32_t c) const {
  auto it = char_to_id_.find(c);
  return it == char_to_id_.end() ? kUnkId : it->second;
}

std::vector<int> CharVocabulary::encode(const std::vector<char32_t>& chars) const {
  std::vector<int> ids(chars.size());
  for (size_t i = 0; i < chars.size(); ++i) ids[i] = id_of(chars[i]);
  return ids;
}

CharVocabulary CharVocabulary::from_chars(
    const std::vector<char32_t>& ordered_chars) {
  CharVocabulary v;
  v.id_to_char_ = {kUnkPlaceholder, CharStream::kSentinel, U'\n'};
  v.char_to_id_[CharStream::kSentinel] = kSentinelId;
  v.char_to_id_[U'\n'] = kNewlineId;
  for (char32_t c : ordered_chars) {
    if (c == CharStream::kSentinel || c == U'\n' || c == kUnkPlaceholder)
      continue;
    if (v.char_to_id_.count(c)) continue;
    v.char_to_id_[c] = static_cast<int>(v.id_to_char_.size());
    v.id_to_char_.push_back(c);
  }
  return v;
}

CharVocabulary build_char_vocab(const CharStream& stream, int min_freq) {
  std::map<char32_t, std::uint64_t> freq;
  for (char32_t c : stream.chars) {
    if (c == CharStream::kSentinel || c == U'\n') continue;
    ++freq[c];
  }
  std::vector<std::pair<char32_t, std::uint64_t>> entries(freq.begin(),
                                                          freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<char32_t> kept;
  for (const auto& [c, n] : entries) {
    if (n >= static_cast<std::uint64_t>(min_freq)) kept.push_back(c);
  }
  return CharVocabulary::from_chars(kept);
}

std::vector<ParamNode*> CharLMCheckpoint::params() {
  std::vector<ParamNode*> out = {&char_embed, &out_proj, &out_bias};
  for (ParamNode* p : lstm.params()) out.push_back(p);
  return out;
}

namespace {

CharLMCheckpoint init_checkpoint(LmDirection direction, CharVocabulary vocab,
                                 const LMTrainConfig& cfg) {
  Rng rng(cfg.seed);
  CharLMCheckpoint ckpt;
  ckpt.direction = direction;
  ckpt.vocab = std::move(vocab);
  ckpt.embed_dim = cfg.embed_dim;
  ckpt.hidden_dim = cfg.hidden_dim;
  const int v = ckpt.vocab.size();
  ckpt.char_embed = make_param(
      "lm.embed", init_uniform(v, cfg.embed_dim, cfg.embed_dim, rng));
  ckpt.lstm = make_lstm("lm.lstm", cfg.embed_dim, cfg.hidden_dim, rng);
  ckpt.out_proj = make_param(
      "lm.out_proj", init_uniform(v, cfg.hidden_dim, cfg.hidden_dim, rng));
  ckpt.out_bias = make_param("lm.out_bias", Matrix(v, 1));
  return ckpt;
}

// Mean next-char NLL over a span of ids; every id including the first
// (scored from the zero state) counts. State resets after a sentinel.
double mean_nll(const CharLMCheckpoint& ckpt, const std::vector<int>& ids) {
  const int h_dim = ckpt.hidden_dim;
  Matrix h(h_dim, 1), c(h_dim, 1);
  const Matrix& table = ckpt.char_embed.value();
  const Matrix& proj = ckpt.out_proj.value();
  const Matrix& bias = ckpt.out_bias.value();
  double total = 0;
  for (int id : ids) {
    // logits = proj * h + bias, score id under softmax
    real mx = 0;
    std::vector<real> logits(proj.rows());
    for (int r = 0; r < proj.rows(); ++r) {
      real acc = bias.at(r, 0);
      for (int k = 0; k < h_dim; ++k) acc += proj.at(r, k) * h.at(k, 0);
      logits[r] = acc;
      if (r == 0 || acc > mx) mx = acc;
    }
    real sum = 0;
    for (real l : logits) sum += std::exp(l - mx);
    total += std::log(sum) + mx - logits[id];

    if (id == CharVocabulary::kSentinelId) {
      h.fill(0);
      c.fill(0);
    } else {
      Matrix x(ckpt.embed_dim, 1);
      for (int k = 0; k < ckpt.embed_dim; ++k) x.at(k, 0) = table.at(id, k);
      auto [h2, c2] = lstm_cell_plain(x, h, c, ckpt.lstm.W.value(),
                                      ckpt.lstm.U.value(), ckpt.lstm.b.value());
      h = std::move(h2);
      c = std::move(c2);
    }
  }
  return total / static_cast<double>(ids.size());
}

void train_loop(CharLMCheckpoint& ckpt, const CharStream& stream,
                const LMTrainConfig& cfg, LmLossLog* loss_log) {
  std::vector<char32_t> chars = stream.chars;
  if (ckpt.direction == LmDirection::Backward)
    std::reverse(chars.begin(), chars.end());
  std::vector<int> ids = ckpt.vocab.encode(chars);

  ckpt.lineage.push_back(
      {stream.source_id, static_cast<std::uint64_t>(cfg.steps)});
  if (cfg.steps == 0) return;
  if (ids.size() < 2) throw ConfigError("train_lm: stream too small to train on");

  std::vector<int> heldout;
  if (cfg.holdout_frac > 0) {
    const size_t cut = static_cast<size_t>(
        static_cast<double>(ids.size()) * (1.0 - cfg.holdout_frac));
    if (cut >= 2 && cut < ids.size()) {
      heldout.assign(ids.begin() + static_cast<long>(cut), ids.end());
      ids.resize(cut);
    }
  }

  // Contiguous lane segments; each lane carries hidden state across windows.
  const int lanes = std::max(
      1, std::min<int>(cfg.batch_size, static_cast<int>(ids.size()) / 2));
  const size_t lane_len = ids.size() / lanes;
  struct Lane {
    size_t begin, end, pos;
    Matrix h, c;
  };
  std::vector<Lane> lane_states;
  for (int l = 0; l < lanes; ++l) {
    const size_t begin = l * lane_len;
    const size_t end = l + 1 == lanes ? ids.size() : begin + lane_len;
    lane_states.push_back({begin, end, begin, Matrix(cfg.hidden_dim, 1),
                           Matrix(cfg.hidden_dim, 1)});
  }

  std::vector<ParamNode*> params = ckpt.params();
  double lr = cfg.lr;
  double best_heldout = std::numeric_limits<double>::infinity();
  int stalls = 0;

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Var> losses;
    int predictions = 0;
    for (Lane& lane : lane_states) {
      Var h = constant(lane.h);
      Var c = constant(lane.c);
      for (int t = 0; t < cfg.seq_len; ++t) {
        if (lane.pos + 1 >= lane.end) lane.pos = lane.begin;
        const int input = ids[lane.pos];
        const int target = ids[lane.pos + 1];
        ++lane.pos;
        if (input == CharVocabulary::kSentinelId) {
          h = constant(Matrix(cfg.hidden_dim, 1));
          c = constant(Matrix(cfg.hidden_dim, 1));
        } else {
          auto state = lstm_cell(embed_row(ckpt.char_embed.node, input), h, c,
                                 ckpt.lstm);
          h = state.h;
          c = state.c;
        }
        Var logits = vadd(mm(ckpt.out_proj.node, h), ckpt.out_bias.node);
        losses.push_back(softmax_nll(logits, target));
        ++predictions;
      }
      // truncate: carry values, not graph
      lane.h = h->value;
      lane.c = c->value;
    }
    Var loss = vscale(concat_rows(losses), real{1} / predictions);
    loss = sum_all(loss);
    if (!std::isfinite(loss->scalar()))
      throw NumericError("train_lm: non-finite loss at step " +
                         std::to_string(step));
    const int sample_every =
        cfg.log_interval > 0 ? cfg.log_interval : std::max(1, cfg.steps / 50);
    if (step % sample_every == 0) {
      if (loss_log) loss_log->emplace_back(step, loss->scalar());
      if (cfg.log_interval > 0)
        std::cerr << "lm step " << step << " loss " << loss->scalar() << " lr "
                  << lr << "\n";
    }
    // lr may be 0 when a caller wants the lineage bookkeeping of a
    // continuation pass without touching parameters
    if (lr > 0) {
      backward(loss);
      sgd_step(params, static_cast<real>(lr), static_cast<real>(cfg.clip_norm));
    }

    if (!heldout.empty() && cfg.eval_interval > 0 &&
        (step + 1) % cfg.eval_interval == 0) {
      const double nll = mean_nll(ckpt, heldout);
      if (nll < best_heldout - 1e-9) {
        best_heldout = nll;
        stalls = 0;
      } else if (++stalls >= cfg.patience) {
        lr *= cfg.lr_anneal;
        stalls = 0;
      }
    }
  }
}

}  // namespace

CharLMCheckpoint train_lm(const CharStream& stream, LmDirection direction,
                          const LMTrainConfig& config, int min_freq,
                          LmLossLog* loss_log) {
  if (stream.chars.empty()) throw ConfigError("train_lm: empty stream");
  CharLMCheckpoint ckpt =
      init_checkpoint(direction, build_char_vocab(stream, min_freq), config);
  train_loop(ckpt, stream, config, loss_log);
  return ckpt;
}

void continue_pretrain(CharLMCheckpoint& ckpt, const CharStream& stream,
                       const LMTrainConfig& config, LmLossLog* loss_log) {
  if (stream.chars.empty()) throw ConfigError("continue_pretrain: empty stream");
  if (config.hidden_dim != ckpt.hidden_dim || config.embed_dim != ckpt.embed_dim)
    throw FormatError("continue_pretrain: config dims (" +
                      std::to_string(config.embed_dim) + "," +
                      std::to_string(config.hidden_dim) +
                      ") do not match checkpoint (" +
                      std::to_string(ckpt.embed_dim) + "," +
                      std::to_string(ckpt.hidden_dim) + ")");
  train_loop(ckpt, stream, config, loss_log);
}

double cross_entropy(const CharLMCheckpoint& ckpt, const CharStream& stream) {
  if (stream.chars.empty()) throw ConfigError("cross_entropy: empty stream");
  std::vector<char32_t> chars = stream.chars;
  if (ckpt.direction == LmDirection::Backward)
    std::reverse(chars.begin(), chars.end());
  return mean_nll(ckpt, ckpt.vocab.encode(chars));
}

double perplexity(const CharLMCheckpoint& ckpt, const CharStream& stream) {
  return std::exp(cross_entropy(ckpt, stream));
}

std::vector<Matrix> hidden_states(const CharLMCheckpoint& ckpt,
                                  const std::vector<int>& char_ids) {
  std::vector<int> ids = char_ids;
  if (ckpt.direction == LmDirection::Backward)
    std::reverse(ids.begin(), ids.end());

  std::vector<Matrix> states;
  states.reserve(ids.size());
  Matrix h(ckpt.hidden_dim, 1), c(ckpt.hidden_dim, 1);
  const Matrix& table = ckpt.char_embed.value();
  for (int id : ids) {
    if (id < 0 || id >= ckpt.vocab.size())
      throw DimensionError("hidden_states: char id out of range");
    Matrix x(ckpt.embed_dim, 1);
    for (int k = 0; k < ckpt.embed_dim; ++k) x.at(k, 0) = table.at(id, k);
    auto [h2, c2] = lstm_cell_plain(x, h, c, ckpt.lstm.W.value(),
                                    ckpt.lstm.U.value(), ckpt.lstm.b.value());
    h = std::move(h2);
    c = std::move(c2);
    states.push_back(h);
  }
  if (ckpt.direction == LmDirection::Backward)
    std::reverse(states.begin(), states.end());
  return states;
}

void save_checkpoint(const CharLMCheckpoint& ckpt, const std::string& path) {
  BinaryWriter w(path);
  w.bytes(kMagic, 7);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(sizeof(real)));
  w.u8(static_cast<std::uint8_t>(ckpt.direction));
  w.u32(static_cast<std::uint32_t>(ckpt.embed_dim));
  w.u32(static_cast<std::uint32_t>(ckpt.hidden_dim));
  const auto& table = ckpt.vocab.table();
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (char32_t cp : table) w.u32(static_cast<std::uint32_t>(cp));
  w.u32(static_cast<std::uint32_t>(ckpt.lineage.size()));
  for (const auto& rec : ckpt.lineage) {
    w.str(rec.corpus_id);
    w.u64(rec.steps);
  }
  w.matrix(ckpt.char_embed.value());
  w.matrix(ckpt.lstm.W.value());
  w.matrix(ckpt.lstm.U.value());
  w.matrix(ckpt.lstm.b.value());
  w.matrix(ckpt.out_proj.value());
  w.matrix(ckpt.out_bias.value());
  w.close();
}

CharLMCheckpoint load_checkpoint(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic, 7, "char-LM checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " in " + path);
  r.expect_precision(r.u8());

  CharLMCheckpoint ckpt;
  ckpt.direction = static_cast<LmDirection>(r.u8());
  ckpt.embed_dim = static_cast<int>(r.u32());
  ckpt.hidden_dim = static_cast<int>(r.u32());
  const std::uint32_t v = r.u32();
  std::vector<char32_t> table(v);
  for (auto& cp : table) cp = static_cast<char32_t>(r.u32());
  if (v < 3 || table[1] != CharStream::kSentinel || table[2] != U'\n')
    throw FormatError("corrupt vocab table in " + path);
  ckpt.vocab =
      CharVocabulary::from_chars({table.begin() + 3, table.end()});
  if (ckpt.vocab.size() != static_cast<int>(v))
    throw FormatError("corrupt vocab table in " + path);

  const std::uint32_t n_lineage = r.u32();
  for (std::uint32_t i = 0; i < n_lineage; ++i) {
    LineageRecord rec;
    rec.corpus_id = r.str();
    rec.steps = r.u64();
    ckpt.lineage.push_back(std::move(rec));
  }
  ckpt.char_embed = make_param("lm.embed", r.matrix());
  ckpt.lstm.input_dim = ckpt.embed_dim;
  ckpt.lstm.hidden_dim = ckpt.hidden_dim;
  ckpt.lstm.W = make_param("lm.lstm.W", r.matrix());
  ckpt.lstm.U = make_param("lm.lstm.U", r.matrix());
  ckpt.lstm.b = make_param("lm.lstm.b", r.matrix());
  ckpt.out_proj = make_param("lm.out_proj", r.matrix());
  ckpt.out_bias = make_param("lm.out_bias", r.matrix());
  if (ckpt.char_embed.value().rows() != static_cast<int>(v) ||
      ckpt.char_embed.value().cols() != ckpt.embed_dim ||
      ckpt.lstm.W.value().rows() != 4 * ckpt.hidden_dim ||
      ckpt.out_proj.value().cols() != ckpt.hidden_dim)
    throw FormatError("inconsistent shapes in " + path);
  return ckpt;
}

}  // namespace ctxtag
