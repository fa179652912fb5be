#include "ctxtag/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ctxtag/eval.hpp"
#include "ctxtag/io.hpp"
#include "ctxtag/optim.hpp"

namespace ctxtag {
namespace {

constexpr char kMagic[] = "CTXTAG1";  // 8 bytes on disk including the NUL
constexpr std::uint32_t kVersion = 1;

double logsumexp(const std::vector<double>& xs) {
  double mx = xs[0];
  for (double x : xs) mx = std::max(mx, x);
  double sum = 0;
  for (double x : xs) sum += std::exp(x - mx);
  return std::log(sum) + mx;
}

// K x 1 column as a 1 x K row, differentiable.
Var col_as_row(const Var& col) {
  const int k = col->value.rows();
  Matrix out(1, k);
  for (int i = 0; i < k; ++i) out.at(0, i) = col->value.at(i, 0);
  return make_node(std::move(out), {col}, [](Node& n) {
    Node& c = *n.parents[0];
    if (!c.requires_grad) return;
    c.ensure_grad();
    for (int i = 0; i < n.value.cols(); ++i)
      c.grad.at(i, 0) += n.grad.at(0, i);
  });
}

// True for transitions the BIO grammar forbids: anything entering I-X from a
// tag that is not B-X or I-X (including START).
std::vector<std::pair<int, int>> illegal_transitions(const TagSet& tags) {
  std::vector<std::pair<int, int>> out;
  const int k = tags.size();
  for (int j = 0; j < k; ++j) {
    const std::string& to = tags.label(j);
    if (to[0] != 'I') continue;
    const std::string type = bio_entity_type(to);
    for (int i = 0; i < k; ++i) {
      const std::string& from = tags.label(i);
      if (from != "B-" + type && from != "I-" + type) out.emplace_back(i, j);
    }
    out.emplace_back(tags.start_index(), j);
  }
  return out;
}

void clamp_forbidden(TaggerModel& m) {
  Matrix& t = m.trans.value();
  const int start = m.tag_set.start_index();
  const int stop = m.tag_set.stop_index();
  for (int i = 0; i < t.rows(); ++i) t.at(i, start) = kForbiddenScore;
  for (int j = 0; j < t.cols(); ++j) t.at(stop, j) = kForbiddenScore;
  if (m.forbid_illegal) {
    for (const auto& [i, j] : illegal_transitions(m.tag_set))
      t.at(i, j) = kForbiddenScore;
  }
}

}  // namespace

TagSet TagSet::from_entity_types(const std::set<std::string>& types) {
  std::vector<std::string> labels = {"O"};
  for (const auto& type : types) {
    labels.push_back("B-" + type);
    labels.push_back("I-" + type);
  }
  std::sort(labels.begin(), labels.end());
  return from_labels(std::move(labels));
}

TagSet TagSet::from_labels(std::vector<std::string> sorted_labels) {
  TagSet t;
  t.labels_ = std::move(sorted_labels);
  if (!std::is_sorted(t.labels_.begin(), t.labels_.end()))
    throw DataError("TagSet: labels must be sorted");
  if (std::find(t.labels_.begin(), t.labels_.end(), "O") == t.labels_.end())
    throw DataError("TagSet: must contain 'O'");
  return t;
}

int TagSet::index_of(const std::string& label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label)
    throw DataError("TagSet: unknown label '" + label + "'");
  return static_cast<int>(it - labels_.begin());
}

std::vector<ParamNode*> TaggerModel::params() {
  std::vector<ParamNode*> out;
  if (has_reproj) {
    out.push_back(&reproj_w);
    out.push_back(&reproj_b);
  }
  for (ParamNode* p : fwd.params()) out.push_back(p);
  for (ParamNode* p : bwd.params()) out.push_back(p);
  out.push_back(&emit_w);
  out.push_back(&emit_b);
  out.push_back(&trans);
  return out;
}

void TaggerModel::check_signature(const EmbedderStack& stack) const {
  if (stack.signature() != embed_signature)
    throw ConfigError(
        "embedder stack does not match the model's embed signature "
        "(check stack kinds, order and dimensions)");
}

TaggerModel init_tagger(const TagSet& tags, const EmbedderStack& stack,
                        const TagTrainConfig& cfg) {
  Rng rng(cfg.seed);
  TaggerModel m;
  m.tag_set = tags;
  m.embed_signature = stack.signature();
  m.pooling = cfg.pooling;
  m.forbid_illegal = cfg.forbid_illegal;
  m.input_dim = stack.dim();
  m.has_reproj = m.input_dim > cfg.reproj_max;
  m.reproj_dim = m.has_reproj ? cfg.reproj_max : m.input_dim;
  m.hidden_dim = cfg.hidden_dim;
  const int k = tags.size();

  if (m.has_reproj) {
    m.reproj_w = make_param(
        "tag.reproj_w", init_uniform(m.reproj_dim, m.input_dim, m.input_dim, rng));
    m.reproj_b = make_param("tag.reproj_b", Matrix(m.reproj_dim, 1));
  }
  m.fwd = make_lstm("tag.fwd", m.reproj_dim, cfg.hidden_dim, rng);
  m.bwd = make_lstm("tag.bwd", m.reproj_dim, cfg.hidden_dim, rng);
  m.emit_w = make_param(
      "tag.emit_w",
      init_uniform(k, 2 * cfg.hidden_dim, 2 * cfg.hidden_dim, rng));
  m.emit_b = make_param("tag.emit_b", Matrix(k, 1));
  m.trans = make_param("tag.trans",
                       init_uniform(k + 2, k + 2, k + 2, rng));
  clamp_forbidden(m);
  return m;
}

Var emissions(TaggerModel& m, const std::vector<Matrix>& token_vectors) {
  const int t_len = static_cast<int>(token_vectors.size());
  if (t_len == 0) throw DimensionError("emissions: empty sentence");
  for (const auto& v : token_vectors) {
    if (v.rows() != m.input_dim || v.cols() != 1)
      throw DimensionError("emissions: token vector dim " +
                           std::to_string(v.rows()) + " != model input dim " +
                           std::to_string(m.input_dim));
  }

  std::vector<Var> inputs;
  inputs.reserve(t_len);
  for (const auto& v : token_vectors) {
    Var x = constant(v);
    if (m.has_reproj) x = vadd(mm(m.reproj_w.node, x), m.reproj_b.node);
    inputs.push_back(x);
  }

  const int w = m.hidden_dim;
  std::vector<Var> fwd_states(t_len), bwd_states(t_len);
  Var h = constant(Matrix(w, 1)), c = constant(Matrix(w, 1));
  for (int t = 0; t < t_len; ++t) {
    auto st = lstm_cell(inputs[t], h, c, m.fwd);
    h = st.h;
    c = st.c;
    fwd_states[t] = h;
  }
  h = constant(Matrix(w, 1));
  c = constant(Matrix(w, 1));
  for (int t = t_len - 1; t >= 0; --t) {
    auto st = lstm_cell(inputs[t], h, c, m.bwd);
    h = st.h;
    c = st.c;
    bwd_states[t] = h;
  }

  std::vector<Var> rows;
  rows.reserve(t_len);
  for (int t = 0; t < t_len; ++t) {
    Var state = concat_rows({fwd_states[t], bwd_states[t]});
    rows.push_back(col_as_row(vadd(mm(m.emit_w.node, state), m.emit_b.node)));
  }
  return concat_rows(rows);
}

double score_path(const Matrix& e, const Matrix& trans,
                  const std::vector<int>& tags, int start_index,
                  int stop_index) {
  const int t_len = e.rows();
  if (static_cast<int>(tags.size()) != t_len)
    throw DimensionError("score_path: tag sequence length mismatch");
  double score = 0;
  for (int t = 0; t < t_len; ++t) score += e.at(t, tags[t]);
  score += trans.at(start_index, tags[0]);
  for (int t = 1; t < t_len; ++t) score += trans.at(tags[t - 1], tags[t]);
  score += trans.at(tags[t_len - 1], stop_index);
  return score;
}

Var score_path_var(const Var& e, const Var& trans, const std::vector<int>& tags,
                   int start_index, int stop_index) {
  const int t_len = e->value.rows();
  std::vector<Var> terms;
  for (int t = 0; t < t_len; ++t) terms.push_back(pick(e, t, tags[t]));
  terms.push_back(pick(trans, start_index, tags[0]));
  for (int t = 1; t < t_len; ++t)
    terms.push_back(pick(trans, tags[t - 1], tags[t]));
  terms.push_back(pick(trans, tags[t_len - 1], stop_index));
  return sum_all(concat_rows(terms));
}

namespace {

// Shared forward recursion; returns alpha (T x K) and logZ.
std::pair<std::vector<std::vector<double>>, double> crf_forward(
    const Matrix& e, const Matrix& trans, int start_index, int stop_index) {
  const int t_len = e.rows();
  const int k = e.cols();
  std::vector<std::vector<double>> alpha(t_len, std::vector<double>(k));
  for (int j = 0; j < k; ++j)
    alpha[0][j] = trans.at(start_index, j) + e.at(0, j);
  std::vector<double> acc(k);
  for (int t = 1; t < t_len; ++t) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) acc[i] = alpha[t - 1][i] + trans.at(i, j);
      alpha[t][j] = logsumexp(acc) + e.at(t, j);
    }
  }
  std::vector<double> final_scores(k);
  for (int j = 0; j < k; ++j)
    final_scores[j] = alpha[t_len - 1][j] + trans.at(j, stop_index);
  return {std::move(alpha), logsumexp(final_scores)};
}

}  // namespace

double crf_log_partition(const Matrix& e, const Matrix& trans, int start_index,
                         int stop_index) {
  if (e.rows() < 1) throw DimensionError("crf_log_partition: T must be >= 1");
  return crf_forward(e, trans, start_index, stop_index).second;
}

Var crf_log_partition_var(const Var& e, const Var& trans, int start_index,
                          int stop_index) {
  const double log_z =
      crf_log_partition(e->value, trans->value, start_index, stop_index);
  return make_node(
      Matrix(1, 1, {static_cast<real>(log_z)}), {e, trans},
      [start_index, stop_index, log_z](Node& n) {
        const Matrix& e_val = n.parents[0]->value;
        const Matrix& t_val = n.parents[1]->value;
        const int t_len = e_val.rows();
        const int k = e_val.cols();
        const auto [alpha, z] =
            crf_forward(e_val, t_val, start_index, stop_index);
        (void)z;  // matches log_z

        // beta[t][i] = log-sum of path suffixes leaving position t at tag i
        std::vector<std::vector<double>> beta(t_len, std::vector<double>(k));
        for (int i = 0; i < k; ++i)
          beta[t_len - 1][i] = t_val.at(i, stop_index);
        std::vector<double> acc(k);
        for (int t = t_len - 2; t >= 0; --t) {
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j)
              acc[j] = t_val.at(i, j) + e_val.at(t + 1, j) + beta[t + 1][j];
            beta[t][i] = logsumexp(acc);
          }
        }

        const double g = n.grad[0];
        Node& e_node = *n.parents[0];
        Node& t_node = *n.parents[1];
        if (e_node.requires_grad) {
          e_node.ensure_grad();
          for (int t = 0; t < t_len; ++t)
            for (int j = 0; j < k; ++j)
              e_node.grad.at(t, j) += static_cast<real>(
                  g * std::exp(alpha[t][j] + beta[t][j] - log_z));
        }
        if (t_node.requires_grad) {
          t_node.ensure_grad();
          for (int j = 0; j < k; ++j) {
            // START -> j at position 0; j -> STOP at T-1
            t_node.grad.at(start_index, j) += static_cast<real>(
                g * std::exp(alpha[0][j] + beta[0][j] - log_z));
            t_node.grad.at(j, stop_index) += static_cast<real>(
                g * std::exp(alpha[t_len - 1][j] + t_val.at(j, stop_index) -
                             log_z));
          }
          for (int t = 0; t + 1 < t_len; ++t)
            for (int i = 0; i < k; ++i)
              for (int j = 0; j < k; ++j)
                t_node.grad.at(i, j) += static_cast<real>(
                    g * std::exp(alpha[t][i] + t_val.at(i, j) +
                                 e_val.at(t + 1, j) + beta[t + 1][j] - log_z));
        }
      });
}

Var crf_nll(const Var& e, const Var& trans, const std::vector<int>& gold_tags,
            int start_index, int stop_index) {
  return vsub(crf_log_partition_var(e, trans, start_index, stop_index),
              score_path_var(e, trans, gold_tags, start_index, stop_index));
}

std::pair<std::vector<int>, double> viterbi(const Matrix& e, const Matrix& trans,
                                            int start_index, int stop_index) {
  const int t_len = e.rows();
  const int k = e.cols();
  if (t_len < 1) throw DimensionError("viterbi: T must be >= 1");

  std::vector<std::vector<double>> v(t_len, std::vector<double>(k));
  std::vector<std::vector<int>> bp(t_len, std::vector<int>(k, 0));
  for (int j = 0; j < k; ++j) v[0][j] = trans.at(start_index, j) + e.at(0, j);
  for (int t = 1; t < t_len; ++t) {
    for (int j = 0; j < k; ++j) {
      int best_i = 0;
      double best = v[t - 1][0] + trans.at(0, j);
      for (int i = 1; i < k; ++i) {
        const double cand = v[t - 1][i] + trans.at(i, j);
        if (cand > best) {  // ties keep the lowest i
          best = cand;
          best_i = i;
        }
      }
      v[t][j] = best + e.at(t, j);
      bp[t][j] = best_i;
    }
  }
  int best_j = 0;
  double best = v[t_len - 1][0] + trans.at(0, stop_index);
  for (int j = 1; j < k; ++j) {
    const double cand = v[t_len - 1][j] + trans.at(j, stop_index);
    if (cand > best) {
      best = cand;
      best_j = j;
    }
  }
  std::vector<int> tags(t_len);
  tags[t_len - 1] = best_j;
  for (int t = t_len - 1; t > 0; --t) tags[t - 1] = bp[t][tags[t]];
  return {tags, best};
}

namespace {

std::vector<int> gold_indices(const TagSet& tags, const Sentence& s) {
  std::vector<int> out;
  out.reserve(s.tokens.size());
  for (const auto& t : s.tokens) out.push_back(tags.index_of(t.gold_label));
  return out;
}

std::vector<Matrix> snapshot(std::vector<ParamNode*>& params) {
  std::vector<Matrix> out;
  for (ParamNode* p : params) out.push_back(p->value());
  return out;
}

void restore(std::vector<ParamNode*>& params, const std::vector<Matrix>& snap) {
  for (size_t i = 0; i < params.size(); ++i) params[i]->value() = snap[i];
}

double dev_span_f1(TaggerModel& m, EmbedderStack& stack,
                   const std::vector<Sentence>& dev) {
  std::vector<std::vector<std::string>> predicted;
  predicted.reserve(dev.size());
  for (int i = 0; i < static_cast<int>(dev.size()); ++i)
    predicted.push_back(predict(m, stack, dev[i], {"dev", i}));
  return evaluate(dev, predicted).f1;
}

}  // namespace

TaggerModel train_tagger(const TaggedCorpus& corpus, EmbedderStack& stack,
                         const TagTrainConfig& cfg, TagTrainLog* log) {
  if (corpus.train.empty())
    throw ConfigError("train_tagger: empty train split for '" + corpus.name + "'");

  TaggerModel m = init_tagger(TagSet::from_entity_types(corpus.tag_set), stack, cfg);
  std::vector<ParamNode*> params = m.params();
  const int start = m.tag_set.start_index();
  const int stop = m.tag_set.stop_index();

  double lr = cfg.lr;
  double best_f1 = -1;
  std::vector<Matrix> best_params;
  int stalls = 0;

  if (cfg.max_epochs == 0 && log && !corpus.dev.empty()) {
    stack.reset_memory();
    log->dev_f1.push_back(dev_span_f1(m, stack, corpus.dev));
  }

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.reset_memory_each_epoch) stack.reset_memory();
    double epoch_loss = 0;
    long batches = 0;
    for (size_t b = 0; b < corpus.train.size(); b += cfg.batch_size) {
      std::vector<Var> losses;
      const size_t b_end =
          std::min(corpus.train.size(), b + static_cast<size_t>(cfg.batch_size));
      for (size_t i = b; i < b_end; ++i) {
        const Sentence& s = corpus.train[i];
        const std::vector<Matrix> vecs =
            stack.embed(s, {"train", static_cast<int>(i)});
        Var e = emissions(m, vecs);
        losses.push_back(
            crf_nll(e, m.trans.node, gold_indices(m.tag_set, s), start, stop));
      }
      Var loss = sum_all(
          vscale(concat_rows(losses), real{1} / static_cast<real>(losses.size())));
      if (!std::isfinite(loss->scalar()))
        throw NumericError("train_tagger: non-finite loss in epoch " +
                           std::to_string(epoch) + " at sentence " +
                           std::to_string(b));
      epoch_loss += loss->scalar();
      ++batches;
      backward(loss);
      sgd_step(params, static_cast<real>(lr), static_cast<real>(cfg.clip_norm));
      clamp_forbidden(m);
    }
    if (log) log->train_loss.push_back(epoch_loss / std::max(1L, batches));

    if (!corpus.dev.empty()) {
      stack.reset_memory();
      const double f1 = dev_span_f1(m, stack, corpus.dev);
      if (log) log->dev_f1.push_back(f1);
      if (cfg.log_interval > 0)
        std::cerr << "epoch " << epoch << " loss "
                  << epoch_loss / std::max(1L, batches) << " dev F1 " << f1
                  << " lr " << lr << "\n";
      if (f1 > best_f1) {  // ties keep the earlier epoch
        best_f1 = f1;
        best_params = snapshot(params);
        if (log) log->best_epoch = epoch;
        stalls = 0;
      } else if (++stalls >= cfg.patience) {
        lr *= cfg.lr_anneal;
        stalls = 0;
      }
    }
  }
  if (!best_params.empty()) restore(params, best_params);
  return m;
}

std::vector<std::string> predict(TaggerModel& m, EmbedderStack& stack,
                                 const Sentence& s, const SentencePosition& pos) {
  m.check_signature(stack);
  const std::vector<Matrix> vecs = stack.embed(s, pos);
  const Var e = emissions(m, vecs);
  const auto [tags, score] =
      viterbi(e->value, m.trans.value(), m.tag_set.start_index(),
              m.tag_set.stop_index());
  (void)score;
  std::vector<std::string> labels;
  labels.reserve(tags.size());
  for (int t : tags) labels.push_back(m.tag_set.label(t));
  return labels;
}

void save_tagger(const TaggerModel& m, const std::string& path) {
  BinaryWriter w(path);
  w.bytes(kMagic, 8);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(sizeof(real)));
  w.u8(static_cast<std::uint8_t>(m.pooling));
  w.u8(m.has_reproj ? 1 : 0);
  w.u8(m.forbid_illegal ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(m.tag_set.size()));
  for (const auto& label : m.tag_set.labels()) w.str(label);
  w.u32(static_cast<std::uint32_t>(m.input_dim));
  w.u32(static_cast<std::uint32_t>(m.reproj_dim));
  w.u32(static_cast<std::uint32_t>(m.hidden_dim));
  w.u32(static_cast<std::uint32_t>(m.embed_signature.size()));
  for (const auto& [kind, dim] : m.embed_signature) {
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(static_cast<std::uint32_t>(dim));
  }
  auto& mm = const_cast<TaggerModel&>(m);
  if (m.has_reproj) {
    w.matrix(mm.reproj_w.value());
    w.matrix(mm.reproj_b.value());
  }
  w.matrix(mm.fwd.W.value());
  w.matrix(mm.fwd.U.value());
  w.matrix(mm.fwd.b.value());
  w.matrix(mm.bwd.W.value());
  w.matrix(mm.bwd.U.value());
  w.matrix(mm.bwd.b.value());
  w.matrix(mm.emit_w.value());
  w.matrix(mm.emit_b.value());
  w.matrix(mm.trans.value());
  w.close();
}

TaggerModel load_tagger(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic, 8, "tagger model");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("unsupported tagger version " + std::to_string(version) +
                      " in " + path);
  r.expect_precision(r.u8());

  TaggerModel m;
  m.pooling = static_cast<PoolOp>(r.u8());
  m.has_reproj = r.u8() != 0;
  m.forbid_illegal = r.u8() != 0;
  const std::uint32_t k = r.u32();
  std::vector<std::string> labels(k);
  for (auto& label : labels) label = r.str();
  m.tag_set = TagSet::from_labels(std::move(labels));
  m.input_dim = static_cast<int>(r.u32());
  m.reproj_dim = static_cast<int>(r.u32());
  m.hidden_dim = static_cast<int>(r.u32());
  const std::uint32_t n_sig = r.u32();
  for (std::uint32_t i = 0; i < n_sig; ++i) {
    const auto kind = static_cast<EmbedderKind>(r.u8());
    m.embed_signature.emplace_back(kind, static_cast<int>(r.u32()));
  }
  if (m.has_reproj) {
    m.reproj_w = make_param("tag.reproj_w", r.matrix());
    m.reproj_b = make_param("tag.reproj_b", r.matrix());
  }
  m.fwd.input_dim = m.bwd.input_dim = m.reproj_dim;
  m.fwd.hidden_dim = m.bwd.hidden_dim = m.hidden_dim;
  m.fwd.W = make_param("tag.fwd.W", r.matrix());
  m.fwd.U = make_param("tag.fwd.U", r.matrix());
  m.fwd.b = make_param("tag.fwd.b", r.matrix());
  m.bwd.W = make_param("tag.bwd.W", r.matrix());
  m.bwd.U = make_param("tag.bwd.U", r.matrix());
  m.bwd.b = make_param("tag.bwd.b", r.matrix());
  m.emit_w = make_param("tag.emit_w", r.matrix());
  m.emit_b = make_param("tag.emit_b", r.matrix());
  m.trans = make_param("tag.trans", r.matrix());
  if (m.trans.value().rows() != m.tag_set.size() + 2 ||
      m.emit_w.value().rows() != m.tag_set.size() ||
      m.fwd.W.value().rows() != 4 * m.hidden_dim)
    throw FormatError("inconsistent shapes in " + path);
  return m;
}

}  // namespace ctxtag
