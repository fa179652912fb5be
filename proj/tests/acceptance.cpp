// End-to-end acceptance suite. Each criterion prints exactly one PASS/FAIL
// line; the binary exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

#include "ctxtag/config.hpp"
#include "ctxtag/eval.hpp"
#include "ctxtag/optim.hpp"
#include "ctxtag/study.hpp"
#include "ctxtag/tagger.hpp"
#include "test_util.hpp"

using namespace ctxtag;
namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw Failure{message};
}

int g_failed = 0;

void criterion(int number, const std::string& title,
               const std::function<void()>& body) {
  try {
    body();
    std::printf("PASS  %2d. %s\n", number, title.c_str());
  } catch (const Failure& f) {
    std::printf("FAIL  %2d. %s -- %s\n", number, title.c_str(),
                f.message.c_str());
    ++g_failed;
  } catch (const std::exception& e) {
    std::printf("FAIL  %2d. %s -- exception: %s\n", number, title.c_str(),
                e.what());
    ++g_failed;
  }
  std::fflush(stdout);
}

const fs::path kRoot = fs::temp_directory_path() / "ctxtag_acceptance";

std::string p(const std::string& rel) { return (kRoot / rel).string(); }

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot read " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

Matrix normal_scores(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = static_cast<real>(rng.normal());
  return m;
}

// Left-to-right path score with the same association order Viterbi uses.
double path_score_ltr(const Matrix& e, const Matrix& trans,
                      const std::vector<int>& path, int S, int P) {
  const int t_len = e.rows();
  double sc = trans.at(S, path[0]) + e.at(0, path[0]);
  for (int t = 1; t < t_len; ++t)
    sc = sc + trans.at(path[t - 1], path[t]) + e.at(t, path[t]);
  return sc + trans.at(path[t_len - 1], P);
}

template <typename Fn>
void for_each_path(int t_len, int k, Fn&& fn) {
  std::vector<int> path(t_len, 0);
  while (true) {
    fn(path);
    int t = t_len - 1;
    while (t >= 0 && ++path[t] == k) path[t--] = 0;
    if (t < 0) break;
  }
}

struct RandomCrfInstance {
  Matrix e, trans;
  int S, P;
};

RandomCrfInstance random_instance(Rng& rng, int max_t, int max_k) {
  const int t_len = 1 + static_cast<int>(rng.next_below(max_t));
  const int k = 2 + static_cast<int>(rng.next_below(max_k - 1));
  RandomCrfInstance inst;
  inst.e = normal_scores(t_len, k, rng);
  inst.trans = normal_scores(k + 2, k + 2, rng);
  inst.S = k;
  inst.P = k + 1;
  return inst;
}

// Differentiable one-step char-LM loss over every checkpoint parameter:
// embed one char, run the LSTM once, project, score a target char.
Var charlm_one_step_loss(CharLMCheckpoint& ckpt, int input_id, int target_id) {
  const int e_dim = ckpt.embed_dim;
  Matrix row(e_dim, 1);
  for (int c = 0; c < e_dim; ++c)
    row.at(c, 0) = ckpt.char_embed.value().at(input_id, c);
  Var x = make_node(std::move(row), {ckpt.char_embed.node},
                    [input_id](Node& n) {
                      Node& t = *n.parents[0];
                      if (!t.requires_grad) return;
                      t.ensure_grad();
                      for (int c = 0; c < n.value.rows(); ++c)
                        t.grad.at(input_id, c) += n.grad.at(c, 0);
                    });
  Var h0 = constant(Matrix(ckpt.hidden_dim, 1));
  Var c0 = constant(Matrix(ckpt.hidden_dim, 1));
  auto state = lstm_cell(x, h0, c0, ckpt.lstm);
  Var logits = vadd(mm(ckpt.out_proj.node, state.h), ckpt.out_bias.node);
  return softmax_nll(logits, target_id);
}

std::string periodic_text(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(i % 2 ? 'b' : 'a');
  return s;
}

// Shared end-to-end fixtures (built lazily, reused by criteria 8/9/12).
struct SynthFixture {
  TaggedCorpus corpus;
  std::string fwd_path, bwd_path, table_path;
  std::string train_path, dev_path, test_path;

  SynthFixture() {
    testutil::GazetteerSpec spec;
    spec.n_train = 500;
    spec.n_dev = 50;
    spec.n_test = 100;
    spec.n_surfaces = 30;
    spec.seed = 13;
    corpus = testutil::gazetteer_corpus(spec);

    const std::string text = testutil::corpus_text(corpus);
    auto fwd = testutil::quick_lm(text, LmDirection::Forward, 101, 300);
    auto bwd = testutil::quick_lm(text, LmDirection::Backward, 102, 300);
    fwd_path = p("synth_fwd.bin");
    bwd_path = p("synth_bwd.bin");
    save_checkpoint(*fwd, fwd_path);
    save_checkpoint(*bwd, bwd_path);

    StaticTable table = testutil::surface_table(corpus, 12, 103);
    std::ostringstream ss;
    ss.precision(17);
    for (const auto& [word, vec] : table.vectors) {
      ss << word;
      for (real v : vec.data()) ss << " " << v;
      ss << "\n";
    }
    table_path = p("synth_table.txt");
    write_file(table_path, ss.str());

    train_path = p("synth_train.conll");
    dev_path = p("synth_dev.conll");
    test_path = p("synth_test.conll");
    write_file(train_path, write_conll(corpus.train));
    write_file(dev_path, write_conll(corpus.dev));
    write_file(test_path, write_conll(corpus.test));
  }
};

SynthFixture& synth() {
  static SynthFixture f;
  return f;
}

double test_f1(const TaggedCorpus& corpus, TaggerModel& model,
               EmbedderStack& stack) {
  stack.reset_memory();
  std::vector<std::vector<std::string>> predicted;
  for (int i = 0; i < static_cast<int>(corpus.test.size()); ++i)
    predicted.push_back(predict(model, stack, corpus.test[i], {"test", i}));
  return evaluate(corpus.test, predicted).f1;
}

}  // namespace

int main() {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);

  criterion(1, "CRF log-partition matches brute-force path enumeration", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    for (int rep = 0; rep < 200; ++rep) {
      RandomCrfInstance inst = random_instance(rng, 6, 4);
      const double lz = crf_log_partition(inst.e, inst.trans, inst.S, inst.P);
      double mx = -1e300;
      std::vector<double> scores;
      for_each_path(inst.e.rows(), inst.e.cols(), [&](const std::vector<int>& path) {
        const double sc = score_path(inst.e, inst.trans, path, inst.S, inst.P);
        scores.push_back(sc);
        mx = std::max(mx, sc);
      });
      double acc = 0;
      for (double sc : scores) acc += std::exp(sc - mx);
      const double brute = mx + std::log(acc);
      require(std::fabs(lz - brute) <= 1e-8,
              "instance " + std::to_string(rep) + ": |logZ - brute| = " +
                  std::to_string(std::fabs(lz - brute)));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    require(secs < 10.0, "took " + std::to_string(secs) + "s (limit 10s)");
  });

  criterion(2, "Viterbi matches brute-force max; lexicographic tie-break", [] {
    Rng rng(1001);  // same 200 instances as criterion 1
    for (int rep = 0; rep < 200; ++rep) {
      RandomCrfInstance inst = random_instance(rng, 6, 4);
      const auto [tags, score] = viterbi(inst.e, inst.trans, inst.S, inst.P);
      double best = -1e300;
      for_each_path(inst.e.rows(), inst.e.cols(), [&](const std::vector<int>& path) {
        best = std::max(best, path_score_ltr(inst.e, inst.trans, path, inst.S,
                                             inst.P));
      });
      require(score == best, "instance " + std::to_string(rep) +
                                 ": score differs from brute-force max");
      require(std::fabs(score -
                        score_path(inst.e, inst.trans, tags, inst.S, inst.P)) <=
                  1e-10,
              "instance " + std::to_string(rep) +
                  ": score_path(returned tags) disagrees");
    }

    // constructed ties: zero transitions, per-position duplicated maxima
    Rng trng(77);
    for (int rep = 0; rep < 20; ++rep) {
      const int t_len = 2 + static_cast<int>(trng.next_below(4));
      const int k = 2 + static_cast<int>(trng.next_below(3));
      Matrix e(t_len, k);
      for (int t = 0; t < t_len; ++t) {
        const real lo = static_cast<real>(trng.normal());
        const real hi = lo + 1;
        // at least two tags share the maximum at every position
        for (int j = 0; j < k; ++j) e.at(t, j) = lo;
        const int a = static_cast<int>(trng.next_below(k));
        e.at(t, a) = hi;
        e.at(t, (a + 1) % k) = hi;
      }
      Matrix trans(k + 2, k + 2);
      const auto [tags, score] = viterbi(e, trans, k, k + 1);
      double best = -1e300;
      std::vector<int> lex_smallest;
      for_each_path(t_len, k, [&](const std::vector<int>& path) {
        const double sc = path_score_ltr(e, trans, path, k, k + 1);
        // enumeration is lexicographic, so the first maximizer wins
        if (sc > best) {
          best = sc;
          lex_smallest = path;
        }
      });
      require(tags == lex_smallest,
              "tie instance " + std::to_string(rep) +
                  ": returned path is not the lexicographically smallest maximizer");
    }
  });

  criterion(3, "path probabilities normalize to 1", [] {
    Rng rng(33);
    for (int rep = 0; rep < 50; ++rep) {
      const int t_len = 1 + static_cast<int>(rng.next_below(5));
      const int k = 2 + static_cast<int>(rng.next_below(2));
      Matrix e = normal_scores(t_len, k, rng);
      Matrix trans = normal_scores(k + 2, k + 2, rng);
      const double lz = crf_log_partition(e, trans, k, k + 1);
      double total = 0;
      for_each_path(t_len, k, [&](const std::vector<int>& path) {
        total += std::exp(score_path(e, trans, path, k, k + 1) - lz);
      });
      require(std::fabs(total - 1.0) <= 1e-8,
              "instance " + std::to_string(rep) + ": sum = " +
                  std::to_string(total));
    }
  });

  criterion(4, "tagger and char-LM losses pass finite differences", [] {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      // full tagger loss: reprojection -> BiLSTM -> emissions -> CRF
      TagSet tags = TagSet::from_entity_types({"A", "B"});
      TagTrainConfig cfg;
      cfg.hidden_dim = 4;      // W <= 8
      cfg.reproj_max = 5;      // force reprojection on (D = 7 > 5)
      cfg.seed = seed;
      StaticTable table;
      table.dim = 7;
      EmbedderStack stack({std::make_shared<StaticEmbedder>(table)});
      TaggerModel m = init_tagger(tags, stack, cfg);
      require(m.has_reproj, "expected the reprojection layer to be active");

      Rng rng(seed * 7 + 1);
      std::vector<Matrix> vecs;
      const int t_len = 2 + static_cast<int>(rng.next_below(3));
      for (int t = 0; t < t_len; ++t) vecs.push_back(normal_scores(7, 1, rng));
      std::vector<int> gold;
      for (int t = 0; t < t_len; ++t)
        gold.push_back(static_cast<int>(rng.next_below(tags.size())));
      auto tagger_loss = [&] {
        Var e = emissions(m, vecs);
        return crf_nll(e, m.trans.node, gold, tags.start_index(),
                       tags.stop_index());
      };
      std::vector<ParamNode*> params = m.params();
      const double tag_err = finite_diff_check(tagger_loss, params, 3e-4);
      require(tag_err <= 1e-4, "tagger seed " + std::to_string(seed) +
                                   ": max rel err " + std::to_string(tag_err));

      // one-step char-LM loss, H <= 8
      LMTrainConfig lcfg;
      lcfg.hidden_dim = 4;
      lcfg.embed_dim = 3;
      lcfg.steps = 0;
      lcfg.seed = seed;
      CharLMCheckpoint ckpt = train_lm(char_stream_from_text("abcab", "fd"),
                                       LmDirection::Forward, lcfg);
      const int input = 3, target = 4;
      auto lm_loss = [&] { return charlm_one_step_loss(ckpt, input, target); };
      std::vector<ParamNode*> lm_params = ckpt.params();
      const double lm_err = finite_diff_check(lm_loss, lm_params, 1e-4);
      require(lm_err <= 1e-4, "char-LM seed " + std::to_string(seed) +
                                  ": max rel err " + std::to_string(lm_err));
    }
  });

  criterion(5, "LM learnability and analytic uniform perplexity", [] {
    CharStream stream = char_stream_from_text(periodic_text(10000), "ab");
    LMTrainConfig cfg;
    cfg.hidden_dim = 16;
    cfg.embed_dim = 8;
    cfg.seq_len = 16;
    cfg.batch_size = 4;
    cfg.steps = 2000;
    cfg.lr = 0.5;
    cfg.seed = 3;
    CharLMCheckpoint ckpt = train_lm(stream, LmDirection::Forward, cfg);
    const double ce = cross_entropy(ckpt, stream);
    require(ce <= 0.05,
            "cross-entropy " + std::to_string(ce) + " nats (limit 0.05)");

    CharLMCheckpoint uniform = ckpt;
    uniform.out_proj.value().fill(0);
    uniform.out_bias.value().fill(0);
    const double ppl = perplexity(uniform, stream);
    const double v = uniform.vocab.size();
    require(std::fabs(ppl - v) <= 1e-9,
            "uniform perplexity " + std::to_string(ppl) + " != vocab size " +
                std::to_string(v));
  });

  criterion(6, "continued-pretraining lineage and improvement contract", [] {
    auto lm_cfg = [](int steps) {
      LMTrainConfig cfg;
      cfg.hidden_dim = 8;
      cfg.embed_dim = 4;
      cfg.seq_len = 8;
      cfg.batch_size = 2;
      cfg.steps = steps;
      cfg.seed = 5;
      return cfg;
    };
    // three disjoint tiny corpora
    std::string t1 = periodic_text(2000);
    std::string t2;
    for (int i = 0; i < 2000; ++i) t2.push_back(i % 3 == 0 ? 'c' : 'd');
    std::string t3;
    for (int i = 0; i < 500; ++i) t3.push_back(i % 4 == 0 ? 'e' : 'f');

    CharLMCheckpoint ckpt = train_lm(char_stream_from_text(t1, "v1"),
                                     LmDirection::Forward, lm_cfg(200));
    CharStream s2 = char_stream_from_text(t2, "v2");
    const double before = perplexity(ckpt, s2);
    continue_pretrain(ckpt, s2, lm_cfg(300));
    const double after = perplexity(ckpt, s2);
    require(after < before, "perplexity did not improve (" +
                                std::to_string(before) + " -> " +
                                std::to_string(after) + ")");

    continue_pretrain(ckpt, char_stream_from_text(t3, "v3"), lm_cfg(50));
    require(ckpt.lineage.size() == 3, "lineage length != 3");
    require(ckpt.lineage[0].corpus_id == "v1" &&
                ckpt.lineage[1].corpus_id == "v2" &&
                ckpt.lineage[2].corpus_id == "v3",
            "lineage order wrong");

    // continuation with 0 steps or lr=0 is parameter-identical
    Matrix w = ckpt.lstm.W.value(), emb = ckpt.char_embed.value();
    continue_pretrain(ckpt, s2, lm_cfg(0));
    require(ckpt.lstm.W.value() == w && ckpt.char_embed.value() == emb,
            "0-step continuation changed parameters");
    require(ckpt.lineage.size() == 4, "0-step continuation must append lineage");
    LMTrainConfig zero_lr = lm_cfg(25);
    zero_lr.lr = 0;
    continue_pretrain(ckpt, s2, zero_lr);
    require(ckpt.lstm.W.value() == w && ckpt.char_embed.value() == emb,
            "lr=0 continuation changed parameters");
    require(ckpt.lineage.size() == 5, "lr=0 continuation must append lineage");
  });

  criterion(7, "pooled-embedding aggregate contracts", [] {
    // first-occurrence identity for all three ops
    for (PoolOp op : {PoolOp::Mean, PoolOp::Min, PoolOp::Max}) {
      PooledMemory mem;
      Matrix cur(4, 1, {1, -2, 0.5, 3});
      Matrix out = pooled_embed(mem, op, "w", cur);
      for (int r = 0; r < 4; ++r) {
        require(out.at(r, 0) == cur.at(r, 0) &&
                    out.at(4 + r, 0) == cur.at(r, 0),
                "first occurrence must pool to itself");
      }
    }

    // 1000 updates: running mean vs stored list; min <= mean <= max
    Rng rng(99);
    PooledMemory mem;
    std::vector<Matrix> seen;
    for (int i = 0; i < 1000; ++i) {
      Matrix v(5, 1);
      for (auto& x : v.data()) x = static_cast<real>(rng.uniform(-10, 10));
      seen.push_back(v);
      mem.update("tok", v);
    }
    Matrix mean = mem.pooled("tok", PoolOp::Mean);
    Matrix mn = mem.pooled("tok", PoolOp::Min);
    Matrix mx = mem.pooled("tok", PoolOp::Max);
    for (int r = 0; r < 5; ++r) {
      double acc = 0;
      for (const auto& v : seen) acc += v.at(r, 0);
      require(std::fabs(mean.at(r, 0) - acc / 1000) <= 1e-9,
              "running mean drifted from the stored-list mean");
      require(mn.at(r, 0) <= mean.at(r, 0) && mean.at(r, 0) <= mx.at(r, 0),
              "min <= mean <= max violated");
    }

    mem.reset();
    require(mem.size() == 0, "reset must empty the memory");
  });

  criterion(8, "synthetic NER reaches F1 >= 0.95 with {contextual + static}", [] {
    const auto t0 = std::chrono::steady_clock::now();
    SynthFixture& f = synth();
    EmbedderStack stack = build_stack(
        "contextual:" + f.fwd_path + "," + f.bwd_path + "; static:" +
            f.table_path,
        PoolOp::Mean);
    TagTrainConfig cfg;
    cfg.hidden_dim = 8;
    cfg.max_epochs = 20;
    cfg.lr = 0.5;
    cfg.patience = 6;
    cfg.seed = 2;
    TaggerModel model = train_tagger(f.corpus, stack, cfg);
    const double f1 = test_f1(f.corpus, model, stack);
    require(f1 >= 0.95, "test F1 " + std::to_string(f1) + " < 0.95");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    require(secs < 300.0, "took " + std::to_string(secs) + "s (limit 300s)");
  });

  criterion(9, "stacking study: stacked beats single-LM in >= 2 of 3 seeds", [] {
    SynthFixture& f = synth();
    // deliberately weak LM pair so the static features carry real signal
    const std::string text = testutil::corpus_text(f.corpus);
    auto weak_f = testutil::quick_lm(text, LmDirection::Forward, 301, 30);
    auto weak_b = testutil::quick_lm(text, LmDirection::Backward, 302, 30);
    const std::string wf = p("weak_fwd.bin"), wb = p("weak_bwd.bin");
    save_checkpoint(*weak_f, wf);
    save_checkpoint(*weak_b, wb);
    const std::string lm_decl = "contextual:" + wf + "," + wb;
    const std::string stacked_decl = lm_decl + "; static:" + f.table_path;

    int stacked_wins = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
      TagTrainConfig cfg;
      cfg.hidden_dim = 8;
      cfg.max_epochs = 5;
      cfg.seed = seed;
      EmbedderStack lm_stack = build_stack(lm_decl, PoolOp::Mean);
      TaggerModel lm_model = train_tagger(f.corpus, lm_stack, cfg);
      const double lm_f1 = test_f1(f.corpus, lm_model, lm_stack);
      EmbedderStack st_stack = build_stack(stacked_decl, PoolOp::Mean);
      TaggerModel st_model = train_tagger(f.corpus, st_stack, cfg);
      const double st_f1 = test_f1(f.corpus, st_model, st_stack);
      if (st_f1 >= lm_f1) ++stacked_wins;
    }
    require(stacked_wins >= 2, "stacked configuration won only " +
                                   std::to_string(stacked_wins) + " of 3 seeds");

    // the study runner emits a 3-row table with "+" labeling
    RunConfig cfg = RunConfig::from_text(
        "study.kind = stacking\n"
        "corpus.name = synth\n"
        "seed = 4\ntagger.hidden_dim = 6\ntagger.max_epochs = 2\n");
    cfg.set("corpus.train", synth().train_path);
    cfg.set("corpus.dev", synth().dev_path);
    cfg.set("corpus.test", synth().test_path);
    cfg.set("study.stacks", "LM=" + lm_decl + " | LM + static=" + stacked_decl +
                                " | LM + pooled=" + lm_decl + ";pooled:" +
                                f.fwd_path + "," + f.bwd_path);
    StudyReport sr =
        run_study(StudySpec::from_config(cfg), cfg, p("study_stacking"));
    require(sr.rows.size() == 3, "expected 3 study rows, got " +
                                     std::to_string(sr.rows.size()));
    require(sr.rows[1].model_label == "LM + static",
            "missing the 'X + Y' stack label");
    require(fs::exists(p("study_stacking/study_table.md")),
            "study table not written");
  });

  criterion(10, "merging study emits the four cross-corpus rows", [] {
    SynthFixture& f = synth();
    testutil::GazetteerSpec spec_b;
    spec_b.n_train = 60;
    spec_b.n_dev = 15;
    spec_b.n_test = 20;
    spec_b.n_surfaces = 10;
    spec_b.seed = 29;
    spec_b.name = "B";
    TaggedCorpus corpus_b = testutil::gazetteer_corpus(spec_b);
    write_file(p("b_train.conll"), write_conll(corpus_b.train));
    write_file(p("b_dev.conll"), write_conll(corpus_b.dev));
    write_file(p("b_test.conll"), write_conll(corpus_b.test));

    // merged train sizes equal sums
    TaggedCorpus merged = merge_corpora(f.corpus, corpus_b);
    require(merged.train.size() ==
                f.corpus.train.size() + corpus_b.train.size(),
            "merged train size != sum");
    require(merged.test.size() == f.corpus.test.size(),
            "merged test split must stay the first corpus's test");

    RunConfig cfg = RunConfig::from_text(
        "study.kind = merging\n"
        "corpus.name = A\ncorpus_b.name = B\n"
        "seed = 4\ntagger.hidden_dim = 6\ntagger.max_epochs = 2\n");
    cfg.set("corpus.train", f.train_path);
    cfg.set("corpus.dev", f.dev_path);
    cfg.set("corpus.test", f.test_path);
    cfg.set("corpus_b.train", p("b_train.conll"));
    cfg.set("corpus_b.dev", p("b_dev.conll"));
    cfg.set("corpus_b.test", p("b_test.conll"));
    cfg.set("stack", "static:" + f.table_path);
    StudyReport sr = run_study(StudySpec::from_config(cfg), cfg,
                               p("study_merging"));
    require(sr.rows.size() == 4, "expected 4 rows, got " +
                                     std::to_string(sr.rows.size()));
    require(sr.rows[0].dataset_label == "A" &&
                sr.rows[1].dataset_label == "A (+B)" &&
                sr.rows[2].dataset_label == "B" &&
                sr.rows[3].dataset_label == "B (+A)",
            "row labels do not follow the 'X (+Y)' convention");

    // each leg is evaluated on its own test split: gold span counts match
    auto gold_spans = [](const std::vector<Sentence>& split) {
      long n = 0;
      for (const auto& s : split) {
        std::vector<std::string> labels;
        for (const auto& t : s.tokens) labels.push_back(t.gold_label);
        n += static_cast<long>(extract_spans(labels).size());
      }
      return n;
    };
    const long gold_a = gold_spans(f.corpus.test);
    const long gold_b = gold_spans(corpus_b.test);
    require(sr.rows[0].report.counts.gold == gold_a &&
                sr.rows[1].report.counts.gold == gold_a,
            "A-side legs not evaluated on A's test split");
    require(sr.rows[2].report.counts.gold == gold_b &&
                sr.rows[3].report.counts.gold == gold_b,
            "B-side legs not evaluated on B's test split");
  });

  criterion(11, "table rendering formats and ranks reference scores", [] {
    auto row = [](const std::string& model, double f1_percent) {
      StudyRow r;
      r.dataset_label = "NCBI";
      r.model_label = model;
      r.report.f1 = f1_percent / 100.0;
      return r;
    };
    StudyReport sr;
    sr.rows = {row("V1", 87.33), row("V2", 86.99), row("V3", 87.00)};
    const std::string md = render_study(sr);
    require(md.find("**87.33**") != std::string::npos,
            "best row 87.33 not bolded");
    require(md.find("86.99") != std::string::npos, "86.99 missing");
    require(md.find("87.00") != std::string::npos, "87.00 missing");
  });

  criterion(12, "serialization roundtrips and seeded runs are byte-identical", [] {
    SynthFixture& f = synth();
    // LM checkpoint roundtrip
    CharLMCheckpoint lm = load_checkpoint(f.fwd_path);
    const std::string lm2 = p("roundtrip_lm.bin");
    save_checkpoint(lm, lm2);
    require(file_bytes(f.fwd_path) == file_bytes(lm2),
            "LM checkpoint roundtrip not byte-identical");

    // tagger roundtrip + two seeded training runs
    TagTrainConfig cfg;
    cfg.hidden_dim = 6;
    cfg.max_epochs = 2;
    cfg.seed = 7;
    auto train_once = [&](const std::string& out) {
      EmbedderStack stack = build_stack("static:" + f.table_path, PoolOp::Mean);
      TaggerModel model = train_tagger(f.corpus, stack, cfg);
      save_tagger(model, out);
    };
    train_once(p("tag_run1.bin"));
    train_once(p("tag_run2.bin"));
    require(file_bytes(p("tag_run1.bin")) == file_bytes(p("tag_run2.bin")),
            "seeded tagger runs differ");
    TaggerModel reloaded = load_tagger(p("tag_run1.bin"));
    save_tagger(reloaded, p("tag_run3.bin"));
    require(file_bytes(p("tag_run1.bin")) == file_bytes(p("tag_run3.bin")),
            "tagger roundtrip not byte-identical");
  });

  criterion(13, "corpus parse/write, repair rule, and evaluation oracle", [] {
    // 100 generated corpora roundtrip
    Rng rng(555);
    for (int rep = 0; rep < 100; ++rep) {
      testutil::GazetteerSpec spec;
      spec.n_train = 1 + static_cast<int>(rng.next_below(5));
      spec.n_dev = 1;
      spec.n_test = 1 + static_cast<int>(rng.next_below(4));
      spec.seed = 7000 + rep;
      TaggedCorpus c = testutil::gazetteer_corpus(spec);
      for (const auto* split : {&c.train, &c.dev, &c.test}) {
        auto back = parse_conll(write_conll(*split));
        require(back.size() == split->size(), "roundtrip sentence count");
        for (size_t i = 0; i < split->size(); ++i)
          for (size_t t = 0; t < (*split)[i].tokens.size(); ++t)
            require(back[i].tokens[t].text == (*split)[i].tokens[t].text &&
                        back[i].tokens[t].gold_label ==
                            (*split)[i].tokens[t].gold_label,
                    "roundtrip token mismatch");
      }
    }

    // crafted illegal sequences and the repair rule
    require(extract_spans({"O", "I-Disease", "I-Chemical"}) ==
                std::vector<Span>{{1, 2, "Disease"}, {2, 3, "Chemical"}},
            "I- repair rule broken on type switch");
    require(extract_spans({"I-X", "I-X", "O", "I-X"}) ==
                std::vector<Span>{{0, 2, "X"}, {3, 4, "X"}},
            "I- repair rule broken on illegal openings");
    require(needs_bio_repair({"O", "I-X"}) && !needs_bio_repair({"B-X", "I-X"}),
            "repair flag wrong");

    // evaluation vs set-intersection oracle on 100 randomized splits
    Rng erng(556);
    const std::vector<std::string> pool = {"O", "O", "B-Disease", "I-Disease",
                                           "B-Chemical", "I-Chemical"};
    for (int rep = 0; rep < 100; ++rep) {
      testutil::GazetteerSpec spec;
      spec.n_train = 1;
      spec.n_dev = 1;
      spec.n_test = 3 + static_cast<int>(erng.next_below(6));
      spec.seed = 9000 + rep;
      TaggedCorpus c = testutil::gazetteer_corpus(spec);
      std::vector<std::vector<std::string>> preds;
      for (const auto& s : c.test) {
        std::vector<std::string> labels;
        for (const auto& t : s.tokens)
          labels.push_back(erng.next_below(3) == 0
                               ? pool[erng.next_below(pool.size())]
                               : t.gold_label);
        preds.push_back(labels);
      }
      EvalReport r = evaluate(c.test, preds);
      using Key = std::tuple<int, int, int, std::string>;
      std::set<Key> gold, predicted;
      for (size_t i = 0; i < c.test.size(); ++i) {
        std::vector<std::string> gl;
        for (const auto& t : c.test[i].tokens) gl.push_back(t.gold_label);
        for (const auto& sp : extract_spans(gl))
          gold.insert({static_cast<int>(i), sp.start, sp.end, sp.entity_type});
        for (const auto& sp : extract_spans(preds[i]))
          predicted.insert(
              {static_cast<int>(i), sp.start, sp.end, sp.entity_type});
      }
      long correct = 0;
      for (const auto& k : predicted) correct += gold.count(k);
      require(r.counts.gold == static_cast<long>(gold.size()) &&
                  r.counts.predicted == static_cast<long>(predicted.size()) &&
                  r.counts.correct == correct,
              "evaluation counts disagree with the set-intersection oracle");
    }
  });

  if (g_failed == 0) {
    std::printf("all 13 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failed);
  return 1;
}
