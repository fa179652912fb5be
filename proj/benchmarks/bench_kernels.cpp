// Microbenchmarks for the hot numeric paths: dense product, the LSTM cell,
// and the CRF forward/decode recursions.

#include <benchmark/benchmark.h>

#include "ctxtag/lstm.hpp"
#include "ctxtag/rng.hpp"
#include "ctxtag/tagger.hpp"

using namespace ctxtag;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = static_cast<real>(rng.normal());
  return m;
}

void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Matrix a = random_matrix(n, n, rng);
  Matrix b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_lstm_cell_plain(benchmark::State& state) {
  const int h = static_cast<int>(state.range(0));
  Rng rng(2);
  LstmCellParams p = make_lstm("bench", h, h, rng);
  Matrix x = random_matrix(h, 1, rng);
  Matrix hs(h, 1), cs(h, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        lstm_cell_plain(x, hs, cs, p.W.value(), p.U.value(), p.b.value()));
}
BENCHMARK(BM_lstm_cell_plain)->Arg(32)->Arg(128);

void BM_crf_log_partition(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const int k = 9;
  Rng rng(3);
  Matrix e = random_matrix(t, k, rng);
  Matrix trans = random_matrix(k + 2, k + 2, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(crf_log_partition(e, trans, k, k + 1));
}
BENCHMARK(BM_crf_log_partition)->Arg(16)->Arg(64);

void BM_viterbi(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const int k = 9;
  Rng rng(4);
  Matrix e = random_matrix(t, k, rng);
  Matrix trans = random_matrix(k + 2, k + 2, rng);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(e, trans, k, k + 1));
}
BENCHMARK(BM_viterbi)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
