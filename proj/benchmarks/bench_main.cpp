#include <curvedit/editing.hpp>
#include <curvedit/eig.hpp>
#include <curvedit/kfac.hpp>
#include <curvedit/matrix.hpp>
#include <curvedit/rng.hpp>
#include <curvedit/svd.hpp>

#include <benchmark/benchmark.h>

namespace {

using namespace curvedit;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_normal();
  return m;
}

Matrix random_psd(std::size_t n, std::uint64_t seed) {
  const Matrix b = random_matrix(n, n, seed);
  return matmul(transpose(b), b);
}

void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);

void bm_jacobi_eig(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix m = random_psd(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig(m));
}
BENCHMARK(bm_jacobi_eig)->Arg(32)->Arg(64)->Arg(128);

void bm_svd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix m = random_matrix(n, n / 2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(svd(m));
}
BENCHMARK(bm_svd)->Arg(64)->Arg(128);

void bm_kfac_pair_edit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  KfacFactors factors("bench", n, n);
  factors.accumulate(random_matrix(4 * n, n, 5), random_matrix(4 * n, n, 6));
  factors.finalize();
  const Matrix w = random_matrix(n, n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(kfac_pair_edit(w, factors, 0.6));
}
BENCHMARK(bm_kfac_pair_edit)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
