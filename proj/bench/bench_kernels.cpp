// Times the serial reference kernels against the OpenMP ones on a
// bootstrap-sized problem and checks that both produce identical output.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "polband/kernels.hpp"
#include "polband/parallel.hpp"

using namespace polband;

namespace {

double seconds(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void row(const char* name, double serial, double parallel, bool equal) {
  std::printf("%-20s %10.4f %10.4f %8.2fx  %s\n", name, serial * 1e3, parallel * 1e3,
              serial / parallel, equal ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 500;
  const std::size_t K = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 2000;
  const std::size_t B = argc > 3 ? std::strtoul(argv[3], nullptr, 10) : 500;
  configure_threads_from_env();
  std::printf("n=%zu K=%zu B=%zu threads=%d\n", n, K, B, thread_count());

  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> dec(n * K), act(n);
  for (auto& v : dec) v = coin(rng);
  for (auto& v : act) v = coin(rng);
  std::vector<double> match(n), mismatch(n), eps(B * n);
  for (auto& v : match) v = z(rng);
  for (auto& v : mismatch) v = z(rng);
  for (auto& v : eps) v = z(rng);

  std::printf("%-20s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
  bool ok = true;

  std::vector<double> mean_s(K), sd_s(K), cen_s(n * K), mean_p(K), sd_p(K), cen_p(n * K);
  double ts = seconds([&] {
    kernels::aipw_columns(dec, act, match, mismatch, K, mean_s, sd_s, cen_s, Backend::serial);
  }, 3);
  double tp = seconds([&] {
    kernels::aipw_columns(dec, act, match, mismatch, K, mean_p, sd_p, cen_p, Backend::parallel);
  }, 3);
  bool eq = same(mean_s, mean_p) && same(sd_s, sd_p) && same(cen_s, cen_p);
  ok &= eq;
  row("aipw_columns", ts, tp, eq);

  std::vector<double> out_s(B * K), out_p(B * K);
  ts = seconds([&] { kernels::multiplier_sums(eps, cen_s, B, n, K, out_s, Backend::serial); }, 1);
  tp = seconds([&] { kernels::multiplier_sums(eps, cen_s, B, n, K, out_p, Backend::parallel); }, 1);
  eq = same(out_s, out_p);
  ok &= eq;
  row("multiplier_sums", ts, tp, eq);

  std::vector<double> st_s, st_p;
  ts = seconds([&] {
    st_s = out_s;
    kernels::studentize_columns(st_s, B, K, Backend::serial);
  }, 3);
  tp = seconds([&] {
    st_p = out_s;
    kernels::studentize_columns(st_p, B, K, Backend::parallel);
  }, 3);
  eq = same(st_s, st_p);
  ok &= eq;
  row("studentize_columns", ts, tp, eq);

  std::vector<double> mx_s(B), mn_s(B), mx_p(B), mn_p(B);
  ts = seconds([&] { kernels::row_extrema(st_s, B, K, mx_s, mn_s, Backend::serial); }, 5);
  tp = seconds([&] { kernels::row_extrema(st_s, B, K, mx_p, mn_p, Backend::parallel); }, 5);
  eq = same(mx_s, mx_p) && same(mn_s, mn_p);
  ok &= eq;
  row("row_extrema", ts, tp, eq);

  return ok ? 0 : 1;
}
