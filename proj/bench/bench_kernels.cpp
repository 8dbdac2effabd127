// Serial reference vs OpenMP kernels on a synthetic cohort.
// Usage: bench_kernels [n_slides] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <string>

#include "epic/kernels.hpp"
#include "epic/synth_data.hpp"
#include "epic/train_harness.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double best_of(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-16s %10.4f %10.4f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  using epic::kernels::Exec;
  namespace kernels = epic::kernels;

  epic::synth::CohortConfig cc;
  cc.n_slides = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
  cc.seed = 1;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
  const auto cohort = epic::synth::generate_cohort(cc);
  std::vector<std::size_t> ids(cohort.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  epic::train::TrainConfig tc;
  tc.epochs = 1;
  const auto state = epic::train::init_state(cohort, ids, tc);

  std::printf("slides %zu, threads %d, best of %d\n", cohort.size(), kernels::max_threads(), repeats);
  std::printf("%-16s %10s %10s %9s\n", "kernel", "serial s", "parallel s", "speedup");

  epic::Matrix enc_s, enc_p;
  const double es = best_of(repeats, [&] { enc_s = kernels::encode_slides(state.net, state.params, cohort, ids, Exec::serial); });
  const double ep = best_of(repeats, [&] { enc_p = kernels::encode_slides(state.net, state.params, cohort, ids, Exec::parallel); });
  row("encode_slides", es, ep, enc_s == enc_p);

  std::vector<kernels::SlideExtraction> ex_s, ex_p;
  const double xs = best_of(repeats, [&] {
    ex_s = kernels::extract_parts(state.net, state.params, state.centroids, cohort, ids, state.top_p, Exec::serial);
  });
  const double xp = best_of(repeats, [&] {
    ex_p = kernels::extract_parts(state.net, state.params, state.centroids, cohort, ids, state.top_p, Exec::parallel);
  });
  bool same = ex_s.size() == ex_p.size();
  for (std::size_t i = 0; same && i < ex_s.size(); ++i) same = ex_s[i].parts == ex_p[i].parts;
  row("extract_parts", xs, xp, same);

  std::vector<double> r_s, r_p;
  const double rs = best_of(repeats, [&] { r_s = kernels::slide_risks(state.net, state.params, ex_s, Exec::serial); });
  const double rp = best_of(repeats, [&] { r_p = kernels::slide_risks(state.net, state.params, ex_p, Exec::parallel); });
  row("slide_risks", rs, rp, r_s == r_p);

  auto a = state, b = state;
  const double ts = best_of(1, [&] { epic::train::train_epoch(a, cohort, ids, tc, nullptr, Exec::serial); });
  const double tp = best_of(1, [&] { epic::train::train_epoch(b, cohort, ids, tc, nullptr, Exec::parallel); });
  row("train_epoch", ts, tp, a.params == b.params);
  return 0;
}
