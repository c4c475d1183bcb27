// Serial-vs-OpenMP kernel throughput, plus end-to-end model step timings.
// Run: ./bench_kernels [--quick]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "eager/nn/graph.hpp"
#include "eager/nn/kernels.hpp"
#include "eager/qa/model.hpp"
#include "eager/rl/policy.hpp"
#include "eager/util/rng.hpp"

using namespace eager;
using namespace eager::nn;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    best = dt < best ? dt : best;
  }
  return best;
}

void bench_matmul(int n, int reps) {
  Rng rng(1);
  Tensor a({n, n}), b({n, n}), c({n, n});
  a.init_normal(rng, 1.0);
  b.init_normal(rng, 1.0);
  const double flops = 2.0 * n * n * double(n);
  kernels::parallel_enabled() = false;
  const double ts = time_best_of(reps, [&] {
    kernels::matmul(a.data(), false, b.data(), false, c.data(), n, n, n,
                    false);
  });
  Tensor c2({n, n});
  kernels::parallel_enabled() = true;
  const double tp = time_best_of(reps, [&] {
    kernels::matmul(a.data(), false, b.data(), false, c2.data(), n, n, n,
                    false);
  });
  bool identical = std::memcmp(c.data(), c2.data(),
                               sizeof(double) * c.d.size()) == 0;
  std::printf("matmul %4dx%-4d  serial %7.2f GF/s  omp %7.2f GF/s  "
              "speedup %.2fx  bit-identical %s\n",
              n, n, flops / ts / 1e9, flops / tp / 1e9, ts / tp,
              identical ? "yes" : "NO");
}

void bench_softmax(int rows, int cols, int reps) {
  Rng rng(2);
  Tensor x({rows, cols}), y({rows, cols});
  x.init_normal(rng, 2.0);
  kernels::parallel_enabled() = false;
  const double ts = time_best_of(
      reps, [&] { kernels::softmax_rows(x.data(), y.data(), rows, cols); });
  kernels::parallel_enabled() = true;
  const double tp = time_best_of(
      reps, [&] { kernels::softmax_rows(x.data(), y.data(), rows, cols); });
  std::printf("softmax %5dx%-4d serial %7.3f ms      omp %7.3f ms      "
              "speedup %.2fx\n",
              rows, cols, ts * 1e3, tp * 1e3, ts / tp);
}

void bench_qa_forward(int t, int reps) {
  qa::QaConfig cfg;
  cfg.vocab_size = 23;
  cfg.n_answers = 11;
  qa::QaModel model(cfg);
  Rng rng(3);
  std::vector<uint8_t> obs(static_cast<size_t>(t) * grid::kObsLen);
  for (size_t i = 0; i < obs.size(); i += 3) {
    obs[i] = static_cast<uint8_t>(rng.below(8));
    obs[i + 1] = static_cast<uint8_t>(rng.below(6));
    obs[i + 2] = static_cast<uint8_t>(rng.below(3));
  }
  std::vector<int> acts(t);
  for (auto& a : acts) a = static_cast<int>(rng.below(7));
  std::vector<int> q = {2, 13, 1, 16, 8, 9, 3, 14, 17};
  for (bool par : {false, true}) {
    kernels::parallel_enabled() = par;
    const double dt = time_best_of(
        reps, [&] { (void)model.probs(q, obs.data(), t, acts); });
    std::printf("qa forward t=%-4d %s %7.2f ms\n", t,
                par ? "omp   " : "serial", dt * 1e3);
  }
}

void bench_policy_step(int batch, int reps) {
  rl::PolicyConfig cfg;
  cfg.mem_dim = 64;
  rl::Policy policy(cfg);
  Rng rng(4);
  std::vector<uint8_t> obs(static_cast<size_t>(batch) * grid::kObsLen);
  for (size_t i = 0; i < obs.size(); i += 3) {
    obs[i] = static_cast<uint8_t>(rng.below(8));
    obs[i + 1] = static_cast<uint8_t>(rng.below(6));
    obs[i + 2] = static_cast<uint8_t>(rng.below(3));
  }
  std::vector<int> ids(batch * cfg.instr_len);
  std::vector<double> w(batch * cfg.instr_len);
  auto instr = lang::tokenize("put the red ball next to the blue box");
  for (int b = 0; b < batch; ++b)
    policy.encode_instruction(instr, ids.data() + b * cfg.instr_len,
                              w.data() + b * cfg.instr_len);
  for (bool par : {false, true}) {
    kernels::parallel_enabled() = par;
    const double dt = time_best_of(reps, [&] {
      Graph g;
      Node* mem = g.constant(Tensor({batch, cfg.mem_dim}));
      (void)policy.forward(g, obs.data(), batch, ids, w, mem);
    });
    std::printf("policy step B=%-4d %s %7.3f ms  (%.1f kHz frames)\n", batch,
                par ? "omp   " : "serial", dt * 1e3, batch / dt / 1e3);
  }
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  std::printf("threads: %d\n", omp_get_max_threads());
  const int reps = quick ? 2 : 5;
  for (int n : {64, 128, 256, 512}) bench_matmul(n, reps);
  bench_softmax(4096, 64, reps);
  bench_qa_forward(16, reps);
  bench_qa_forward(64, reps);
  bench_policy_step(16, reps);
  bench_policy_step(256, reps);
  kernels::parallel_enabled() = true;
  return 0;
}
