// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference against the OpenMP path for each parallel kernel. The
// second benchmark argument selects the path (0 serial, 1 parallel).

#include "accboed/benchmarks.hpp"
#include "accboed/engine.hpp"
#include "accboed/sampling.hpp"

#include <benchmark/benchmark.h>

#include <memory>
#include <random>

using namespace accboed;

namespace
{

Exec exec_of(const benchmark::State &st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

struct TrigState
{
   AccBoedConfig cfg;
   FrozenState frozen;
   std::unique_ptr<KmnModel> model;
   double eps = 0.0;
};

const TrigState &trig_state()
{
   static const TrigState s = []
   {
      AccBoedConfig cfg;
      cfg.seed = 1;
      cfg.grid_per_axis = 21;
      TrigState t{cfg, frozen_state(make_problem("trig"), cfg, 30)};
      t.eps = resolve_eps_cov(t.cfg, t.frozen.gp);
      Rng rng(1);
      auto recs = build_cde_dataset(t.frozen.gp, t.frozen.pool, t.frozen.candidates, t.cfg, t.eps,
                                    rng, 10 * t.cfg.kmn.n_centers);
      standardize_records(t.frozen.gp, recs);
      t.model = std::make_unique<KmnModel>(train_kmn(recs, t.cfg.kmn));
      return t;
   }();
   return s;
}

void BM_SweepAcc(benchmark::State &st)
{
   const TrigState &t = trig_state();
   const KmnRatio ratio(*t.model, true, true);
   for (auto _ : st)
   {
      benchmark::DoNotOptimize(sweep_utility_acc(t.frozen.gp, ratio, t.frozen.pool,
                                                 t.frozen.candidates, t.cfg, t.eps, 1,
                                                 exec_of(st)));
   }
}

void BM_SweepBasic(benchmark::State &st)
{
   const TrigState &t = trig_state();
   for (auto _ : st)
   {
      benchmark::DoNotOptimize(
         sweep_utility_basic(t.frozen.gp, t.frozen.pool, t.frozen.candidates, t.cfg, 1,
                             exec_of(st)));
   }
}

void BM_FailureMc(benchmark::State &st)
{
   for (auto _ : st)
   {
      benchmark::DoNotOptimize(estimate_failure_probability(circle_model, 200000, 7, exec_of(st)));
   }
}

void BM_KlEstimate(benchmark::State &st)
{
   Rng rng(3);
   std::normal_distribution<double> g(0.0, 1.0);
   Matrix p(2000, 2);
   Matrix q(2000, 2);
   for (int i = 0; i < p.size(); ++i)
   {
      p.data()[i] = g(rng);
      q.data()[i] = 1.0 + g(rng);
   }
   for (auto _ : st) { benchmark::DoNotOptimize(kl_estimate(p, q, 5, exec_of(st))); }
}

void BM_MhSample(benchmark::State &st)
{
   const Box box(Vector::Constant(2, -5.0), Vector::Constant(2, 5.0));
   McmcConfig cfg;
   cfg.n_samples = 20000;
   cfg.n_chains = 8;
   cfg.seed = 5;
   for (auto _ : st)
   {
      benchmark::DoNotOptimize(mh_sample([](const Vector &x) { return -0.5 * x.squaredNorm(); },
                                         box, cfg, exec_of(st)));
   }
}

}  // namespace

BENCHMARK(BM_SweepAcc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepBasic)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FailureMc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KlEstimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MhSample)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
