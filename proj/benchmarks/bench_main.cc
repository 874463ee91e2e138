#include <benchmark/benchmark.h>

#include "gaitforge/dynamics.h"
#include "gaitforge/env.h"
#include "gaitforge/model.h"
#include "gaitforge/mtu.h"
#include "gaitforge/nn.h"
#include "gaitforge/ppo.h"
#include "gaitforge/refdata.h"

namespace gaitforge {
namespace {

SimState StandingState() {
  SimState st;
  st.q[kPelvisTy] = 0.95;
  st.q[kHipR] = 0.2;
  st.q[kKneeR] = -0.3;
  st.q[kHipL] = -0.1;
  st.q[kKneeL] = -0.1;
  st.qdot[kPelvisTx] = 1.2;
  return st;
}

void BM_MassMatrix(benchmark::State& state) {
  const Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  const Vec9 q = StandingState().q;
  for (auto _ : state) benchmark::DoNotOptimize(dyn.MassMatrix(q));
}
BENCHMARK(BM_MassMatrix);

void BM_PhysicsStep(benchmark::State& state) {
  const Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  const SimState start = StandingState();
  SimState st = start;
  int n = 0;
  for (auto _ : state) {
    dyn.Step(st, Vec9::Zero(), 0.002);
    if (++n == 50) {
      st = start;
      n = 0;
    }
    benchmark::DoNotOptimize(st.q);
  }
}
BENCHMARK(BM_PhysicsStep);

void BM_EnvStep(benchmark::State& state) {
  const auto mode = static_cast<ActuationMode>(state.range(0));
  const ModelSpec model = BuildDefaultModel(mode);
  EnvConfig config;
  config.mode = mode;
  ImitationEnv env(model, MakeSyntheticClip(Dynamics(BuildDefaultModel(ActuationMode::kTorque))),
                   config);
  env.ResetToPhase(0.0);
  for (auto _ : state) {
    const StepResult r = env.Step(env.ReferenceAction());
    if (env.done()) env.ResetToPhase(0.0);
    benchmark::DoNotOptimize(r.reward);
  }
}
BENCHMARK(BM_EnvStep)
    ->Arg(static_cast<int>(ActuationMode::kTorque))
    ->Arg(static_cast<int>(ActuationMode::kMtu));

void BM_StaticOptimization(benchmark::State& state) {
  const ModelSpec spec = BuildDefaultModel(ActuationMode::kMtu);
  const Vec9 q = StandingState().q;
  Vec7 tau;
  tau << 0.0, 20.0, -15.0, 5.0, -10.0, 10.0, -3.0;
  for (auto _ : state) benchmark::DoNotOptimize(StaticOptimization(spec, q, tau));
}
BENCHMARK(BM_StaticOptimization);

void BM_MlpForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Mlp net({60, 256, 256, 7});
  Rng rng(1);
  net.Initialize(rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(60, batch);
  const Eigen::MatrixXd g = Eigen::MatrixXd::Ones(7, batch);
  for (auto _ : state) {
    Mlp::Cache cache;
    const Eigen::MatrixXd y = net.Forward(x, &cache);
    benchmark::DoNotOptimize(net.Backward(cache, g).params);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(1)->Arg(64)->Arg(256);

void BM_Gae(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::VectorXd r = Eigen::VectorXd::Random(n);
  const Eigen::VectorXd v = Eigen::VectorXd::Random(n);
  std::vector<bool> done(static_cast<size_t>(n), false);
  for (auto _ : state) benchmark::DoNotOptimize(ComputeGae(r, v, done, 0.0, 0.99, 0.95));
}
BENCHMARK(BM_Gae)->Arg(4096);

}  // namespace
}  // namespace gaitforge

BENCHMARK_MAIN();
