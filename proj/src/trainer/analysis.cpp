// SPDX-License-Identifier: Apache-2.0
#include "gob/trainer/analysis.hpp"

#include "gob/error.hpp"
#include "gob/trainer/forward.hpp"

namespace gob::trainer {

namespace {

std::pair<Eigen::VectorXd, std::size_t> terminal_state(
    const ModelParams& model, const data::SporadicSeries& s, double t_end,
    const solvers::SolverConfig& solver, std::size_t* evals) {
  diff::Tape tape;
  const BoundModel m(tape, model);
  ForwardConfig cfg;
  cfg.solver = solver;
  const ForwardResult r = forward_pass(m, s, t_end, cfg);
  if (evals != nullptr) {
    // Accepted steps times evaluations per step; rejected dopri trials are
    // not counted here.
    const std::size_t per = solver.method == solvers::Method::euler ? 1
                            : solver.method == solvers::Method::midpoint ? 2
                                                                         : 6;
    *evals = r.solver_steps * per;
  }
  return {r.h_end.value().col(0), r.solver_steps};
}

}  // namespace

SolverComparison compare_solvers(const ModelParams& model,
                                 const data::SporadicSeries& s, double t_end,
                                 double target_error) {
  if (model.spec.propagation != Propagation::ode) {
    throw ConfigError("solver comparison needs an ODE-propagated model");
  }
  solvers::SolverConfig ref;
  ref.method = solvers::Method::dopri;
  ref.rtol = 1e-11;
  ref.atol = 1e-12;
  ref.max_steps = 1000000;
  const Eigen::VectorXd h_ref = terminal_state(model, s, t_end, ref, nullptr).first;

  SolverComparison out;
  out.target_error = target_error;
  auto record = [&](const solvers::SolverConfig& cfg, double setting) {
    SolverRun run;
    run.method = cfg.method;
    run.setting = setting;
    auto [h, steps] = terminal_state(model, s, t_end, cfg, &run.field_evals);
    run.steps = steps;
    run.terminal_error = (h - h_ref).cwiseAbs().maxCoeff();
    out.runs.push_back(run);
    auto& best = cfg.method == solvers::Method::euler ? out.best_euler : out.best_dopri;
    if (run.terminal_error <= target_error && (!best || run.steps < best->steps)) {
      best = run;
    }
  };
  for (double dt : kEulerLadder) {
    solvers::SolverConfig cfg;
    cfg.method = solvers::Method::euler;
    cfg.dt = dt;
    cfg.max_steps = 1000000;
    record(cfg, dt);
  }
  for (double rtol : kDopriLadder) {
    solvers::SolverConfig cfg;
    cfg.method = solvers::Method::dopri;
    cfg.rtol = rtol;
    cfg.atol = rtol / 10.0;
    cfg.max_steps = 1000000;
    record(cfg, rtol);
  }
  return out;
}

CrossUpdate cross_dimension_update(const ModelParams& model,
                                   const data::Dataset& ds, Index observed,
                                   Index target, double t_min,
                                   std::size_t max_series,
                                   const solvers::SolverConfig& solver) {
  const Index dims = model.spec.dims;
  if (observed < 0 || observed >= dims || target < 0 || target >= dims) {
    throw ConfigError("cross_dimension_update: dimension out of range");
  }
  CrossUpdate out;
  double sum = 0.0;
  for (const auto& s : ds) {
    if (out.events >= max_series) break;
    Index row = -1;
    for (Index i = 0; i < s.size() && row < 0; ++i) {
      if (s.times[i] < t_min) continue;
      bool only = s.mask(i, observed) == 1.0;
      for (Index d = 0; d < dims && only; ++d) {
        if (d != observed && s.mask(i, d) != 0.0) only = false;
      }
      if (only) row = i;
    }
    if (row < 0) continue;
    data::SporadicSeries head;
    head.id = s.id;
    head.times = s.times.head(row + 1);
    head.values = s.values.topRows(row + 1);
    head.mask = s.mask.topRows(row + 1);
    diff::Tape tape;
    const BoundModel m(tape, model);
    ForwardConfig cfg;
    cfg.solver = solver;
    cfg.log_events = true;
    const ForwardResult r = forward_pass(m, head, std::nullopt, cfg);
    const Event& e = r.events.back();
    diff::Tape probe;
    const BoundModel pm(probe, model);
    const Var h_pre = probe.constant(diff::Tensor2(e.h_pre));
    const Var h_post = probe.constant(diff::Tensor2(e.h_post));
    const double before = grubayes::f_obs(pm.obs, h_pre).mu.value()(target, 0);
    const double after = grubayes::f_obs(pm.obs, h_post).mu.value()(target, 0);
    sum += std::abs(after - before);
    ++out.events;
  }
  if (out.events == 0) throw DataError("no qualifying single-dimension observations");
  out.mean_shift = sum / double(out.events);
  return out;
}

PipelineGradcheck pipeline_gradcheck(const ModelParams& model,
                                     const data::SporadicSeries& s,
                                     const ForwardConfig& cfg, double step,
                                     const diff::GradTolerance& tol) {
  PipelineGradcheck out;
  {
    diff::Tape tape;
    const BoundModel m(tape, model);
    const ForwardResult r = forward_pass(m, s, std::nullopt, cfg);
    out.loss = r.loss.scalar();
    tape.backward(r.loss);
    out.analytic = m.params.gradient();
  }
  ModelParams probe = model;
  diff::Tape tape;
  out.numeric = diff::finite_diff_grad(
      [&](const Eigen::VectorXd& theta) {
        probe.theta = theta;
        tape.clear();
        const BoundModel m(tape, probe);
        return forward_pass(m, s, std::nullopt, cfg).loss.scalar();
      },
      model.theta, step);
  out.comparison = diff::compare_gradients(out.analytic, out.numeric, tol);
  return out;
}

}  // namespace gob::trainer
