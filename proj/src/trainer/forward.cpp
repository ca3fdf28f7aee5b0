// SPDX-License-Identifier: Apache-2.0
#include "gob/trainer/forward.hpp"

#include <algorithm>
#include <string>

#include "gob/error.hpp"

namespace gob::trainer {

using diff::Tensor2;

Var propagate(const BoundModel& m, Var h, double t0, double t1,
              const solvers::SolverConfig& solver, std::size_t* steps) {
  if (t1 < t0) {
    throw SolverError("cannot propagate backwards from " + std::to_string(t0) +
                      " to " + std::to_string(t1));
  }
  if (t1 == t0) return h;
  if (m.spec->propagation == Propagation::discretized) {
    const std::size_t n = gruode::bin_count(t0, t1, m.spec->bin_width);
    if (steps != nullptr) *steps += n;
    return gruode::discretized_propagate(m.ode, h, t0, t1, m.spec->bin_width);
  }
  const auto& ode = m.ode;
  auto field = [&ode](double, Var x) {
    return gruode::vector_field(ode, x, std::nullopt);
  };
  solvers::Integration r = solvers::integrate(field, h, t0, t1, solver);
  if (steps != nullptr) *steps += r.steps;
  return r.state;
}

namespace {

Var total(diff::Tape& tape, const std::vector<Var>& terms) {
  if (terms.empty()) return tape.constant(1, 1, 0.0);
  if (terms.size() == 1) return terms.front();
  std::vector<double> ones(terms.size(), 1.0);
  return diff::lincomb(terms, ones);
}

// Propagates across [t0, t1] restarting at every breakpoint strictly inside.
Var propagate_split(const BoundModel& m, Var h, double t0, double t1,
                    std::span<const double> breakpoints,
                    const solvers::SolverConfig& solver, std::size_t* steps) {
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t0);
  double t = t0;
  for (; it != breakpoints.end() && *it < t1; ++it) {
    h = propagate(m, h, t, *it, solver, steps);
    t = *it;
  }
  return propagate(m, h, t, t1, solver, steps);
}

}  // namespace

ForwardResult forward_pass(const BoundModel& m, const data::SporadicSeries& s,
                           std::optional<double> t_end,
                           const ForwardConfig& cfg,
                           std::span<const double> breakpoints) {
  diff::Tape& tape = m.h0.tape();
  const Index dims = m.spec->dims;
  if (s.dims() != dims) {
    throw ShapeError("series '" + s.id + "' has " + std::to_string(s.dims()) +
                     " dimensions, model expects " + std::to_string(dims));
  }
  const Index k = s.size();
  for (Index i = 0; i < k; ++i) {
    if (i > 0 && !(s.times[i] > s.times[i - 1])) {
      throw DataError("series '" + s.id + "': observation times not increasing");
    }
  }
  if (k > 0 && s.times[0] < cfg.t_start) {
    throw DataError("series '" + s.id + "': observation before the start time");
  }
  const double last = k > 0 ? s.times[k - 1] : cfg.t_start;
  const double end = t_end.value_or(last);
  if (end < last) {
    throw DataError("end time precedes the last observation of '" + s.id + "'");
  }

  ForwardResult out;
  const grubayes::Dropout* dropout = cfg.dropout.active() ? &cfg.dropout : nullptr;
  std::vector<Var> pre_terms, post_terms;
  pre_terms.reserve(static_cast<std::size_t>(k));
  post_terms.reserve(static_cast<std::size_t>(k));
  Var h = m.h0;
  double t = cfg.t_start;
  Tensor2 y(dims, 1), mask(dims, 1);
  for (Index i = 0; i < k; ++i) {
    if (s.mask.row(i).sum() == 0.0) continue;
    h = propagate_split(m, h, t, s.times[i], breakpoints, cfg.solver,
                        &out.solver_steps);
    t = s.times[i];
    y = s.values.row(i).transpose();
    mask = s.mask.row(i).transpose();
    const losses::DistVars pre = grubayes::f_obs(m.obs, h, dropout);
    Var l_pre = losses::gauss_negll(y, mask, pre);
    Var h_post = grubayes::bayes_jump(m.jump, m.obs, y, mask, h, &pre, dropout);
    const losses::DistVars post = grubayes::f_obs(m.obs, h_post, dropout);
    Var l_post = losses::loss_post(y, mask, pre, post, cfg.loss);
    pre_terms.push_back(l_pre);
    post_terms.push_back(l_post);
    out.observed_entries += static_cast<std::size_t>(mask.sum());
    if (cfg.log_events) {
      out.events.push_back(Event{t, 0, i, l_pre.scalar(), l_post.scalar(),
                                 h.value().col(0), h_post.value().col(0)});
    }
    h = h_post;
  }
  out.h_end = propagate_split(m, h, t, end, breakpoints, cfg.solver,
                              &out.solver_steps);
  out.loss_pre = total(tape, pre_terms);
  out.loss_post = total(tape, post_terms);
  out.loss = diff::lincomb({out.loss_pre, out.loss_post},
                           {1.0, cfg.loss.lambda});
  return out;
}

ForwardResult forward_batch(const BoundModel& m, const data::Dataset& ds,
                            const std::vector<std::size_t>& batch,
                            std::optional<double> t_end,
                            const ForwardConfig& cfg) {
  diff::Tape& tape = m.h0.tape();
  const Index dims = m.spec->dims;
  const auto b = static_cast<Index>(batch.size());
  for (std::size_t j : batch) {
    const auto& s = ds.at(j);
    s.validate();
    if (s.dims() != dims) throw ShapeError("series '" + s.id + "' has wrong dimension");
  }
  const data::BatchTimeline tl = data::build_batch_timeline(ds, batch);
  if (!tl.entries.empty() && tl.entries.front().time < cfg.t_start) {
    throw DataError("observation before the start time");
  }
  const double last = tl.entries.empty() ? cfg.t_start : tl.entries.back().time;
  const double end = t_end.value_or(last);
  if (end < last) throw DataError("end time precedes the last observation");

  ForwardResult out;
  const grubayes::Dropout* dropout = cfg.dropout.active() ? &cfg.dropout : nullptr;
  std::vector<Var> pre_terms, post_terms;
  Var h = diff::matmul(m.h0, tape.constant(1, b, 1.0));
  double t = cfg.t_start;
  for (const auto& e : tl.entries) {
    h = propagate(m, h, t, e.time, cfg.solver, &out.solver_steps);
    t = e.time;
    const auto s_count = static_cast<Index>(e.series.size());
    Tensor2 y(dims, s_count), mask(dims, s_count);
    std::vector<Index> cols(e.series.size());
    for (Index c = 0; c < s_count; ++c) {
      const auto& s = ds[batch[e.series[static_cast<std::size_t>(c)]]];
      const Index row = e.rows[static_cast<std::size_t>(c)];
      y.col(c) = s.values.row(row).transpose();
      mask.col(c) = s.mask.row(row).transpose();
      cols[static_cast<std::size_t>(c)] = static_cast<Index>(e.series[static_cast<std::size_t>(c)]);
    }
    Var h_obs = diff::gather_cols(h, cols);
    const losses::DistVars pre = grubayes::f_obs(m.obs, h_obs, dropout);
    Var l_pre = losses::gauss_negll(y, mask, pre);
    Var h_post = grubayes::bayes_jump(m.jump, m.obs, y, mask, h_obs, &pre, dropout);
    const losses::DistVars post = grubayes::f_obs(m.obs, h_post, dropout);
    Var l_post = losses::loss_post(y, mask, pre, post, cfg.loss);
    pre_terms.push_back(l_pre);
    post_terms.push_back(l_post);
    out.observed_entries += static_cast<std::size_t>(mask.sum());
    if (cfg.log_events) {
      for (Index c = 0; c < s_count; ++c) {
        const Eigen::VectorXd yc = y.col(c);
        const Eigen::VectorXd mc = mask.col(c);
        const losses::DistParams pc = pre.column(c);
        const losses::DistParams qc = post.column(c);
        out.events.push_back(Event{
            t, e.series[static_cast<std::size_t>(c)],
            e.rows[static_cast<std::size_t>(c)], losses::gauss_negll(yc, mc, pc),
            losses::loss_post(yc, mc, pc, qc, cfg.loss), h_obs.value().col(c),
            h_post.value().col(c)});
      }
    }
    h = diff::scatter_cols(h, cols, h_post);
  }
  out.h_end = propagate(m, h, t, end, cfg.solver, &out.solver_steps);
  out.loss_pre = total(tape, pre_terms);
  out.loss_post = total(tape, post_terms);
  out.loss = diff::lincomb({out.loss_pre, out.loss_post},
                           {1.0, cfg.loss.lambda});
  return out;
}

}  // namespace gob::trainer
