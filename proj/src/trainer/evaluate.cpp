// SPDX-License-Identifier: Apache-2.0
#include "gob/trainer/evaluate.hpp"

#include <algorithm>
#include <numeric>

#include "gob/error.hpp"
#include "gob/trainer/forward.hpp"
#include "gob/trainer/parallel.hpp"

namespace gob::trainer {

namespace {

data::SporadicSeries head(const data::SporadicSeries& s, Index rows) {
  data::SporadicSeries h;
  h.id = s.id;
  h.times = s.times.head(rows);
  h.values = s.values.topRows(rows);
  h.mask = s.mask.topRows(rows);
  return h;
}

}  // namespace

std::vector<losses::DistParams> forecast(const ModelParams& model,
                                         const data::SporadicSeries& s,
                                         double t_cond,
                                         std::span<const double> queries,
                                         const solvers::SolverConfig& solver) {
  Index rows = 0;
  while (rows < s.size() && s.times[rows] <= t_cond) ++rows;
  const data::SporadicSeries cond = head(s, rows);

  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return queries[a] < queries[b]; });
  if (!queries.empty() && queries[order.front()] < t_cond) {
    throw ConfigError("forecast query precedes the conditioning time");
  }

  diff::Tape tape;
  const BoundModel m(tape, model);
  ForwardConfig cfg;
  cfg.solver = solver;
  const ForwardResult fr = forward_pass(m, cond, t_cond, cfg);
  std::vector<losses::DistParams> out(queries.size());
  Var h = fr.h_end;
  double t = t_cond;
  for (std::size_t q : order) {
    h = propagate(m, h, t, queries[q], solver);
    t = queries[q];
    out[q] = grubayes::f_obs(m.obs, h).column(0);
  }
  return out;
}

std::vector<losses::DistParams> ModelPredictor::predict(
    const data::SporadicSeries& history, double t_cond,
    std::span<const double> queries) const {
  return forecast(*model_, history, t_cond, queries, solver_);
}

Metrics evaluate(const Predictor& predictor, const data::Dataset& test,
                 double t_split, unsigned threads) {
  struct Partial {
    double se = 0.0;
    double nll = 0.0;
    std::size_t entries = 0;
  };
  std::vector<Partial> parts(test.size());
  parallel_for(test.size(), threads, [&](std::size_t i, unsigned) {
    const data::SporadicSeries& s = test[i];
    Index split = 0;
    while (split < s.size() && s.times[split] < t_split) ++split;
    if (split == s.size()) return;
    const data::SporadicSeries cond = head(s, split);
    std::vector<double> queries(s.times.data() + split,
                                s.times.data() + s.size());
    const auto preds = predictor.predict(cond, t_split, queries);
    if (preds.size() != queries.size()) {
      throw ShapeError("predictor returned the wrong number of forecasts");
    }
    Partial p;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const Index row = split + static_cast<Index>(q);
      const Eigen::VectorXd y = s.values.row(row).transpose();
      const Eigen::VectorXd m = s.mask.row(row).transpose();
      const losses::DistParams& d = preds[q];
      p.se += ((y - d.mu).array().square() * m.array()).sum();
      p.nll += losses::gauss_negll(y, m, d);
      p.entries += static_cast<std::size_t>(m.sum());
    }
    parts[i] = p;
  });
  Metrics out;
  double se = 0.0, nll = 0.0;
  for (const auto& p : parts) {
    se += p.se;
    nll += p.nll;
    out.entries += p.entries;
    out.series += p.entries > 0 ? 1 : 0;
  }
  if (out.entries == 0) {
    throw DataError("evaluation window after t = " + std::to_string(t_split) +
                    " contains no observations");
  }
  out.mse = se / double(out.entries);
  out.negll = nll / double(out.entries);
  return out;
}

}  // namespace gob::trainer
