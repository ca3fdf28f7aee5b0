// SPDX-License-Identifier: Apache-2.0
#include "gob/sde/generators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "gob/error.hpp"

namespace gob::sde {

void OUParams::validate() const {
  if (!(theta > 0.0)) throw ConfigError("OU theta must be positive");
  if (!(sigma >= 0.0)) throw ConfigError("OU sigma must be non-negative");
  if (!(std::abs(rho) <= 1.0)) throw ConfigError("OU rho must lie in [-1, 1]");
  if (r.size() < 1) throw ConfigError("OU target must have at least one entry");
}

void BrusselatorParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ConfigError("Brusselator a and b must be positive");
  }
  if (!(sigma >= 0.0)) throw ConfigError("Brusselator sigma must be non-negative");
  if (!(std::abs(rho) <= 1.0)) {
    throw ConfigError("Brusselator rho must lie in [-1, 1]");
  }
}

void SamplingSpec::validate() const {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (!(mean_obs >= 1.0)) throw ConfigError("mean_obs must be at least 1");
  if (!(obs_prob > 0.0 && obs_prob <= 1.0)) {
    throw ConfigError("obs_prob must lie in (0, 1]");
  }
  if (!(lag_min >= 0.0 && lag_max >= lag_min)) {
    throw ConfigError("lag range must satisfy 0 <= lag_min <= lag_max");
  }
  if (!(dt_sim > 0.0) || dt_sim > horizon) {
    throw ConfigError("dt_sim must lie in (0, horizon]");
  }
}

Eigen::MatrixXd correlation_factor(Eigen::Index dims, double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(dims, dims, rho);
  c.diagonal().setOnes();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dims, dims);
  for (Eigen::Index j = 0; j < dims; ++j) {
    double pivot = c(j, j) - l.row(j).head(j).squaredNorm();
    if (pivot < -1e-12) {
      throw ConfigError("correlation matrix is not positive semidefinite");
    }
    if (pivot <= 1e-14) continue;
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < dims; ++i) {
      l(i, j) = (c(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

Moments ou_conditional_moments(const Eigen::VectorXd& y_star, double t_star,
                               double t, const OUParams& p) {
  p.validate();
  if (t < t_star) throw ConfigError("conditional moments need t >= t_star");
  if (y_star.size() != p.dims()) throw ShapeError("y_star has wrong length");
  const double dt = t - t_star;
  // y* + (r - y*)(1 - e^{-theta dt}) reproduces y* exactly at dt = 0.
  const double pull = -std::expm1(-p.theta * dt);
  Moments m;
  m.mean = y_star + (p.r - y_star) * pull;
  const double var = p.sigma * p.sigma / (2.0 * p.theta) *
                     -std::expm1(-2.0 * p.theta * dt);
  m.variance = Eigen::VectorXd::Constant(p.dims(), var);
  return m;
}

namespace {

std::vector<long long> grid_indices(const std::vector<double>& times,
                                    double dt) {
  std::vector<long long> idx;
  idx.reserve(times.size());
  for (double t : times) {
    if (!(t >= 0.0)) throw ConfigError("probe times must be non-negative");
    idx.push_back(std::llround(t / dt));
    if (idx.size() > 1 && idx.back() < idx[idx.size() - 2]) {
      throw ConfigError("probe times must be sorted");
    }
  }
  return idx;
}

// Runs `step` from grid index 0 and records the state at every index in `at`.
template <typename Step>
data::Matrix walk(Eigen::VectorXd state, const std::vector<long long>& at,
                  Step&& step) {
  data::Matrix out(static_cast<Eigen::Index>(at.size()), state.size());
  long long k = 0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    for (; k < at[i]; ++k) step(state);
    out.row(static_cast<Eigen::Index>(i)) = state.transpose();
  }
  return out;
}

data::Matrix ou_walk(const OUParams& p, const Eigen::VectorXd& y0,
                     const std::vector<long long>& at, double dt,
                     std::mt19937_64& rng) {
  const Eigen::MatrixXd l = correlation_factor(p.dims(), p.rho);
  const double noise = p.sigma * std::sqrt(dt);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(p.dims());
  Eigen::VectorXd kick(p.dims());
  return walk(y0, at, [&](Eigen::VectorXd& y) {
    for (Eigen::Index d = 0; d < xi.size(); ++d) xi[d] = normal(rng);
    kick.noalias() = l * xi;
    y += p.theta * dt * (p.r - y) + noise * kick;
  });
}

data::Matrix brusselator_walk(const BrusselatorParams& p,
                              const Eigen::Vector2d& y0,
                              const std::vector<long long>& at, double dt,
                              std::mt19937_64& rng) {
  const Eigen::MatrixXd l = correlation_factor(2, p.rho);
  const double noise = p.sigma * std::sqrt(dt);
  std::normal_distribution<double> normal;
  return walk(Eigen::VectorXd(y0), at, [&](Eigen::VectorXd& s) {
    const Eigen::Vector2d xi(normal(rng), normal(rng));
    const Eigen::Vector2d drift = brusselator_drift(p, s);
    s += dt * drift + noise * (l * xi);
    if (!(s.cwiseAbs().maxCoeff() <= 1e6)) {
      throw SolverError("Brusselator path diverged (|state| > 1e6)");
    }
  });
}

// Observation grid indices and masks of one series.
struct Pattern {
  std::vector<long long> at;
  data::Matrix mask;
};

Pattern draw_pattern(const SamplingSpec& spec, Eigen::Index dims,
                     std::mt19937_64& rng) {
  const long long n_grid = std::llround(spec.horizon / spec.dt_sim);
  std::poisson_distribution<long long> count(spec.mean_obs);
  long long k = 0;
  while (k == 0) k = count(rng);
  k = std::min(k, n_grid + 1);
  std::uniform_real_distribution<double> uniform(0.0, spec.horizon);
  std::unordered_set<long long> taken;
  Pattern pat;
  while (static_cast<long long>(pat.at.size()) < k) {
    const long long idx = std::llround(uniform(rng) / spec.dt_sim);
    if (taken.insert(idx).second) pat.at.push_back(idx);
  }
  std::sort(pat.at.begin(), pat.at.end());
  std::bernoulli_distribution include(spec.obs_prob);
  pat.mask = data::Matrix::Zero(k, dims);
  for (Eigen::Index i = 0; i < k; ++i) {
    do {
      for (Eigen::Index d = 0; d < dims; ++d) {
        pat.mask(i, d) = include(rng) ? 1.0 : 0.0;
      }
    } while (pat.mask.row(i).sum() == 0.0);
  }
  return pat;
}

data::SporadicSeries assemble(const Pattern& pat, const data::Matrix& states,
                              double dt, double lag) {
  data::SporadicSeries s;
  const auto k = static_cast<Eigen::Index>(pat.at.size());
  s.times.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    s.times[i] = static_cast<double>(pat.at[static_cast<std::size_t>(i)]) * dt + lag;
  }
  s.mask = pat.mask;
  s.values = states.cwiseProduct(pat.mask);
  return s;
}

}  // namespace

data::Matrix ou_path(const OUParams& p, const Eigen::VectorXd& y0,
                     const std::vector<double>& probe_times, double dt_sim,
                     std::mt19937_64& rng) {
  p.validate();
  if (y0.size() != p.dims()) throw ShapeError("y0 has wrong length");
  return ou_walk(p, y0, grid_indices(probe_times, dt_sim), dt_sim, rng);
}

Eigen::Vector2d brusselator_drift(const BrusselatorParams& p,
                                  const Eigen::Vector2d& s) {
  const double x = s[0];
  const double y = s[1];
  const double cross = p.a * x * x * y;
  return {1.0 - (p.b + 1.0) * x + cross, p.b * x - cross};
}

data::Matrix brusselator_path(const BrusselatorParams& p,
                              const Eigen::Vector2d& y0,
                              const std::vector<double>& probe_times,
                              double dt_sim, std::mt19937_64& rng) {
  p.validate();
  return brusselator_walk(p, y0, grid_indices(probe_times, dt_sim), dt_sim, rng);
}

data::SporadicSeries simulate_ou(const OUParams& p, const SamplingSpec& spec,
                                 const std::optional<Eigen::VectorXd>& y0,
                                 std::mt19937_64& rng, double* lag) {
  p.validate();
  spec.validate();
  Eigen::VectorXd start;
  if (y0) {
    if (y0->size() != p.dims()) throw ShapeError("y0 has wrong length");
    start = *y0;
  } else {
    std::normal_distribution<double> normal;
    const double sd = p.sigma / std::sqrt(2.0 * p.theta);
    start.resize(p.dims());
    for (Eigen::Index d = 0; d < p.dims(); ++d) start[d] = p.r[d] + sd * normal(rng);
  }
  double shift = spec.lag_min;
  if (spec.lag_max > spec.lag_min) {
    shift = std::uniform_real_distribution<double>(spec.lag_min, spec.lag_max)(rng);
  }
  if (lag != nullptr) *lag = shift;
  const Pattern pat = draw_pattern(spec, p.dims(), rng);
  return assemble(pat, ou_walk(p, start, pat.at, spec.dt_sim, rng), spec.dt_sim,
                  shift);
}

data::SporadicSeries simulate_brusselator(const BrusselatorParams& p,
                                          const SamplingSpec& spec,
                                          const Eigen::Vector2d& y0,
                                          std::mt19937_64& rng) {
  p.validate();
  spec.validate();
  const Pattern pat = draw_pattern(spec, 2, rng);
  return assemble(pat, brusselator_walk(p, y0, pat.at, spec.dt_sim, rng),
                  spec.dt_sim, 0.0);
}

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::random_r:
      return "random_r";
    case Setting::random_lag:
      return "random_lag";
    case Setting::rho0:
      return "rho0";
    case Setting::brusselator:
      return "brusselator";
  }
  return "?";
}

Setting parse_setting(std::string_view s) {
  if (s == "random_r") return Setting::random_r;
  if (s == "random_lag") return Setting::random_lag;
  if (s == "rho0") return Setting::rho0;
  if (s == "brusselator") return Setting::brusselator;
  throw ConfigError("unknown setting '" + std::string(s) +
                    "' (expected random_r, random_lag, rho0 or brusselator)");
}

std::size_t default_size(Setting setting) {
  return setting == Setting::brusselator ? 1000 : 10000;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

GeneratedDataset make_dataset(Setting setting, std::size_t n,
                              std::uint64_t seed, std::size_t first_id) {
  if (n == 0) throw ConfigError("dataset size must be at least 1");
  GeneratedDataset out;
  out.series.reserve(n);
  auto& meta = out.metadata;
  meta.emplace_back("setting", std::string(to_string(setting)));
  meta.emplace_back("n", std::to_string(n));
  meta.emplace_back("seed", std::to_string(seed));
  meta.emplace_back("first_id", std::to_string(first_id));

  if (setting == Setting::brusselator) {
    BrusselatorParams p;
    SamplingSpec spec;
    spec.horizon = 50.0;
    spec.mean_obs = 20.0;
    const Eigen::Vector2d y0(1.0, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::mt19937_64 rng(stream_seed(seed, first_id + i));
      auto s = simulate_brusselator(p, spec, y0, rng);
      s.id = std::to_string(first_id + i);
      out.series.push_back(std::move(s));
    }
    meta.emplace_back("a", fmt(p.a));
    meta.emplace_back("b", fmt(p.b));
    meta.emplace_back("sigma", fmt(p.sigma));
    meta.emplace_back("rho", fmt(p.rho));
    meta.emplace_back("y0", "1,2");
    meta.emplace_back("horizon", fmt(spec.horizon));
    meta.emplace_back("mean_obs", fmt(spec.mean_obs));
    meta.emplace_back("obs_prob", fmt(spec.obs_prob));
    meta.emplace_back("dt_sim", fmt(spec.dt_sim));
    return out;
  }

  SamplingSpec spec;
  if (setting == Setting::random_lag) spec.lag_max = 0.5;
  const double rho = setting == Setting::rho0 ? 0.0 : 0.99;
  out.truth.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(stream_seed(seed, first_id + i));
    OUParams p;
    p.rho = rho;
    p.r.resize(2);
    p.r[0] = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
    p.r[1] = std::uniform_real_distribution<double>(-1.5, -0.5)(rng);
    double lag = 0.0;
    auto s = simulate_ou(p, spec, std::nullopt, rng, &lag);
    s.id = std::to_string(first_id + i);
    out.series.push_back(std::move(s));
    out.truth.push_back(SeriesTruth{p, lag});
  }
  meta.emplace_back("theta", "1");
  meta.emplace_back("sigma", "0.1");
  meta.emplace_back("rho", fmt(rho));
  meta.emplace_back("r1", "uniform(0.5,1.5)");
  meta.emplace_back("r2", "uniform(-1.5,-0.5)");
  meta.emplace_back("lag", setting == Setting::random_lag ? "uniform(0,0.5)" : "0");
  meta.emplace_back("y0", "stationary");
  meta.emplace_back("horizon", fmt(spec.horizon));
  meta.emplace_back("mean_obs", fmt(spec.mean_obs));
  meta.emplace_back("obs_prob", fmt(spec.obs_prob));
  meta.emplace_back("dt_sim", fmt(spec.dt_sim));
  return out;
}

void write_metadata(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : metadata) out << k << '=' << v << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::pair<std::string, std::string>> read_metadata(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected key=value");
    }
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

}  // namespace gob::sde
