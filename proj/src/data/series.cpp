// SPDX-License-Identifier: Apache-2.0
#include "gob/data/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <string_view>
#include <unordered_set>

#include "gob/error.hpp"

namespace gob::data {

void SporadicSeries::validate() const {
  const Eigen::Index k = times.size();
  if (values.rows() != k || mask.rows() != k || mask.cols() != values.cols()) {
    throw DataError("series '" + id + "': inconsistent shapes");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!std::isfinite(times[i])) {
      throw DataError("series '" + id + "': non-finite time");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw DataError("series '" + id + "': times not strictly increasing at row " +
                      std::to_string(i));
    }
    bool any = false;
    for (Eigen::Index d = 0; d < values.cols(); ++d) {
      const double m = mask(i, d);
      if (m != 0.0 && m != 1.0) {
        throw DataError("series '" + id + "': mask entries must be 0 or 1");
      }
      if (m == 1.0) {
        any = true;
        if (!std::isfinite(values(i, d))) {
          throw DataError("series '" + id + "': non-finite observed value");
        }
      }
    }
    if (!any) {
      throw DataError("series '" + id + "': all-zero mask at row " +
                      std::to_string(i));
    }
  }
}

bool SporadicSeries::operator==(const SporadicSeries& other) const {
  return id == other.id && times.size() == other.times.size() &&
         values.rows() == other.values.rows() &&
         values.cols() == other.values.cols() && times == other.times &&
         values == other.values && mask == other.mask;
}

Eigen::Index dataset_dims(const Dataset& ds) {
  if (ds.empty()) return 0;
  const Eigen::Index d = ds.front().dims();
  for (const auto& s : ds) {
    if (s.dims() != d) throw DataError("series differ in dimension");
  }
  return d;
}

std::size_t observation_rows(const Dataset& ds) {
  std::size_t n = 0;
  for (const auto& s : ds) n += static_cast<std::size_t>(s.size());
  return n;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw DataError("line " + std::to_string(line) + ": cannot parse number '" +
                    std::string(field) + "'");
  }
  return v;
}

struct Builder {
  std::string id;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> mask;
};

SporadicSeries finish(Builder& b, Eigen::Index dims) {
  SporadicSeries s;
  s.id = b.id;
  const auto k = static_cast<Eigen::Index>(b.times.size());
  s.times = Eigen::Map<const Eigen::VectorXd>(b.times.data(), k);
  s.values = Eigen::Map<const Matrix>(b.values.data(), k, dims);
  s.mask = Eigen::Map<const Matrix>(b.mask.data(), k, dims);
  return s;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index dims = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError("missing CSV header");
  {
    const auto header = split_fields(trim(line));
    if (header.size() < 4 || header.size() % 2 != 0 || trim(header[0]) != "id" ||
        trim(header[1]) != "time") {
      throw DataError("line " + std::to_string(line_no) +
                      ": header must be id,time,v1..vD,m1..mD");
    }
    dims = static_cast<Eigen::Index>((header.size() - 2) / 2);
    for (Eigen::Index d = 0; d < dims; ++d) {
      const std::string v = "v" + std::to_string(d + 1);
      const std::string m = "m" + std::to_string(d + 1);
      if (trim(header[2 + d]) != v || trim(header[2 + dims + d]) != m) {
        throw DataError("line " + std::to_string(line_no) +
                        ": unexpected column names in header");
      }
    }
  }

  Dataset out;
  std::unordered_set<std::string> seen;
  Builder current;
  bool open = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto fields = split_fields(row);
    if (static_cast<Eigen::Index>(fields.size()) != 2 + 2 * dims) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(2 + 2 * dims) + " fields, found " +
                      std::to_string(fields.size()));
    }
    const std::string id(trim(fields[0]));
    if (id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty id");
    if (!open || id != current.id) {
      if (open) out.push_back(finish(current, dims));
      if (!seen.insert(id).second) {
        throw DataError("line " + std::to_string(line_no) + ": rows of series '" +
                        id + "' are not contiguous");
      }
      current = Builder{id, {}, {}, {}};
      open = true;
    }
    const double t = parse_double(fields[1], line_no);
    if (!std::isfinite(t)) {
      throw DataError("line " + std::to_string(line_no) + ": non-finite time");
    }
    if (!current.times.empty() && !(t > current.times.back())) {
      throw DataError("line " + std::to_string(line_no) + ": time " +
                      std::string(trim(fields[1])) +
                      " does not increase within series '" + id + "'");
    }
    bool any = false;
    for (Eigen::Index d = 0; d < dims; ++d) {
      const double m = parse_double(fields[2 + dims + d], line_no);
      if (m != 0.0 && m != 1.0) {
        throw DataError("line " + std::to_string(line_no) +
                        ": mask entries must be 0 or 1");
      }
      any = any || m == 1.0;
    }
    if (!any) {
      throw DataError("line " + std::to_string(line_no) + ": all-zero mask");
    }
    current.times.push_back(t);
    for (Eigen::Index d = 0; d < dims; ++d) {
      const double v = parse_double(fields[2 + d], line_no);
      const double m = parse_double(fields[2 + dims + d], line_no);
      if (m == 1.0 && !std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_no) +
                        ": non-finite observed value");
      }
      current.values.push_back(v);
    }
    for (Eigen::Index d = 0; d < dims; ++d) {
      current.mask.push_back(parse_double(fields[2 + dims + d], line_no));
    }
  }
  if (open) out.push_back(finish(current, dims));
  return out;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const Dataset& ds, Eigen::Index dims) {
  if (dims < 0) dims = dataset_dims(ds);
  std::string buf = "id,time";
  for (Eigen::Index d = 0; d < dims; ++d) buf += ",v" + std::to_string(d + 1);
  for (Eigen::Index d = 0; d < dims; ++d) buf += ",m" + std::to_string(d + 1);
  buf += '\n';
  for (const auto& s : ds) {
    if (s.dims() != dims) throw DataError("series differ in dimension");
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      buf += s.id;
      buf += ',';
      append_double(buf, s.times[i]);
      for (Eigen::Index d = 0; d < dims; ++d) {
        buf += ',';
        if (s.mask(i, d) == 1.0) {
          append_double(buf, s.values(i, d));
        } else {
          buf += "0.0";
        }
      }
      for (Eigen::Index d = 0; d < dims; ++d) {
        buf += s.mask(i, d) == 1.0 ? ",1" : ",0";
      }
      buf += '\n';
    }
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path,
              Eigen::Index dims) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, ds, dims);
  if (!out) throw DataError("write failed: " + path.string());
}

std::size_t BatchTimeline::observation_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.series.size();
  return n;
}

BatchTimeline build_batch_timeline(const Dataset& ds,
                                   const std::vector<std::size_t>& batch) {
  std::map<double, BatchTimeline::Entry> by_time;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const SporadicSeries& s = ds.at(batch[j]);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      auto& e = by_time[s.times[i]];
      e.time = s.times[i];
      e.series.push_back(j);
      e.rows.push_back(i);
    }
  }
  BatchTimeline tl;
  tl.entries.reserve(by_time.size());
  for (auto& kv : by_time) tl.entries.push_back(std::move(kv.second));
  return tl;
}

BatchTimeline build_batch_timeline(const Dataset& ds) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return build_batch_timeline(ds, all);
}

Split split(const Dataset& ds, const std::array<double, 3>& fractions,
            std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::llround(fractions[0] * double(n))));
  const auto n_val = std::min<std::size_t>(
      n - n_train,
      static_cast<std::size_t>(std::llround(fractions[1] * double(n))));
  std::vector<int> part(n, 2);
  for (std::size_t i = 0; i < n_train; ++i) part[order[i]] = 0;
  for (std::size_t i = n_train; i < n_train + n_val; ++i) part[order[i]] = 1;
  Split out;
  for (std::size_t i = 0; i < n; ++i) {
    (part[i] == 0 ? out.train : part[i] == 1 ? out.val : out.test).push_back(ds[i]);
  }
  return out;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), std_(std::move(stddev)) {
  if (mean_.size() != std_.size()) throw ShapeError("standardizer shape mismatch");
  for (Eigen::Index d = 0; d < std_.size(); ++d) {
    if (!(std_[d] > 0.0) || !std::isfinite(std_[d])) {
      throw DataError("standardizer: dimension " + std::to_string(d + 1) +
                      " has zero spread");
    }
  }
}

Standardizer Standardizer::fit(const Dataset& train) {
  const Eigen::Index dims = dataset_dims(train);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dims);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(dims);
  for (const auto& s : train) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      for (Eigen::Index d = 0; d < dims; ++d) {
        if (s.mask(i, d) == 1.0) {
          sum[d] += s.values(i, d);
          count[d] += 1.0;
        }
      }
    }
  }
  for (Eigen::Index d = 0; d < dims; ++d) {
    if (count[d] < 2.0) {
      throw DataError("standardizer: dimension " + std::to_string(d + 1) +
                      " has fewer than two observations");
    }
  }
  const Eigen::VectorXd mean = sum.cwiseQuotient(count);
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(dims);
  for (const auto& s : train) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      for (Eigen::Index d = 0; d < dims; ++d) {
        if (s.mask(i, d) == 1.0) {
          const double e = s.values(i, d) - mean[d];
          ss[d] += e * e;
        }
      }
    }
  }
  return Standardizer(mean, (ss.cwiseQuotient(count)).cwiseSqrt());
}

SporadicSeries Standardizer::apply(const SporadicSeries& s) const {
  if (s.dims() != mean_.size()) throw ShapeError("standardizer dimension mismatch");
  SporadicSeries out = s;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    for (Eigen::Index d = 0; d < s.dims(); ++d) {
      out.values(i, d) = s.mask(i, d) == 1.0
                             ? (s.values(i, d) - mean_[d]) / std_[d]
                             : 0.0;
    }
  }
  return out;
}

SporadicSeries Standardizer::invert(const SporadicSeries& s) const {
  if (s.dims() != mean_.size()) throw ShapeError("standardizer dimension mismatch");
  SporadicSeries out = s;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    for (Eigen::Index d = 0; d < s.dims(); ++d) {
      out.values(i, d) =
          s.mask(i, d) == 1.0 ? s.values(i, d) * std_[d] + mean_[d] : 0.0;
    }
  }
  return out;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  Dataset out;
  out.reserve(ds.size());
  for (const auto& s : ds) out.push_back(apply(s));
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::mt19937_64& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(
                                         std::min(n, i + batch_size)));
  }
  return out;
}

}  // namespace gob::data
