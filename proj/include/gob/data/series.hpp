// SPDX-License-Identifier: Apache-2.0
//
// Sporadically observed multivariate series and their CSV format.
//
// File layout: header `id,time,v1..vD,m1..mD`, one row per observation,
// rows of a series contiguous and in increasing time. Unobserved values are
// written as 0.0 with mask 0.
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gob::data {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SporadicSeries {
  std::string id;
  Eigen::VectorXd times;
  /// K x D.
  Matrix values;
  /// K x D, entries in {0, 1}.
  Matrix mask;

  Eigen::Index size() const { return times.size(); }
  Eigen::Index dims() const { return values.cols(); }

  /// Throws DataError naming the first violated invariant.
  void validate() const;
  bool operator==(const SporadicSeries& other) const;
};

using Dataset = std::vector<SporadicSeries>;

/// Common dimension of a dataset (0 when empty); throws on a mismatch.
Eigen::Index dataset_dims(const Dataset& ds);
std::size_t observation_rows(const Dataset& ds);

Dataset read_csv(std::istream& in);
Dataset load_csv(const std::filesystem::path& path);
/// Writes `dims` columns even when `ds` is empty.
void write_csv(std::ostream& out, const Dataset& ds, Eigen::Index dims = -1);
void save_csv(const Dataset& ds, const std::filesystem::path& path,
              Eigen::Index dims = -1);

/// Unique sorted observation times of a batch, each with the (series, row)
/// pairs observed there.
struct BatchTimeline {
  struct Entry {
    double time = 0.0;
    std::vector<std::size_t> series;
    std::vector<Eigen::Index> rows;
  };
  std::vector<Entry> entries;

  std::size_t observation_count() const;
};

/// `batch` holds indices into `ds`; entry series ids are positions in batch.
BatchTimeline build_batch_timeline(const Dataset& ds,
                                   const std::vector<std::size_t>& batch);
BatchTimeline build_batch_timeline(const Dataset& ds);

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Random assignment with sizes round(f_train n), round(f_val n) and the
/// remainder for test. Each part keeps the input order.
Split split(const Dataset& ds, const std::array<double, 3>& fractions,
            std::uint64_t seed);

/// Per-dimension affine normalization fit on observed entries.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  static Standardizer fit(const Dataset& train);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return std_; }

  SporadicSeries apply(const SporadicSeries& s) const;
  SporadicSeries invert(const SporadicSeries& s) const;
  Dataset apply(const Dataset& ds) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
};

/// Shuffled partition of [0, n) into batches of at most batch_size.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::mt19937_64& rng);

}  // namespace gob::data
