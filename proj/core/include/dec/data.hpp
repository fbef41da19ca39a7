#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dec/matrix.hpp"
#include "dec/rng.hpp"

namespace dec {

/// Feature matrix plus optional ground-truth labels. Labels exist for
/// evaluation only; no training entry point accepts a Dataset.
struct Dataset {
  Matrix features;
  std::optional<std::vector<int>> labels;
  std::string name;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  bool has_labels() const noexcept { return labels.has_value(); }
  /// 1 + largest label; 0 without labels.
  std::size_t class_count() const;

  /// Throws ArgumentError if labels are present with the wrong length or a
  /// negative value.
  void validate() const;
};

/// Reads IDX image (magic 0x00000803) and optional label (0x00000801)
/// files. Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels = std::nullopt);

/// Decodes in-memory IDX buffers; `source` names the buffer in errors.
Matrix parse_idx_images(const std::vector<std::uint8_t>& bytes, const std::string& source);
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes, const std::string& source);

/// Comma-separated reals, optional header row (detected when the first line
/// is not numeric). `label_column` is a 0-based column holding integer labels.
Dataset load_csv(const std::filesystem::path& path,
                 std::optional<std::size_t> label_column = std::nullopt);
Dataset parse_csv(std::istream& in, std::optional<std::size_t> label_column,
                  const std::string& name);

/// Writes features at 17 significant digits; labels, when given, become the
/// last column.
void write_csv(std::ostream& out, const Matrix& features,
               const std::optional<std::vector<int>>& labels = std::nullopt, bool header = false);
void write_csv(const std::filesystem::path& path, const Matrix& features,
               const std::optional<std::vector<int>>& labels = std::nullopt, bool header = false);

/// Global scalar s such that mean_i (1/d)‖s·x_i‖² = 1.
double normalization_scale(const Matrix& features);

struct NormalizedDataset {
  Dataset dataset;
  double scale = 1.0;
};

NormalizedDataset normalize(Dataset dataset);

/// Keep-probability of class c out of C under the linear retention schedule.
double retention_probability(std::size_t cls, std::size_t class_count, double r_min);

/// Keeps each point of class c with probability r_min + c(1 − r_min)/(C − 1).
Dataset imbalanced_subsample(const Dataset& dataset, double r_min, Rng& rng);

/// k isotropic Gaussian clusters whose centers are pairwise at least
/// `center_separation` apart. Point i belongs to component i mod k.
Dataset make_blobs(std::size_t n, std::size_t k, std::size_t dim, double center_separation,
                   double sigma, std::uint64_t seed);

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
};

/// Deterministic shuffled split; train gets round(fraction·n) rows.
DatasetSplit split(const Dataset& dataset, const SplitSpec& spec);

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& rows);
Dataset concatenate(const Dataset& first, const Dataset& second);

}  // namespace dec
