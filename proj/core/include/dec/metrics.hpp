#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dec/matrix.hpp"

namespace dec {

struct HungarianResult {
  std::vector<std::size_t> assignment;  ///< row i is matched to column assignment[i]
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix, O(k³).
HungarianResult hungarian(const Matrix& cost);

/// Co-occurrence counts between two labelings. Distinct label values are
/// mapped to dense indices in ascending order.
struct ContingencyTable {
  std::vector<int> row_labels;  ///< distinct true labels
  std::vector<int> col_labels;  ///< distinct cluster ids
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> row_totals;
  std::vector<std::size_t> col_totals;
  std::size_t total = 0;

  static ContingencyTable build(std::span<const int> true_labels, std::span<const int> cluster_ids);
};

/// One-to-one map from cluster ids to labels over the smaller side.
struct AssignmentMapping {
  std::vector<std::pair<int, int>> cluster_to_label;
  std::size_t matched_count = 0;
};

AssignmentMapping best_mapping(const ContingencyTable& table);

/// max over one-to-one maps m of Σ 1{l_i = m(c_i)} / n.
double clustering_accuracy(std::span<const int> true_labels, std::span<const int> cluster_ids);

/// I(l, c) / ((H(l) + H(c)) / 2), natural log. Two single-cluster
/// partitions score 1.
double nmi(std::span<const int> true_labels, std::span<const int> cluster_ids);

/// G = L_train / L_validation.
double generalizability(double train_loss, double validation_loss);

/// The k preceding the largest relative drop G_k → G_{k+1}. `ks` must be
/// ascending and the same length as `g`.
std::size_t recommend_cluster_count(std::span<const std::size_t> ks, std::span<const double> g);

}  // namespace dec
