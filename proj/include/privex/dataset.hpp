// Copyright 2026 The privex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace privex {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised when a training run produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Labeled feature matrix. Rows are points, columns are features. Group tags
// and membership flags are optional and, when present, have one entry per
// row.
struct Dataset {
  Mat features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<std::string> groups;
  std::vector<std::uint8_t> membership;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  Vec point(std::size_t i) const { return features.row(static_cast<Eigen::Index>(i)).transpose(); }

  void validate() const {
    if (labels.empty()) throw std::invalid_argument("dataset: no rows");
    if (static_cast<std::size_t>(features.rows()) != labels.size())
      throw std::invalid_argument("dataset: feature rows do not match label count");
    if (features.cols() < 1) throw std::invalid_argument("dataset: no feature columns");
    for (int l : labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
        throw std::invalid_argument("dataset: label " + std::to_string(l) +
                                    " outside [0, " + std::to_string(num_classes) + ")");
    }
    if (!groups.empty() && groups.size() != labels.size())
      throw std::invalid_argument("dataset: group tag count does not match rows");
    if (!membership.empty() && membership.size() != labels.size())
      throw std::invalid_argument("dataset: membership flag count does not match rows");
  }

  // Rows in the given order. Optional columns follow the selection.
  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.num_classes = num_classes;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.features.row(static_cast<Eigen::Index>(r)) =
          features.row(static_cast<Eigen::Index>(rows[r]));
      out.labels.push_back(labels[rows[r]]);
      if (!groups.empty()) out.groups.push_back(groups[rows[r]]);
      if (!membership.empty()) out.membership.push_back(membership[rows[r]]);
    }
    return out;
  }

  // All rows except `skip`, in index order.
  Dataset without(std::size_t skip) const {
    std::vector<std::size_t> rows;
    rows.reserve(size() - 1);
    for (std::size_t i = 0; i < size(); ++i)
      if (i != skip) rows.push_back(i);
    return subset(rows);
  }
};

// Stacks two datasets; membership flags are set to 1 for `members` rows and
// 0 for `nonmembers` rows.
inline Dataset membership_eval_set(const Dataset& members, const Dataset& nonmembers) {
  Dataset out;
  out.num_classes = std::max(members.num_classes, nonmembers.num_classes);
  out.features.resize(members.features.rows() + nonmembers.features.rows(),
                      members.features.cols());
  out.features << members.features, nonmembers.features;
  out.labels = members.labels;
  out.labels.insert(out.labels.end(), nonmembers.labels.begin(), nonmembers.labels.end());
  if (!members.groups.empty() && !nonmembers.groups.empty()) {
    out.groups = members.groups;
    out.groups.insert(out.groups.end(), nonmembers.groups.begin(), nonmembers.groups.end());
  }
  out.membership.assign(members.size(), 1);
  out.membership.insert(out.membership.end(), nonmembers.size(), 0);
  return out;
}

}  // namespace privex
