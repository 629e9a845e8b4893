#pragma once

#include "curvens/learners.hpp"

namespace curvens::detail {

/// Throws on shape mismatch, non-finite entries, labels outside {0,1}, or a missing class.
void check_training_data(const FeatureMatrix & X, const BinaryLabels & y, std::size_t names);

double sigmoid(double x);

std::vector<double> logistic_decision(const TrainedAggregator & model, const FeatureMatrix & X);
std::vector<double> gnb_decision(const TrainedAggregator & model, const FeatureMatrix & X);
std::vector<double> forest_decision(const TrainedAggregator & model, const FeatureMatrix & X);
std::vector<double> svm_decision(const TrainedAggregator & model, const FeatureMatrix & X);

}  // namespace curvens::detail
