#pragma once

#include <span>
#include <vector>

namespace curvens {

struct LabeledScores {
    std::vector<double> human_scores;
    std::vector<double> machine_scores;
};

/// P(machine score > human score) + 0.5 P(equal), computed from midranks in
/// O(n log n). Throws when either class is empty or a score is non-finite.
double auroc(const LabeledScores & scores);

/// Convenience overload: labels are 1 for machine, 0 for human.
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace curvens
