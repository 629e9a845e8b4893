#include "curvens/auroc.hpp"

#include "curvens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace curvens {

double auroc(const LabeledScores & scores) {
    const std::size_t h = scores.human_scores.size();
    const std::size_t g = scores.machine_scores.size();
    if (h == 0 || g == 0) {
        throw Error("auroc: both classes need at least one score");
    }
    struct Item {
        double score;
        bool machine;
    };
    std::vector<Item> items;
    items.reserve(h + g);
    for (double s : scores.human_scores) {
        items.push_back({ s, false });
    }
    for (double s : scores.machine_scores) {
        items.push_back({ s, true });
    }
    for (const auto & it : items) {
        if (!std::isfinite(it.score)) {
            throw Error("auroc: non-finite score");
        }
    }
    std::sort(items.begin(), items.end(), [](const Item & a, const Item & b) { return a.score < b.score; });

    // Twice the machine rank sum, with tied groups sharing their midrank, keeps
    // everything in exact integer arithmetic.
    double twice_rank_sum = 0.0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        std::size_t machines = 0;
        while (j < items.size() && items[j].score == items[i].score) {
            machines += items[j].machine ? 1 : 0;
            ++j;
        }
        // ranks i+1 .. j, midrank (i + 1 + j) / 2
        twice_rank_sum += static_cast<double>(machines) * static_cast<double>(i + 1 + j);
        i = j;
    }
    const double gd = static_cast<double>(g);
    const double twice_u = twice_rank_sum - gd * (gd + 1.0);
    return (twice_u * 0.5) / (static_cast<double>(h) * gd);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error("auroc: scores and labels differ in length");
    }
    LabeledScores ls;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        (labels[i] == 1 ? ls.machine_scores : ls.human_scores).push_back(scores[i]);
    }
    return auroc(ls);
}

}  // namespace curvens
