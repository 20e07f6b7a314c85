#include "mtcae/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mtcae/errors.hpp"

namespace mtcae {

Metrics compute_metrics(const std::vector<int>& predictions,
                        const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw MetricError("compute_metrics: prediction/label count mismatch");
    }
    if (predictions.empty()) {
        throw MetricError("compute_metrics: empty input");
    }
    std::array<std::array<std::uint64_t, kClassCount>, kClassCount> confusion{};
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        int t = labels[i];
        int p = predictions[i];
        if (t < 0 || t >= static_cast<int>(kClassCount) || p < 0 ||
            p >= static_cast<int>(kClassCount)) {
            throw MetricError("compute_metrics: class index out of range");
        }
        confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
    }
    return metrics_from_confusion(confusion);
}

Metrics metrics_from_confusion(
    const std::array<std::array<std::uint64_t, kClassCount>, kClassCount>& confusion) {
    Metrics m;
    m.confusion = confusion;

    std::uint64_t total = 0;
    std::uint64_t correct = 0;
    double recall_sum = 0.0;
    std::size_t present_classes = 0;

    for (std::size_t c = 0; c < kClassCount; ++c) {
        std::uint64_t row_total = 0;
        for (std::size_t p = 0; p < kClassCount; ++p) row_total += confusion[c][p];
        total += row_total;
        correct += confusion[c][c];
        if (row_total > 0) {
            double recall = static_cast<double>(confusion[c][c]) /
                            static_cast<double>(row_total);
            m.per_class_recall[c] = recall;
            recall_sum += recall;
            ++present_classes;
        } else {
            m.per_class_recall[c] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    if (total == 0) {
        throw MetricError("metrics_from_confusion: empty confusion matrix");
    }
    m.unweighted_accuracy = recall_sum / static_cast<double>(present_classes);
    m.weighted_accuracy =
        static_cast<double>(correct) / static_cast<double>(total);
    return m;
}

}  // namespace mtcae
