#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mtcae {

constexpr std::size_t kClassCount = 4;

// Confusion-matrix-derived scores. Rows of `confusion` are true classes,
// columns are predictions. UA averages recall over classes that have at
// least one true example; WA is trace / total.
struct Metrics {
    std::array<std::array<std::uint64_t, kClassCount>, kClassCount> confusion{};
    std::array<double, kClassCount> per_class_recall{};  // NaN for absent classes
    double unweighted_accuracy = 0.0;
    double weighted_accuracy = 0.0;
};

Metrics compute_metrics(const std::vector<int>& predictions,
                        const std::vector<int>& labels);

// Metrics recomputed from an already-summed confusion matrix.
Metrics metrics_from_confusion(
    const std::array<std::array<std::uint64_t, kClassCount>, kClassCount>& confusion);

}  // namespace mtcae
