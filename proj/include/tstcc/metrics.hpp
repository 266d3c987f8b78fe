#pragma once

#include <cstdint>
#include <vector>

namespace tstcc {

struct Metrics {
    double accuracy = 0;
    double mf1 = 0;
    std::vector<double> precision, recall, f1;
    std::vector<std::vector<int64_t>> confusion;  // [truth][pred]
};

// Accuracy = trace / N; MF1 = unweighted mean of per-class F1. A class with
// zero true and zero predicted instances scores F1 = 0 (the strict reading;
// metric libraries differ here).
Metrics evaluate_metrics(const std::vector<int64_t>& pred, const std::vector<int64_t>& truth,
                         int64_t num_classes);

}  // namespace tstcc
