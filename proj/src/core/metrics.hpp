#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace etdpc::evalrep {

struct CategoryMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t support = 0;    // true count
    int64_t predicted = 0;  // predicted count
};

struct MetricsReport {
    std::vector<CategoryMetrics> categories;          // one row per class, in class order
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::vector<std::vector<int64_t>> confusion;      // rows true, cols predicted
    int64_t total = 0;
    std::string test_set_hash;                        // filled by the evaluation harness
    std::vector<std::string> flags;                   // e.g. classes with no support and no predictions
};

// P = TP/(TP+FP), R = TP/(TP+FN), F1 the harmonic mean; all zero when the
// denominator is zero. Macro averages are unweighted over every class in
// `class_names`, including zero-support classes (those are flagged).
MetricsReport compute_metrics(const std::vector<int>& true_labels,
                              const std::vector<int>& predicted_labels,
                              const std::vector<std::string>& class_names);

}  // namespace etdpc::evalrep
