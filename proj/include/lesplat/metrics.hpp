#pragma once

#include "lesplat/relevancy.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lesplat {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
    bool operator==(const ConfusionCounts&) const = default;
};

/// A ratio whose denominator may be zero; such ratios read as 0 and are flagged degenerate.
struct Ratio {
    double value = 0.0;
    bool degenerate = false;
};

ConfusionCounts confusion(const SegMask& pred, const SegMask& gt);

Ratio iou(const ConfusionCounts& c);       // tp / (tp + fp + fn)
Ratio precision(const ConfusionCounts& c); // tp / (tp + fp)
Ratio recall(const ConfusionCounts& c);    // tp / (tp + fn)
Ratio accuracy(const ConfusionCounts& c);  // (tp + tn) / total

/// Ranking average precision: pixels sorted by descending score (ties in row-major order),
/// precision averaged over the ranks of the positive pixels.
double average_precision(const RelevancyMap& scores, const SegMask& gt);

struct ClassPrediction {
    std::string name;
    SegMask predicted;
    RelevancyMap scores;
    SegMask ground_truth;
};

struct ClassMetrics {
    std::string name;
    ConfusionCounts counts;
    double iou = 0.0;
    double precision = 0.0;
    double ap = 0.0;
    bool degenerate = false;
};

struct MetricsReport {
    double accuracy = 0.0;  // pixel-pooled over classes
    double precision = 0.0; // pixel-pooled over classes
    double miou = 0.0;
    double map = 0.0;
    std::vector<ClassMetrics> per_class;
};

MetricsReport evaluate(const std::vector<ClassPrediction>& classes);

/// Fixed keys: accuracy, precision, miou, map, per_class.
std::string metrics_to_json(const MetricsReport& report);

} // namespace lesplat
