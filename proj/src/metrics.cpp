#include "lesplat/metrics.hpp"

#include "lesplat/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>

namespace lesplat {

namespace {

Ratio ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) {
        return {0.0, true};
    }
    return {static_cast<double>(num) / static_cast<double>(den), false};
}

void check_same_shape(int w1, int h1, Eigen::Index n1, int w2, int h2, Eigen::Index n2) {
    if (w1 != w2 || h1 != h2 || n1 != n2) {
        throw ValidationError("mask dimensions differ");
    }
}

} // namespace

ConfusionCounts confusion(const SegMask& pred, const SegMask& gt) {
    check_same_shape(pred.width, pred.height, pred.pixels.size(), gt.width, gt.height, gt.pixels.size());
    ConfusionCounts c;
    c.tp = (pred.pixels && gt.pixels).count();
    c.fp = (pred.pixels && !gt.pixels).count();
    c.fn = (!pred.pixels && gt.pixels).count();
    c.tn = static_cast<std::int64_t>(pred.pixels.size()) - c.tp - c.fp - c.fn;
    return c;
}

Ratio iou(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }
Ratio precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
Ratio recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
Ratio accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }

double average_precision(const RelevancyMap& scores, const SegMask& gt) {
    check_same_shape(scores.width, scores.height, scores.scores.size(), gt.width, gt.height, gt.pixels.size());
    const auto positives = gt.count();
    if (positives == 0) {
        throw ValidationError("average precision needs at least one positive pixel");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.scores.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return scores.scores[a] > scores.scores[b]; });
    double sum = 0.0;
    std::int64_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (gt.pixels[order[rank]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return sum / static_cast<double>(positives);
}

MetricsReport evaluate(const std::vector<ClassPrediction>& classes) {
    if (classes.empty()) {
        throw ValidationError("evaluation needs at least one class");
    }
    MetricsReport report;
    ConfusionCounts pooled;
    for (const auto& cls : classes) {
        ClassMetrics m;
        m.name = cls.name;
        m.counts = confusion(cls.predicted, cls.ground_truth);
        const Ratio i = iou(m.counts);
        const Ratio p = precision(m.counts);
        m.iou = i.value;
        m.precision = p.value;
        m.degenerate = i.degenerate || p.degenerate;
        m.ap = average_precision(cls.scores, cls.ground_truth);
        pooled += m.counts;
        report.miou += m.iou;
        report.map += m.ap;
        report.per_class.push_back(std::move(m));
    }
    const auto n = static_cast<double>(classes.size());
    report.miou /= n;
    report.map /= n;
    report.accuracy = accuracy(pooled).value;
    report.precision = precision(pooled).value;
    return report;
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
    for (const auto& m : report.per_class) {
        per_class.push_back({{"name", m.name},
                             {"iou", m.iou},
                             {"precision", m.precision},
                             {"ap", m.ap},
                             {"degenerate", m.degenerate},
                             {"tp", m.counts.tp},
                             {"fp", m.counts.fp},
                             {"tn", m.counts.tn},
                             {"fn", m.counts.fn}});
    }
    nlohmann::ordered_json doc = {{"accuracy", report.accuracy},
                                  {"precision", report.precision},
                                  {"miou", report.miou},
                                  {"map", report.map},
                                  {"per_class", per_class}};
    return doc.dump(2);
}

} // namespace lesplat
