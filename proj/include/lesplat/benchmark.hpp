#pragma once

#include "lesplat/metrics.hpp"
#include "lesplat/query_gen.hpp"
#include "lesplat/quantize.hpp"
#include "lesplat/relevancy.hpp"
#include "lesplat/scene.hpp"
#include "lesplat/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lesplat {

/// Desk-scale stand-in for a driving scene: three labelled object classes in front of a backdrop, simulated dense
/// language features whose per-instance direction drifts toward a confusable class, and an
/// embedding table holding class phrases, LLM-style helping positives and negatives, and the
/// four predefined canonical phrases.
struct BenchmarkConfig {
    std::uint64_t seed = 7;
    int gaussians_per_class = 50;
    int backdrop_gaussians = 48;
    int embedding_dim = 64;
    int codebook_size = 32;
    int codebook_samples = 3000; // pixel features drawn for k-means
    int image_width = 64;
    int image_height = 48;
    double scene_noise = 0.1;
    double feature_noise = 0.35;   // norm of the per-pixel feature perturbation
    double query_alignment = 0.5;  // weight of the class's own phrase in its image features
    double confusion_min = 0.3;    // per-instance weight of the confusable class's phrase
    double confusion_max = 0.6;
    double helping_cosine = 0.8;
    double threshold = kDefaultThreshold;
    TrainConfig train;
};

struct SyntheticBenchmark {
    LabeledScene labeled;
    std::vector<Camera> train_cameras;
    Camera eval_camera;
    std::vector<std::vector<int>> train_labels; // per pixel class, -1 = unlabeled
    std::vector<int> eval_labels;
    std::vector<RowMatrixXd> train_features;    // per view, pixels x D (zero rows where unlabeled)
    EmbeddingTable table;
    Fixtures fixtures;                          // stubbed LLM replies keyed by prompt hash
    std::vector<double> confusion;              // per gaussian drift toward the confusable class
};

SyntheticBenchmark make_benchmark(const BenchmarkConfig& cfg);

/// Per pixel class by accumulated compositing weight; -1 where coverage is at most 0.5.
std::vector<int> render_label_map(const LabeledScene& labeled, const Camera& cam);

struct MethodResult {
    std::string name;
    MetricsReport report;
};

struct BenchmarkReport {
    std::uint64_t seed = 0;
    double per_gaussian_accuracy = 0.0;
    double quantization_error = 0.0;
    std::vector<LossRecord> trace;
    std::vector<QuerySpec> queries;
    MethodResult predefined; // main query vs {object, things, stuff, texture}
    MethodResult no_helping; // main query vs LLM negatives
    MethodResult full;       // main query + helping positives vs LLM negatives
};

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

std::string benchmark_report_json(const BenchmarkReport& report);
/// Accuracy / Precision / mIoU / mAP per method, one row each.
std::string benchmark_table(const BenchmarkReport& report);

} // namespace lesplat
