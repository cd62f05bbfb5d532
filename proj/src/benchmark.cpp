#include "lesplat/benchmark.hpp"

#include "lesplat/errors.hpp"
#include "lesplat/render.hpp"

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

namespace lesplat {

namespace {

struct ClassPhrases {
    const char* name;
    const char* helping;
};

constexpr ClassPhrases kClasses[] = {{"car", "vehicle"}, {"pedestrian", "person walking"}, {"traffic light", "signal"}};
constexpr const char* kBackground[] = {"building", "sky", "road"};
constexpr int kNumClasses = 3;

VectorXd gaussian_vector(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) {
        v[i] = normal(rng);
    }
    return v;
}

// Image-side feature of one gaussian: its class phrase, a per-instance pull toward the next
// class's phrase, and a class-specific direction no phrase shares.
VectorXd instance_feature(const RowMatrixXd& basis, int c, double alignment, double confusion) {
    const double rest = std::sqrt(std::max(0.0, 1.0 - alignment * alignment - confusion * confusion));
    const VectorXd v = alignment * basis.col(c) + confusion * basis.col((c + 1) % kNumClasses) +
                       rest * basis.col(kNumClasses + c);
    return v.normalized();
}

std::vector<Camera> benchmark_cameras(const BenchmarkConfig& cfg) {
    const Vector3d target(0.0, 0.0, 0.0);
    const Vector3d up(0.0, -1.0, 0.0);
    const Vector3d eyes[] = {{-0.5, 0.0, -3.5}, {0.0, 0.35, -3.5}, {0.5, -0.2, -3.5}, {0.25, 0.15, -3.7}};
    std::vector<Camera> out;
    for (const Vector3d& eye : eyes) {
        out.push_back(look_at(eye, target, up, cfg.image_width, cfg.image_height, 55.0));
    }
    return out;
}

void validate(const BenchmarkConfig& cfg) {
    if (cfg.gaussians_per_class < 1 || cfg.codebook_size < kNumClasses || cfg.codebook_samples < cfg.codebook_size) {
        throw ValidationError("benchmark needs at least one gaussian per class and codebook_samples >= codebook_size >= 3");
    }
    if (cfg.embedding_dim < 4 * kNumClasses + 4) {
        throw ValidationError("benchmark embedding_dim must be at least 16");
    }
    if (!(cfg.confusion_min >= 0.0 && cfg.confusion_min <= cfg.confusion_max &&
          cfg.query_alignment * cfg.query_alignment + cfg.confusion_max * cfg.confusion_max <= 1.0)) {
        throw ValidationError("benchmark feature mixing weights must satisfy 0 <= min <= max and a^2 + max^2 <= 1");
    }
    if (!(cfg.helping_cosine > 0.0 && cfg.helping_cosine < 1.0) || !(cfg.feature_noise >= 0.0)) {
        throw ValidationError("benchmark helping_cosine must be in (0, 1) and feature_noise non-negative");
    }
}

} // namespace

std::vector<int> render_label_map(const LabeledScene& labeled, const Camera& cam) {
    const RayWeights rw = ray_weights(labeled.scene, cam);
    const int classes = static_cast<int>(labeled.class_names.size());
    std::vector<int> out(rw.pixel_count(), -1);
    std::vector<double> mass(static_cast<std::size_t>(classes));
    for (std::size_t p = 0; p < rw.pixel_count(); ++p) {
        std::fill(mass.begin(), mass.end(), 0.0);
        double total = 0.0;
        for (std::size_t k = rw.offsets[p]; k < rw.offsets[p + 1]; ++k) {
            mass[static_cast<std::size_t>(labeled.labels[rw.gaussian[k]])] += rw.weight[k];
            total += rw.weight[k];
        }
        if (total > 0.5) {
            out[p] = static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin());
        }
    }
    return out;
}

SyntheticBenchmark make_benchmark(const BenchmarkConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed);

    SyntheticSceneSpec spec;
    spec.seed = cfg.seed;
    spec.noise = cfg.scene_noise;
    const Vector3d colors[] = {{0.8, 0.1, 0.1}, {0.1, 0.7, 0.2}, {0.9, 0.8, 0.1}};
    for (int c = 0; c < kNumClasses; ++c) {
        SyntheticClass sc;
        sc.name = kClasses[c].name;
        sc.center = Vector3d(-1.1 + 1.1 * c, 0.0, 0.0);
        sc.half_extent = Vector3d(0.45, 0.45, 0.15);
        sc.count = cfg.gaussians_per_class;
        sc.color = colors[c];
        sc.scale = 0.12;
        spec.classes.push_back(sc);
    }
    // Backdrop wall filling the frame; its pixels belong to no queried class.
    SyntheticClass wall;
    wall.name = "background";
    wall.center = Vector3d(0.0, 0.0, 1.2);
    wall.half_extent = Vector3d(3.6, 2.7, 0.05);
    wall.count = cfg.backdrop_gaussians;
    wall.color = Vector3d(0.5, 0.5, 0.55);
    wall.scale = 0.55;
    spec.classes.push_back(wall);

    SyntheticBenchmark b{make_synthetic_scene(spec), {}, {}, {}, {}, {}, EmbeddingTable(cfg.embedding_dim, Provenance::Synthetic), {}, {}};
    std::vector<Camera> cams = benchmark_cameras(cfg);
    b.eval_camera = cams.back();
    cams.pop_back();
    b.train_cameras = cams;

    const int D = cfg.embedding_dim;
    const Eigen::MatrixXd gauss = Eigen::MatrixXd::NullaryExpr(D, D, [&] { return std::normal_distribution<double>()(rng); });
    const RowMatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();

    std::uniform_real_distribution<double> drift(cfg.confusion_min, cfg.confusion_max);
    const std::size_t n = b.labeled.scene.size();
    b.confusion.resize(n);
    std::vector<VectorXd> gaussian_features(n);
    for (std::size_t i = 0; i < n; ++i) {
        b.confusion[i] = drift(rng);
        const int c = b.labeled.labels[i];
        if (c < kNumClasses) {
            gaussian_features[i] = instance_feature(basis, c, cfg.query_alignment, b.confusion[i]);
        } else {
            b.confusion[i] = 0.0;
            gaussian_features[i] = (0.6 * basis.col(3 * kNumClasses) + 0.6 * basis.col(3 * kNumClasses + 2) +
                                    0.53 * basis.col(4 * kNumClasses))
                                       .normalized();
        }
    }

    const double mean_drift = 0.5 * (cfg.confusion_min + cfg.confusion_max);
    const double side = std::sqrt(1.0 - cfg.helping_cosine * cfg.helping_cosine);
    for (int c = 0; c < kNumClasses; ++c) {
        b.table.add(kClasses[c].name, basis.col(c));
    }
    for (int c = 0; c < kNumClasses; ++c) {
        const VectorXd typical = instance_feature(basis, c, cfg.query_alignment, mean_drift);
        const VectorXd h = cfg.helping_cosine * typical + side * basis.col(2 * kNumClasses + c);
        b.table.add(kClasses[c].helping, h.normalized());
    }
    for (int j = 0; j < 3; ++j) {
        b.table.add(kBackground[j], basis.col(3 * kNumClasses + j));
    }
    for (std::string_view phrase : kPredefinedCanonicals) {
        b.table.add(std::string(phrase), gaussian_vector(D, rng).normalized());
    }

    for (int c = 0; c < kNumClasses; ++c) {
        QuerySpec q;
        q.main_positive = kClasses[c].name;
        q.helping_positives = {kClasses[c].helping};
        for (int o = 0; o < kNumClasses; ++o) {
            if (o != c) {
                q.canonicals.emplace_back(kClasses[o].name);
            }
        }
        for (const char* bg : kBackground) {
            q.canonicals.emplace_back(bg);
        }
        PromptContext ctx;
        ctx.mode = PromptMode::Object;
        ctx.object = kClasses[c].name;
        b.fixtures[prompt_hash(build_prompt(ctx))] = render_response(q);
    }

    // Per-pixel features: the most visible gaussian of the pixel's class, plus isotropic noise.
    const double per_dim = cfg.feature_noise / std::sqrt(static_cast<double>(D));
    for (const Camera& cam : b.train_cameras) {
        const RayWeights rw = ray_weights(b.labeled.scene, cam);
        std::vector<int> labels = render_label_map(b.labeled, cam);
        RowMatrixXd feats = RowMatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), D);
        for (std::size_t p = 0; p < labels.size(); ++p) {
            if (labels[p] < 0) {
                continue;
            }
            std::uint32_t best = 0;
            double best_w = -1.0;
            for (std::size_t k = rw.offsets[p]; k < rw.offsets[p + 1]; ++k) {
                if (b.labeled.labels[rw.gaussian[k]] == labels[p] && rw.weight[k] > best_w) {
                    best_w = rw.weight[k];
                    best = rw.gaussian[k];
                }
            }
            const VectorXd f = gaussian_features[best] + per_dim * gaussian_vector(D, rng);
            feats.row(static_cast<Eigen::Index>(p)) = f.normalized().transpose();
        }
        b.train_labels.push_back(std::move(labels));
        b.train_features.push_back(std::move(feats));
    }
    b.eval_labels = render_label_map(b.labeled, b.eval_camera);
    return b;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
    SyntheticBenchmark b = make_benchmark(cfg);
    BenchmarkReport report;
    report.seed = cfg.seed;

    // Codebook from a seeded subsample of labelled training pixels.
    std::vector<std::pair<std::size_t, Eigen::Index>> labelled;
    for (std::size_t v = 0; v < b.train_labels.size(); ++v) {
        for (std::size_t p = 0; p < b.train_labels[v].size(); ++p) {
            if (b.train_labels[v][p] >= 0) {
                labelled.emplace_back(v, static_cast<Eigen::Index>(p));
            }
        }
    }
    if (labelled.size() < static_cast<std::size_t>(cfg.codebook_size)) {
        throw ValidationError("benchmark views contain too few labelled pixels");
    }
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(labelled.begin(), labelled.end(), rng);
    const std::size_t samples = std::min(labelled.size(), static_cast<std::size_t>(cfg.codebook_samples));
    RowMatrixXd sample(static_cast<Eigen::Index>(samples), cfg.embedding_dim);
    for (std::size_t i = 0; i < samples; ++i) {
        sample.row(static_cast<Eigen::Index>(i)) = b.train_features[labelled[i].first].row(labelled[i].second);
    }
    const Codebook codebook = build_codebook(sample, cfg.codebook_size, cfg.seed);
    report.quantization_error = quantization_error(sample, codebook);
    b.table.set_codebook(codebook);

    // Index maps, and a class vote per code word for the per-gaussian accuracy.
    std::vector<TrainView> views;
    Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(cfg.codebook_size, static_cast<Eigen::Index>(b.labeled.class_names.size()));
    for (std::size_t v = 0; v < b.train_cameras.size(); ++v) {
        TrainView view{b.train_cameras[v], std::vector<int>(b.train_labels[v].size(), -1)};
        for (std::size_t p = 0; p < view.target.size(); ++p) {
            if (b.train_labels[v][p] < 0) {
                continue;
            }
            const int code = assign(VectorXd(b.train_features[v].row(static_cast<Eigen::Index>(p)).transpose()), codebook);
            view.target[p] = code;
            ++votes(code, b.train_labels[v][p]);
        }
        views.push_back(std::move(view));
    }
    std::vector<int> code_class(static_cast<std::size_t>(cfg.codebook_size));
    for (int k = 0; k < cfg.codebook_size; ++k) {
        Eigen::Index best = 0;
        votes.row(k).maxCoeff(&best);
        code_class[static_cast<std::size_t>(k)] = static_cast<int>(best);
    }

    TrainConfig tc = cfg.train;
    tc.num_indices = cfg.codebook_size;
    tc.seed = cfg.seed;
    TrainResult trained = train_semantics(b.labeled.scene, views, tc);
    report.trace = std::move(trained.trace);

    // Gaussians no training pixel sees carry no signal and are left out.
    const SemanticObjective probe(b.labeled.scene, views, tc);
    int correct = 0;
    int counted = 0;
    for (std::size_t i = 0; i < trained.scene.size(); ++i) {
        if (probe.coverage()[static_cast<Eigen::Index>(i)] <= 0.0) {
            continue;
        }
        Eigen::Index code = 0;
        decode(trained.decoder, trained.scene[i].semantic_feature).maxCoeff(&code);
        correct += code_class[static_cast<std::size_t>(code)] == b.labeled.labels[i];
        ++counted;
    }
    report.per_gaussian_accuracy = counted > 0 ? static_cast<double>(correct) / counted : 0.0;

    const SemanticDistributionMap<double> m = render_semantic_distribution(trained.scene, b.eval_camera, trained.decoder);
    const FeatureMap features = feature_map(m, codebook);

    std::vector<std::string> predefined(kPredefinedCanonicals.begin(), kPredefinedCanonicals.end());
    std::vector<ClassPrediction> full, no_helping, fixed;
    for (int c = 0; c < kNumClasses; ++c) {
        PromptContext ctx;
        ctx.mode = PromptMode::Object;
        ctx.object = kClasses[c].name;
        const QuerySpec q = parse_response(fixture_reply(b.fixtures, build_prompt(ctx)));
        validate(q);
        report.queries.push_back(q);

        SegMask gt{m.width, m.height, Eigen::Array<bool, Eigen::Dynamic, 1>(static_cast<Eigen::Index>(b.eval_labels.size()))};
        for (std::size_t p = 0; p < b.eval_labels.size(); ++p) {
            gt.pixels[static_cast<Eigen::Index>(p)] = b.eval_labels[p] == c;
        }
        const RowMatrixXd canon = b.table.rows(q.canonicals);
        auto predict = [&](const RowMatrixXd& pos, const RowMatrixXd& can) {
            RelevancyMap r = relevancy_score(features, pos, can);
            SegMask mask = segment(r, cfg.threshold);
            return ClassPrediction{q.main_positive, std::move(mask), std::move(r), gt};
        };
        full.push_back(predict(positive_embeddings(q, b.table, true), canon));
        no_helping.push_back(predict(positive_embeddings(q, b.table, false), canon));
        fixed.push_back(predict(positive_embeddings(q, b.table, false), b.table.rows(predefined)));
    }
    report.full = {"llm_negatives+helping", evaluate(full)};
    report.no_helping = {"llm_negatives", evaluate(no_helping)};
    report.predefined = {"predefined_canonicals", evaluate(fixed)};
    return report;
}

std::string benchmark_report_json(const BenchmarkReport& report) {
    using ojson = nlohmann::ordered_json;
    ojson doc;
    doc["seed"] = report.seed;
    doc["per_gaussian_accuracy"] = report.per_gaussian_accuracy;
    doc["quantization_error"] = report.quantization_error;
    doc["epochs"] = report.trace.size();
    if (!report.trace.empty()) {
        doc["final_loss"] = report.trace.back().total;
    }
    ojson methods = ojson::array();
    for (const MethodResult* m : {&report.predefined, &report.no_helping, &report.full}) {
        methods.push_back({{"method", m->name}, {"metrics", ojson::parse(metrics_to_json(m->report))}});
    }
    doc["methods"] = methods;
    return doc.dump(2) + "\n";
}

std::string benchmark_table(const BenchmarkReport& report) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-24s %9s %10s %8s %8s\n", "method", "accuracy", "precision", "mIoU", "mAP");
    os << line;
    for (const MethodResult* m : {&report.predefined, &report.no_helping, &report.full}) {
        std::snprintf(line, sizeof line, "%-24s %9.4f %10.4f %8.4f %8.4f\n", m->name.c_str(), m->report.accuracy,
                      m->report.precision, m->report.miou, m->report.map);
        os << line;
    }
    std::snprintf(line, sizeof line, "per-gaussian accuracy %.4f over %zu epochs\n", report.per_gaussian_accuracy,
                  report.trace.size());
    os << line;
    return os.str();
}

} // namespace lesplat
