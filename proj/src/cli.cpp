#include "lesplat/cli.hpp"

#include "lesplat/benchmark.hpp"
#include "lesplat/errors.hpp"
#include "lesplat/io.hpp"
#include "lesplat/metrics.hpp"
#include "lesplat/query_gen.hpp"
#include "lesplat/relevancy.hpp"
#include "lesplat/render.hpp"
#include "lesplat/scene.hpp"
#include "lesplat/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <ostream>
#include <random>

namespace lesplat::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    // synth
    fs::path out_dir;
    std::string spec_path;
    std::uint64_t seed = 7;
    // quantize
    std::string table_path;
    std::vector<std::string> feature_paths;
    int k = kDefaultCodebookSize;
    int samples = 3000;
    std::string table_out;
    std::string index_prefix;
    // train
    std::string scene_path;
    std::vector<std::string> camera_paths;
    std::vector<std::string> target_paths;
    int epochs = 500;
    double lr = 0.05;
    std::string optimizer = "adam";
    std::string scene_out;
    std::string decoder_out;
    std::string loss_csv;
    // render / segment
    std::string camera_path;
    std::string out_path;
    unsigned threads = 0;
    std::string decoder_path;
    std::string query_path;
    double threshold = kDefaultThreshold;
    bool no_helping = false;
    bool predefined = false;
    std::string out_prefix;
    // query
    std::string mode = "attention";
    std::string object;
    std::string road_type = "urban area";
    std::string weather = "sunny";
    std::string time_of_day = "day";
    std::string stub_path;
    LlmClientConfig llm;
    // eval
    std::vector<std::string> class_names;
    std::vector<std::string> pred_paths;
    std::vector<std::string> score_paths;
    std::vector<std::string> gt_paths;
};

std::string slug(const std::string& name) {
    std::string s = name;
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c))) {
            c = '_';
        }
    }
    return s;
}

void write_json(const fs::path& path, const std::string& text) { write_text_file(path, text); }

void emit(std::ostream& out, const std::string& path, const std::string& text) {
    if (path.empty()) {
        out << text;
    } else {
        write_text_file(path, text);
    }
}

Camera load_camera(const std::string& path) { return camera_from_json(read_text_file(path)); }

std::vector<std::uint8_t> class_mask_pgm(const std::vector<int>& labels, int c, int width, int height) {
    SegMask m{width, height, Eigen::Array<bool, Eigen::Dynamic, 1>(static_cast<Eigen::Index>(labels.size()))};
    for (std::size_t p = 0; p < labels.size(); ++p) {
        m.pixels[static_cast<Eigen::Index>(p)] = labels[p] == c;
    }
    return mask_pgm(m);
}

// Label maps and per-class masks for every camera of the rig.
nlohmann::ordered_json write_views(const Options& o, const LabeledScene& labeled, const std::vector<Camera>& cams,
                                   const std::vector<std::string>& names) {
    nlohmann::ordered_json views = nlohmann::ordered_json::array();
    for (std::size_t v = 0; v < cams.size(); ++v) {
        const std::string tag = names[v];
        const std::vector<int> labels = render_label_map(labeled, cams[v]);
        write_json(o.out_dir / ("camera_" + tag + ".json"), camera_to_json(cams[v]));
        write_file(o.out_dir / ("labels_" + tag + ".legf"),
                   write_legf(index_map_grid(labels, cams[v].width, cams[v].height)));
        nlohmann::ordered_json masks = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < labeled.class_names.size(); ++c) {
            const std::string file = "gt_" + tag + "_" + slug(labeled.class_names[c]) + ".pgm";
            write_file(o.out_dir / file, class_mask_pgm(labels, static_cast<int>(c), cams[v].width, cams[v].height));
            masks[labeled.class_names[c]] = file;
        }
        views.push_back({{"name", tag},
                         {"camera", "camera_" + tag + ".json"},
                         {"labels", "labels_" + tag + ".legf"},
                         {"gt_masks", masks}});
    }
    return views;
}

int cmd_synth(const Options& o, std::ostream& out) {
    fs::create_directories(o.out_dir);
    BenchmarkConfig cfg;
    cfg.seed = o.seed;
    const SyntheticBenchmark b = make_benchmark(cfg);
    std::vector<Camera> cams = b.train_cameras;
    cams.push_back(b.eval_camera);
    std::vector<std::string> names;
    for (std::size_t v = 0; v < b.train_cameras.size(); ++v) {
        names.push_back("train" + std::to_string(v));
    }
    names.emplace_back("eval");

    nlohmann::ordered_json manifest;
    if (!o.spec_path.empty()) {
        SyntheticSceneSpec spec = synthetic_spec_from_json(read_text_file(o.spec_path));
        const LabeledScene labeled = make_synthetic_scene(spec);
        write_json(o.out_dir / "scene.json", scene_to_json(labeled.scene));
        manifest["classes"] = labeled.class_names;
        manifest["scene"] = "scene.json";
        manifest["views"] = write_views(o, labeled, cams, names);
    } else {
        write_json(o.out_dir / "scene.json", scene_to_json(b.labeled.scene));
        manifest["classes"] = b.labeled.class_names;
        manifest["scene"] = "scene.json";
        manifest["views"] = write_views(o, b.labeled, cams, names);
        for (std::size_t v = 0; v < b.train_features.size(); ++v) {
            const std::string file = "features_" + names[v] + ".legf";
            write_file(o.out_dir / file, write_legf(to_grid(b.train_features[v], cams[v].width, cams[v].height)));
            manifest["views"][v]["features"] = file;
        }
        write_json(o.out_dir / "embeddings.json", write_embedding_table(b.table));
        write_json(o.out_dir / "fixtures.json", fixtures_to_json(b.fixtures));
        manifest["embeddings"] = "embeddings.json";
        manifest["fixtures"] = "fixtures.json";
    }
    write_json(o.out_dir / "manifest.json", manifest.dump(2) + "\n");
    out << "wrote " << (o.out_dir / "manifest.json").string() << "\n";
    return kOk;
}

int cmd_quantize(const Options& o, std::ostream& out) {
    EmbeddingTable table = read_embedding_table(read_text_file(o.table_path));
    std::vector<Grid> grids;
    std::vector<std::pair<std::size_t, Eigen::Index>> rows;
    for (const std::string& path : o.feature_paths) {
        Grid g = read_legf(read_file(path));
        if (static_cast<int>(g.depth) != table.dim()) {
            throw ValidationError("'" + path + "' has depth " + std::to_string(g.depth) + ", table dim is " +
                                  std::to_string(table.dim()));
        }
        grids.push_back(std::move(g));
    }
    std::vector<RowMatrixXd> values;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        values.push_back(grid_values(grids[i]));
        for (Eigen::Index p = 0; p < values.back().rows(); ++p) {
            if (values.back().row(p).squaredNorm() > 0.0) {
                rows.emplace_back(i, p);
            }
        }
    }
    if (rows.empty()) {
        throw ValidationError("feature maps hold no non-zero pixels");
    }
    std::mt19937_64 rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t n = o.samples > 0 ? std::min(rows.size(), static_cast<std::size_t>(o.samples)) : rows.size();
    RowMatrixXd sample(static_cast<Eigen::Index>(n), table.dim());
    for (std::size_t i = 0; i < n; ++i) {
        sample.row(static_cast<Eigen::Index>(i)) = values[rows[i].first].row(rows[i].second).normalized();
    }
    const Codebook cb = build_codebook(sample, o.k, o.seed);
    out << "codebook K=" << cb.size() << " quantization error " << quantization_error(sample, cb) << "\n";

    if (!o.index_prefix.empty()) {
        for (std::size_t i = 0; i < grids.size(); ++i) {
            std::vector<int> idx(static_cast<std::size_t>(values[i].rows()), -1);
            for (Eigen::Index p = 0; p < values[i].rows(); ++p) {
                if (values[i].row(p).squaredNorm() > 0.0) {
                    idx[static_cast<std::size_t>(p)] = assign(VectorXd(values[i].row(p).transpose()), cb);
                }
            }
            const fs::path path = o.index_prefix + std::to_string(i) + ".legf";
            write_file(path, write_legf(index_map_grid(idx, static_cast<int>(grids[i].width), static_cast<int>(grids[i].height))));
            out << "wrote " << path.string() << "\n";
        }
    }
    table.set_codebook(cb);
    write_json(o.table_out, write_embedding_table(table));
    return kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    if (o.camera_paths.size() != o.target_paths.size() || o.camera_paths.empty()) {
        throw CLI::ValidationError("--camera and --targets must be given the same, non-zero number of times");
    }
    const Scene scene = scene_from_json(read_text_file(o.scene_path));
    const EmbeddingTable table = read_embedding_table(read_text_file(o.table_path));
    if (!table.codebook()) {
        throw ValidationError("embedding table has no codebook; run quantize first");
    }
    std::vector<TrainView> views;
    for (std::size_t i = 0; i < o.camera_paths.size(); ++i) {
        TrainView v{load_camera(o.camera_paths[i]), grid_indices(read_legf(read_file(o.target_paths[i])))};
        if (v.target.size() != v.camera.pixel_count()) {
            throw ValidationError("'" + o.target_paths[i] + "' does not match its camera's resolution");
        }
        views.push_back(std::move(v));
    }
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.learning_rate = o.lr;
    cfg.seed = o.seed;
    cfg.num_indices = static_cast<int>(table.codebook()->size());
    cfg.optimizer = o.optimizer == "gd" ? Optimizer::GradientDescent : Optimizer::Adam;
    const TrainResult r = train_semantics(scene, views, cfg);
    write_json(o.scene_out, scene_to_json(r.scene));
    write_json(o.decoder_out, decoder_to_json(r.decoder));
    if (!o.loss_csv.empty()) {
        write_text_file(o.loss_csv, loss_trace_csv(r.trace));
    }
    out << "trained " << r.trace.size() << " epochs, final loss " << r.trace.back().total << "\n";
    return kOk;
}

int cmd_render(const Options& o, std::ostream& out) {
    const Scene scene = scene_from_json(read_text_file(o.scene_path));
    RenderOptions opts;
    opts.threads = o.threads;
    write_file(o.out_path, write_ppm(render_color(scene, load_camera(o.camera_path), opts)));
    out << "wrote " << o.out_path << "\n";
    return kOk;
}

int cmd_query(const Options& o, std::ostream& out) {
    PromptContext ctx;
    ctx.mode = o.mode == "object" ? PromptMode::Object : PromptMode::Attention;
    ctx.object = o.object;
    ctx.road_type = o.road_type;
    ctx.weather = o.weather;
    ctx.time_of_day = o.time_of_day;
    LlmClientConfig cfg = o.llm;
    if (!o.stub_path.empty()) {
        cfg.stub_fixture = o.stub_path;
    }
    auto [q, exchange] = generate_query(cfg, ctx);
    emit(out, o.out_path, query_spec_to_json(q) + "\n");
    return kOk;
}

int cmd_segment(const Options& o, std::ostream& out) {
    const Scene scene = scene_from_json(read_text_file(o.scene_path));
    const DecoderMLP decoder = decoder_from_json(read_text_file(o.decoder_path));
    const EmbeddingTable table = read_embedding_table(read_text_file(o.table_path));
    if (!table.codebook()) {
        throw ValidationError("embedding table has no codebook");
    }
    const QuerySpec q = query_spec_from_json(read_text_file(o.query_path));
    RenderOptions opts;
    opts.threads = o.threads;
    const auto m = render_semantic_distribution(scene, load_camera(o.camera_path), decoder, opts);
    const FeatureMap f = feature_map(m, *table.codebook());
    RowMatrixXd canon;
    if (o.predefined) {
        canon = table.rows(std::vector<std::string>(kPredefinedCanonicals.begin(), kPredefinedCanonicals.end()));
    } else {
        validate(q);
        canon = table.rows(q.canonicals);
    }
    const RelevancyMap r = relevancy_score(f, positive_embeddings(q, table, !o.no_helping), canon);
    const SegMask mask = segment(r, o.threshold);
    write_file(o.out_prefix + "_relevancy.legf", write_legf(to_grid(r)));
    write_file(o.out_prefix + "_relevancy.pgm", relevancy_preview_pgm(r));
    write_file(o.out_prefix + "_mask.pgm", mask_pgm(mask));
    out << q.main_positive << ": " << mask.count() << " of " << mask.pixels.size() << " pixels above " << o.threshold
        << "\n";
    return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const std::size_t n = o.class_names.size();
    if (n == 0 || o.pred_paths.size() != n || o.score_paths.size() != n || o.gt_paths.size() != n) {
        throw CLI::ValidationError("--class, --pred, --scores and --gt must be repeated the same number of times");
    }
    std::vector<ClassPrediction> classes;
    for (std::size_t i = 0; i < n; ++i) {
        const Grid g = read_legf(read_file(o.score_paths[i]));
        if (g.depth != 1) {
            throw ValidationError("'" + o.score_paths[i] + "' must have depth 1");
        }
        RelevancyMap r{static_cast<int>(g.width), static_cast<int>(g.height), grid_values(g).col(0), {}};
        r.no_evidence = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(r.scores.size(), false);
        classes.push_back({o.class_names[i], read_mask_pgm(read_file(o.pred_paths[i])), std::move(r),
                           read_mask_pgm(read_file(o.gt_paths[i]))});
    }
    emit(out, o.out_path, metrics_to_json(evaluate(classes)) + "\n");
    return kOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
    BenchmarkConfig cfg;
    cfg.seed = o.seed;
    cfg.train.epochs = o.epochs;
    const BenchmarkReport report = run_benchmark(cfg);
    out << benchmark_table(report);
    if (!o.out_path.empty()) {
        write_text_file(o.out_path, benchmark_report_json(report));
    }
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Language-embedded gaussian splatting: semantic training, relevancy queries and evaluation", "lesplat"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML file of key = value defaults ([subcommand] sections)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    Options o;
    const auto positive = CLI::PositiveNumber;

    auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark scene, cameras, labels and tables");
    synth->add_option("--out", o.out_dir, "Output directory")->required();
    synth->add_option("--seed", o.seed, "Random seed");
    synth->add_option("--spec", o.spec_path, "Synthetic scene spec JSON (scene and labels only)")->check(CLI::ExistingFile);

    auto* quantize = app.add_subcommand("quantize", "Build a codebook from dense feature maps");
    quantize->add_option("--table", o.table_path, "Embedding table JSON")->required()->check(CLI::ExistingFile);
    quantize->add_option("--features", o.feature_paths, "Feature LEGF files (zero pixels are skipped)")->required();
    quantize->add_option("--k", o.k, "Codebook size")->check(positive);
    quantize->add_option("--samples", o.samples, "Pixels drawn for k-means, 0 for all")->check(CLI::NonNegativeNumber);
    quantize->add_option("--seed", o.seed, "Random seed");
    quantize->add_option("--out", o.table_out, "Embedding table with codebook")->required();
    quantize->add_option("--index-prefix", o.index_prefix, "Write index maps as <prefix><i>.legf");

    auto* train = app.add_subcommand("train", "Optimise per-gaussian semantics and the decoder");
    train->add_option("--scene", o.scene_path, "Scene JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--camera", o.camera_paths, "Camera JSON, one per view")->required();
    train->add_option("--targets", o.target_paths, "Index map LEGF, one per view, same order")->required();
    train->add_option("--table", o.table_path, "Embedding table with codebook")->required()->check(CLI::ExistingFile);
    train->add_option("--epochs", o.epochs, "Epochs")->check(positive);
    train->add_option("--lr", o.lr, "Learning rate")->check(positive);
    train->add_option("--optimizer", o.optimizer, "adam or gd")->check(CLI::IsMember({"adam", "gd"}));
    train->add_option("--seed", o.seed, "Random seed");
    train->add_option("--out-scene", o.scene_out, "Trained scene JSON")->required();
    train->add_option("--out-decoder", o.decoder_out, "Decoder JSON")->required();
    train->add_option("--loss-csv", o.loss_csv, "Per-epoch loss trace");

    auto* render = app.add_subcommand("render", "Render a scene to a PPM image");
    render->add_option("--scene", o.scene_path, "Scene JSON")->required()->check(CLI::ExistingFile);
    render->add_option("--camera", o.camera_path, "Camera JSON")->required()->check(CLI::ExistingFile);
    render->add_option("--out", o.out_path, "Output PPM")->required();
    render->add_option("--threads", o.threads, "Render threads, 0 for all cores");

    auto* query = app.add_subcommand("query", "Ask the LLM for a query spec");
    query->add_option("--mode", o.mode, "attention or object")->check(CLI::IsMember({"attention", "object"}));
    query->add_option("--object", o.object, "Object to show (object mode)");
    query->add_option("--road-type", o.road_type, "Road type (attention mode)");
    query->add_option("--weather", o.weather, "Weather (attention mode)");
    query->add_option("--time-of-day", o.time_of_day, "Time of day (attention mode)");
    query->add_option("--stub", o.stub_path, "Answer from a fixture file, no network")->check(CLI::ExistingFile);
    query->add_option("--endpoint", o.llm.endpoint, "Chat-completion URL");
    query->add_option("--model", o.llm.model, "Model name");
    query->add_option("--api-key-env", o.llm.api_key_env, "Environment variable holding the API key");
    query->add_option("--timeout", o.llm.timeout_seconds, "Request timeout in seconds")->check(positive);
    query->add_option("--retries", o.llm.retries, "Retries after the first attempt")->check(CLI::NonNegativeNumber);
    query->add_option("--backoff", o.llm.backoff_base_seconds, "Backoff base in seconds")->check(CLI::NonNegativeNumber);
    query->add_option("--out", o.out_path, "QuerySpec JSON (default stdout)");

    auto* seg = app.add_subcommand("segment", "Relevancy map and mask for a query");
    seg->add_option("--scene", o.scene_path, "Trained scene JSON")->required()->check(CLI::ExistingFile);
    seg->add_option("--decoder", o.decoder_path, "Decoder JSON")->required()->check(CLI::ExistingFile);
    seg->add_option("--camera", o.camera_path, "Camera JSON")->required()->check(CLI::ExistingFile);
    seg->add_option("--query", o.query_path, "QuerySpec JSON")->required()->check(CLI::ExistingFile);
    seg->add_option("--table", o.table_path, "Embedding table with codebook")->required()->check(CLI::ExistingFile);
    seg->add_option("--threshold", o.threshold, "Mask threshold on the relevancy score");
    seg->add_flag("--no-helping", o.no_helping, "Drop the helping positives");
    seg->add_flag("--predefined", o.predefined, "Use object/things/stuff/texture as canonicals");
    seg->add_option("--threads", o.threads, "Render threads, 0 for all cores");
    seg->add_option("--out-prefix", o.out_prefix, "Writes <prefix>_relevancy.legf/.pgm and <prefix>_mask.pgm")->required();

    auto* ev = app.add_subcommand("eval", "Segmentation metrics over classes");
    ev->add_option("--class", o.class_names, "Class name")->required();
    ev->add_option("--pred", o.pred_paths, "Predicted mask PGM")->required();
    ev->add_option("--scores", o.score_paths, "Relevancy LEGF")->required();
    ev->add_option("--gt", o.gt_paths, "Ground-truth mask PGM")->required();
    ev->add_option("--out", o.out_path, "Metrics JSON (default stdout)");

    auto* bench = app.add_subcommand("bench", "Run the synthetic benchmark and print the comparison table");
    bench->add_option("--seed", o.seed, "Random seed");
    bench->add_option("--epochs", o.epochs, "Training epochs")->check(positive);
    bench->add_option("--out", o.out_path, "Metrics JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "lesplat: usage error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "synth") return cmd_synth(o, out);
        if (name == "quantize") return cmd_quantize(o, out);
        if (name == "train") return cmd_train(o, out);
        if (name == "render") return cmd_render(o, out);
        if (name == "query") return cmd_query(o, out);
        if (name == "segment") return cmd_segment(o, out);
        if (name == "eval") return cmd_eval(o, out);
        return cmd_bench(o, out);
    } catch (const CLI::ValidationError& e) {
        err << "lesplat: usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const TransportError& e) {
        err << "lesplat: transport error: " << e.what() << "\n";
        return kTransportError;
    } catch (const ProtocolError& e) {
        err << "lesplat: transport error: " << e.what() << "\n";
        return kTransportError;
    } catch (const Error& e) {
        err << "lesplat: data error: " << e.what() << "\n";
        return kDataError;
    } catch (const fs::filesystem_error& e) {
        err << "lesplat: data error: " << e.what() << "\n";
        return kDataError;
    }
}

} // namespace lesplat::cli
