#include "lesplat/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace lesplat {

using json = nlohmann::json;

const char* to_string(FormatErrorCode code) {
    switch (code) {
    case FormatErrorCode::BadMagic: return "bad magic";
    case FormatErrorCode::BadVersion: return "unsupported version";
    case FormatErrorCode::Truncated: return "truncated";
    case FormatErrorCode::TrailingBytes: return "trailing bytes";
    case FormatErrorCode::NonFinite: return "non-finite value";
    case FormatErrorCode::BadHeader: return "bad header";
    }
    return "format error";
}

Camera look_at(const Vector3d& eye, const Vector3d& target, const Vector3d& up, int width, int height,
               double horizontal_fov_deg) {
    const Vector3d forward = (target - eye).normalized();
    const Vector3d right = forward.cross(up).normalized();
    // Image y points down, so the camera y axis is forward x right.
    const Vector3d down = forward.cross(right);

    Camera cam;
    cam.width = width;
    cam.height = height;
    const double half_fov = 0.5 * horizontal_fov_deg * std::numbers::pi / 180.0;
    cam.fx = 0.5 * width / std::tan(half_fov);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    validate(cam);
    return cam;
}

void validate(const SyntheticSceneSpec& spec) {
    if (spec.classes.empty()) {
        throw ValidationError("synthetic scene spec needs at least one class");
    }
    std::set<std::string> names;
    for (const auto& cls : spec.classes) {
        if (!names.insert(cls.name).second) {
            throw ValidationError("duplicate synthetic class name '" + cls.name + "'");
        }
        if (cls.count < 1) {
            throw ValidationError("synthetic class '" + cls.name + "' must have count >= 1");
        }
        if (!(cls.scale > 0.0) || !(cls.half_extent.array() >= 0.0).all()) {
            throw ValidationError("synthetic class '" + cls.name + "' has a non-positive size");
        }
    }
    if (!(spec.noise >= 0.0)) {
        throw ValidationError("synthetic noise level must be non-negative");
    }
    if (spec.semantic_dim < 1) {
        throw ValidationError("semantic dimension must be at least 1");
    }
}

LabeledScene make_synthetic_scene(const SyntheticSceneSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));

    LabeledScene out;
    std::vector<Gaussian> gaussians;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const auto& cls = spec.classes[c];
        out.class_names.push_back(cls.name);
        for (int i = 0; i < cls.count; ++i) {
            const double r = std::sqrt(static_cast<double>(i) / cls.count);
            const double theta = i * golden_angle;
            const Vector3d lattice(r * std::cos(theta), r * std::sin(theta), r * std::sin(3.0 * theta));
            const Vector3d jitter(normal(rng), normal(rng), normal(rng));

            Gaussian g;
            g.position = cls.center + cls.half_extent.cwiseProduct(lattice + spec.noise * jitter);
            const Vector3d log_scale(normal(rng), normal(rng), normal(rng));
            g.scale = cls.scale * (0.5 * spec.noise * log_scale).array().exp().matrix();

            const Vector3d axis = Vector3d(normal(rng), normal(rng), normal(rng)).normalized();
            const double angle = std::min(spec.noise, 1.0) * std::numbers::pi * uniform(rng);
            g.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis)).normalized();

            const Vector3d tint(normal(rng), normal(rng), normal(rng));
            g.color = (cls.color + 0.1 * spec.noise * tint).cwiseMax(0.0).cwiseMin(1.0);
            g.opacity = spec.opacity;
            g.semantic_feature = VectorXd::Zero(spec.semantic_dim);
            g.uncertainty = spec.initial_uncertainty;
            gaussians.push_back(std::move(g));
            out.labels.push_back(static_cast<int>(c));
        }
    }
    out.scene = Scene(std::move(gaussians), spec.background_color);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

json vec_json(const auto& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(static_cast<double>(v[i]));
    }
    return arr;
}

VectorXd json_vec(const json& j, const char* field, Eigen::Index expected = -1) {
    if (!j.is_array()) {
        throw ParseError(std::string("field '") + field + "' must be an array of numbers");
    }
    VectorXd out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ParseError(std::string("field '") + field + "' must be an array of numbers");
        }
        out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    if (expected >= 0 && out.size() != expected) {
        throw ParseError(std::string("field '") + field + "' has length " + std::to_string(out.size()) +
                         ", expected " + std::to_string(expected));
    }
    return out;
}

const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(std::string("missing field '") + key + "'");
    }
    return j.at(key);
}

double require_number(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number()) {
        throw ParseError(std::string("field '") + key + "' must be a number");
    }
    return v.get<double>();
}

int require_int(const json& j, const char* key) {
    const double v = require_number(j, key);
    if (!(v >= -2147483648.0 && v <= 2147483647.0) || v != std::floor(v)) {
        throw ParseError(std::string("field '") + key + "' must be a 32-bit integer");
    }
    return static_cast<int>(v);
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

} // namespace

std::string scene_to_json(const Scene& scene) {
    json gs = json::array();
    for (const auto& g : scene.gaussians()) {
        gs.push_back({
            {"position", vec_json(g.position)},
            {"scale", vec_json(g.scale)},
            {"rotation", json::array({g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()})},
            {"opacity", g.opacity},
            {"color", vec_json(g.color)},
            {"semantic_feature", vec_json(g.semantic_feature)},
            {"uncertainty", g.uncertainty},
        });
    }
    json doc = {{"version", 1}, {"background_color", vec_json(scene.background_color())}, {"gaussians", gs}};
    return doc.dump(1);
}

Scene scene_from_json(const std::string& text) {
    const json doc = parse_json(text);
    if (require_number(doc, "version") != 1) {
        throw ParseError("unsupported scene version");
    }
    const Vector3d background = json_vec(require(doc, "background_color"), "background_color", 3);
    const json& gs = require(doc, "gaussians");
    if (!gs.is_array()) {
        throw ParseError("field 'gaussians' must be an array");
    }
    std::vector<Gaussian> gaussians;
    gaussians.reserve(gs.size());
    for (const json& item : gs) {
        Gaussian g;
        g.position = json_vec(require(item, "position"), "position", 3);
        g.scale = json_vec(require(item, "scale"), "scale", 3);
        const VectorXd q = json_vec(require(item, "rotation"), "rotation", 4);
        g.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
        g.opacity = require_number(item, "opacity");
        g.color = json_vec(require(item, "color"), "color", 3);
        g.semantic_feature = json_vec(require(item, "semantic_feature"), "semantic_feature");
        g.uncertainty = require_number(item, "uncertainty");
        gaussians.push_back(std::move(g));
    }
    return Scene(std::move(gaussians), background);
}

std::string camera_to_json(const Camera& cam) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        rot.push_back(vec_json(cam.rotation.row(r)));
    }
    json doc = {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
                {"width", cam.width}, {"height", cam.height},
                {"rotation", rot}, {"translation", vec_json(cam.translation)}};
    return doc.dump(1);
}

namespace {

Camera camera_from(const json& doc) {
    Camera cam;
    cam.fx = require_number(doc, "fx");
    cam.fy = require_number(doc, "fy");
    cam.cx = require_number(doc, "cx");
    cam.cy = require_number(doc, "cy");
    cam.width = require_int(doc, "width");
    cam.height = require_int(doc, "height");
    const json& rot = require(doc, "rotation");
    if (!rot.is_array() || rot.size() != 3) {
        throw ParseError("field 'rotation' must be a 3x3 array");
    }
    for (int r = 0; r < 3; ++r) {
        cam.rotation.row(r) = json_vec(rot[static_cast<std::size_t>(r)], "rotation", 3).transpose();
    }
    cam.translation = json_vec(require(doc, "translation"), "translation", 3);
    validate(cam);
    return cam;
}

} // namespace

Camera camera_from_json(const std::string& text) { return camera_from(parse_json(text)); }

SyntheticSceneSpec synthetic_spec_from_json(const std::string& text) try {
    const json doc = parse_json(text);
    if (!doc.is_object()) {
        throw ParseError("synthetic scene spec must be a JSON object");
    }
    SyntheticSceneSpec spec;
    spec.noise = doc.value("noise", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{0});
    spec.opacity = doc.value("opacity", spec.opacity);
    spec.initial_uncertainty = doc.value("initial_uncertainty", spec.initial_uncertainty);
    spec.semantic_dim = doc.value("semantic_dim", spec.semantic_dim);
    if (doc.contains("background_color")) {
        spec.background_color = json_vec(doc.at("background_color"), "background_color", 3);
    }
    for (const json& c : require(doc, "classes")) {
        SyntheticClass cls;
        const json& name = require(c, "name");
        if (!name.is_string()) {
            throw ParseError("class name must be a string");
        }
        cls.name = name.get<std::string>();
        cls.center = json_vec(require(c, "center"), "center", 3);
        cls.half_extent = json_vec(require(c, "half_extent"), "half_extent", 3);
        cls.count = require_int(c, "count");
        if (c.contains("color")) {
            cls.color = json_vec(c.at("color"), "color", 3);
        }
        cls.scale = c.value("scale", cls.scale);
        spec.classes.push_back(std::move(cls));
    }
    validate(spec);
    return spec;
} catch (const json::exception& e) {
    throw ParseError(std::string("malformed synthetic scene spec: ") + e.what());
}

} // namespace lesplat
