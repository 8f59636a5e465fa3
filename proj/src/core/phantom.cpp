#include "core/phantom.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "core/autodiff.hpp"  // require()
#include "core/rng.hpp"

namespace lfb {

using nlohmann::json;

std::vector<double> PhantomSpec::effective_levels() const {
    if (!class_levels.empty()) return class_levels;
    if (kind == "cardiac") return {0.45, 0.65, 0.90};
    return {0.80};
}

void PhantomSpec::validate() const {
    require(kind == "cardiac" || kind == "multicomponent",
            "phantom: kind must be cardiac|multicomponent, got '" + kind + "'");
    require(image_size >= 16 && image_size % 8 == 0,
            "phantom: image_size must be a multiple of 8 and >= 16");

    const auto levels = effective_levels();
    require(int(levels.size()) == n_classes() - 1,
            "phantom: expected " + std::to_string(n_classes() - 1) + " class levels, got " +
                std::to_string(levels.size()));
    require(min_level_gap > 0.0, "phantom: min_level_gap must be positive");
    std::vector<double> all = levels;
    all.push_back(background_level);
    for (double l : all) require(l >= 0.0 && l <= 2.0, "phantom: levels must lie in [0,2]");
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            require(std::abs(all[i] - all[j]) >= min_level_gap,
                    "phantom: class/background levels closer than min_level_gap");

    auto range_ok = [&](double lo, double hi, const char* what) {
        require(lo > 0.0 && hi >= lo, std::string("phantom: bad range for ") + what);
    };
    require(center_jitter >= 0.0 && center_jitter <= 0.2, "phantom: bad center_jitter");
    require(contrast_scale > 0.0 && contrast_scale <= 2.0, "phantom: bad contrast_scale");
    require(noise_sigma >= 0.0 && blur_sigma >= 0.0, "phantom: bad degradation sigma");
    require(streak_count >= 0 && streak_count <= 16 && streak_strength >= 0.0,
            "phantom: bad streak settings");

    if (kind == "cardiac") {
        range_ok(lv_radius_min, lv_radius_max, "lv_radius");
        range_ok(myo_thickness_min, myo_thickness_max, "myo_thickness");
        range_ok(rv_radius_min, rv_radius_max, "rv_radius");
        require(rv_angle_max >= rv_angle_min, "phantom: bad rv_angle range");
        // worst case: jittered center + ring outer radius + crescent extent
        const double extent =
            center_jitter + lv_radius_max + myo_thickness_max + 1.6 * rv_radius_max;
        require(extent * image_size + 2.0 <= 0.5 * image_size,
                "phantom: cardiac geometry cannot fit inside the image");
    } else {
        range_ok(arc_radius_min, arc_radius_max, "arc_radius");
        range_ok(arc_thickness_min, arc_thickness_max, "arc_thickness");
        require(blob_count_min >= 1 && blob_count_max >= blob_count_min && blob_count_max <= 8,
                "phantom: bad blob count range");
        range_ok(blob_radius_min, blob_radius_max, "blob_radius");
        const double extent =
            center_jitter + 1.15 * arc_radius_max + 0.5 * arc_thickness_max;
        require(extent * image_size + 2.0 <= 0.5 * image_size,
                "phantom: multicomponent geometry cannot fit inside the image");
    }
}

std::string PhantomSpec::to_json() const {
    json j;
    j["kind"] = kind;
    j["image_size"] = image_size;
    j["seed"] = seed;
    j["background_level"] = background_level;
    j["class_levels"] = effective_levels();
    j["min_level_gap"] = min_level_gap;
    j["center_jitter"] = center_jitter;
    j["lv_radius_min"] = lv_radius_min;
    j["lv_radius_max"] = lv_radius_max;
    j["myo_thickness_min"] = myo_thickness_min;
    j["myo_thickness_max"] = myo_thickness_max;
    j["rv_radius_min"] = rv_radius_min;
    j["rv_radius_max"] = rv_radius_max;
    j["rv_angle_min"] = rv_angle_min;
    j["rv_angle_max"] = rv_angle_max;
    j["arc_radius_min"] = arc_radius_min;
    j["arc_radius_max"] = arc_radius_max;
    j["arc_thickness_min"] = arc_thickness_min;
    j["arc_thickness_max"] = arc_thickness_max;
    j["blob_count_min"] = blob_count_min;
    j["blob_count_max"] = blob_count_max;
    j["blob_radius_min"] = blob_radius_min;
    j["blob_radius_max"] = blob_radius_max;
    j["contrast_scale"] = contrast_scale;
    j["noise_sigma"] = noise_sigma;
    j["blur_sigma"] = blur_sigma;
    j["streak_count"] = streak_count;
    j["streak_strength"] = streak_strength;
    return j.dump();
}

PhantomSpec PhantomSpec::from_json(const std::string& text) {
    static const std::set<std::string> allowed = {
        "kind", "image_size", "seed", "background_level", "class_levels", "min_level_gap",
        "center_jitter", "lv_radius_min", "lv_radius_max", "myo_thickness_min",
        "myo_thickness_max", "rv_radius_min", "rv_radius_max", "rv_angle_min",
        "rv_angle_max", "arc_radius_min", "arc_radius_max", "arc_thickness_min",
        "arc_thickness_max", "blob_count_min", "blob_count_max", "blob_radius_min",
        "blob_radius_max", "contrast_scale", "noise_sigma", "blur_sigma",
        "streak_count", "streak_strength"};
    PhantomSpec s;
    try {
        json j = json::parse(text);
        require(j.is_object(), "phantom spec: not a JSON object");
        for (const auto& item : j.items())
            require(allowed.count(item.key()) > 0,
                    "phantom spec: unknown key '" + item.key() + "'");
        auto get = [&](const char* k, auto& dst) {
            if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
        };
        get("kind", s.kind);
        get("image_size", s.image_size);
        get("seed", s.seed);
        get("background_level", s.background_level);
        get("class_levels", s.class_levels);
        get("min_level_gap", s.min_level_gap);
        get("center_jitter", s.center_jitter);
        get("lv_radius_min", s.lv_radius_min);
        get("lv_radius_max", s.lv_radius_max);
        get("myo_thickness_min", s.myo_thickness_min);
        get("myo_thickness_max", s.myo_thickness_max);
        get("rv_radius_min", s.rv_radius_min);
        get("rv_radius_max", s.rv_radius_max);
        get("rv_angle_min", s.rv_angle_min);
        get("rv_angle_max", s.rv_angle_max);
        get("arc_radius_min", s.arc_radius_min);
        get("arc_radius_max", s.arc_radius_max);
        get("arc_thickness_min", s.arc_thickness_min);
        get("arc_thickness_max", s.arc_thickness_max);
        get("blob_count_min", s.blob_count_min);
        get("blob_count_max", s.blob_count_max);
        get("blob_radius_min", s.blob_radius_min);
        get("blob_radius_max", s.blob_radius_max);
        get("contrast_scale", s.contrast_scale);
        get("noise_sigma", s.noise_sigma);
        get("blur_sigma", s.blur_sigma);
        get("streak_count", s.streak_count);
        get("streak_strength", s.streak_strength);
    } catch (const json::exception& e) {
        throw format_error(std::string("phantom spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string PhantomSpec::hash() const {
    const std::string canon = to_json();
    return hex64(fnv1a64(canon.data(), canon.size()));
}

namespace {

struct Vec2 {
    double x, y;
};

double dist_point_segment(double px, double py, Vec2 a, Vec2 b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
    return std::hypot(dx, dy);
}

void paint_cardiac(const PhantomSpec& spec, Rng& rng, LabelMap& labels) {
    const double S = spec.image_size;
    const double cx = 0.5 * S + rng.uniform(-spec.center_jitter, spec.center_jitter) * S;
    const double cy = 0.5 * S + rng.uniform(-spec.center_jitter, spec.center_jitter) * S;
    const double r1 = rng.uniform(spec.lv_radius_min, spec.lv_radius_max) * S;
    const double r2 = r1 + rng.uniform(spec.myo_thickness_min, spec.myo_thickness_max) * S;
    const double r3 = rng.uniform(spec.rv_radius_min, spec.rv_radius_max) * S;
    const double ang = rng.uniform(spec.rv_angle_min, spec.rv_angle_max);
    const double rho = r2 + 0.6 * r3;  // crescent disk center distance
    const double rvx = cx + std::cos(ang) * rho, rvy = cy + std::sin(ang) * rho;
    const double sep = 1.0;  // px gap between crescent and ring

    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double d = std::hypot(px - cx, py - cy);
            if (d <= r1)
                labels.at(y, x) = 3;  // inner disk
            else if (d <= r2)
                labels.at(y, x) = 2;  // ring
            else if (std::hypot(px - rvx, py - rvy) <= r3 && d > r2 + sep)
                labels.at(y, x) = 1;  // crescent carved by the ring
        }
}

void paint_multicomponent(const PhantomSpec& spec, Rng& rng, LabelMap& labels) {
    const double S = spec.image_size;
    const double cx = 0.5 * S + rng.uniform(-spec.center_jitter, spec.center_jitter) * S;
    const double cy = 0.5 * S + rng.uniform(-spec.center_jitter, spec.center_jitter) * S;
    const double R = rng.uniform(spec.arc_radius_min, spec.arc_radius_max) * S;
    const double T = rng.uniform(spec.arc_thickness_min, spec.arc_thickness_max) * S;
    const double theta0 = rng.uniform(0.0, 6.283185307179586);
    const double span = rng.uniform(3.5, 5.5);  // radians; < 2*pi, no self-touch

    // the arc as a dense polyline, radius growing with angle (spiral-like)
    const int npts = 512;
    std::vector<Vec2> pts(npts);
    for (int i = 0; i < npts; ++i) {
        const double u = double(i) / (npts - 1);
        const double a = theta0 + span * u;
        const double r = R * (0.70 + 0.45 * u);
        pts[i] = {cx + std::cos(a) * r, cy + std::sin(a) * r};
    }
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            for (int i = 0; i + 1 < npts; ++i)
                if (dist_point_segment(px, py, pts[i], pts[i + 1]) <= 0.5 * T) {
                    labels.at(y, x) = 1;
                    break;
                }
        }

    // small disjoint blobs, rejection-placed clear of the arc and each other
    const int count = int(rng.randint(spec.blob_count_min, spec.blob_count_max));
    const double gap = 2.0, margin = 2.0;
    for (int bi = 0; bi < count; ++bi) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            const double br = rng.uniform(spec.blob_radius_min, spec.blob_radius_max) * S;
            const double bx = rng.uniform(margin + br, S - margin - br);
            const double by = rng.uniform(margin + br, S - margin - br);
            bool clear = true;
            const int y0 = std::max(0, int(by - br - gap)), y1 = std::min(labels.h - 1, int(by + br + gap));
            const int x0 = std::max(0, int(bx - br - gap)), x1 = std::min(labels.w - 1, int(bx + br + gap));
            for (int y = y0; y <= y1 && clear; ++y)
                for (int x = x0; x <= x1; ++x)
                    if (labels.at(y, x) &&
                        std::hypot(x + 0.5 - bx, y + 0.5 - by) <= br + gap) {
                        clear = false;
                        break;
                    }
            if (!clear) continue;
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if (std::hypot(x + 0.5 - bx, y + 0.5 - by) <= br) labels.at(y, x) = 1;
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("phantom: could not place a blob after 100 attempts; "
                                     "geometry too dense");
    }
}

void gaussian_blur(Tensor4& img, double sigma) {
    const int S = img.shape.h;
    const int rad = int(std::ceil(3.0 * sigma));
    if (rad < 1) return;
    std::vector<double> k(2 * rad + 1);
    double sum = 0.0;
    for (int i = -rad; i <= rad; ++i) {
        k[i + rad] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
        sum += k[i + rad];
    }
    for (double& v : k) v /= sum;

    std::vector<double> tmp(img.v.size());
    auto clampi = [S](int i) { return std::clamp(i, 0, S - 1); };
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            double acc = 0.0;
            for (int i = -rad; i <= rad; ++i)
                acc += k[i + rad] * img.v[std::size_t(y) * S + clampi(x + i)];
            tmp[std::size_t(y) * S + x] = acc;
        }
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            double acc = 0.0;
            for (int i = -rad; i <= rad; ++i)
                acc += k[i + rad] * tmp[std::size_t(clampi(y + i)) * S + x];
            img.v[std::size_t(y) * S + x] = acc;
        }
}

}  // namespace

PhantomSample generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int S = spec.image_size;
    Rng rng(seed);

    PhantomSample out;
    out.labels = LabelMap(S, S);
    if (spec.kind == "cardiac")
        paint_cardiac(spec, rng, out.labels);
    else
        paint_multicomponent(spec, rng, out.labels);

    // image from labels: background plus contrast-scaled class offsets
    out.image = Tensor4({1, 1, S, S});
    const auto levels = spec.effective_levels();
    for (std::size_t i = 0; i < out.labels.v.size(); ++i) {
        const int cls = out.labels.v[i];
        const double level = cls == 0 ? spec.background_level : levels[cls - 1];
        out.image.v[i] =
            spec.background_level + (level - spec.background_level) * spec.contrast_scale;
    }

    if (spec.blur_sigma > 0.0) gaussian_blur(out.image, spec.blur_sigma);

    for (int s = 0; s < spec.streak_count; ++s) {
        const double px = 0.5 * S + rng.uniform(-0.2, 0.2) * S;
        const double py = 0.5 * S + rng.uniform(-0.2, 0.2) * S;
        const double phi = rng.uniform(0.0, 6.283185307179586);
        const double half_len = rng.uniform(0.2, 0.45) * S;
        const double half_thick = rng.uniform(0.6, 1.2);
        const double strength = spec.streak_strength * rng.uniform(0.7, 1.3);
        const Vec2 a{px - std::cos(phi) * half_len, py - std::sin(phi) * half_len};
        const Vec2 b{px + std::cos(phi) * half_len, py + std::sin(phi) * half_len};
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x)
                if (dist_point_segment(x + 0.5, y + 0.5, a, b) <= half_thick)
                    out.image.v[std::size_t(y) * S + x] += strength;
    }

    if (spec.noise_sigma > 0.0)
        for (double& v : out.image.v) v += spec.noise_sigma * rng.normal();

    return out;
}

}  // namespace lfb
