#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lfb {

// Parametric 2D phantom generator. Two families:
//
//   cardiac        4 classes on a short-axis-like layout: background (0), a
//                  crescent (1) hugging the outside of a ring (2) that
//                  encloses a disk (3). The disk is always inside the ring and
//                  the crescent never overlaps it (containment law).
//   multicomponent 2 classes: one large spiral arc plus 2-4 small disjoint
//                  blobs, all sharing class 1, so a plausible prediction has
//                  several components.
//
// Geometry is drawn first from the seed, then degradations are applied to the
// image only (contrast -> blur -> streaks -> noise); the label map depends on
// geometry alone, so changing degradation settings never alters labels.
// Lengths are fractions of image_size unless stated otherwise.
struct PhantomSpec {
    std::string kind = "cardiac";  // cardiac | multicomponent
    int image_size = 64;
    std::uint64_t seed = 0;  // master seed; per-sample seeds derive from it

    // intensity model (arbitrary units; normalization happens downstream)
    double background_level = 0.15;
    std::vector<double> class_levels;  // per foreground class; defaults by kind
    double min_level_gap = 0.10;       // enforced pairwise separation

    // cardiac geometry
    double center_jitter = 0.04;
    double lv_radius_min = 0.09, lv_radius_max = 0.13;
    double myo_thickness_min = 0.05, myo_thickness_max = 0.07;
    double rv_radius_min = 0.09, rv_radius_max = 0.12;
    double rv_angle_min = 0.0, rv_angle_max = 6.283185307179586;

    // multicomponent geometry
    double arc_radius_min = 0.20, arc_radius_max = 0.27;
    double arc_thickness_min = 0.05, arc_thickness_max = 0.08;
    int blob_count_min = 2, blob_count_max = 4;
    double blob_radius_min = 0.035, blob_radius_max = 0.06;

    // degradations (image only)
    double contrast_scale = 1.0;
    double noise_sigma = 0.0;
    double blur_sigma = 0.0;  // pixels
    int streak_count = 0;
    double streak_strength = 0.6;

    int n_classes() const { return kind == "cardiac" ? 4 : 2; }
    std::vector<double> effective_levels() const;

    // Throws std::invalid_argument on inconsistent ranges or geometry that
    // cannot fit inside the image with a safety margin.
    void validate() const;

    std::string to_json() const;
    static PhantomSpec from_json(const std::string& text);

    // Content hash of the canonical JSON form; stamped into manifests.
    std::string hash() const;
};

struct PhantomSample {
    Tensor4 image;  // (1, 1, size, size)
    LabelMap labels;
};

PhantomSample generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

}  // namespace lfb
