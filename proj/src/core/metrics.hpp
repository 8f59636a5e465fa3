#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace lfb {

// Binary segmentation mask over a (depth, height, width) voxel grid with
// physical spacing in mm per axis. 2D masks use depth 1; stacked-2D volumes
// set depth > 1 with an independent slice spacing.
struct BinaryMask {
    int d = 1, h = 0, w = 0;
    std::vector<std::uint8_t> v;
    double sd = 1.0, sh = 1.0, sw = 1.0;

    BinaryMask() = default;
    BinaryMask(int d_, int h_, int w_) : d(d_), h(h_), w(w_), v(std::size_t(d_) * h_ * w_, 0) {}

    static BinaryMask from_labels(const LabelMap& labels, int cls, double sh = 1.0,
                                  double sw = 1.0);

    std::uint8_t& at(int z, int y, int x) { return v[(std::size_t(z) * h + y) * w + x]; }
    std::uint8_t at(int z, int y, int x) const { return v[(std::size_t(z) * h + y) * w + x]; }
    std::size_t volume() const;  // foreground voxel count
};

// 2*|A∩B| / (|A|+|B|); two empty masks overlap perfectly (1.0).
double dice_coefficient(const BinaryMask& a, const BinaryMask& b);

// Symmetric 100th-percentile (maximum) Hausdorff distance in mm between the
// boundary point sets of the two masks. Boundaries are foreground voxels with
// a face neighbor that is background or outside the grid. Distances come from
// an exact Euclidean distance transform honoring the anisotropic spacing.
// Throws std::invalid_argument when either mask has no foreground.
double hausdorff_distance(const BinaryMask& a, const BinaryMask& b);

// |V_pred - V_ref| / V_ref (unitless). Throws when the reference is empty.
double relative_volume_difference(const BinaryMask& pred, const BinaryMask& ref);

// Anatomical-plausibility counters per class over a 2D label map: number of
// 4-connected foreground components, and number of fully enclosed background
// holes (background components not touching the grid border).
struct PlausibilityReport {
    std::vector<int> components;  // indexed by class; [0] unused
    std::vector<int> holes;
};
PlausibilityReport plausibility_check(const LabelMap& labels, int n_classes);

}  // namespace lfb
