#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/phantom.hpp"
#include "core/tensor.hpp"

namespace lfb {

// One image/label pair in memory.
struct Sample {
    std::string id;
    Tensor4 image;  // (1, 1, h, w)
    LabelMap labels;
    std::uint64_t seed = 0;
};

// Binary sample container (.lfbt): magic "LFBT", u32 version, u8 dtype
// (0 = f64 image, 1 = u8 labels), u32 rank, u64 dims[rank], then the raw
// little-endian payload. Images are rank 4 (1,1,h,w); labels rank 2 (h,w).
void write_sample_image(const std::string& path, const Tensor4& image);
Tensor4 read_sample_image(const std::string& path);
void write_sample_labels(const std::string& path, const LabelMap& labels);
LabelMap read_sample_labels(const std::string& path);

struct ManifestEntry {
    std::string split;  // train | test | val
    std::string image_path;  // relative to the manifest's directory
    std::string label_path;
    std::uint64_t seed = 0;
};

// Line-oriented dataset index:
//   lfbnet-manifest 1
//   spec_hash <16 hex digits>
//   stats none            (or: stats <mean> <stddev>)
//   sample <split> <image_path> <label_path> <seed>
struct DatasetManifest {
    std::string spec_hash;
    bool has_stats = false;
    double mean = 0.0;
    double stddev = 1.0;
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> split_entries(const std::string& split) const;
    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

// Deterministic shuffled split assignment. Fractions are (train, test, val),
// must sum to 1, and each split must round to at least one sample.
std::vector<std::string> assign_splits(int n, double f_train, double f_test, double f_val,
                                       std::uint64_t seed);

// Generate n phantoms under out_dir (images/, labels/, phantom.json,
// manifest.txt) and return the manifest. Per-sample seeds derive from the
// spec's master seed and are recorded so any sample can be regenerated
// standalone; the dataset is a pure function of (spec, n, fractions).
DatasetManifest generate_dataset(const PhantomSpec& spec, int n, double f_train,
                                 double f_test, double f_val, const std::string& out_dir);

// Load every sample of one split, resolving paths against the manifest dir.
std::vector<Sample> load_split(const std::string& manifest_path, const std::string& split);

struct NormStats {
    double mean = 0.0;
    double stddev = 1.0;
};

// Global mean / population stddev over all pixels of the given samples.
NormStats compute_stats(const std::vector<Sample>& samples);
void normalize(std::vector<Sample>& samples, const NormStats& stats);

}  // namespace lfb
