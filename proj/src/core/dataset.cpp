#include "core/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/autodiff.hpp"  // require()
#include "core/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "sample/checkpoint formats are little-endian; big-endian hosts unsupported");

namespace lfb {
namespace fs = std::filesystem;

namespace {

constexpr char kSampleMagic[4] = {'L', 'F', 'B', 'T'};
constexpr std::uint32_t kSampleVersion = 1;

void write_bytes(std::ofstream& f, const void* p, std::size_t n) {
    f.write(static_cast<const char*>(p), std::streamsize(n));
}

void read_bytes(std::ifstream& f, void* p, std::size_t n, const std::string& path) {
    f.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(f.gcount()) != n)
        throw format_error("sample file truncated: " + path);
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
    write_bytes(f, &v, sizeof v);
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
    T v;
    read_bytes(f, &v, sizeof v, path);
    return v;
}

struct SampleHeader {
    std::uint8_t dtype;
    std::vector<std::uint64_t> dims;
};

void write_header(std::ofstream& f, std::uint8_t dtype,
                  const std::vector<std::uint64_t>& dims) {
    write_bytes(f, kSampleMagic, 4);
    write_pod<std::uint32_t>(f, kSampleVersion);
    write_pod<std::uint8_t>(f, dtype);
    write_pod<std::uint32_t>(f, std::uint32_t(dims.size()));
    for (std::uint64_t d : dims) write_pod<std::uint64_t>(f, d);
}

SampleHeader read_header(std::ifstream& f, const std::string& path) {
    char magic[4];
    read_bytes(f, magic, 4, path);
    if (std::memcmp(magic, kSampleMagic, 4) != 0)
        throw format_error("not a sample file (bad magic): " + path);
    const auto version = read_pod<std::uint32_t>(f, path);
    if (version != kSampleVersion)
        throw format_error("unsupported sample version " + std::to_string(version) +
                                 ": " + path);
    SampleHeader h;
    h.dtype = read_pod<std::uint8_t>(f, path);
    const auto rank = read_pod<std::uint32_t>(f, path);
    if (rank == 0 || rank > 4)
        throw format_error("bad sample rank " + std::to_string(rank) + ": " + path);
    h.dims.resize(rank);
    for (auto& d : h.dims) {
        d = read_pod<std::uint64_t>(f, path);
        if (d == 0 || d > (1u << 20))
            throw format_error("bad sample dimension: " + path);
    }
    return h;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for reading: " + path);
    return f;
}

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

void write_sample_image(const std::string& path, const Tensor4& image) {
    const Shape4 s = image.shape;
    require(s.n == 1 && s.c == 1 && s.h >= 1 && s.w >= 1,
            "write_sample_image: expected (1,1,h,w), got " + s.str());
    auto f = open_out(path);
    write_header(f, 0, {1, 1, std::uint64_t(s.h), std::uint64_t(s.w)});
    write_bytes(f, image.data(), image.size() * sizeof(double));
    if (!f.good()) throw io_error("write failed: " + path);
}

Tensor4 read_sample_image(const std::string& path) {
    auto f = open_in(path);
    const SampleHeader h = read_header(f, path);
    if (h.dtype != 0) throw format_error("expected image dtype (f64): " + path);
    if (h.dims.size() != 4 || h.dims[0] != 1 || h.dims[1] != 1)
        throw format_error("expected image dims (1,1,h,w): " + path);
    Tensor4 t({1, 1, int(h.dims[2]), int(h.dims[3])});
    read_bytes(f, t.data(), t.size() * sizeof(double), path);
    char extra;
    if (f.read(&extra, 1).gcount() != 0)
        throw format_error("trailing bytes in sample file: " + path);
    return t;
}

void write_sample_labels(const std::string& path, const LabelMap& labels) {
    require(labels.h >= 1 && labels.w >= 1, "write_sample_labels: empty label map");
    auto f = open_out(path);
    write_header(f, 1, {std::uint64_t(labels.h), std::uint64_t(labels.w)});
    write_bytes(f, labels.v.data(), labels.v.size());
    if (!f.good()) throw io_error("write failed: " + path);
}

LabelMap read_sample_labels(const std::string& path) {
    auto f = open_in(path);
    const SampleHeader h = read_header(f, path);
    if (h.dtype != 1) throw format_error("expected label dtype (u8): " + path);
    if (h.dims.size() != 2)
        throw format_error("expected label dims (h,w): " + path);
    LabelMap m(int(h.dims[0]), int(h.dims[1]));
    read_bytes(f, m.v.data(), m.v.size(), path);
    char extra;
    if (f.read(&extra, 1).gcount() != 0)
        throw format_error("trailing bytes in sample file: " + path);
    return m;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

std::vector<ManifestEntry> DatasetManifest::split_entries(const std::string& split) const {
    require(split == "train" || split == "test" || split == "val",
            "manifest: unknown split '" + split + "'");
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
        if (e.split == split) out.push_back(e);
    return out;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << "lfbnet-manifest 1\n";
    f << "spec_hash " << spec_hash << "\n";
    if (has_stats)
        f << "stats " << format_g17(mean) << " " << format_g17(stddev) << "\n";
    else
        f << "stats none\n";
    for (const auto& e : entries)
        f << "sample " << e.split << " " << e.image_path << " " << e.label_path << " "
          << e.seed << "\n";
    if (!f.good()) throw io_error("write failed: " + path);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open manifest: " + path);
    DatasetManifest m;
    std::string line;
    int lineno = 0;
    bool saw_header = false, saw_hash = false, saw_stats = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        auto fail = [&](const std::string& why) {
            throw format_error("manifest " + path + ":" + std::to_string(lineno) +
                                     ": " + why);
        };
        if (lineno == 1) {
            std::string ver;
            ss >> ver;
            if (tok != "lfbnet-manifest" || ver != "1") fail("bad header");
            saw_header = true;
            continue;
        }
        if (tok == "spec_hash") {
            if (!(ss >> m.spec_hash) || m.spec_hash.size() != 16) fail("bad spec_hash");
            saw_hash = true;
        } else if (tok == "stats") {
            std::string a;
            if (!(ss >> a)) fail("bad stats line");
            if (a == "none") {
                m.has_stats = false;
            } else {
                try {
                    std::size_t used = 0;
                    m.mean = std::stod(a, &used);
                    if (used != a.size()) fail("bad stats line");
                } catch (const format_error&) {
                    throw;
                } catch (const std::exception&) {
                    fail("bad stats line");
                }
                if (!(ss >> m.stddev)) fail("bad stats line");
                m.has_stats = true;
            }
            saw_stats = true;
        } else if (tok == "sample") {
            ManifestEntry e;
            if (!(ss >> e.split >> e.image_path >> e.label_path >> e.seed))
                fail("bad sample line");
            if (e.split != "train" && e.split != "test" && e.split != "val")
                fail("unknown split '" + e.split + "'");
            m.entries.push_back(std::move(e));
        } else {
            fail("unknown directive '" + tok + "'");
        }
    }
    if (!saw_header || !saw_hash || !saw_stats)
        throw format_error("manifest " + path + ": missing header lines");
    return m;
}

// ---------------------------------------------------------------------------
// generation / loading
// ---------------------------------------------------------------------------

std::vector<std::string> assign_splits(int n, double f_train, double f_test, double f_val,
                                       std::uint64_t seed) {
    require(n >= 3, "assign_splits: need at least 3 samples");
    require(f_train > 0.0 && f_test > 0.0 && f_val > 0.0,
            "assign_splits: all fractions must be positive");
    require(std::abs(f_train + f_test + f_val - 1.0) <= 1e-9,
            "assign_splits: fractions must sum to 1");
    const int n_train = int(std::llround(f_train * n));
    const int n_test = int(std::llround(f_test * n));
    const int n_val = n - n_train - n_test;
    require(n_train >= 1 && n_test >= 1 && n_val >= 1,
            "assign_splits: every split must receive at least one sample");

    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed ^ 0xc2b2ae3d27d4eb4full);
    for (int i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.randint(0, i)]);

    std::vector<std::string> out(n);
    for (int i = 0; i < n; ++i) {
        const char* split = i < n_train ? "train" : (i < n_train + n_test ? "test" : "val");
        out[idx[i]] = split;
    }
    return out;
}

DatasetManifest generate_dataset(const PhantomSpec& spec, int n, double f_train,
                                 double f_test, double f_val, const std::string& out_dir) {
    spec.validate();
    const auto splits = assign_splits(n, f_train, f_test, f_val, spec.seed);

    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "labels");
    {
        std::ofstream f(fs::path(out_dir) / "phantom.json", std::ios::trunc);
        f << spec.to_json() << "\n";
        if (!f.good()) throw io_error("write failed: " + out_dir + "/phantom.json");
    }

    DatasetManifest m;
    m.spec_hash = spec.hash();
    Rng seeder(spec.seed);
    for (int i = 0; i < n; ++i) {
        const std::uint64_t sample_seed = seeder.raw();
        const PhantomSample ps = generate_phantom(spec, sample_seed);
        char img_name[40], lbl_name[40];
        std::snprintf(img_name, sizeof img_name, "images/img_%05d.lfbt", i);
        std::snprintf(lbl_name, sizeof lbl_name, "labels/lbl_%05d.lfbt", i);
        write_sample_image((fs::path(out_dir) / img_name).string(), ps.image);
        write_sample_labels((fs::path(out_dir) / lbl_name).string(), ps.labels);
        m.entries.push_back({splits[i], img_name, lbl_name, sample_seed});
    }
    m.save((fs::path(out_dir) / "manifest.txt").string());
    return m;
}

std::vector<Sample> load_split(const std::string& manifest_path, const std::string& split) {
    const DatasetManifest m = DatasetManifest::load(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<Sample> out;
    for (const auto& e : m.split_entries(split)) {
        Sample s;
        s.id = fs::path(e.image_path).stem().string();
        s.image = read_sample_image((base / e.image_path).string());
        s.labels = read_sample_labels((base / e.label_path).string());
        s.seed = e.seed;
        require(s.image.shape.h == s.labels.h && s.image.shape.w == s.labels.w,
                "sample " + s.id + ": image/label dims differ");
        require(s.image.all_finite(), "sample " + s.id + ": image has non-finite values");
        out.push_back(std::move(s));
    }
    require(!out.empty(), "manifest has no samples in split '" + split + "'");
    return out;
}

NormStats compute_stats(const std::vector<Sample>& samples) {
    require(!samples.empty(), "compute_stats: no samples");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : samples) {
        for (double v : s.image.v) sum += v;
        count += s.image.size();
    }
    const double mean = sum / double(count);
    double ss = 0.0;
    for (const auto& s : samples)
        for (double v : s.image.v) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / double(count));
    require(stddev > 0.0, "compute_stats: degenerate dataset (zero variance)");
    return {mean, stddev};
}

void normalize(std::vector<Sample>& samples, const NormStats& stats) {
    require(stats.stddev > 0.0, "normalize: stddev must be positive");
    for (auto& s : samples)
        for (double& v : s.image.v) v = (v - stats.mean) / stats.stddev;
}

}  // namespace lfb
