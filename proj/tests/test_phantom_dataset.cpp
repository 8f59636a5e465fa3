#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/metrics.hpp"
#include "core/phantom.hpp"
#include "core/rng.hpp"

using namespace lfb;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("lfbnet_ds_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
    REQUIRE(out.good());
}

PhantomSpec cardiac_spec(std::uint64_t seed = 100) {
    PhantomSpec s;
    s.kind = "cardiac";
    s.image_size = 64;
    s.seed = seed;
    return s;
}

// pixels of class cls reachable from the border through non-`blocker` pixels;
// used to prove strict enclosure
bool class_reachable_from_border(const LabelMap& m, int cls, int blocker) {
    std::vector<std::uint8_t> seen(m.v.size(), 0);
    std::queue<std::pair<int, int>> q;
    auto push = [&](int y, int x) {
        if (y < 0 || y >= m.h || x < 0 || x >= m.w) return;
        std::size_t i = std::size_t(y) * m.w + x;
        if (seen[i] || m.at(y, x) == blocker) return;
        seen[i] = 1;
        q.push({y, x});
    };
    for (int x = 0; x < m.w; ++x) {
        push(0, x);
        push(m.h - 1, x);
    }
    for (int y = 0; y < m.h; ++y) {
        push(y, 0);
        push(y, m.w - 1);
    }
    while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop();
        if (m.at(y, x) == cls) return true;
        push(y - 1, x);
        push(y + 1, x);
        push(y, x - 1);
        push(y, x + 1);
    }
    return false;
}

}  // namespace

TEST_CASE("phantom generation is a pure function of (spec, seed)") {
    PhantomSpec spec = cardiac_spec();
    PhantomSample a = generate_phantom(spec, 555);
    PhantomSample b = generate_phantom(spec, 555);
    CHECK(a.image.v == b.image.v);
    CHECK(a.labels.v == b.labels.v);
    PhantomSample c = generate_phantom(spec, 556);
    CHECK(a.image.v != c.image.v);
    CHECK(a.image.shape == Shape4{1, 1, 64, 64});
    CHECK(a.labels.h == 64);
    CHECK(a.labels.w == 64);
}

TEST_CASE("degradations alter the image but never the labels") {
    PhantomSpec clean = cardiac_spec();
    PhantomSpec rough = clean;
    rough.contrast_scale = 0.3;
    rough.noise_sigma = 0.4;
    rough.blur_sigma = 1.2;
    rough.streak_count = 4;
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        PhantomSample a = generate_phantom(clean, seed);
        PhantomSample b = generate_phantom(rough, seed);
        CHECK(a.labels.v == b.labels.v);
        CHECK(a.image.v != b.image.v);
        CHECK(b.image.all_finite());
    }
}

TEST_CASE("cardiac phantoms satisfy the anatomy laws") {
    PhantomSpec spec = cardiac_spec();
    for (std::uint64_t seed = 10; seed < 22; ++seed) {
        const LabelMap labels = generate_phantom(spec, seed).labels;
        CAPTURE(seed);

        std::set<int> present(labels.v.begin(), labels.v.end());
        CHECK(present == std::set<int>{0, 1, 2, 3});

        PlausibilityReport rep = plausibility_check(labels, 4);
        CHECK(rep.components[1] == 1);  // crescent: one solid piece
        CHECK(rep.holes[1] == 0);
        CHECK(rep.components[2] == 1);  // ring: one piece enclosing one hole
        CHECK(rep.holes[2] == 1);
        CHECK(rep.components[3] == 1);  // disk: solid
        CHECK(rep.holes[3] == 0);

        // the union of ring and disk is simply connected: the ring's hole is
        // exactly the disk plus any lumen pixels, nothing leaks outside
        LabelMap heart(labels.h, labels.w);
        int union_px = 0;
        for (std::size_t i = 0; i < labels.v.size(); ++i)
            if (labels.v[i] == 2 || labels.v[i] == 3) {
                heart.v[i] = 1;
                ++union_px;
            }
        PlausibilityReport urep = plausibility_check(heart, 2);
        CHECK(urep.components[1] == 1);
        CHECK(urep.holes[1] <= 1);  // 0 when the disk fills the lumen exactly

        // strict containment: the disk cannot be reached from the border
        // without crossing the ring
        CHECK_FALSE(class_reachable_from_border(labels, 3, 2));
        // the crescent sits outside: it IS reachable without crossing the ring
        CHECK(class_reachable_from_border(labels, 1, 2));
        CHECK(union_px > 0);
    }
}

TEST_CASE("noiseless cardiac intensities are constant per class with enforced gaps") {
    PhantomSpec spec = cardiac_spec();  // defaults: no noise/blur/streaks
    const PhantomSample s = generate_phantom(spec, 77);
    std::map<int, std::set<double>> values;
    for (int y = 0; y < s.labels.h; ++y)
        for (int x = 0; x < s.labels.w; ++x)
            values[s.labels.at(y, x)].insert(s.image.at(0, 0, y, x));
    REQUIRE(values.size() == 4);
    std::vector<double> levels;
    for (const auto& [cls, vs] : values) {
        CHECK(vs.size() == 1);  // constant intensity inside each class
        levels.push_back(*vs.begin());
    }
    for (std::size_t i = 0; i < levels.size(); ++i)
        for (std::size_t j = i + 1; j < levels.size(); ++j)
            CHECK(std::abs(levels[i] - levels[j]) >= spec.min_level_gap - 1e-12);
    CHECK(values[0].count(spec.background_level) == 1);
}

TEST_CASE("multicomponent phantoms scatter several pieces of one class") {
    PhantomSpec spec;
    spec.kind = "multicomponent";
    spec.image_size = 64;
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const LabelMap labels = generate_phantom(spec, seed).labels;
        CAPTURE(seed);
        std::set<int> present(labels.v.begin(), labels.v.end());
        CHECK(present == std::set<int>{0, 1});
        PlausibilityReport rep = plausibility_check(labels, 2);
        // one arc plus at least blob_count_min disjoint blobs
        CHECK(rep.components[1] >= 1 + spec.blob_count_min);
        CHECK(rep.components[1] <= 1 + spec.blob_count_max);
        CHECK(rep.holes[1] == 0);  // the arc never closes on itself
    }
}

TEST_CASE("phantom spec validation rejects inconsistent settings") {
    CHECK_NOTHROW(cardiac_spec().validate());
    PhantomSpec s = cardiac_spec();
    s.kind = "torso";
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = cardiac_spec();
    s.image_size = 20;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = cardiac_spec();
    s.lv_radius_max = 0.05;  // below the minimum
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = cardiac_spec();
    s.lv_radius_min = s.lv_radius_max = 0.30;  // cannot fit with margin
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = cardiac_spec();
    s.contrast_scale = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = cardiac_spec();
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = cardiac_spec();
    s.class_levels = {0.5, 0.55, 0.9};  // 0.5 vs 0.55 violates the min gap
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = cardiac_spec();
    s.class_levels = {0.5, 0.9};  // cardiac needs 3 foreground levels
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("phantom spec json round trip, strict keys, content hash") {
    PhantomSpec s = cardiac_spec(9);
    s.noise_sigma = 0.25;
    s.class_levels = {0.4, 0.65, 0.95};
    const std::string js = s.to_json();
    PhantomSpec back = PhantomSpec::from_json(js);
    CHECK(back.to_json() == js);
    CHECK(back.seed == 9);
    CHECK(back.noise_sigma == 0.25);
    CHECK(back.class_levels == std::vector<double>{0.4, 0.65, 0.95});

    CHECK_THROWS_AS(PhantomSpec::from_json(R"({"kind":"cardiac","noise":0.1})"),
                    std::invalid_argument);
    CHECK_THROWS(PhantomSpec::from_json("["));

    CHECK(s.hash().size() == 16);
    CHECK(s.hash() == PhantomSpec::from_json(js).hash());
    PhantomSpec t = s;
    t.noise_sigma = 0.26;
    CHECK(t.hash() != s.hash());
    t = s;
    t.seed = 10;  // the seed is part of the dataset identity
    CHECK(t.hash() != s.hash());
}

TEST_CASE("sample files: round trip, reference bytes, corruption rejection") {
    TempDir tmp;
    Rng rng(4);
    Tensor4 img({1, 1, 5, 7});
    for (auto& v : img.v) v = rng.uniform(-3.0, 3.0);
    const std::string ip = tmp.file("img.lfbt");
    write_sample_image(ip, img);
    Tensor4 back = read_sample_image(ip);
    CHECK(back.shape == img.shape);
    CHECK(back.v == img.v);  // bit-exact

    LabelMap lbl(3, 4);
    for (std::size_t i = 0; i < lbl.v.size(); ++i) lbl.v[i] = std::uint8_t(i % 5);
    const std::string lp = tmp.file("lbl.lfbt");
    write_sample_labels(lp, lbl);
    LabelMap lback = read_sample_labels(lp);
    CHECK(lback.h == 3);
    CHECK(lback.w == 4);
    CHECK(lback.v == lbl.v);

    SUBCASE("hand-assembled little-endian reference file") {
        // magic, version u32, dtype u8, rank u32, dims u64..., payload
        std::string bytes = "LFBT";
        auto put32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) bytes.push_back(char((v >> (8 * i)) & 0xff));
        };
        auto put64 = [&](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) bytes.push_back(char((v >> (8 * i)) & 0xff));
        };
        put32(1);                // version
        bytes.push_back('\0');   // dtype 0 = f64 image
        put32(4);                // rank
        put64(1);
        put64(1);
        put64(1);
        put64(2);
        auto putf64 = [&](double d) {
            std::uint64_t u;
            std::memcpy(&u, &d, 8);
            put64(u);
        };
        putf64(1.5);
        putf64(-2.0);
        const std::string rp = tmp.file("ref.lfbt");
        spit(rp, bytes);
        Tensor4 ref = read_sample_image(rp);
        CHECK(ref.shape == Shape4{1, 1, 1, 2});
        CHECK(ref.v == std::vector<double>{1.5, -2.0});

        // and the writer produces exactly these bytes
        write_sample_image(tmp.file("ref2.lfbt"), ref);
        CHECK(slurp(tmp.file("ref2.lfbt")) == bytes);
    }

    SUBCASE("dtype confusion is rejected") {
        CHECK_THROWS(read_sample_image(lp));
        CHECK_THROWS(read_sample_labels(ip));
    }

    SUBCASE("bad magic is rejected") {
        std::string bytes = slurp(ip);
        bytes[1] = 'X';
        spit(tmp.file("badmagic.lfbt"), bytes);
        CHECK_THROWS(read_sample_image(tmp.file("badmagic.lfbt")));
    }

    SUBCASE("truncation and trailing bytes are rejected") {
        std::string bytes = slurp(ip);
        spit(tmp.file("trunc.lfbt"), bytes.substr(0, bytes.size() - 5));
        CHECK_THROWS(read_sample_image(tmp.file("trunc.lfbt")));
        spit(tmp.file("fat.lfbt"), bytes + "junk");
        CHECK_THROWS(read_sample_image(tmp.file("fat.lfbt")));
    }

    SUBCASE("unsupported version is rejected") {
        std::string bytes = slurp(ip);
        bytes[4] = 9;  // version little-endian low byte
        spit(tmp.file("ver.lfbt"), bytes);
        CHECK_THROWS(read_sample_image(tmp.file("ver.lfbt")));
    }
}

TEST_CASE("split assignment: sizes, determinism, partition, failure modes") {
    const auto splits = assign_splits(100, 0.7, 0.2, 0.1, 5);
    REQUIRE(splits.size() == 100);
    std::map<std::string, int> counts;
    for (const auto& s : splits) ++counts[s];
    CHECK(counts["train"] == 70);
    CHECK(counts["test"] == 20);
    CHECK(counts["val"] == 10);

    CHECK(assign_splits(100, 0.7, 0.2, 0.1, 5) == splits);   // deterministic
    CHECK(assign_splits(100, 0.7, 0.2, 0.1, 6) != splits);   // seed-sensitive

    const auto small = assign_splits(10, 0.7, 0.2, 0.1, 1);
    std::map<std::string, int> sc;
    for (const auto& s : small) ++sc[s];
    CHECK(sc["train"] == 7);
    CHECK(sc["test"] == 2);
    CHECK(sc["val"] == 1);

    CHECK_THROWS_AS(assign_splits(100, 0.7, 0.2, 0.2, 1), std::invalid_argument);
    CHECK_THROWS_AS(assign_splits(100, 0.7, 0.3, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(assign_splits(3, 0.98, 0.01, 0.01, 1), std::invalid_argument);
    CHECK_THROWS_AS(assign_splits(2, 0.4, 0.3, 0.3, 1), std::invalid_argument);
}

TEST_CASE("dataset generation: manifest contract and standalone reproducibility") {
    TempDir tmp;
    PhantomSpec spec = cardiac_spec(41);
    spec.noise_sigma = 0.1;
    const std::string dir = tmp.file("ds");
    DatasetManifest m = generate_dataset(spec, 8, 0.5, 0.25, 0.25, dir);

    REQUIRE(m.entries.size() == 8);
    CHECK(m.spec_hash == spec.hash());
    CHECK_FALSE(m.has_stats);
    const auto expect_splits = assign_splits(8, 0.5, 0.25, 0.25, spec.seed);
    for (int i = 0; i < 8; ++i) CHECK(m.entries[i].split == expect_splits[i]);

    // saved manifest loads back identically
    DatasetManifest loaded = DatasetManifest::load(dir + "/manifest.txt");
    CHECK(loaded.spec_hash == m.spec_hash);
    REQUIRE(loaded.entries.size() == 8);
    for (int i = 0; i < 8; ++i) {
        CHECK(loaded.entries[i].split == m.entries[i].split);
        CHECK(loaded.entries[i].image_path == m.entries[i].image_path);
        CHECK(loaded.entries[i].seed == m.entries[i].seed);
    }

    // the recorded spec file reproduces the generator settings
    PhantomSpec from_disk = PhantomSpec::from_json(slurp(dir + "/phantom.json"));
    CHECK(from_disk.to_json() == spec.to_json());

    // every sample can be regenerated standalone from (spec, recorded seed)
    for (const auto& e : loaded.entries) {
        PhantomSample ps = generate_phantom(from_disk, e.seed);
        Tensor4 img = read_sample_image(dir + "/" + e.image_path);
        LabelMap lbl = read_sample_labels(dir + "/" + e.label_path);
        CHECK(img.v == ps.image.v);
        CHECK(lbl.v == ps.labels.v);
    }

    // regeneration into another directory gives byte-identical artifacts
    const std::string dir2 = tmp.file("ds2");
    generate_dataset(spec, 8, 0.5, 0.25, 0.25, dir2);
    CHECK(slurp(dir + "/manifest.txt") == slurp(dir2 + "/manifest.txt"));
    CHECK(slurp(dir + "/images/img_00003.lfbt") == slurp(dir2 + "/images/img_00003.lfbt"));

    // a different master seed moves every per-sample seed
    PhantomSpec other = spec;
    other.seed = 42;
    DatasetManifest m2 = generate_dataset(other, 8, 0.5, 0.25, 0.25, tmp.file("ds3"));
    CHECK(m2.entries[0].seed != m.entries[0].seed);
}

TEST_CASE("manifest text I/O: stats line, strictness") {
    TempDir tmp;
    DatasetManifest m;
    m.spec_hash = "0123456789abcdef";
    m.has_stats = true;
    m.mean = 0.123456789012345678;  // exercises %.17g fidelity
    m.stddev = 1.75;
    m.entries.push_back({"train", "images/a.lfbt", "labels/a.lfbt", 7});
    m.entries.push_back({"val", "images/b.lfbt", "labels/b.lfbt", 12345678901234567890ull});
    const std::string p = tmp.file("manifest.txt");
    m.save(p);
    DatasetManifest back = DatasetManifest::load(p);
    CHECK(back.has_stats);
    CHECK(back.mean == m.mean);  // round trip is exact
    CHECK(back.stddev == 1.75);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[1].seed == 12345678901234567890ull);
    CHECK(back.split_entries("train").size() == 1);
    CHECK(back.split_entries("val").size() == 1);
    CHECK(back.split_entries("test").empty());
    CHECK_THROWS(back.split_entries("holdout"));

    spit(tmp.file("bad1.txt"), "lfbnet-manifest 2\nspec_hash 0123456789abcdef\nstats none\n");
    CHECK_THROWS(DatasetManifest::load(tmp.file("bad1.txt")));
    spit(tmp.file("bad2.txt"), "lfbnet-manifest 1\nstats none\n");
    CHECK_THROWS(DatasetManifest::load(tmp.file("bad2.txt")));  // missing spec_hash
    spit(tmp.file("bad3.txt"),
         "lfbnet-manifest 1\nspec_hash 123\nstats none\n");
    CHECK_THROWS(DatasetManifest::load(tmp.file("bad3.txt")));  // short hash
    spit(tmp.file("bad4.txt"),
         "lfbnet-manifest 1\nspec_hash 0123456789abcdef\nstats none\nsample train only_two\n");
    CHECK_THROWS(DatasetManifest::load(tmp.file("bad4.txt")));
    spit(tmp.file("bad5.txt"),
         "lfbnet-manifest 1\nspec_hash 0123456789abcdef\nstats none\nfrobnicate x\n");
    CHECK_THROWS(DatasetManifest::load(tmp.file("bad5.txt")));
    CHECK_THROWS(DatasetManifest::load(tmp.file("absent.txt")));
}

TEST_CASE("split loading and normalization statistics") {
    TempDir tmp;
    PhantomSpec spec = cardiac_spec(13);
    spec.noise_sigma = 0.05;
    const std::string dir = tmp.file("ds");
    generate_dataset(spec, 10, 0.7, 0.2, 0.1, dir);

    std::vector<Sample> train = load_split(dir + "/manifest.txt", "train");
    CHECK(train.size() == 7);
    std::set<std::string> ids;
    for (const auto& s : train) {
        CHECK(s.image.shape == Shape4{1, 1, 64, 64});
        CHECK(s.labels.h == 64);
        ids.insert(s.id);
    }
    CHECK(ids.size() == train.size());  // unique ids
    CHECK(load_split(dir + "/manifest.txt", "test").size() == 2);
    CHECK(load_split(dir + "/manifest.txt", "val").size() == 1);

    // hand-checkable statistics
    std::vector<Sample> two(2);
    two[0].image = Tensor4({1, 1, 1, 2});
    two[0].image.v = {1.0, 2.0};
    two[0].labels = LabelMap(1, 2);
    two[1].image = Tensor4({1, 1, 1, 2});
    two[1].image.v = {3.0, 6.0};
    two[1].labels = LabelMap(1, 2);
    NormStats st = compute_stats(two);
    CHECK(st.mean == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(st.stddev == doctest::Approx(std::sqrt(14.0 / 4.0)).epsilon(1e-15));

    normalize(two, st);
    CHECK(two[0].image.v[0] == doctest::Approx((1.0 - 3.0) / st.stddev).epsilon(1e-15));
    NormStats st2 = compute_stats(two);
    CHECK(st2.mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(st2.stddev == doctest::Approx(1.0).epsilon(1e-12));

    // degenerate data is rejected
    std::vector<Sample> flat(1);
    flat[0].image = Tensor4({1, 1, 2, 2}, 5.0);
    flat[0].labels = LabelMap(2, 2);
    CHECK_THROWS_AS(compute_stats(flat), std::invalid_argument);
    CHECK_THROWS_AS(compute_stats({}), std::invalid_argument);
}
