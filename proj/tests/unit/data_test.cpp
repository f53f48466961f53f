#include <gtest/gtest.h>
#include <zlib.h>

#include <filesystem>
#include <map>

#include "pacnr/data.hpp"

using namespace pacnr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pacnr_data_test";
    fs::create_directories(dir);
    return dir / name;
}

IdxFile tiny_images() {
    IdxFile f;
    f.header.magic = kIdxImageMagic;
    f.header.dims = {3, 2, 2};
    f.payload = {0, 255, 128, 1, 10, 20, 30, 40, 255, 255, 0, 0};
    return f;
}

IdxFile tiny_labels() {
    IdxFile f;
    f.header.magic = kIdxLabelMagic;
    f.header.dims = {3};
    f.payload = {7, 0, 9};
    return f;
}

void write_gzip(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    gzFile gz = gzopen(path.c_str(), "wb");
    ASSERT_NE(gz, nullptr);
    ASSERT_EQ(gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size())), static_cast<int>(bytes.size()));
    gzclose(gz);
}

ParseError parse_error_of(const std::vector<std::uint8_t>& bytes) {
    try {
        parse_idx(bytes, "f.idx");
    } catch (const ParseError& e) {
        return e;
    }
    ADD_FAILURE() << "no parse error";
    return ParseError("", 0, "");
}

}  // namespace

TEST(Idx, EncodesBigEndianHeader) {
    const auto bytes = encode_idx(tiny_images());
    ASSERT_EQ(bytes.size(), 16u + 12u);
    EXPECT_EQ((std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 8)), (std::vector<std::uint8_t>{0, 0, 8, 3, 0, 0, 0, 3}));
    const auto lab = encode_idx(tiny_labels());
    EXPECT_EQ((std::vector<std::uint8_t>(lab.begin(), lab.begin() + 4)), (std::vector<std::uint8_t>{0, 0, 8, 1}));
}

TEST(Idx, RoundTripAndScaling) {
    const IdxFile img = parse_idx(encode_idx(tiny_images()));
    EXPECT_EQ(img.header.magic, 2051u);
    EXPECT_EQ(img.header.dims, (std::vector<std::uint32_t>{3, 2, 2}));
    EXPECT_EQ(img.payload, tiny_images().payload);
    const Dataset ds = dataset_from_idx(img, parse_idx(encode_idx(tiny_labels())));
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.input_dim, 4u);
    EXPECT_EQ(ds[0].x, (Vector{0.0, 1.0, 128 / 255.0, 1 / 255.0}));
    EXPECT_EQ(ds[2].x[0], 1.0);
    EXPECT_EQ(ds[0].y, 7u);
    EXPECT_EQ(ds[2].y, 9u);
}

TEST(Idx, ErrorsCarryOffsets) {
    auto good = encode_idx(tiny_images());
    auto bad = good;
    bad[0] = 1;
    EXPECT_EQ(parse_error_of(bad).offset, 0u);
    bad = good;
    bad[2] = 0x0d;
    EXPECT_EQ(parse_error_of(bad).offset, 2u);
    bad.assign(good.begin(), good.begin() + 10);
    EXPECT_EQ(parse_error_of(bad).offset, 10u);
    bad.assign(good.begin(), good.end() - 1);
    const ParseError e = parse_error_of(bad);
    EXPECT_EQ(e.offset, good.size() - 1);
    EXPECT_NE(std::string(e.what()).find("declares 12 bytes, found 11"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("f.idx"), std::string::npos);
    bad = good;
    bad.push_back(0);
    EXPECT_EQ(parse_error_of(bad).offset, good.size());
}

TEST(Idx, RejectsSwappedFilesAndBadLabels) {
    const IdxFile img = tiny_images(), lab = tiny_labels();
    EXPECT_THROW(dataset_from_idx(lab, img), ParseError);
    IdxFile big = lab;
    big.payload[1] = 10;
    EXPECT_THROW(dataset_from_idx(img, big), ParseError);
    IdxFile shortl = lab;
    shortl.header.dims = {2};
    shortl.payload.pop_back();
    EXPECT_THROW(dataset_from_idx(img, shortl), ParseError);
}

TEST(Idx, GzipAndPlainFilesLoadIdentically) {
    const auto ib = encode_idx(tiny_images()), lb = encode_idx(tiny_labels());
    write_bytes(scratch("plain-images").string(), ib);
    write_bytes(scratch("plain-labels").string(), lb);
    write_gzip(scratch("gz-images.gz"), ib);
    write_gzip(scratch("gz-labels.gz"), lb);
    const Dataset a = load_mnist(scratch("plain-images").string(), scratch("plain-labels").string());
    const Dataset b = load_mnist(scratch("gz-images.gz").string(), scratch("gz-labels.gz").string());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].x, b[i].x);
        EXPECT_EQ(a[i].y, b[i].y);
    }
    EXPECT_EQ(read_file_bytes(scratch("gz-images.gz").string()), ib);
}

TEST(Idx, MissingFileNamesPath) {
    try {
        load_mnist("/nonexistent/images", "/nonexistent/labels");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_EQ(e.path, "/nonexistent/images");
    }
}

TEST(Idx, PathsPreferUncompressed) {
    const fs::path dir = scratch("paths");
    fs::create_directories(dir);
    EXPECT_EQ(mnist_paths(dir.string(), true).images, (dir / "train-images-idx3-ubyte.gz").string());
    write_bytes((dir / "t10k-labels-idx1-ubyte").string(), {});
    EXPECT_EQ(mnist_paths(dir.string(), false).labels, (dir / "t10k-labels-idx1-ubyte").string());
}

TEST(Mnist, BundledTrainingSetIfPresent) {
    const MnistPaths p = mnist_paths(PACNR_TEST_DATA_DIR, true);
    if (!fs::exists(p.images)) GTEST_SKIP() << "no MNIST files at " << p.images;
    const Dataset ds = load_mnist(p.images, p.labels);
    EXPECT_GE(ds.size(), 4096u);
    EXPECT_EQ(ds.input_dim, 784u);
    std::vector<std::size_t> counts(10, 0);
    for (const auto& e : ds.examples) {
        ++counts[e.y];
        for (double v : e.x) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
    for (std::size_t c : counts) EXPECT_GT(c, ds.size() / 20);
}

TEST(Subset, DistinctDeterministicAndUniform) {
    Dataset base;
    base.num_classes = 2;
    base.input_dim = 1;
    for (int i = 0; i < 50; ++i) base.examples.push_back({{static_cast<double>(i)}, static_cast<std::size_t>(i % 2)});
    RngStream a(1), b(1);
    const Dataset s = subset(base, 20, a), t = subset(base, 20, b);
    std::vector<double> seen;
    for (std::size_t i = 0; i < 20; ++i) {
        EXPECT_EQ(s[i].x, t[i].x);
        seen.push_back(s[i].x[0]);
    }
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(std::unique(seen.begin(), seen.end()), seen.end());

    const Dataset all = subset(base, 50, a);
    std::vector<double> perm;
    for (const auto& e : all.examples) perm.push_back(e.x[0]);
    std::sort(perm.begin(), perm.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(perm[i], i);

    // each element is chosen with probability 20/50 = 0.4
    std::vector<int> hits(50, 0);
    RngStream r(2);
    const int reps = 5000;
    for (int k = 0; k < reps; ++k)
        for (const auto& e : subset(base, 20, r).examples) ++hits[static_cast<int>(e.x[0])];
    for (int h : hits) EXPECT_NEAR(h / double(reps), 0.4, 0.04);

    EXPECT_THROW(subset(base, 51, r), Error);
}

TEST(Blobs, ShapeRangeAndDeterminism) {
    RngStream a(3), b(3);
    const Dataset s = synthetic_blobs(300, 4, 3, 10.0, a), t = synthetic_blobs(300, 4, 3, 10.0, b);
    EXPECT_EQ(s.input_dim, 4u);
    EXPECT_EQ(s.num_classes, 3u);
    std::map<std::size_t, int> per;
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s[i].x, t[i].x);
        ++per[s[i].y];
        for (double v : s[i].x) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    }
    EXPECT_EQ(per[0], 100);
    EXPECT_EQ(per[2], 100);
}

TEST(Blobs, WellSeparatedClustersAreNearestCenterClassifiable) {
    RngStream rng(4);
    const Dataset ds = synthetic_blobs(1000, 5, 4, 10.0, rng);
    std::vector<Vector> centers(4, Vector(5, 0.0));
    std::vector<int> n(4, 0);
    for (const auto& e : ds.examples) {
        for (std::size_t j = 0; j < 5; ++j) centers[e.y][j] += e.x[j];
        ++n[e.y];
    }
    for (std::size_t k = 0; k < 4; ++k)
        for (double& v : centers[k]) v /= n[k];
    int right = 0;
    for (const auto& e : ds.examples) {
        std::size_t best = 0;
        double bd = 1e300;
        for (std::size_t k = 0; k < 4; ++k) {
            double d = 0;
            for (std::size_t j = 0; j < 5; ++j) d += (e.x[j] - centers[k][j]) * (e.x[j] - centers[k][j]);
            if (d < bd) bd = d, best = k;
        }
        right += best == e.y;
    }
    EXPECT_GE(right / 1000.0, 0.99);
}

TEST(Blobs, ZeroSeparationIsNotClassifiable) {
    RngStream rng(5);
    const Dataset ds = synthetic_blobs(2000, 2, 2, 0.0, rng);
    double m0 = 0, m1 = 0;
    for (const auto& e : ds.examples) (e.y ? m1 : m0) += e.x[0] / 1000.0;
    EXPECT_NEAR(m0, m1, 0.02);
    EXPECT_THROW(synthetic_blobs(10, 2, 1, 1.0, rng), Error);
}

TEST(Blobs, IdxExportQuantizes) {
    RngStream rng(6);
    const Dataset ds = synthetic_blobs(20, 3, 2, 5.0, rng);
    const auto [img, lab] = to_idx(ds);
    const Dataset back = dataset_from_idx(parse_idx(encode_idx(img)), parse_idx(encode_idx(lab)));
    ASSERT_EQ(back.size(), 20u);
    for (std::size_t i = 0; i < 20; ++i) {
        EXPECT_EQ(back[i].y, ds[i].y);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back[i].x[j], ds[i].x[j], 0.5 / 255 + 1e-12);
    }
}
