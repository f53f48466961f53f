#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "network.hpp"
#include "rng.hpp"

namespace pacnr {

struct Dataset {
    std::vector<LabeledExample> examples;
    std::size_t num_classes = 0;
    std::size_t input_dim = 0;
    std::string source;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
    const LabeledExample& operator[](std::size_t i) const { return examples[i]; }
};

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

struct IdxHeader {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;

    std::size_t header_bytes() const { return 4 + 4 * dims.size(); }
    std::uint64_t payload_bytes() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

struct IdxFile {
    IdxHeader header;
    std::vector<std::uint8_t> payload;
};

namespace detail {
inline std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}
inline void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}
}  // namespace detail

/// Reads a whole file, transparently inflating gzip (offsets in later errors refer to the inflated stream).
inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError(path, "no such file");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open");
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;

    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) throw IoError(path, "cannot open gzip stream");
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> buf;
    int n;
    while ((n = gzread(gz, buf.data(), static_cast<unsigned>(buf.size()))) > 0) out.insert(out.end(), buf.begin(), buf.begin() + n);
    int err = 0;
    const char* msg = gzerror(gz, &err);
    const std::string what = msg ? msg : "";
    gzclose(gz);
    if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) throw IoError(path, "gzip error: " + what);
    return out;
}

inline IdxFile parse_idx(const std::vector<std::uint8_t>& bytes, const std::string& path = "<memory>") {
    if (bytes.size() < 4) throw ParseError(path, bytes.size(), "truncated magic number");
    if (bytes[0] != 0 || bytes[1] != 0) throw ParseError(path, 0, "bad magic: leading bytes must be zero");
    if (bytes[2] != 0x08) throw ParseError(path, 2, "unsupported element type " + std::to_string(bytes[2]) + " (only unsigned byte)");
    IdxFile f;
    f.header.magic = detail::read_be32(bytes.data());
    const std::size_t ndims = bytes[3];
    if (ndims == 0) throw ParseError(path, 3, "zero dimensions");
    if (bytes.size() < 4 + 4 * ndims) throw ParseError(path, bytes.size(), "truncated header: " + std::to_string(ndims) + " dimension sizes declared");
    for (std::size_t i = 0; i < ndims; ++i) f.header.dims.push_back(detail::read_be32(bytes.data() + 4 + 4 * i));
    const std::uint64_t start = f.header.header_bytes();
    const std::uint64_t need = f.header.payload_bytes();
    const std::uint64_t have = bytes.size() - start;
    if (have < need)
        throw ParseError(path, bytes.size(), "truncated data: header declares " + std::to_string(need) + " bytes, found " + std::to_string(have));
    if (have > need) throw ParseError(path, start + need, std::to_string(have - need) + " trailing bytes after declared data");
    f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.end());
    return f;
}

inline std::vector<std::uint8_t> encode_idx(const IdxFile& f) {
    if (f.header.payload_bytes() != f.payload.size()) throw Error("encode_idx: payload size does not match header dims");
    std::vector<std::uint8_t> out;
    out.reserve(f.header.header_bytes() + f.payload.size());
    detail::write_be32(out, f.header.magic);
    for (auto d : f.header.dims) detail::write_be32(out, d);
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path, "write failed");
}

inline void write_idx(const std::string& path, const IdxFile& f) { write_bytes(path, encode_idx(f)); }

/// Builds a dataset from parsed image and label files. Pixels are divided by 255.
inline Dataset dataset_from_idx(const IdxFile& images, const IdxFile& labels, const std::string& image_path = "<images>",
                                const std::string& label_path = "<labels>", std::size_t num_classes = 10) {
    if (images.header.magic != kIdxImageMagic)
        throw ParseError(image_path, 0, "bad magic " + std::to_string(images.header.magic) + ", expected 2051 for images");
    if (labels.header.magic != kIdxLabelMagic)
        throw ParseError(label_path, 0, "bad magic " + std::to_string(labels.header.magic) + ", expected 2049 for labels");
    const std::size_t n = images.header.dims[0];
    if (labels.header.dims[0] != n)
        throw ParseError(label_path, 4, "label count " + std::to_string(labels.header.dims[0]) + " does not match image count " + std::to_string(n));
    const std::size_t dim = n ? images.payload.size() / n : images.header.dims[1] * images.header.dims[2];
    Dataset ds;
    ds.num_classes = num_classes;
    ds.input_dim = dim;
    ds.examples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t y = labels.payload[i];
        if (y >= num_classes) throw ParseError(label_path, 8 + i, "label " + std::to_string(y) + " out of range");
        LabeledExample& e = ds.examples[i];
        e.y = y;
        e.x.resize(dim);
        const std::uint8_t* px = images.payload.data() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) e.x[j] = px[j] / 255.0;
    }
    return ds;
}

inline Dataset load_mnist(const std::string& image_path, const std::string& label_path) {
    const IdxFile images = parse_idx(read_file_bytes(image_path), image_path);
    if (images.header.magic != kIdxImageMagic)
        throw ParseError(image_path, 0, "bad magic " + std::to_string(images.header.magic) + ", expected 2051 for images");
    const IdxFile labels = parse_idx(read_file_bytes(label_path), label_path);
    if (labels.header.magic != kIdxLabelMagic)
        throw ParseError(label_path, 0, "bad magic " + std::to_string(labels.header.magic) + ", expected 2049 for labels");
    Dataset ds = dataset_from_idx(images, labels, image_path, label_path);
    ds.source = "mnist:" + std::filesystem::path(image_path).filename().string();
    return ds;
}

struct MnistPaths {
    std::string images;
    std::string labels;
};

/// Standard file names inside a directory, preferring uncompressed files when both exist.
inline MnistPaths mnist_paths(const std::string& dir, bool train) {
    const std::string pre = train ? "train" : "t10k";
    auto pick = [&](const std::string& stem) {
        const auto p = std::filesystem::path(dir) / stem;
        if (std::filesystem::exists(p)) return p.string();
        return (std::filesystem::path(dir) / (stem + ".gz")).string();
    };
    return {pick(pre + "-images-idx3-ubyte"), pick(pre + "-labels-idx1-ubyte")};
}

inline constexpr const char* kDataDirEnv = "PACNR_DATA_DIR";

/// Directory named by PACNR_DATA_DIR, or empty.
inline std::string data_dir_from_env() {
    const char* v = std::getenv(kDataDirEnv);
    return v ? std::string(v) : std::string();
}

/// Uniform sample of m examples without replacement (partial Fisher–Yates).
inline Dataset subset(const Dataset& data, std::size_t m, RngStream& rng) {
    if (m > data.size())
        throw Error("subset: requested " + std::to_string(m) + " examples from a dataset of " + std::to_string(data.size()));
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    Dataset out;
    out.num_classes = data.num_classes;
    out.input_dim = data.input_dim;
    out.source = data.source;
    out.examples.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.examples.push_back(data.examples[idx[i]]);
    return out;
}

/// K unit-variance Gaussian clusters. Centers are (separation/√2)·e_k when K ≤ N (pairwise distance
/// `separation`), otherwise k·separation·e_0. Labels cycle 0..K-1; features are min–max rescaled per
/// coordinate into [0, 1].
inline Dataset synthetic_blobs(std::size_t n, std::size_t N, std::size_t K, double separation, RngStream& rng) {
    if (K < 2) throw Error("synthetic_blobs: need at least two classes");
    if (N == 0) throw Error("synthetic_blobs: zero input dimension");
    Dataset ds;
    ds.num_classes = K;
    ds.input_dim = N;
    ds.source = "blobs";
    ds.examples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        LabeledExample& e = ds.examples[i];
        e.y = i % K;
        e.x.resize(N);
        for (double& v : e.x) v = rng.normal();
        if (K <= N)
            e.x[e.y] += separation / std::sqrt(2.0);
        else
            e.x[0] += static_cast<double>(e.y) * separation;
    }
    for (std::size_t j = 0; j < N && n > 0; ++j) {
        double lo = ds.examples[0].x[j], hi = lo;
        for (const auto& e : ds.examples) {
            lo = std::min(lo, e.x[j]);
            hi = std::max(hi, e.x[j]);
        }
        const double span = hi - lo;
        for (auto& e : ds.examples) e.x[j] = span > 0.0 ? std::clamp((e.x[j] - lo) / span, 0.0, 1.0) : 0.0;
    }
    return ds;
}

/// IDX image/label pair for a dataset; features are quantized to bytes as round(255·x).
inline std::pair<IdxFile, IdxFile> to_idx(const Dataset& ds) {
    IdxFile img, lab;
    img.header.magic = kIdxImageMagic;
    img.header.dims = {static_cast<std::uint32_t>(ds.size()), 1, static_cast<std::uint32_t>(ds.input_dim)};
    lab.header.magic = kIdxLabelMagic;
    lab.header.dims = {static_cast<std::uint32_t>(ds.size())};
    img.payload.reserve(ds.size() * ds.input_dim);
    for (const auto& e : ds.examples) {
        for (double v : e.x) img.payload.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
        lab.payload.push_back(static_cast<std::uint8_t>(e.y));
    }
    return {img, lab};
}

}  // namespace pacnr
