#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "network.hpp"
#include "textio.hpp"
#include "trainer.hpp"

namespace pacnr {

inline constexpr int kCheckpointVersion = 1;

/// Trained network plus everything needed to reproduce and audit it.
struct Checkpoint {
    MlpParams params;
    std::uint64_t init_seed = 0;
    InitScheme init_scheme = InitScheme::InvSqrtFanin;
    TrainConfig train;
    std::string data_source;
    std::size_t data_m = 0;
    std::uint64_t data_seed = 0;
    std::size_t epochs = 0;
    double margin_accuracy = 0.0;
    bool converged = false;
};

inline std::uint64_t weights_checksum(const MlpParams& p) {
    Fnv1a h;
    for (const auto* set : {&p.weights, &p.init()})
        for (const Matrix& m : *set)
            for (double v : m.data()) h.add(v);
    return h.value();
}

/// Line-oriented text: "key value" header lines, then one "W d rows cols" / "Z d rows cols" block per layer
/// with one matrix row per line, then "end". Floats carry 17 significant digits.
inline std::string serialize_checkpoint(const Checkpoint& c) {
    std::ostringstream o;
    const MlpParams& p = c.params;
    o << "pacnr-checkpoint " << kCheckpointVersion << "\n";
    o << "dims";
    for (auto d : p.dims()) o << " " << d;
    o << "\n";
    o << "init_seed " << c.init_seed << "\n";
    o << "init_scheme " << to_string(c.init_scheme) << "\n";
    o << "optimizer " << to_string(c.train.optimizer) << "\n";
    o << "learning_rate " << format_double(c.train.learning_rate) << "\n";
    o << "batch_size " << c.train.batch_size << "\n";
    o << "stop_fraction " << format_double(c.train.stop_fraction) << "\n";
    o << "stop_margin " << format_double(c.train.stop_margin) << "\n";
    o << "max_epochs " << c.train.max_epochs << "\n";
    o << "train_seed " << c.train.seed << "\n";
    o << "data_source " << (c.data_source.empty() ? "-" : c.data_source) << "\n";
    o << "data_m " << c.data_m << "\n";
    o << "data_seed " << c.data_seed << "\n";
    o << "epochs " << c.epochs << "\n";
    o << "margin_accuracy " << format_double(c.margin_accuracy) << "\n";
    o << "converged " << (c.converged ? 1 : 0) << "\n";
    o << "checksum " << hex64(weights_checksum(p)) << "\n";
    auto block = [&](char tag, const std::vector<Matrix>& ms) {
        for (std::size_t d = 0; d < ms.size(); ++d) {
            const Matrix& m = ms[d];
            o << tag << " " << d + 1 << " " << m.rows() << " " << m.cols() << "\n";
            for (std::size_t r = 0; r < m.rows(); ++r) {
                for (std::size_t k = 0; k < m.cols(); ++k) o << (k ? " " : "") << format_double(m(r, k));
                o << "\n";
            }
        }
    };
    block('W', p.weights);
    block('Z', p.init());
    o << "end\n";
    return o.str();
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out << serialize_checkpoint(c);
    if (!out) throw IoError(path, "write failed");
}

inline Checkpoint parse_checkpoint(const std::string& text, const std::string& path = "<checkpoint>") {
    std::size_t pos = 0, line_start = 0;
    auto next_line = [&]() -> std::string_view {
        if (pos >= text.size()) throw ParseError(path, pos, "unexpected end of file");
        line_start = pos;
        std::size_t e = text.find('\n', pos);
        if (e == std::string::npos) e = text.size();
        std::string_view l(text.data() + pos, e - pos);
        pos = e + 1;
        return l;
    };
    auto fail = [&](const std::string& what) { throw ParseError(path, line_start, what); };

    auto head = split_ws(next_line());
    int version = 0;
    if (head.size() != 2 || head[0] != "pacnr-checkpoint" || !parse_int(head[1], version)) fail("not a checkpoint file");
    if (version != kCheckpointVersion) fail("unsupported checkpoint version " + std::string(head[1]));

    Checkpoint c;
    std::vector<std::size_t> dims;
    std::map<std::string, std::string> kv;
    std::string checksum;
    std::vector<Matrix> w, z;
    for (;;) {
        const auto tok = split_ws(next_line());
        if (tok.empty()) continue;
        if (tok[0] == "end") break;
        if (tok[0] == "dims") {
            for (std::size_t i = 1; i < tok.size(); ++i) {
                std::size_t v;
                if (!parse_int(tok[i], v)) fail("bad dimension");
                dims.push_back(v);
            }
            continue;
        }
        if (tok[0] == "W" || tok[0] == "Z") {
            std::size_t d, rows, cols;
            if (tok.size() != 4 || !parse_int(tok[1], d) || !parse_int(tok[2], rows) || !parse_int(tok[3], cols))
                fail("bad matrix header");
            auto& set = tok[0] == "W" ? w : z;
            if (d != set.size() + 1) fail("matrix blocks out of order");
            Matrix m(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                const auto vals = split_ws(next_line());
                if (vals.size() != cols) fail("matrix row has " + std::to_string(vals.size()) + " values, expected " + std::to_string(cols));
                for (std::size_t k = 0; k < cols; ++k)
                    if (!parse_double(vals[k], m(r, k))) fail("bad number '" + std::string(vals[k]) + "'");
            }
            set.push_back(std::move(m));
            continue;
        }
        if (tok.size() != 2) fail("expected 'key value'");
        if (tok[0] == "checksum")
            checksum = std::string(tok[1]);
        else
            kv[std::string(tok[0])] = std::string(tok[1]);
    }

    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(path, 0, std::string("missing key '") + key + "'");
        return it->second;
    };
    auto get_u = [&](const char* key) {
        std::uint64_t v;
        if (!parse_int(get(key), v)) throw ParseError(path, 0, std::string("bad integer for '") + key + "'");
        return v;
    };
    auto get_d = [&](const char* key) {
        double v;
        if (!parse_double(get(key), v)) throw ParseError(path, 0, std::string("bad number for '") + key + "'");
        return v;
    };
    try {
        c.params = MlpParams(dims, std::move(w), std::move(z));
    } catch (const DimensionError& e) {
        throw ParseError(path, 0, e.what());
    }
    if (hex64(weights_checksum(c.params)) != checksum) throw ParseError(path, 0, "weight checksum mismatch");
    c.init_seed = get_u("init_seed");
    c.init_scheme = parse_init_scheme(get("init_scheme"));
    c.train.optimizer = parse_optimizer(get("optimizer"));
    c.train.learning_rate = get_d("learning_rate");
    c.train.batch_size = get_u("batch_size");
    c.train.stop_fraction = get_d("stop_fraction");
    c.train.stop_margin = get_d("stop_margin");
    c.train.max_epochs = get_u("max_epochs");
    c.train.seed = get_u("train_seed");
    c.data_source = get("data_source") == "-" ? "" : get("data_source");
    c.data_m = get_u("data_m");
    c.data_seed = get_u("data_seed");
    c.epochs = get_u("epochs");
    c.margin_accuracy = get_d("margin_accuracy");
    c.converged = get_u("converged") != 0;
    return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open checkpoint");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str(), path);
}

}  // namespace pacnr
