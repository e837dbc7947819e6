#include "lpmgh/model_io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lpmgh/error.hpp"

namespace lpmgh {

namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "lpmgh-model";
constexpr int kModelVersion = 1;
constexpr char kCodesMagic[4] = {'L', 'P', 'M', 'B'};
constexpr std::uint32_t kCodesVersion = 1;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty()) throw FormatError("model: expected matrix rows");
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(rows[0].size());
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != c) throw FormatError("model: ragged matrix");
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    return m;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Vector vector_from_json(const json& arr) {
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = arr[static_cast<std::size_t>(i)].get<double>();
    return v;
}

std::uint64_t read_u64le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw FormatError("codes: truncated header");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

std::uint32_t read_u32le(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw FormatError("codes: truncated header");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

void write_u64le(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

void write_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

} // namespace

void save_model(const std::filesystem::path& path, const HashModel& model, const TrainConfig& cfg) {
    json doc;
    doc["format"] = kModelFormat;
    doc["version"] = kModelVersion;
    doc["bits"] = model.bits;
    doc["views"] = model.view_count();
    json dims = json::array();
    for (const auto& w : model.projections) dims.push_back(w.rows());
    doc["dims"] = std::move(dims);
    doc["mu"] = vector_to_json(model.mu);
    json projections = json::array();
    for (const auto& w : model.projections) projections.push_back(matrix_to_json(w));
    doc["projections"] = std::move(projections);
    json stats = json::array();
    for (const auto& st : model.norm_stats)
        stats.push_back(json{{"mean", vector_to_json(st.mean)}, {"scale", vector_to_json(st.scale)}});
    doc["norm_stats"] = std::move(stats);
    json anchors = json::array();
    for (const auto& a : model.anchors)
        anchors.push_back(json{{"view", a.view_index}, {"centers", matrix_to_json(a.centers)}});
    doc["anchors"] = std::move(anchors);
    doc["config"] = json{{"bits", cfg.bits},
                         {"max_outer_iters", cfg.max_outer_iters},
                         {"rel_tol", cfg.rel_tol},
                         {"mu_init", cfg.mu_init},
                         {"seed", cfg.seed},
                         {"anchor_count", cfg.anchor.anchor_count},
                         {"anchor_neighbors", cfg.anchor.neighbors},
                         {"anchor_bandwidth", cfg.anchor.bandwidth ? json(*cfg.anchor.bandwidth) : json()},
                         {"kmeans_iters", cfg.anchor.kmeans_iters},
                         {"stiefel_max_iters", cfg.stiefel.max_iters},
                         {"stiefel_grad_tol", cfg.stiefel.grad_tol}};

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::pair<HashModel, TrainConfig> load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (doc.value("format", "") != kModelFormat)
        throw FormatError(path.string() + ": not a model file");
    if (doc.value("version", -1) != kModelVersion)
        throw FormatError(path.string() + ": unsupported model version");

    HashModel model;
    TrainConfig cfg;
    try {
        model.bits = doc.at("bits").get<int>();
        for (const auto& w : doc.at("projections")) model.projections.push_back(matrix_from_json(w));
        model.mu = vector_from_json(doc.at("mu"));
        for (const auto& st : doc.at("norm_stats"))
            model.norm_stats.push_back(
                NormStats{vector_from_json(st.at("mean")), vector_from_json(st.at("scale"))});
        for (const auto& a : doc.at("anchors"))
            model.anchors.push_back(
                AnchorSet{matrix_from_json(a.at("centers")), a.at("view").get<int>()});
        const auto& c = doc.at("config");
        cfg.bits = c.at("bits").get<int>();
        cfg.max_outer_iters = c.at("max_outer_iters").get<int>();
        cfg.rel_tol = c.at("rel_tol").get<double>();
        cfg.mu_init = c.at("mu_init").get<double>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        cfg.anchor.anchor_count = c.at("anchor_count").get<Eigen::Index>();
        cfg.anchor.neighbors = c.at("anchor_neighbors").get<int>();
        if (!c.at("anchor_bandwidth").is_null())
            cfg.anchor.bandwidth = c.at("anchor_bandwidth").get<double>();
        cfg.anchor.kmeans_iters = c.at("kmeans_iters").get<int>();
        cfg.stiefel.max_iters = c.at("stiefel_max_iters").get<int>();
        cfg.stiefel.grad_tol = c.at("stiefel_grad_tol").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (static_cast<Eigen::Index>(model.projections.size()) != doc.at("views").get<Eigen::Index>() ||
        model.projections.size() != model.norm_stats.size() ||
        model.mu.size() != static_cast<Eigen::Index>(model.projections.size()))
        throw FormatError(path.string() + ": inconsistent view counts");
    for (const auto& w : model.projections)
        if (w.cols() != model.bits) throw FormatError(path.string() + ": projection width != bits");
    return {std::move(model), cfg};
}

void save_codes(const std::filesystem::path& path, const PackedCodes& codes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kCodesMagic, 4);
    write_u32le(out, kCodesVersion);
    write_u64le(out, static_cast<std::uint64_t>(codes.n));
    write_u64le(out, static_cast<std::uint64_t>(codes.bits));
    const int bytes_per_row = (codes.bits + 7) / 8;
    for (Eigen::Index i = 0; i < codes.n; ++i) {
        const auto row = codes.row(i);
        for (int b = 0; b < bytes_per_row; ++b) {
            const auto byte = static_cast<unsigned char>(
                (row[static_cast<std::size_t>(b / 8)] >> (8 * (b % 8))) & 0xff);
            out.put(static_cast<char>(byte));
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PackedCodes load_codes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCodesMagic, 4) != 0)
        throw FormatError(path.string() + ": bad magic");
    const std::uint32_t version = read_u32le(in);
    if (version != kCodesVersion)
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    const std::uint64_t n = read_u64le(in);
    const std::uint64_t bits = read_u64le(in);
    if (n == 0 || bits == 0) throw FormatError(path.string() + ": empty code matrix");

    PackedCodes codes;
    codes.n = static_cast<Eigen::Index>(n);
    codes.bits = static_cast<int>(bits);
    codes.words_per_row = (codes.bits + 63) / 64;
    codes.words.assign(n * static_cast<std::uint64_t>(codes.words_per_row), 0);
    const int bytes_per_row = (codes.bits + 7) / 8;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto* row = codes.words.data() + i * static_cast<std::uint64_t>(codes.words_per_row);
        for (int b = 0; b < bytes_per_row; ++b) {
            const int ch = in.get();
            if (ch == std::char_traits<char>::eof())
                throw FormatError(path.string() + ": truncated payload");
            row[b / 8] |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * (b % 8));
        }
    }
    // padding bits beyond r must be zero for popcount distances to be exact
    const int tail_bits = codes.bits % 64;
    if (tail_bits != 0) {
        const std::uint64_t mask = (std::uint64_t{1} << tail_bits) - 1;
        for (std::uint64_t i = 0; i < n; ++i) {
            auto& last = codes.words[i * static_cast<std::uint64_t>(codes.words_per_row) +
                                     static_cast<std::uint64_t>(codes.words_per_row) - 1];
            if ((last & ~mask) != 0) throw FormatError(path.string() + ": nonzero padding bits");
        }
    }
    return codes;
}

void write_convergence_csv(const std::filesystem::path& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "iteration,objective\n";
    char buf[64];
    auto emit = [&](int iter, double value) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
        if (ec != std::errc{}) throw NumericError("to_chars failed");
        out << iter << ',';
        out.write(buf, end - buf);
        out.put('\n');
    };
    emit(0, report.initial_objective);
    for (std::size_t i = 0; i < report.objective_per_iter.size(); ++i)
        emit(static_cast<int>(i + 1), report.objective_per_iter[i]);
    if (!out) throw IoError("write failed: " + path.string());
}

void write_metrics(const std::filesystem::path& path, double map, Eigen::Index n_queries,
                   Eigen::Index n_db, int bits) {
    json doc{{"map", map}, {"n_queries", n_queries}, {"n_db", n_db}, {"r", bits}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace lpmgh
