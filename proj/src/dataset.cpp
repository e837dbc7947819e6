#include "lpmgh/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "lpmgh/error.hpp"
#include "lpmgh/rng.hpp"

namespace lpmgh {

namespace {

constexpr char kFeatureMagic[4] = {'L', 'P', 'M', 'V'};
constexpr std::uint32_t kFeatureVersion = 1;

void require_finite(const Matrix& x, const std::string& what) {
    if (!x.allFinite()) throw ValueError(what + ": non-finite entry");
}

std::uint64_t read_u64le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw FormatError("truncated header");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

std::uint32_t read_u32le(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw FormatError("truncated header");
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

double read_f64le(std::istream& in) {
    const std::uint64_t bits = read_u64le(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

void write_f64le(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64le(out, bits);
}

Matrix load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = p + line.size();
        while (true) {
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{})
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": non-numeric token");
            row.push_back(v);
            if (next == end) break;
            if (*next != ',')
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected ','");
            p = next + 1;
            if (p == end) throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                            ": trailing ','");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path.string() + ": empty file");
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    require_finite(x, path.string());
    return x;
}

void write_csv(const std::filesystem::path& path, const Matrix& x) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    char buf[64];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            // shortest round-trip decimal
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x(i, j));
            if (ec != std::errc{}) throw NumericError("to_chars failed");
            if (j) out.put(',');
            out.write(buf, end - buf);
        }
        out.put('\n');
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Matrix load_lpmv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0)
        throw FormatError(path.string() + ": bad magic");
    const std::uint32_t version = read_u32le(in);
    if (version != kFeatureVersion)
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    const std::uint64_t n = read_u64le(in);
    const std::uint64_t d = read_u64le(in);
    if (n == 0 || d == 0) throw FormatError(path.string() + ": empty matrix");
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = read_f64le(in);
            if (!in) throw FormatError(path.string() + ": truncated payload");
        }
    require_finite(x, path.string());
    return x;
}

void write_lpmv(const std::filesystem::path& path, const Matrix& x) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kFeatureMagic, 4);
    write_u32le(out, kFeatureVersion);
    write_u64le(out, static_cast<std::uint64_t>(x.rows()));
    write_u64le(out, static_cast<std::uint64_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) write_f64le(out, x(i, j));
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace

MultiviewDataset::MultiviewDataset(std::vector<Matrix> views,
                                   std::optional<std::vector<int>> labels,
                                   std::vector<std::int64_t> ids)
    : views_(std::move(views)), labels_(std::move(labels)), ids_(std::move(ids)) {
    if (views_.empty()) throw ShapeError("dataset needs at least one view");
    const Eigen::Index n = views_[0].rows();
    if (n < 1) throw ShapeError("dataset needs at least one sample");
    for (const auto& v : views_) {
        if (v.rows() != n) throw ShapeError("views disagree on sample count");
        if (v.cols() < 1) throw ShapeError("view with zero columns");
        require_finite(v, "view");
    }
    if (labels_ && static_cast<Eigen::Index>(labels_->size()) != n)
        throw ShapeError("label count does not match sample count");
    if (ids_.empty()) {
        ids_.resize(static_cast<std::size_t>(n));
        std::iota(ids_.begin(), ids_.end(), std::int64_t{0});
    } else if (static_cast<Eigen::Index>(ids_.size()) != n) {
        throw ShapeError("id count does not match sample count");
    }
}

MultiviewDataset MultiviewDataset::select_rows(const std::vector<Eigen::Index>& rows) const {
    std::vector<Matrix> out;
    out.reserve(views_.size());
    for (const auto& v : views_) {
        Matrix sub(static_cast<Eigen::Index>(rows.size()), v.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = v.row(rows[i]);
        out.push_back(std::move(sub));
    }
    std::optional<std::vector<int>> labels;
    if (labels_) {
        labels.emplace();
        labels->reserve(rows.size());
        for (auto r : rows) labels->push_back((*labels_)[static_cast<std::size_t>(r)]);
    }
    std::vector<std::int64_t> ids;
    ids.reserve(rows.size());
    for (auto r : rows) ids.push_back(ids_[static_cast<std::size_t>(r)]);
    return MultiviewDataset(std::move(out), std::move(labels), std::move(ids));
}

Matrix load_features(const std::filesystem::path& path, FeatureFormat format) {
    return format == FeatureFormat::csv ? load_csv(path) : load_lpmv(path);
}

void write_features(const std::filesystem::path& path, const Matrix& x, FeatureFormat format) {
    if (x.rows() < 1 || x.cols() < 1) throw ShapeError("refusing to write empty matrix");
    require_finite(x, "write_features");
    if (format == FeatureFormat::csv)
        write_csv(path, x);
    else
        write_lpmv(path, x);
}

FeatureFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? FeatureFormat::csv : FeatureFormat::lpmv;
}

std::vector<int> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        int v = 0;
        auto [next, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc{} || next != line.data() + line.size())
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad label");
        labels.push_back(v);
    }
    if (labels.empty()) throw FormatError(path.string() + ": no labels");
    return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (int v : labels) out << v << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::pair<Matrix, NormStats> normalize_view(const Matrix& x) {
    if (x.rows() < 2) throw ValueError("normalize_view needs at least 2 samples");
    NormStats stats;
    stats.mean = x.colwise().mean();
    stats.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - stats.mean[j]).square().mean();
        const double sd = std::sqrt(var);
        stats.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return {apply_normalization(stats, x), stats};
}

Matrix apply_normalization(const NormStats& stats, const Matrix& x) {
    if (x.cols() != stats.mean.size()) throw ShapeError("normalization stats dimension mismatch");
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        out.col(j) = (x.col(j).array() - stats.mean[j]) / stats.scale[j];
    return out;
}

std::pair<MultiviewDataset, MultiviewDataset> split(const MultiviewDataset& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    if (spec.stratified && !ds.labels())
        throw ConfigError("stratified split requires labels");
    const Eigen::Index n = ds.sample_count();
    if (n < 2) throw ConfigError("cannot split fewer than 2 samples");

    auto engine = rng::make_engine(spec.seed);
    std::vector<Eigen::Index> train_idx;
    if (spec.stratified) {
        std::map<int, std::vector<Eigen::Index>> by_label;
        for (Eigen::Index i = 0; i < n; ++i) by_label[(*ds.labels())[static_cast<std::size_t>(i)]].push_back(i);
        for (auto& [label, members] : by_label) {
            rng::shuffle(engine, members);
            const auto k = static_cast<std::size_t>(
                std::llround(spec.train_fraction * static_cast<double>(members.size())));
            train_idx.insert(train_idx.end(), members.begin(),
                             members.begin() + static_cast<std::ptrdiff_t>(std::min(k, members.size())));
        }
    } else {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        rng::shuffle(engine, order);
        const auto k = static_cast<std::size_t>(
            std::llround(spec.train_fraction * static_cast<double>(n)));
        train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                            std::max<std::size_t>(k, 1), static_cast<std::size_t>(n - 1))));
    }
    std::sort(train_idx.begin(), train_idx.end());
    if (train_idx.empty() || static_cast<Eigen::Index>(train_idx.size()) == n)
        throw ConfigError("split left one side empty");

    std::vector<char> in_train(static_cast<std::size_t>(n), 0);
    for (auto i : train_idx) in_train[static_cast<std::size_t>(i)] = 1;
    std::vector<Eigen::Index> query_idx;
    query_idx.reserve(static_cast<std::size_t>(n) - train_idx.size());
    for (Eigen::Index i = 0; i < n; ++i)
        if (!in_train[static_cast<std::size_t>(i)]) query_idx.push_back(i);

    return {ds.select_rows(train_idx), ds.select_rows(query_idx)};
}

MultiviewDataset synth_multiview(Eigen::Index n, Eigen::Index n_clusters,
                                 const std::vector<Eigen::Index>& dims, double noise,
                                 std::uint64_t seed) {
    if (n_clusters < 2 || n < n_clusters) throw ConfigError("need n >= n_clusters >= 2");
    if (dims.empty()) throw ConfigError("need at least one view dimension");
    for (auto d : dims)
        if (d < 2) throw ConfigError("every view dimension must be >= 2");
    if (noise < 0.0) throw ConfigError("noise must be nonnegative");

    // One-hot centers scaled apart; every pair sits at distance 6*sqrt(2).
    // The latent space is as wide as the narrowest view so the shared
    // structure has full rank there; cluster jitter is spread over all of it
    // with a total radius proportional to noise alone.
    constexpr double kSeparation = 6.0;
    const Eigen::Index latent_dim = std::max(n_clusters, *std::min_element(dims.begin(), dims.end()));

    auto engine = rng::make_engine(seed);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % n_clusters);

    const double jitter = noise / std::sqrt(static_cast<double>(latent_dim));
    Matrix latent = noise == 0.0 ? Matrix::Zero(n, latent_dim).eval()
                                 : (jitter * rng::gaussian_matrix(engine, n, latent_dim)).eval();
    for (Eigen::Index i = 0; i < n; ++i)
        latent(i, labels[static_cast<std::size_t>(i)]) += kSeparation;

    std::vector<Matrix> views;
    views.reserve(dims.size());
    const double embed_scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
    for (auto d : dims) {
        const Matrix embedding = embed_scale * rng::gaussian_matrix(engine, latent_dim, d);
        Matrix view = latent * embedding;
        if (noise > 0.0) view += noise * rng::gaussian_matrix(engine, n, d);
        views.push_back(std::move(view));
    }
    return MultiviewDataset(std::move(views), std::move(labels));
}

} // namespace lpmgh
