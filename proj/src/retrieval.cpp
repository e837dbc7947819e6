#include "lpmgh/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <numeric>

#include "lpmgh/error.hpp"
#include "lpmgh/parallel.hpp"

namespace lpmgh {

PackedCodes pack(const CodeMatrix& codes) {
    if (!((codes.array() == 1.0) || (codes.array() == -1.0)).all())
        throw ValueError("pack: code entries must be exactly +-1");
    PackedCodes out;
    out.n = codes.rows();
    out.bits = static_cast<int>(codes.cols());
    out.words_per_row = (out.bits + 63) / 64;
    out.words.assign(static_cast<std::size_t>(out.n) * static_cast<std::size_t>(out.words_per_row), 0);
    for (Eigen::Index i = 0; i < out.n; ++i) {
        auto* row = out.words.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(out.words_per_row);
        for (int j = 0; j < out.bits; ++j)
            if (codes(i, j) > 0.0) row[j / 64] |= std::uint64_t{1} << (j % 64);
    }
    return out;
}

CodeMatrix unpack(const PackedCodes& packed) {
    CodeMatrix codes(packed.n, packed.bits);
    for (Eigen::Index i = 0; i < packed.n; ++i) {
        const auto row = packed.row(i);
        for (int j = 0; j < packed.bits; ++j)
            codes(i, j) = (row[static_cast<std::size_t>(j / 64)] >> (j % 64)) & 1 ? 1.0 : -1.0;
    }
    return codes;
}

int hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
    if (a.size() != b.size()) throw ShapeError("hamming: word counts differ");
    int dist = 0;
    for (std::size_t w = 0; w < a.size(); ++w) dist += std::popcount(a[w] ^ b[w]);
    return dist;
}

RankedList rank(const PackedCodes& queries, Eigen::Index query_index, const PackedCodes& db) {
    if (queries.bits != db.bits) throw ShapeError("rank: code lengths differ");
    if (query_index < 0 || query_index >= queries.n) throw ShapeError("rank: query index out of range");
    RankedList out;
    out.query = query_index;
    const auto q = queries.row(query_index);
    std::vector<int> dist(static_cast<std::size_t>(db.n));
    for (Eigen::Index i = 0; i < db.n; ++i) dist[static_cast<std::size_t>(i)] = hamming(q, db.row(i));

    out.ids.resize(static_cast<std::size_t>(db.n));
    std::iota(out.ids.begin(), out.ids.end(), Eigen::Index{0});
    std::sort(out.ids.begin(), out.ids.end(), [&dist](Eigen::Index a, Eigen::Index b) {
        const int da = dist[static_cast<std::size_t>(a)];
        const int db_ = dist[static_cast<std::size_t>(b)];
        return da != db_ ? da < db_ : a < b;
    });
    out.distances.reserve(out.ids.size());
    for (auto id : out.ids) out.distances.push_back(dist[static_cast<std::size_t>(id)]);
    return out;
}

double average_precision(const RankedList& ranking, const std::vector<char>& relevant_by_id) {
    double hits = 0.0;
    double precision_sum = 0.0;
    for (std::size_t k = 0; k < ranking.ids.size(); ++k) {
        if (relevant_by_id[static_cast<std::size_t>(ranking.ids[k])]) {
            hits += 1.0;
            precision_sum += hits / static_cast<double>(k + 1);
        }
    }
    return hits > 0.0 ? precision_sum / hits : 0.0;
}

double map_score(const PackedCodes& queries, const PackedCodes& db, const std::vector<int>& labels_q,
                 const std::vector<int>& labels_db) {
    if (static_cast<Eigen::Index>(labels_q.size()) != queries.n ||
        static_cast<Eigen::Index>(labels_db.size()) != db.n)
        throw ShapeError("map_score: label counts do not match code rows");
    std::vector<double> ap(static_cast<std::size_t>(queries.n));
    parallel::parallel_for(queries.n, [&](std::int64_t begin, std::int64_t end) {
        std::vector<char> relevant(static_cast<std::size_t>(db.n));
        for (std::int64_t qi = begin; qi < end; ++qi) {
            for (Eigen::Index i = 0; i < db.n; ++i)
                relevant[static_cast<std::size_t>(i)] =
                    labels_db[static_cast<std::size_t>(i)] == labels_q[static_cast<std::size_t>(qi)];
            ap[static_cast<std::size_t>(qi)] = average_precision(rank(queries, qi, db), relevant);
        }
    });
    // reduce in query order, independent of the thread count
    double total = 0.0;
    for (double v : ap) total += v;
    return queries.n > 0 ? total / static_cast<double>(queries.n) : 0.0;
}

PRCurve pr_curve(const PackedCodes& queries, const PackedCodes& db, const std::vector<int>& labels_q,
                 const std::vector<int>& labels_db) {
    if (static_cast<Eigen::Index>(labels_q.size()) != queries.n ||
        static_cast<Eigen::Index>(labels_db.size()) != db.n)
        throw ShapeError("pr_curve: label counts do not match code rows");
    const auto depth_count = static_cast<std::size_t>(db.n);

    // Fixed-size query chunks with one accumulator each; the chunk layout
    // does not depend on the thread count, and the final reduction runs in
    // chunk order, so the averages come out identical under any threading.
    constexpr std::int64_t kChunk = 64;
    const std::int64_t chunks = (queries.n + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> chunk_precision(static_cast<std::size_t>(chunks));
    std::vector<std::vector<double>> chunk_recall(static_cast<std::size_t>(chunks));
    std::vector<std::int64_t> chunk_counted(static_cast<std::size_t>(chunks), 0);

    parallel::parallel_for(chunks, [&](std::int64_t cbegin, std::int64_t cend) {
        for (std::int64_t c = cbegin; c < cend; ++c) {
            auto& prec = chunk_precision[static_cast<std::size_t>(c)];
            auto& rec = chunk_recall[static_cast<std::size_t>(c)];
            prec.assign(depth_count, 0.0);
            rec.assign(depth_count, 0.0);
            const std::int64_t q_end = std::min<std::int64_t>(queries.n, (c + 1) * kChunk);
            for (std::int64_t qi = c * kChunk; qi < q_end; ++qi) {
                std::int64_t total_relevant = 0;
                for (Eigen::Index i = 0; i < db.n; ++i)
                    total_relevant += labels_db[static_cast<std::size_t>(i)] ==
                                      labels_q[static_cast<std::size_t>(qi)];
                if (total_relevant == 0) continue;
                ++chunk_counted[static_cast<std::size_t>(c)];
                const auto ranking = rank(queries, qi, db);
                std::int64_t hits = 0;
                for (std::size_t k = 0; k < depth_count; ++k) {
                    hits += labels_db[static_cast<std::size_t>(ranking.ids[k])] ==
                            labels_q[static_cast<std::size_t>(qi)];
                    prec[k] += static_cast<double>(hits) / static_cast<double>(k + 1);
                    rec[k] += static_cast<double>(hits) / static_cast<double>(total_relevant);
                }
            }
        }
    });

    std::vector<double> precision_sum(depth_count, 0.0);
    std::vector<double> recall_sum(depth_count, 0.0);
    std::int64_t counted_queries = 0;
    for (std::int64_t c = 0; c < chunks; ++c) {
        counted_queries += chunk_counted[static_cast<std::size_t>(c)];
        for (std::size_t k = 0; k < depth_count; ++k) {
            precision_sum[k] += chunk_precision[static_cast<std::size_t>(c)][k];
            recall_sum[k] += chunk_recall[static_cast<std::size_t>(c)][k];
        }
    }

    PRCurve curve;
    curve.depth.resize(depth_count);
    curve.precision.resize(depth_count);
    curve.recall.resize(depth_count);
    const double denom = counted_queries > 0 ? static_cast<double>(counted_queries) : 1.0;
    for (std::size_t k = 0; k < depth_count; ++k) {
        curve.depth[k] = static_cast<Eigen::Index>(k + 1);
        curve.precision[k] = precision_sum[k] / denom;
        curve.recall[k] = recall_sum[k] / denom;
    }
    return curve;
}

namespace {

void write_csv_double(std::ostream& out, double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw NumericError("to_chars failed");
    out.write(buf, end - buf);
}

} // namespace

void write_pr_csv(const std::filesystem::path& path, const PRCurve& curve, int max_points) {
    if (max_points < 3) throw ConfigError("write_pr_csv: max_points must be >= 3");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "depth,recall,precision\n";

    const std::size_t n = curve.depth.size();
    std::vector<std::size_t> rows;
    if (n <= static_cast<std::size_t>(max_points)) {
        rows.resize(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    } else {
        // first and last depth always kept; interior on a uniform stride
        const std::size_t stride = (n - 1 + static_cast<std::size_t>(max_points) - 2) /
                                   (static_cast<std::size_t>(max_points) - 1);
        rows.push_back(0);
        for (std::size_t k = stride; k < n - 1; k += stride) rows.push_back(k);
        rows.push_back(n - 1);
    }
    for (std::size_t k : rows) {
        out << curve.depth[k] << ',';
        write_csv_double(out, curve.recall[k]);
        out.put(',');
        write_csv_double(out, curve.precision[k]);
        out.put('\n');
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace lpmgh
