#ifndef LPMGH_RETRIEVAL_HPP
#define LPMGH_RETRIEVAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lpmgh/lpmgh.hpp"

namespace lpmgh {

// Bit-packed codes, one ceil(r/64)-word block per sample. Bit j of a row is
// set iff B(i, j) = +1; padding bits stay zero so word-level popcount
// distances are exact.
struct PackedCodes {
    Eigen::Index n = 0;
    int bits = 0;
    int words_per_row = 0;
    std::vector<std::uint64_t> words;

    std::span<const std::uint64_t> row(Eigen::Index i) const {
        return {words.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(words_per_row),
                static_cast<std::size_t>(words_per_row)};
    }
};

PackedCodes pack(const CodeMatrix& codes);
CodeMatrix unpack(const PackedCodes& packed);

// Number of differing code bits.
int hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

// Database ids by ascending Hamming distance from one query row; equal
// distances break toward the lower id.
struct RankedList {
    Eigen::Index query = 0;
    std::vector<Eigen::Index> ids;
    std::vector<int> distances;
};

RankedList rank(const PackedCodes& queries, Eigen::Index query_index, const PackedCodes& db);

// Mean of precision at the rank of each relevant item; 0 when nothing is
// relevant.
double average_precision(const RankedList& ranking, const std::vector<char>& relevant_by_id);

// Mean average precision with relevance = label equality.
double map_score(const PackedCodes& queries, const PackedCodes& db, const std::vector<int>& labels_q,
                 const std::vector<int>& labels_db);

// Precision/recall averaged over queries at every list depth 1..n_db.
// Queries without a single relevant item are excluded from the averages.
struct PRCurve {
    std::vector<Eigen::Index> depth;
    std::vector<double> recall;
    std::vector<double> precision;
};

PRCurve pr_curve(const PackedCodes& queries, const PackedCodes& db, const std::vector<int>& labels_q,
                 const std::vector<int>& labels_db);

// "depth,recall,precision" CSV, downsampled to at most max_points rows with
// the final depth always kept.
void write_pr_csv(const std::filesystem::path& path, const PRCurve& curve, int max_points = 200);

} // namespace lpmgh

#endif
