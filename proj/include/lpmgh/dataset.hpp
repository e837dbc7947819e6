#ifndef LPMGH_DATASET_HPP
#define LPMGH_DATASET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lpmgh {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class FeatureFormat { csv, lpmv };

// Per-column centering/scaling statistics, sufficient to apply the same
// affine transform to unseen data.
struct NormStats {
    Vector mean;
    Vector scale; // strictly positive; zero-variance columns get 1
};

struct SplitSpec {
    double train_fraction = 0.8; // in (0, 1)
    std::uint64_t seed = 0;
    bool stratified = false;
};

// M feature views over the same samples, optionally labeled. Immutable
// after construction; the constructor enforces the shared row count.
class MultiviewDataset {
public:
    MultiviewDataset(std::vector<Matrix> views,
                     std::optional<std::vector<int>> labels = std::nullopt,
                     std::vector<std::int64_t> ids = {});

    Eigen::Index sample_count() const { return views_.empty() ? 0 : views_[0].rows(); }
    Eigen::Index view_count() const { return static_cast<Eigen::Index>(views_.size()); }

    const std::vector<Matrix>& views() const { return views_; }
    const Matrix& view(Eigen::Index m) const { return views_.at(static_cast<std::size_t>(m)); }
    const std::optional<std::vector<int>>& labels() const { return labels_; }
    const std::vector<std::int64_t>& ids() const { return ids_; }

    // Row subset in the order given by `rows`; labels and ids follow.
    MultiviewDataset select_rows(const std::vector<Eigen::Index>& rows) const;

private:
    std::vector<Matrix> views_;
    std::optional<std::vector<int>> labels_;
    std::vector<std::int64_t> ids_;
};

Matrix load_features(const std::filesystem::path& path, FeatureFormat format);
void write_features(const std::filesystem::path& path, const Matrix& x, FeatureFormat format);
FeatureFormat format_from_path(const std::filesystem::path& path);

std::vector<int> load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

// Column z-scoring with population standard deviation. The returned matrix
// is bit-identical to apply_normalization(stats, x).
std::pair<Matrix, NormStats> normalize_view(const Matrix& x);
Matrix apply_normalization(const NormStats& stats, const Matrix& x);

std::pair<MultiviewDataset, MultiviewDataset> split(const MultiviewDataset& ds, const SplitSpec& spec);

// Clustered multiview sample: latent points sit around one-hot cluster
// centers jittered by `noise`, and every view is a random linear embedding
// of the shared latent matrix plus independent isotropic noise of the same
// scale. Labels are the cluster ids.
MultiviewDataset synth_multiview(Eigen::Index n, Eigen::Index n_clusters,
                                 const std::vector<Eigen::Index>& dims, double noise,
                                 std::uint64_t seed);

} // namespace lpmgh

#endif
