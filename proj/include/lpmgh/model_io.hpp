#ifndef LPMGH_MODEL_IO_HPP
#define LPMGH_MODEL_IO_HPP

#include <filesystem>

#include "lpmgh/lpmgh.hpp"
#include "lpmgh/retrieval.hpp"

namespace lpmgh {

// Model file: versioned JSON holding the projections row-major, the learned
// weights, normalization stats, anchor centers, and the training config.
// Doubles are serialized with shortest round-trip precision, so a
// save/load cycle reproduces the model bit for bit.
void save_model(const std::filesystem::path& path, const HashModel& model, const TrainConfig& cfg);
std::pair<HashModel, TrainConfig> load_model(const std::filesystem::path& path);

// Codes file: magic "LPMB", u32 LE version, u64 LE n and r, then ceil(r/8)
// bytes per sample, bit j set iff B(i,j) = +1, LSB-first within each byte.
void save_codes(const std::filesystem::path& path, const PackedCodes& codes);
PackedCodes load_codes(const std::filesystem::path& path);

// "iteration,objective" CSV; row 0 is the objective before the first
// outer iteration.
void write_convergence_csv(const std::filesystem::path& path, const TrainReport& report);

// JSON metrics report: map, n_queries, n_db, r.
void write_metrics(const std::filesystem::path& path, double map, Eigen::Index n_queries,
                   Eigen::Index n_db, int bits);

} // namespace lpmgh

#endif
