#include "lpmgh/lpmgh.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <memory>
#include <utility>

#include "lpmgh/error.hpp"
#include "lpmgh/parallel.hpp"

namespace lpmgh {

namespace {

constexpr double kMuFloor = 1e-12;

Matrix sign_with_positive_zero(const Matrix& x) {
    return (x.array() >= 0.0).select(Matrix::Ones(x.rows(), x.cols()),
                                     -Matrix::Ones(x.rows(), x.cols()));
}

std::uint64_t per_view_seed(std::uint64_t seed, Eigen::Index view) {
    // distinct deterministic streams per view
    return seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(view + 1);
}

} // namespace

double objective(const std::vector<Matrix>& views, const std::vector<ScatterMatrix>& scatters,
                 const std::vector<Matrix>& projections, const Vector& mu, const CodeMatrix& codes) {
    const auto m_count = views.size();
    if (scatters.size() != m_count || projections.size() != m_count ||
        static_cast<std::size_t>(mu.size()) != m_count)
        throw ShapeError("objective: per-view argument counts disagree");
    double total = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
        if (mu[static_cast<Eigen::Index>(m)] <= 0.0) throw ValueError("objective: mu must be positive");
        if (views[m].rows() != codes.rows() || projections[m].cols() != codes.cols() ||
            views[m].cols() != projections[m].rows() || scatters[m].rows() != views[m].cols())
            throw ShapeError("objective: shape mismatch in view " + std::to_string(m));
        const Matrix xw = views[m] * projections[m];
        total += -(projections[m].transpose() * scatters[m] * projections[m]).trace() +
                 (codes - xw).squaredNorm() / mu[static_cast<Eigen::Index>(m)];
    }
    if (!std::isfinite(total)) throw NumericError("objective: non-finite value");
    return total;
}

SmoothObjective projection_objective(const Matrix& x, const ScatterMatrix& s, const CodeMatrix& codes,
                                     double mu_m) {
    if (x.rows() != codes.rows() || x.cols() != s.rows() || s.rows() != s.cols())
        throw ShapeError("projection_objective: shape mismatch");
    if (mu_m <= 0.0) throw ValueError("projection_objective: mu must be positive");
    const double inv_mu = 1.0 / mu_m;
    SmoothObjective obj;
    obj.value = [&x, &s, &codes, inv_mu](const Matrix& w) {
        const Matrix xw = x * w;
        return -(w.transpose() * s * w).trace() + inv_mu * (codes - xw).squaredNorm();
    };
    obj.gradient = [&x, &s, &codes, inv_mu](const Matrix& w) {
        const Matrix xw = x * w;
        return Matrix(-2.0 * (s * w) + (2.0 * inv_mu) * (x.transpose() * (xw - codes)));
    };
    obj.value_and_gradient = [&x, &s, &codes, inv_mu](const Matrix& w) {
        const Matrix sw = s * w;
        const Matrix xw = x * w;
        const double f = -(w.array() * sw.array()).sum() + inv_mu * (codes - xw).squaredNorm();
        Matrix g = -2.0 * sw + (2.0 * inv_mu) * (x.transpose() * (xw - codes));
        return std::make_pair(f, std::move(g));
    };
    return obj;
}

SmoothObjective projection_objective_gram(const Matrix& gram, const ScatterMatrix& s,
                                          const Matrix& xtb, double mu_m, Eigen::Index n) {
    if (gram.rows() != gram.cols() || s.rows() != s.cols() || gram.rows() != s.rows() ||
        xtb.rows() != gram.rows() || n < 1)
        throw ShapeError("projection_objective_gram: shape mismatch");
    if (mu_m <= 0.0) throw ValueError("projection_objective_gram: mu must be positive");
    // Expanding the quantization term turns the subproblem into the quadratic
    // tr(W^T H W) - tr(C^T W) + n r / mu with H = -S + (1/mu) X^T X and
    // C = (2/mu) X^T B, so one evaluation costs O(d^2 r) no matter how large
    // n is. Same function, same gradient, just hoisted Gram products.
    auto h = std::make_shared<const Matrix>(-s + (1.0 / mu_m) * gram);
    auto c = std::make_shared<const Matrix>((2.0 / mu_m) * xtb);
    const double constant = static_cast<double>(n) * static_cast<double>(xtb.cols()) / mu_m;
    SmoothObjective obj;
    obj.value = [h, c, constant](const Matrix& w) {
        const Matrix hw = *h * w;
        return (w.array() * hw.array()).sum() - (c->array() * w.array()).sum() + constant;
    };
    obj.gradient = [h, c](const Matrix& w) { return Matrix(2.0 * (*h * w) - *c); };
    obj.value_and_gradient = [h, c, constant](const Matrix& w) {
        const Matrix hw = *h * w;
        const double f =
            (w.array() * hw.array()).sum() - (c->array() * w.array()).sum() + constant;
        Matrix g = 2.0 * hw - *c;
        return std::make_pair(f, std::move(g));
    };
    return obj;
}

std::vector<Matrix> init_projections(const std::vector<ScatterMatrix>& scatters, int bits) {
    std::vector<Matrix> projections;
    projections.reserve(scatters.size());
    for (const auto& s : scatters) {
        if (bits > s.rows())
            throw ConfigError("code length exceeds view dimension " + std::to_string(s.rows()));
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
        if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
        Matrix w(s.rows(), bits);
        // Eigen orders eigenvalues ascending; take the top r, descending.
        for (int j = 0; j < bits; ++j) {
            Vector col = eig.eigenvectors().col(s.rows() - 1 - j);
            Eigen::Index peak = 0;
            for (Eigen::Index i = 1; i < col.size(); ++i)
                if (std::abs(col[i]) > std::abs(col[peak])) peak = i;
            if (col[peak] < 0.0) col = -col;
            w.col(j) = col;
        }
        projections.push_back(std::move(w));
    }
    return projections;
}

CodeMatrix init_codes(Eigen::Index n, int bits) {
    if (n < 1 || bits < 1) throw ConfigError("init_codes: n and r must be positive");
    return CodeMatrix::Ones(n, bits);
}

Matrix update_projection(const Matrix& x, const ScatterMatrix& s, const CodeMatrix& codes,
                         double mu_m, const Matrix& w_current, const StiefelOptions& opts) {
    return minimize(projection_objective(x, s, codes, mu_m), w_current, opts).w;
}

Vector update_mu(const Vector& losses) {
    if (losses.size() < 1) throw ShapeError("update_mu: empty loss vector");
    if ((losses.array() < 0.0).any()) throw ValueError("update_mu: losses must be nonnegative");
    if (!(losses.sum() > 0.0))
        throw DegenerateError("update_mu: all quantization losses are zero");
    const Vector floored = losses.cwiseMax(kMuFloor);
    return floored / floored.sum();
}

CodeMatrix update_codes(const std::vector<Matrix>& views, const std::vector<Matrix>& projections,
                        const Vector& mu) {
    if (views.empty() || views.size() != projections.size() ||
        static_cast<std::size_t>(mu.size()) != views.size())
        throw ShapeError("update_codes: per-view argument counts disagree");
    if ((mu.array() <= 0.0).any()) throw ValueError("update_codes: mu must be positive");
    Matrix total;
    for (std::size_t m = 0; m < views.size(); ++m) {
        if (views[m].cols() != projections[m].rows())
            throw ShapeError("update_codes: projection shape mismatch in view " + std::to_string(m));
        const Matrix scaled = (views[m] * projections[m]) / mu[static_cast<Eigen::Index>(m)];
        if (m == 0)
            total = scaled;
        else if (scaled.rows() != total.rows() || scaled.cols() != total.cols())
            throw ShapeError("update_codes: views disagree on code shape");
        else
            total += scaled;
    }
    return sign_with_positive_zero(total);
}

TrainResult train(const MultiviewDataset& ds, const TrainConfig& cfg) {
    const Eigen::Index n = ds.sample_count();
    const Eigen::Index m_count = ds.view_count();
    if (cfg.bits < 2) throw ConfigError("train: code length must be >= 2");
    if (cfg.max_outer_iters < 1) throw ConfigError("train: max_outer_iters must be >= 1");
    if (cfg.rel_tol <= 0.0) throw ConfigError("train: rel_tol must be positive");
    if (cfg.mu_init <= 0.0) throw ConfigError("train: mu_init must be positive");
    for (Eigen::Index m = 0; m < m_count; ++m)
        if (cfg.bits > ds.view(m).cols())
            throw ConfigError("train: code length exceeds dimension of view " + std::to_string(m));

    Eigen::Index anchor_count = cfg.anchor.anchor_count;
    if (anchor_count == 0) anchor_count = std::max<Eigen::Index>(2, std::min<Eigen::Index>(300, n / 2));
    if (anchor_count > n) throw ConfigError("train: anchor count exceeds sample count");

    // normalization, anchor graphs, and scatters are loop invariants
    std::vector<Matrix> views(static_cast<std::size_t>(m_count));
    std::vector<NormStats> stats(static_cast<std::size_t>(m_count));
    std::vector<AnchorSet> anchors(static_cast<std::size_t>(m_count));
    std::vector<ScatterMatrix> scatters(static_cast<std::size_t>(m_count));
    for (Eigen::Index m = 0; m < m_count; ++m) {
        auto [normalized, st] = normalize_view(ds.view(m));
        views[static_cast<std::size_t>(m)] = std::move(normalized);
        stats[static_cast<std::size_t>(m)] = std::move(st);
        anchors[static_cast<std::size_t>(m)] =
            select_anchors(views[static_cast<std::size_t>(m)], anchor_count,
                           per_view_seed(cfg.seed, m), cfg.anchor.kmeans_iters, static_cast<int>(m));
        const auto factor = build_factor(views[static_cast<std::size_t>(m)],
                                         anchors[static_cast<std::size_t>(m)], cfg.anchor.neighbors,
                                         cfg.anchor.bandwidth);
        scatters[static_cast<std::size_t>(m)] =
            scatter_matrix(views[static_cast<std::size_t>(m)], factor);
    }

    // X^T X per view is a loop invariant of the W subproblems' gram form
    std::vector<Matrix> grams(static_cast<std::size_t>(m_count));
    for (Eigen::Index m = 0; m < m_count; ++m) {
        const auto& x = views[static_cast<std::size_t>(m)];
        grams[static_cast<std::size_t>(m)] = x.transpose() * x;
    }

    std::vector<Matrix> projections = init_projections(scatters, cfg.bits);
    CodeMatrix codes = init_codes(n, cfg.bits);
    Vector mu = Vector::Constant(m_count, cfg.mu_init);

    TrainReport report;
    report.initial_objective = objective(views, scatters, projections, mu, codes);
    double previous = report.initial_objective;

    for (int iter = 0; iter < cfg.max_outer_iters; ++iter) {
        // step 2: per-view orthogonal subproblems, independent given B and mu
        auto solve_view = [&](Eigen::Index m) {
            const auto i = static_cast<std::size_t>(m);
            const Matrix xtb = views[i].transpose() * codes;
            const auto obj = projection_objective_gram(grams[i], scatters[i], xtb, mu[m], n);
            return minimize(obj, projections[i], cfg.stiefel).w;
        };
        const bool concurrent_views = parallel::thread_cap() > 1 && m_count > 1;
        if (concurrent_views) {
            std::vector<std::future<Matrix>> pending;
            pending.reserve(static_cast<std::size_t>(m_count));
            for (Eigen::Index m = 0; m < m_count; ++m)
                pending.push_back(std::async(std::launch::async, solve_view, m));
            for (Eigen::Index m = 0; m < m_count; ++m)
                projections[static_cast<std::size_t>(m)] = pending[static_cast<std::size_t>(m)].get();
        } else {
            for (Eigen::Index m = 0; m < m_count; ++m)
                projections[static_cast<std::size_t>(m)] = solve_view(m);
        }
        // one X W product per view feeds the step objectives, the losses,
        // and the code update for the rest of this iteration
        std::vector<Matrix> xw(static_cast<std::size_t>(m_count));
        Vector locality(m_count), losses(m_count);
        for (Eigen::Index m = 0; m < m_count; ++m) {
            const auto i = static_cast<std::size_t>(m);
            xw[i] = views[i] * projections[i];
            locality[m] =
                -(projections[i].transpose() * scatters[i] * projections[i]).trace();
            losses[m] = (codes - xw[i]).squaredNorm();
        }
        const auto total_objective = [&] {
            double total = 0.0;
            for (Eigen::Index m = 0; m < m_count; ++m) total += locality[m] + losses[m] / mu[m];
            if (!std::isfinite(total)) throw NumericError("train: non-finite objective");
            return total;
        };
        const double after_w = total_objective();
        report.w_step_delta.push_back(after_w - previous);

        // step 3: closed-form view weights from the quantization losses
        bool degenerate = false;
        try {
            mu = update_mu(losses);
        } catch (const DegenerateError&) {
            degenerate = true; // codes already exact; stop cleanly
        }
        const double after_mu = degenerate ? after_w : total_objective();
        report.mu_step_delta.push_back(after_mu - after_w);

        // step 4: closed-form codes
        if (!degenerate) {
            Matrix scores = xw[0] / mu[0];
            for (Eigen::Index m = 1; m < m_count; ++m)
                scores += xw[static_cast<std::size_t>(m)] / mu[m];
            codes = sign_with_positive_zero(scores);
            for (Eigen::Index m = 0; m < m_count; ++m)
                losses[m] = (codes - xw[static_cast<std::size_t>(m)]).squaredNorm();
        }
        const double after_b = degenerate ? after_mu : total_objective();
        report.b_step_delta.push_back(after_b - after_mu);

        report.objective_per_iter.push_back(after_b);
        double ortho = 0.0;
        for (const auto& w : projections) ortho = std::max(ortho, orthogonality_error(w));
        report.orthogonality_error_per_iter.push_back(ortho);
        report.iters_run = iter + 1;

        if (degenerate) {
            report.converged = true;
            break;
        }
        if (std::abs(after_b - previous) <= cfg.rel_tol * std::max(1.0, std::abs(previous))) {
            report.converged = true;
            previous = after_b;
            break;
        }
        previous = after_b;
    }
    report.final_mu = mu;

    HashModel model;
    model.bits = cfg.bits;
    model.projections = std::move(projections);
    model.mu = std::move(mu);
    model.norm_stats = std::move(stats);
    model.anchors = std::move(anchors);
    return TrainResult{std::move(model), std::move(codes), std::move(report)};
}

CodeMatrix encode(const HashModel& model, const std::vector<Matrix>& views) {
    if (static_cast<Eigen::Index>(views.size()) != model.view_count())
        throw MissingViewError("encode: expected " + std::to_string(model.view_count()) +
                               " views, got " + std::to_string(views.size()));
    std::vector<Matrix> normalized(views.size());
    for (std::size_t m = 0; m < views.size(); ++m) {
        if (views[m].cols() != model.projections[m].rows())
            throw ShapeError("encode: view " + std::to_string(m) + " dimension mismatch");
        if (m > 0 && views[m].rows() != views[0].rows())
            throw ShapeError("encode: views disagree on row count");
        normalized[m] = apply_normalization(model.norm_stats[m], views[m]);
    }
    return update_codes(normalized, model.projections, model.mu);
}

} // namespace lpmgh
