// lpmgh command-line front end: synth | train | encode | eval.
//
// Exit codes: 0 success, 1 usage/config error, 2 data or file-format error,
// 3 numeric failure. Every run is fully determined by flags + seed.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpmgh/dataset.hpp"
#include "lpmgh/error.hpp"
#include "lpmgh/lpmgh.hpp"
#include "lpmgh/model_io.hpp"
#include "lpmgh/parallel.hpp"
#include "lpmgh/retrieval.hpp"
#include "lpmgh/rng.hpp"

namespace fs = std::filesystem;
using namespace lpmgh;

namespace {

std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

void ensure_parent(const fs::path& p) {
    const fs::path dir = p.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
}

void require_input(const fs::path& p) {
    if (!fs::exists(p)) throw IoError("input file does not exist: " + p.string());
}

// `--model out/model` names a family of artifacts by prefix; a trailing
// ".json" on the flag is tolerated and stripped.
struct ModelPaths {
    fs::path model;
    fs::path codes;
    fs::path convergence;
    fs::path labels;
    fs::path metrics;
};

ModelPaths model_paths(const std::string& arg) {
    fs::path prefix(arg);
    if (prefix.extension() == ".json") prefix.replace_extension();
    ModelPaths p;
    p.model = fs::path(prefix.string() + ".json");
    p.codes = fs::path(prefix.string() + ".codes");
    p.convergence = fs::path(prefix.string() + ".convergence.csv");
    p.labels = fs::path(prefix.string() + ".labels.txt");
    p.metrics = fs::path(prefix.string() + ".metrics.json");
    return p;
}

// Config file support: `--config file.json` holds a flat object whose keys
// are long option names of the invoked subcommand. Command-line flags win;
// config values are appended as synthetic arguments for everything not
// already present, so CLI11 still validates names and types.
bool flag_present(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

std::vector<std::string> apply_config_file(std::vector<std::string> args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;
    require_input(config_path);

    std::ifstream in(config_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(config_path + ": expected a JSON object");

    for (const auto& [key, value] : doc.items()) {
        const std::string flag = "--" + key;
        if (flag_present(args, flag)) continue;
        if (value.is_boolean()) {
            args.push_back(flag + "=" + (value.get<bool>() ? "true" : "false"));
        } else if (value.is_string()) {
            args.push_back(flag);
            args.push_back(value.get<std::string>());
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& item : value) {
                if (!joined.empty()) joined += ',';
                joined += item.is_string() ? item.get<std::string>() : item.dump();
            }
            args.push_back(flag);
            args.push_back(joined);
        } else if (value.is_number() ) {
            args.push_back(flag);
            args.push_back(value.dump());
        } else {
            throw ConfigError(config_path + ": unsupported value for key '" + key + "'");
        }
    }
    return args;
}

PackedCodes select_rows(const PackedCodes& codes, const std::vector<Eigen::Index>& rows) {
    PackedCodes out;
    out.n = static_cast<Eigen::Index>(rows.size());
    out.bits = codes.bits;
    out.words_per_row = codes.words_per_row;
    out.words.reserve(rows.size() * static_cast<std::size_t>(codes.words_per_row));
    for (const Eigen::Index r : rows) {
        const auto row = codes.row(r);
        out.words.insert(out.words.end(), row.begin(), row.end());
    }
    return out;
}

struct SynthArgs {
    Eigen::Index n = 300;
    Eigen::Index clusters = 3;
    std::vector<Eigen::Index> dims;
    double noise = 0.3;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "lpmv";
};

int run_synth(const SynthArgs& a) {
    if (a.format != "lpmv" && a.format != "csv")
        throw ConfigError("--format must be lpmv or csv");
    const FeatureFormat format = a.format == "csv" ? FeatureFormat::csv : FeatureFormat::lpmv;
    const auto ds = synth_multiview(a.n, a.clusters, a.dims, a.noise, a.seed);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    for (Eigen::Index m = 0; m < ds.view_count(); ++m) {
        const fs::path p = dir / ("view" + std::to_string(m) + "." + a.format);
        write_features(p, ds.view(m), format);
        std::cout << "wrote " << p.string() << " (" << ds.view(m).rows() << " x "
                  << ds.view(m).cols() << ")\n";
    }
    const fs::path lp = dir / "labels.txt";
    write_labels(lp, *ds.labels());
    std::cout << "wrote " << lp.string() << '\n';
    return 0;
}

struct TrainArgs {
    std::vector<std::string> views;
    std::string labels;
    std::string model;
    TrainConfig cfg;
    double bandwidth = 0.0;
    bool has_bandwidth = false;
};

int run_train(TrainArgs& a) {
    std::vector<Matrix> views;
    views.reserve(a.views.size());
    for (const auto& vp : a.views) {
        require_input(vp);
        views.push_back(load_features(vp, format_from_path(vp)));
    }
    std::optional<std::vector<int>> labels;
    if (!a.labels.empty()) {
        require_input(a.labels);
        labels = load_labels(a.labels);
    }
    const MultiviewDataset ds(std::move(views), labels);

    if (a.has_bandwidth) a.cfg.anchor.bandwidth = a.bandwidth;
    const TrainResult result = train(ds, a.cfg);

    const ModelPaths paths = model_paths(a.model);
    ensure_parent(paths.model);
    save_model(paths.model, result.model, a.cfg);
    save_codes(paths.codes, pack(result.codes));
    write_convergence_csv(paths.convergence, result.report);
    if (labels) write_labels(paths.labels, *labels);

    std::cout << "trained " << ds.view_count() << " views, " << ds.sample_count() << " samples, "
              << a.cfg.bits << " bits\n"
              << "iterations " << result.report.iters_run
              << (result.report.converged ? " (converged)" : " (iteration cap)") << '\n'
              << "objective " << fmt(result.report.initial_objective) << " -> "
              << fmt(result.report.objective_per_iter.back()) << '\n'
              << "wrote " << paths.model.string() << ", " << paths.codes.string() << ", "
              << paths.convergence.string() << '\n';
    return 0;
}

struct EncodeArgs {
    std::string model;
    std::vector<std::string> views;
    std::string out;
};

int run_encode(const EncodeArgs& a) {
    const ModelPaths paths = model_paths(a.model);
    require_input(paths.model);
    const auto [model, cfg] = load_model(paths.model);

    std::vector<Matrix> views;
    views.reserve(a.views.size());
    for (const auto& vp : a.views) {
        require_input(vp);
        views.push_back(load_features(vp, format_from_path(vp)));
    }
    const CodeMatrix codes = encode(model, views);
    ensure_parent(a.out);
    save_codes(a.out, pack(codes));
    std::cout << "wrote " << a.out << " (" << codes.rows() << " x " << model.bits << " bits)\n";
    return 0;
}

struct EvalArgs {
    std::string model;
    std::string codes;
    std::string labels;
    std::string pr;
    std::string metrics;
    double query_frac = 0.2;
    std::uint64_t seed = 0;
    int pr_points = 200;
};

int run_eval(const EvalArgs& a) {
    if (!(a.query_frac > 0.0 && a.query_frac < 1.0))
        throw ConfigError("--query-frac must be in (0, 1)");
    const ModelPaths paths = model_paths(a.model);
    require_input(paths.model);
    const auto [model, cfg] = load_model(paths.model);

    const fs::path codes_path = a.codes.empty() ? paths.codes : fs::path(a.codes);
    const fs::path labels_path = a.labels.empty() ? paths.labels : fs::path(a.labels);
    require_input(codes_path);
    require_input(labels_path);
    const PackedCodes codes = load_codes(codes_path);
    const std::vector<int> labels = load_labels(labels_path);
    if (static_cast<Eigen::Index>(labels.size()) != codes.n)
        throw ShapeError("label count does not match code count");
    if (codes.bits != model.bits) throw ShapeError("code length does not match model");
    if (codes.n < 2) throw ConfigError("need at least two samples to split");

    // Deterministic query/database split over the stored codes.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(codes.n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto engine = rng::make_engine(a.seed);
    rng::shuffle(engine, order);
    auto n_query = static_cast<Eigen::Index>(std::llround(a.query_frac * static_cast<double>(codes.n)));
    n_query = std::clamp<Eigen::Index>(n_query, 1, codes.n - 1);
    std::vector<Eigen::Index> q_rows(order.begin(), order.begin() + n_query);
    std::vector<Eigen::Index> db_rows(order.begin() + n_query, order.end());
    std::sort(q_rows.begin(), q_rows.end());
    std::sort(db_rows.begin(), db_rows.end());

    const PackedCodes queries = select_rows(codes, q_rows);
    const PackedCodes db = select_rows(codes, db_rows);
    std::vector<int> labels_q, labels_db;
    for (const auto r : q_rows) labels_q.push_back(labels[static_cast<std::size_t>(r)]);
    for (const auto r : db_rows) labels_db.push_back(labels[static_cast<std::size_t>(r)]);

    const double map = map_score(queries, db, labels_q, labels_db);
    std::cout << "MAP " << fmt(map) << " (" << queries.n << " queries, " << db.n
              << " database items, " << codes.bits << " bits)\n";

    const fs::path metrics_path = a.metrics.empty() ? paths.metrics : fs::path(a.metrics);
    ensure_parent(metrics_path);
    write_metrics(metrics_path, map, queries.n, db.n, codes.bits);
    if (!a.pr.empty()) {
        const PRCurve curve = pr_curve(queries, db, labels_q, labels_db);
        ensure_parent(a.pr);
        write_pr_csv(a.pr, curve, a.pr_points);
        std::cout << "wrote " << a.pr << '\n';
    }
    return 0;
}

int dispatch(std::vector<std::string> args) {
    args = apply_config_file(std::move(args));

    CLI::App app{"locality preserving multiview graph hashing"};
    app.require_subcommand(1);
    int threads = 0;

    SynthArgs synth;
    CLI::App* s = app.add_subcommand("synth", "generate a clustered multiview dataset");
    s->add_option("--n", synth.n, "sample count")->required();
    s->add_option("--clusters", synth.clusters, "cluster count")->required();
    s->add_option("--dims", synth.dims, "per-view feature dimensions")->required()->delimiter(',');
    s->add_option("--noise", synth.noise, "noise scale")->capture_default_str();
    s->add_option("--seed", synth.seed, "rng seed")->capture_default_str();
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--format", synth.format, "feature file format: lpmv|csv")->capture_default_str();

    TrainArgs tr;
    CLI::App* t = app.add_subcommand("train", "learn hash model and codes");
    t->add_option("--views", tr.views, "per-view feature files")->required()->delimiter(',');
    t->add_option("--labels", tr.labels, "label file (kept beside the model for eval)");
    t->add_option("--model", tr.model, "output model prefix")->required();
    t->add_option("--bits", tr.cfg.bits, "code length r")->capture_default_str();
    t->add_option("--max-iters", tr.cfg.max_outer_iters, "outer iteration cap")->capture_default_str();
    t->add_option("--rel-tol", tr.cfg.rel_tol, "relative objective tolerance")->capture_default_str();
    t->add_option("--mu-init", tr.cfg.mu_init, "initial view weight")->capture_default_str();
    t->add_option("--seed", tr.cfg.seed, "rng seed")->capture_default_str();
    t->add_option("--anchors", tr.cfg.anchor.anchor_count, "anchor count P (0 = auto)")
        ->capture_default_str();
    t->add_option("--neighbors", tr.cfg.anchor.neighbors, "nearest anchors s per sample")
        ->capture_default_str();
    auto* bw = t->add_option("--bandwidth", tr.bandwidth, "kernel bandwidth (default: auto)");
    t->add_option("--kmeans-iters", tr.cfg.anchor.kmeans_iters, "anchor k-means iterations")
        ->capture_default_str();
    t->add_option("--stiefel-iters", tr.cfg.stiefel.max_iters, "inner solver iteration cap")
        ->capture_default_str();

    EncodeArgs en;
    CLI::App* e = app.add_subcommand("encode", "binary-encode feature files with a trained model");
    e->add_option("--model", en.model, "model prefix or .json path")->required();
    e->add_option("--views", en.views, "per-view feature files")->required()->delimiter(',');
    e->add_option("--out", en.out, "output codes file")->required();

    EvalArgs ev;
    CLI::App* v = app.add_subcommand("eval", "retrieval metrics over a query/database split");
    v->add_option("--model", ev.model, "model prefix or .json path")->required();
    v->add_option("--codes", ev.codes, "codes file (default: <model>.codes)");
    v->add_option("--labels", ev.labels, "label file (default: <model>.labels.txt)");
    v->add_option("--query-frac", ev.query_frac, "fraction of samples used as queries")
        ->capture_default_str();
    v->add_option("--seed", ev.seed, "split seed")->capture_default_str();
    v->add_option("--pr", ev.pr, "precision/recall CSV output path");
    v->add_option("--metrics", ev.metrics, "metrics JSON path (default: <model>.metrics.json)");
    v->add_option("--pr-points", ev.pr_points, "PR CSV row cap")->capture_default_str();

    std::string config_path;
    for (CLI::App* sub : {s, t, e, v}) {
        sub->add_option("--config", config_path, "JSON config file (flags take precedence)");
        sub->add_option("--threads", threads, "worker thread cap (default: LPMGH_THREADS or hardware)");
    }

    std::vector<const char*> argv;
    argv.push_back("lpmgh");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : 1;
    }

    if (threads > 0) parallel::set_thread_cap(threads);
    if (s->parsed()) return run_synth(synth);
    if (t->parsed()) {
        tr.has_bandwidth = bw->count() > 0;
        return run_train(tr);
    }
    if (e->parsed()) return run_encode(en);
    return run_eval(ev);
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return dispatch(std::move(args));
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const NumericError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    } catch (const DegenerateError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    }
}
