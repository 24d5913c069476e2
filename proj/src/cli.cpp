#include "scmfuse/cli.hpp"

#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "scmfuse/io.hpp"

namespace scmfuse {

namespace fs = std::filesystem;

namespace {

/// Failure that carries its exit code.
struct CliFailure : std::runtime_error {
    CliFailure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

const char* kind_of(int code) {
    switch (code) {
        case exit_usage: return "usage";
        case exit_incompatible: return "incompatible";
        case exit_io: return "io";
        case exit_validation: return "validation";
        default: return "internal";
    }
}

void report_error(std::ostream& err, int code, const std::string& message) {
    err << json{{"error", {{"code", code}, {"kind", kind_of(code)}, {"message", message}}}}.dump() << "\n";
}

struct EmOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> restarts;
    std::optional<double> tol;
    std::optional<double> compat_tol;
    std::optional<int> max_iter;
    std::optional<int> threads;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--restarts", restarts, "EM restarts");
        cmd->add_option("--tol", tol, "Relative EM convergence tolerance");
        cmd->add_option("--compat-tol", compat_tol, "Absolute compatibility tolerance (log-likelihood units)");
        cmd->add_option("--max-iter", max_iter, "EM iteration cap per run");
        cmd->add_option("--threads", threads, "Worker threads for EM restarts");
    }

    EmConfig apply(EmConfig cfg) const {
        if (seed) cfg.seed = *seed;
        if (restarts) cfg.restarts = *restarts;
        if (tol) cfg.tol = *tol;
        if (compat_tol) cfg.compat_tol = *compat_tol;
        if (max_iter) cfg.max_iter = *max_iter;
        if (threads) cfg.threads = *threads;
        cfg.validate();
        return cfg;
    }
};

struct Loaded {
    RunManifest manifest;
    Pscm model;
    std::vector<Study> studies;
    EmConfig config;
};

Loaded load_inputs(const std::string& manifest_path, const EmOverrides& overrides) {
    Loaded in;
    in.manifest = load_manifest(manifest_path);
    in.model = load_model(in.manifest.model);
    in.studies = load_studies(in.manifest, in.model);
    in.config = overrides.apply(in.manifest.config);
    return in;
}

/// --out wins over the manifest; an empty result means stdout.
fs::path output_dir(const std::string& flag, const RunManifest& m) {
    if (!flag.empty()) return flag;
    return m.output;
}

void emit(const fs::path& dir, const std::string& file, const std::string& text, std::ostream& out) {
    if (dir.empty()) {
        out << text;
    } else {
        write_file_atomic(dir / file, text);
    }
}

FitReport run_fit(const Loaded& in) {
    FitReport fit;
    fit.config = in.config;
    fit.hash = input_hash(in.model, in.studies, in.config);
    for (const auto& s : in.studies) {
        fit.study_names.push_back(s.name);
        fit.study_records.push_back(s.data.total());
    }
    fit.result = emcc(in.model, in.studies, in.config);
    return fit;
}

std::string incompatibility_message(const CompatibilityVerdict& v) {
    return "studies are not compatible with the model: log-likelihood gap " + std::to_string(v.gap) +
           " exceeds tolerance " + std::to_string(v.tolerance) + "; inference is not tenable";
}

int cmd_fit(const std::string& manifest, const EmOverrides& ov, const std::string& out_flag, bool verdict_only,
            std::ostream& out, std::ostream& err) {
    const Loaded in = load_inputs(manifest, ov);
    const FitReport fit = run_fit(in);
    json j = fit_to_json(fit, in.model, in.studies);
    if (verdict_only) {
        j = {{"format", "scmfuse-check/1"},
             {"hash", j["hash"]},
             {"seed", j["seed"]},
             {"studies", j["studies"]},
             {"verdict", j["verdict"]},
             {"retained", j["retained"]}};
    }
    emit(output_dir(out_flag, in.manifest), verdict_only ? "verdict.json" : "fit.json", dump(j), out);
    if (fit.result.params.size() == 0) {
        report_error(err, exit_incompatible, incompatibility_message(fit.result.verdict));
        return exit_incompatible;
    }
    return exit_ok;
}

int cmd_query(const std::string& manifest, const EmOverrides& ov, const std::string& out_flag,
              const std::string& fit_path, const std::vector<std::string>& query_files, bool paper_rounding,
              std::ostream& out) {
    const Loaded in = load_inputs(manifest, ov);
    FitReport fit;
    if (fit_path.empty()) {
        fit = run_fit(in);
    } else {
        fit = fit_from_json(json::parse(read_file(fit_path)), in.model);
        if (fit.hash != input_hash(in.model, in.studies, in.config)) {
            throw ModelError("fit result '" + fit_path + "' was produced from different inputs");
        }
    }
    if (fit.result.params.size() == 0) throw CliFailure(exit_incompatible, incompatibility_message(fit.result.verdict));

    std::vector<json> query_json = in.manifest.queries;
    for (const auto& f : query_files) query_json.push_back(json::parse(read_file(f)));
    if (query_json.empty()) throw ModelError("no queries given");

    json results = json::array();
    for (const auto& qj : query_json) {
        const Query q = query_from_json(qj, in.model);
        results.push_back(query_result_to_json(bounds(in.model, fit.result.params, q), q, in.model, paper_rounding));
    }
    const json j{{"format", "scmfuse-query/1"},
                 {"hash", fit.hash},
                 {"seed", fit.config.seed},
                 {"paper_rounding", paper_rounding},
                 {"retained", fit.result.params.size()},
                 {"results", std::move(results)}};
    emit(output_dir(out_flag, in.manifest), "results.json", dump(j), out);
    return exit_ok;
}

int cmd_bench(const std::string& config_path, const std::string& out_flag, const std::optional<std::uint64_t>& seed,
              const std::optional<int>& n_models, const std::optional<int>& threads, bool progress,
              std::ostream& err) {
    BenchConfig cfg = config_path.empty() ? BenchConfig{} : bench_config_from_json(json::parse(read_file(config_path)));
    if (seed) cfg.seed = *seed;
    if (n_models) cfg.n_models = *n_models;
    if (threads) cfg.em.threads = *threads;
    cfg.validate();
    cfg.em.validate();

    const auto records = run_benchmark(cfg, [&](const BenchRecord& r) {
        if (!progress) return;
        err << json{{"progress", {{"model", r.model_index}, {"emitted", r.emitted}, {"skip_reason", r.skip_reason}}}}.dump()
            << "\n";
    });
    std::string lines;
    for (const auto& r : records) lines += bench_record_to_json(r).dump() + "\n";
    const BenchSummary summary = summarize(records);
    const fs::path dir = out_flag.empty() ? fs::path(".") : fs::path(out_flag);
    write_file_atomic(dir / "bench.jsonl", lines);
    write_file_atomic(dir / "bench_summary.json", dump(bench_summary_to_json(summary, cfg)));
    write_file_atomic(dir / "shrink_boxplot.csv", shrink_boxplot_csv(summary));
    return exit_ok;
}

int cmd_oracle(const std::string& manifest, const std::string& out_flag, double step, std::optional<double> epsilon,
               std::size_t max_points, std::ostream& out) {
    const Loaded in = load_inputs(manifest, EmOverrides{});
    json results = json::array();
    for (const auto& qj : in.manifest.queries) {
        const Query q = query_from_json(qj, in.model);
        const auto* pq = std::get_if<PnsQuery>(&q.body);
        if (!pq) throw ModelError("the grid oracle supports PNS queries only");
        json r = oracle_to_json(grid_oracle(in.model, in.studies, step, *pq, epsilon, max_points), step);
        r["name"] = q.name;
        results.push_back(std::move(r));
    }
    if (results.empty()) throw ModelError("no queries given");
    emit(output_dir(out_flag, in.manifest), "oracle.json", dump(json{{"results", results}}), out);
    return exit_ok;
}

int cmd_canonical(const std::string& spec, const std::string& out_file, std::ostream& out) {
    const Pscm model = canonical_from_json(json::parse(read_file(spec)));
    const std::string text = dump(model_to_json(model));
    if (out_file.empty()) {
        out << text;
    } else {
        write_file_atomic(out_file, text);
    }
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-study causal EM: compatibility checks and counterfactual bounds"};
    app.require_subcommand(1);

    std::string manifest;
    std::string out_dir;
    EmOverrides ov;

    auto* fit = app.add_subcommand("fit", "Run EMCC and write fit.json");
    fit->add_option("manifest", manifest, "Run manifest")->required();
    fit->add_option("--out", out_dir, "Output directory (default: manifest 'output', else stdout)");
    ov.add_to(fit);

    auto* check = app.add_subcommand("check", "Run EMCC and write the compatibility verdict only");
    check->add_option("manifest", manifest, "Run manifest")->required();
    check->add_option("--out", out_dir, "Output directory");
    ov.add_to(check);

    std::string fit_path;
    std::vector<std::string> query_files;
    bool paper_rounding = false;
    auto* query = app.add_subcommand("query", "Bound the manifest queries and write results.json");
    query->add_option("manifest", manifest, "Run manifest")->required();
    query->add_option("--fit", fit_path, "Reuse a fit.json instead of fitting again");
    query->add_option("--query", query_files, "Extra query file (repeatable)");
    query->add_flag("--paper-rounding", paper_rounding, "Round bounds to two decimals");
    query->add_option("--out", out_dir, "Output directory");
    ov.add_to(query);

    std::string bench_config;
    std::optional<std::uint64_t> bench_seed;
    std::optional<int> n_models;
    std::optional<int> bench_threads;
    bool progress = false;
    auto* bench = app.add_subcommand("bench", "Random-model benchmark");
    bench->add_option("config", bench_config, "Benchmark config JSON (defaults when omitted)");
    bench->add_option("--out", out_dir, "Output directory (default: current directory)");
    bench->add_option("--seed", bench_seed, "Master seed");
    bench->add_option("--n-models", n_models, "Number of models");
    bench->add_option("--threads", bench_threads, "Worker threads for EM restarts");
    bench->add_flag("--progress", progress, "Print one progress line per model to stderr");

    double step = 0.02;
    std::optional<double> epsilon;
    std::size_t max_points = 10'000'000;
    auto* oracle = app.add_subcommand("oracle", "Grid oracle for the PNS queries of a tiny model");
    oracle->add_option("manifest", manifest, "Run manifest")->required();
    oracle->add_option("--step", step, "Grid step");
    oracle->add_option("--epsilon", epsilon, "L-infinity tolerance on the study joints");
    oracle->add_option("--max-points", max_points, "Refuse grids larger than this");
    oracle->add_option("--out", out_dir, "Output directory");

    std::string spec;
    std::string model_out;
    auto* canonical = app.add_subcommand("canonical", "Build a canonical model from a graph spec");
    canonical->add_option("spec", spec, "Canonical spec JSON")->required();
    canonical->add_option("--out", model_out, "Output model file (default: stdout)");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        report_error(err, exit_usage, e.what());
        return exit_usage;
    }

    try {
        if (*fit) return cmd_fit(manifest, ov, out_dir, false, out, err);
        if (*check) return cmd_fit(manifest, ov, out_dir, true, out, err);
        if (*query) return cmd_query(manifest, ov, out_dir, fit_path, query_files, paper_rounding, out);
        if (*bench) return cmd_bench(bench_config, out_dir, bench_seed, n_models, bench_threads, progress, err);
        if (*oracle) return cmd_oracle(manifest, out_dir, step, epsilon, max_points, out);
        if (*canonical) return cmd_canonical(spec, model_out, out);
        report_error(err, exit_usage, "no command given");
        return exit_usage;
    } catch (const CliFailure& e) {
        report_error(err, e.code, e.what());
        return e.code;
    } catch (const IoError& e) {
        report_error(err, exit_io, e.what());
        return exit_io;
    } catch (const ModelError& e) {
        report_error(err, exit_validation, e.what());
        return exit_validation;
    } catch (const json::exception& e) {
        report_error(err, exit_validation, e.what());
        return exit_validation;
    } catch (const std::exception& e) {
        report_error(err, exit_internal, e.what());
        return exit_internal;
    }
}

}  // namespace scmfuse
