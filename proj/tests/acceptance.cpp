// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here and not configurable.
//
//   acceptance [--skip-bench] [--work DIR]
//
// --skip-bench leaves out the 130-model benchmark (criterion 9 and its half of
// criterion 10) and reports them as SKIP.
#include <chrono>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "scmfuse/cli.hpp"
#include "scmfuse/io.hpp"
#include "support.hpp"

using namespace scmfuse;
using namespace scmfuse::testing;
namespace fs = std::filesystem;

namespace {

constexpr double monotone_slack = 1e-9;
constexpr double sharp_width = 0.005;
constexpr double conflict_rel_tol = 0.01;
constexpr double oracle_step = 0.02;
constexpr double identifiable_max_width = 1e-3;
constexpr double inclusion_slack = 0.02;
constexpr double inclusion_rate_min = 0.95;
constexpr int fuzz_triples = 500;
constexpr int fuzz_thetas = 100;
constexpr int oracle_models_min = 20;
constexpr int bench_models = 130;
constexpr double runtime_limit_s = 300.0;

const fs::path data_root = fs::path(SCMFUSE_SOURCE_DIR) / "data";

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
}

std::string interval(double lo, double hi, int digits = 4) { return "[" + fmt(lo, digits) + ", " + fmt(hi, digits) + "]"; }

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "scmfuse");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0 && code != exit_incompatible) std::cerr << err.str();
    return code;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Fit and bound every query of a bundled manifest through the CLI; returns
/// the results document.
json run_manifest(const std::string& name, const fs::path& out, double* elapsed = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli({"query", (data_root / "table1" / (name + ".json")).string(), "--paper-rounding", "--out",
                          out.string()});
    if (elapsed) *elapsed = seconds_since(t0);
    if (code != exit_ok) throw std::runtime_error(name + ": query exited with code " + std::to_string(code));
    return json::parse(read_file(out / "results.json"));
}

const json& result_named(const json& doc, const std::string& name) {
    for (const auto& r : doc["results"]) {
        if (r["name"] == name) return r;
    }
    throw std::runtime_error("no result named " + name);
}

bool rounded_is(const json& r, double lo, double hi) { return r["lower"] == lo && r["upper"] == hi; }

std::string describe(const json& r) {
    return r["name"].get<std::string>() + " " + interval(r["lower"], r["upper"], 2) + " exact " +
           interval(r["lower_exact"], r["upper_exact"]);
}

Outcome table1_unconditional(const std::string& manifest, double lo, double hi, const fs::path& work) {
    double elapsed = 0.0;
    const json doc = run_manifest(manifest, work / manifest, &elapsed);
    const json& r = result_named(doc, "pns");
    Outcome o;
    o.pass = rounded_is(r, lo, hi) && elapsed < runtime_limit_s;
    o.detail = describe(r) + ", expected " + interval(lo, hi, 2) + ", " + fmt(elapsed, 1) + " s";
    return o;
}

Outcome criterion3(const fs::path& work) {
    const json oi = run_manifest("fig1_oi", work / "fig1_oi");
    const json o = run_manifest("fig1_o", work / "fig1_o");
    const json& f = result_named(oi, "pns_female");
    const json& m = result_named(oi, "pns_male");
    const json& fo = result_named(o, "pns_female");
    const json& mo = result_named(o, "pns_male");
    Outcome out;
    out.pass = rounded_is(f, 0.28, 0.28) && rounded_is(m, 0.49, 0.49) && f["width"].get<double>() < sharp_width &&
               m["width"].get<double>() < sharp_width && rounded_is(fo, 0.0, 0.28) && rounded_is(mo, 0.0, 0.58);
    const json& u = result_named(oi, "pns");
    out.detail = "O+I " + describe(f) + " width " + fmt(f["width"], 5) + "; " + describe(m) + " width " +
                 fmt(m["width"], 5) + "; O " + describe(fo) + "; " + describe(mo) +
                 "; (info: Fig. 1 unconditional O+I " + interval(u["lower"], u["upper"], 2) + ")";
    return out;
}

Outcome criterion5(const fs::path& work) {
    const fs::path dir = work / "compat";
    const int ok_code = cli({"check", (data_root / "table1" / "fig1_oi.json").string(), "--out", (dir / "t1").string()});
    const json t1 = json::parse(read_file(dir / "t1" / "verdict.json"));
    const int bad_code = cli({"check", (data_root / "conflict" / "manifest.json").string(), "--out", (dir / "cf").string()});
    const json cf = json::parse(read_file(dir / "cf" / "verdict.json"));

    // Two clone studies of 1000 records, 90/10 against 10/90: the pooled
    // maximum is the 50/50 fit, so the deficit is 2N KL(0.9 || 0.5).
    const double n = 1000.0;
    const double closed_form = 2.0 * n * (0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5));
    const double t1_gap = number_from(t1["verdict"]["gap"]);
    const double t1_tol = number_from(t1["verdict"]["tolerance"]);
    const double cf_gap = number_from(cf["verdict"]["gap"]);
    Outcome o;
    o.pass = ok_code == exit_ok && t1["verdict"]["compatible"] == true && t1_gap <= t1_tol &&
             bad_code == exit_incompatible && cf["verdict"]["compatible"] == false && cf["retained"] == 0 &&
             std::abs(cf_gap - closed_form) <= conflict_rel_tol * closed_form;
    o.detail = "Table 1 gap " + fmt(t1_gap, 6) + " <= tol " + fmt(t1_tol, 4) + " (exit " + std::to_string(ok_code) +
               "); conflicting clones gap " + fmt(cf_gap, 3) + " vs closed form " + fmt(closed_form, 3) + " (exit " +
               std::to_string(bad_code) + ")";
    return o;
}

Outcome criterion6() {
    std::mt19937_64 rng(0x6d6f6e6f);
    EmConfig cfg;
    cfg.max_iter = 300;
    int violations = 0;
    std::size_t steps = 0;
    for (int t = 0; t < fuzz_triples; ++t) {
        const Pscm m = random_model(rng);
        const ExoParams truth = random_theta(m, rng, 0.5);
        const auto studies = random_studies(m, truth, rng, t % 2 == 1, 100 + static_cast<int>(rng() % 400));
        const auto run = em_random_run(StudySet(m, studies), cfg, rng());
        for (std::size_t i = 1; i < run.ll_trace.size(); ++i) {
            if (run.ll_trace[i] < run.ll_trace[i - 1] - monotone_slack) ++violations;
        }
        steps += run.ll_trace.size() - 1;
    }
    return {violations == 0, std::to_string(fuzz_triples) + " triples, " + std::to_string(steps) + " EM steps, " +
                                 std::to_string(violations) + " decreases beyond " + fmt(monotone_slack, 9)};
}

struct TinyCase {
    std::string kind;
    Pscm model;
    ExoParams truth;
    std::vector<Study> studies;
    PnsQuery query;
    bool identifiable = false;
};

/// Record counts proportional to the exact induced joint.
Dataset exact_counts(const Pscm& m, const ExoParams& theta, const Assignment& intervention, int n) {
    Dataset d;
    d.columns = m.endogenous();
    for (const auto& [cfg, p] : brute_joint(m, theta, intervention)) {
        const auto c = static_cast<std::int64_t>(std::llround(p * n));
        if (c > 0) d.rows.push_back({cfg, c});
    }
    return d;
}

std::vector<Study> tiny_studies(const Pscm& m, const ExoParams& theta, VarIndex x, int which) {
    std::vector<Study> s;
    if (which != 2) s.push_back({"obs", exact_counts(m, theta, {}, 10000), {}});
    if (which != 1) {
        s.push_back({"arm0", exact_counts(m, theta, {{x, 0}}, 5000), {{x, 0}}});
        s.push_back({"arm1", exact_counts(m, theta, {{x, 1}}, 5000), {{x, 1}}});
    }
    return s;
}

std::vector<TinyCase> tiny_cases() {
    std::mt19937_64 rng(0x6f7261);
    std::vector<TinyCase> cases;
    auto push = [&](const std::string& kind, const Pscm& m, VarIndex x, VarIndex y, bool ident, int which) {
        TinyCase c;
        c.kind = kind;
        c.model = m;
        c.truth = random_theta(m, rng, 1.0);
        c.studies = tiny_studies(m, c.truth, x, which);
        c.query.cause = x;
        c.query.effect = y;
        c.identifiable = ident;
        cases.push_back(std::move(c));
    };
    for (int i = 0; i < 6; ++i) {
        // X -> Y, private roots.
        const Pscm m = build_canonical_pscm({endo("X"), endo("Y")}, {{"X", "Y"}}, {{"Ux", {"X"}}, {"Uy", {"Y"}}});
        push("private-roots", m, 0, 1, false, i % 3);
    }
    for (int i = 0; i < 6; ++i) {
        // X -> Y confounded by one root with four random joint responses.
        CanonicalOptions opt;
        std::set<std::vector<std::uint64_t>> keep;
        while (keep.size() < 4) keep.insert({rng() % 2, rng() % 4});
        opt.keep["U"] = {keep.begin(), keep.end()};
        const Pscm m = build_canonical_pscm({endo("X"), endo("Y")}, {{"X", "Y"}}, {{"U", {"X", "Y"}}}, opt);
        push("confounded", m, 0, 1, false, i % 3);
    }
    for (int i = 0; i < 6; ++i) {
        // Z -> X -> Y, X and Y confounded (three kept responses), Z private.
        CanonicalOptions opt;
        std::set<std::vector<std::uint64_t>> keep;
        while (keep.size() < 3) keep.insert({rng() % 4, rng() % 4});
        opt.keep["U"] = {keep.begin(), keep.end()};
        const Pscm m = build_canonical_pscm({endo("Z"), endo("X"), endo("Y")}, {{"Z", "X"}, {"X", "Y"}},
                                            {{"Uz", {"Z"}}, {"U", {"X", "Y"}}}, opt);
        push("instrument", m, 1, 2, false, i % 2 == 0 ? 0 : 1);
    }
    for (int i = 0; i < 6; ++i) {
        // Y = X xor W: the trial arms identify P(W = 0), which is the PNS.
        std::vector<Variable> vars{endo("X"), endo("Y"), Variable{"Ux", VarKind::exogenous, 2, {}},
                                   Variable{"W", VarKind::exogenous, 2, {}}};
        const Pscm m(vars, {{0, {2}, {0, 1}}, {1, {0, 3}, {0, 1, 1, 0}}});
        push("identifiable", m, 0, 1, true, i % 2 == 0 ? 0 : 2);
    }
    return cases;
}

Outcome criterion7() {
    EmConfig cfg;
    cfg.restarts = 30;
    int feasible = 0;
    int contained = 0;
    int ident = 0;
    int ident_ok = 0;
    std::string worst;
    double worst_excess = -1.0;
    for (const auto& c : tiny_cases()) {
        const OracleResult oracle = grid_oracle(c.model, c.studies, oracle_step, c.query);
        if (!oracle.feasible) continue;
        ++feasible;
        const auto fit = emcc(c.model, c.studies, cfg);
        if (fit.params.empty()) continue;
        const QueryResult r = bounds(c.model, fit.params, Query{"pns", c.query});
        bool inside = true;
        for (double p : r.points) {
            const double excess = std::max(oracle.lower - oracle.slack - p, p - oracle.upper - oracle.slack);
            if (excess > 0.0) inside = false;
            if (excess > worst_excess) {
                worst_excess = excess;
                worst = c.kind;
            }
        }
        contained += inside;
        if (c.identifiable) {
            ++ident;
            ident_ok += r.width() <= identifiable_max_width && oracle.upper - oracle.lower <= oracle.slack;
        }
    }
    Outcome o;
    o.pass = feasible >= oracle_models_min && contained == feasible && ident > 0 && ident_ok == ident;
    o.detail = std::to_string(contained) + "/" + std::to_string(feasible) + " oracle-feasible models contain every EMCC point (step " +
               fmt(oracle_step, 2) + ", largest margin " + fmt(-worst_excess, 4) + " on " + worst + "); identifiable " +
               std::to_string(ident_ok) + "/" + std::to_string(ident) + " with width <= " + fmt(identifiable_max_width, 3);
    return o;
}

Outcome criterion8() {
    std::mt19937_64 rng(0x65717576);
    int equal = 0;
    const Pscm fig = fig1();
    const auto table1 = table1_fig1(fig);
    for (int i = 0; i < fuzz_thetas; ++i) {
        bool same = false;
        if (i % 2 == 0) {
            const ExoParams theta = random_theta(fig, rng, 0.3);
            const double a = log_likelihood(theta, table1, fig);
            const double b = log_likelihood_concatenated(theta, table1, fig);
            same = std::memcmp(&a, &b, sizeof a) == 0;
        } else {
            const Pscm m = random_model(rng);
            const auto studies = random_studies(m, random_theta(m, rng), rng, true, 300);
            const ExoParams theta = random_theta(m, rng, 0.3);
            const double a = log_likelihood(theta, studies, m);
            const double b = log_likelihood_concatenated(theta, studies, m);
            same = std::memcmp(&a, &b, sizeof a) == 0;
        }
        equal += same;
    }
    return {equal == fuzz_thetas, std::to_string(equal) + "/" + std::to_string(fuzz_thetas) +
                                      " fuzzed thetas give bitwise-equal per-study and concatenated log-likelihoods"};
}

Outcome criterion9(const fs::path& dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli({"bench", "--out", dir.string(), "--n-models", std::to_string(bench_models)});
    const double elapsed = seconds_since(t0);
    if (code != exit_ok) return {false, "bench exited with code " + std::to_string(code)};
    const json s = json::parse(read_file(dir / "bench_summary.json"));
    const double vs_obs = s["shrink_vs_obs"]["mean"];
    const double vs_rct = s["shrink_vs_rct"]["mean"];
    const double rate = s["inclusion_rate"];
    const std::size_t models = s["models"];
    const std::size_t emitted = s["emitted"];
    Outcome o;
    o.pass = models == bench_models && emitted > 0 && vs_obs > 0.0 && vs_rct > 0.0 && rate >= inclusion_rate_min &&
             s["inclusion_slack"].get<double>() == inclusion_slack;
    o.detail = std::to_string(models) + " models, " + std::to_string(emitted) + " emitted; mean shrink vs O " +
               fmt(vs_obs, 3) + " (reference " + fmt(s["shrink_vs_obs"]["reference_mean"], 2) + "), vs I " +
               fmt(vs_rct, 3) + " (reference " + fmt(s["shrink_vs_rct"]["reference_mean"], 2) + "); inclusion " +
               fmt(100.0 * rate, 1) + "% within " + fmt(inclusion_slack, 2) + "; " + fmt(elapsed, 0) + " s";
    return o;
}

bool same_files(const fs::path& a, const fs::path& b, const std::vector<std::string>& names, std::string& detail) {
    bool ok = true;
    for (const auto& n : names) {
        const bool eq = fs::exists(a / n) && fs::exists(b / n) && read_file(a / n) == read_file(b / n);
        detail += n + (eq ? " identical; " : " DIFFERS; ");
        ok = ok && eq;
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    bool skip_bench = false;
    fs::path work = fs::temp_directory_path() / "scmfuse_acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--skip-bench") {
            skip_bench = true;
        } else if (a == "--work" && i + 1 < argc) {
            work = argv[++i];
        } else {
            std::cerr << "usage: acceptance [--skip-bench] [--work DIR]\n";
            return 1;
        }
    }
    fs::remove_all(work);
    fs::create_directories(work);

    int failures = 0;
    auto report = [&](int id, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << "criterion " << std::setw(2) << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
                  << std::endl;
    };

    report(1, [&] { return table1_unconditional("two_node_oi", 0.34, 0.43, work / "c1_run1"); });
    report(2, [&] { return table1_unconditional("two_node_o", 0.0, 0.43, work); });
    report(3, [&] { return criterion3(work); });
    report(4, [&] { return table1_unconditional("two_node_i", 0.28, 0.49, work); });
    report(5, [&] { return criterion5(work); });
    report(6, [&] { return criterion6(); });
    report(7, [&] { return criterion7(); });
    report(8, [&] { return criterion8(); });
    if (skip_bench) {
        std::cout << "criterion  9: SKIP  (--skip-bench)" << std::endl;
    } else {
        report(9, [&] { return criterion9(work / "bench_run1"); });
    }
    report(10, [&] {
        Outcome o;
        run_manifest("two_node_oi", work / "c1_run2" / "two_node_oi");
        bool ok = same_files(work / "c1_run1" / "two_node_oi", work / "c1_run2" / "two_node_oi", {"results.json"}, o.detail);
        if (skip_bench) {
            o.detail += "benchmark half skipped";
        } else {
            const int code = cli({"bench", "--out", (work / "bench_run2").string(), "--n-models", std::to_string(bench_models)});
            ok = ok && code == exit_ok &&
                 same_files(work / "bench_run1", work / "bench_run2",
                            {"bench.jsonl", "bench_summary.json", "shrink_boxplot.csv"}, o.detail);
        }
        o.pass = ok;
        return o;
    });
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
