#include "scmfuse/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace scmfuse {

namespace fs = std::filesystem;

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ModelError(where + ": missing key '" + key + "'");
    return j.at(key);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ModelError(where + ": expected a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ModelError(where + ": unknown key '" + k + "'");
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

json parse_json(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(where + ": invalid JSON (" + e.what() + ")");
    }
}

json load_json(const fs::path& path) { return parse_json(read_file(path), path.string()); }

VarIndex endogenous_of(const Pscm& model, const std::string& id, const std::string& where) {
    auto v = model.find(id);
    if (!v) throw ModelError(where + ": unknown variable '" + id + "'");
    if (model.variable(*v).is_exogenous()) throw ModelError(where + ": '" + id + "' is exogenous");
    return *v;
}

int state_from_json(const json& j, const Variable& var) {
    if (j.is_number_integer()) {
        const int s = j.get<int>();
        if (s < 0 || s >= var.cardinality) throw ModelError("state " + std::to_string(s) + " out of range for '" + var.id + "'");
        return s;
    }
    if (j.is_string()) return var.state_of(j.get<std::string>());
    throw ModelError("state of '" + var.id + "' must be a label or an index");
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << contents;
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp, ec);
            throw IoError("error writing '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

json number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

double number_from(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ModelError("expected a number");
}

// -- models ----------------------------------------------------------------------

json model_to_json(const Pscm& model) {
    json j;
    json vars = json::array();
    for (const auto& v : model.variables()) {
        json o{{"id", v.id}, {"kind", v.is_exogenous() ? "exogenous" : "endogenous"}, {"cardinality", v.cardinality}};
        if (!v.labels.empty()) o["labels"] = v.labels;
        vars.push_back(std::move(o));
    }
    j["variables"] = std::move(vars);
    json arcs = json::array();
    for (const auto& [from, to] : model.dag().arcs()) arcs.push_back({model.variable(from).id, model.variable(to).id});
    j["arcs"] = std::move(arcs);
    json eqs = json::array();
    for (const auto& se : model.equations()) {
        json inputs = json::array();
        for (VarIndex in : se.inputs) inputs.push_back(model.variable(in).id);
        eqs.push_back({{"child", model.variable(se.child).id}, {"inputs", std::move(inputs)}, {"table", se.table}});
    }
    j["equations"] = std::move(eqs);
    j["interventions"] = assignment_to_json(model.interventions(), model);
    return j;
}

Pscm model_from_json(const json& j) {
    reject_unknown(j, {"variables", "arcs", "equations", "interventions"}, "model");
    std::vector<Variable> vars;
    std::map<std::string, VarIndex> index;
    for (const auto& o : require(j, "variables", "model")) {
        reject_unknown(o, {"id", "kind", "cardinality", "labels"}, "model variable");
        Variable v;
        v.id = require(o, "id", "model variable").get<std::string>();
        const auto kind = o.value("kind", std::string("endogenous"));
        if (kind == "exogenous") {
            v.kind = VarKind::exogenous;
        } else if (kind != "endogenous") {
            throw ModelError("variable '" + v.id + "': kind must be 'endogenous' or 'exogenous'");
        }
        v.cardinality = require(o, "cardinality", "variable '" + v.id + "'").get<int>();
        if (o.contains("labels")) v.labels = o.at("labels").get<std::vector<std::string>>();
        if (!index.emplace(v.id, vars.size()).second) throw ModelError("duplicate variable id '" + v.id + "'");
        vars.push_back(std::move(v));
    }
    auto id_index = [&](const std::string& id) {
        auto it = index.find(id);
        if (it == index.end()) throw ModelError("model: unknown variable '" + id + "'");
        return it->second;
    };
    std::vector<StructuralEquation> eqs;
    for (const auto& o : require(j, "equations", "model")) {
        reject_unknown(o, {"child", "inputs", "table"}, "equation");
        StructuralEquation se;
        se.child = id_index(require(o, "child", "equation").get<std::string>());
        for (const auto& in : require(o, "inputs", "equation")) se.inputs.push_back(id_index(in.get<std::string>()));
        se.table = require(o, "table", "equation").get<std::vector<int>>();
        eqs.push_back(std::move(se));
    }
    std::sort(eqs.begin(), eqs.end(), [](const auto& a, const auto& b) { return a.child < b.child; });
    Assignment interventions;
    if (j.contains("interventions")) {
        for (const auto& [id, state] : j.at("interventions").items()) {
            const VarIndex v = id_index(id);
            interventions[v] = state_from_json(state, vars[v]);
        }
    }
    Pscm model(std::move(vars), std::move(eqs), std::move(interventions));
    if (j.contains("arcs")) {
        std::set<std::pair<VarIndex, VarIndex>> given;
        for (const auto& a : j.at("arcs")) {
            if (!a.is_array() || a.size() != 2) throw ModelError("model: each arc must be a [parent, child] pair");
            given.emplace(id_index(a[0].get<std::string>()), id_index(a[1].get<std::string>()));
        }
        const auto derived = model.dag().arcs();
        if (given != std::set<std::pair<VarIndex, VarIndex>>(derived.begin(), derived.end())) {
            throw ModelError("model: 'arcs' disagree with the equation inputs");
        }
    }
    return model;
}

Pscm load_model(const fs::path& path) { return model_from_json(load_json(path)); }

Pscm canonical_from_json(const json& j) {
    reject_unknown(j, {"endogenous", "arcs", "exogenous", "max_exo_states", "keep"}, "canonical spec");
    std::vector<Variable> endo;
    for (const auto& o : require(j, "endogenous", "canonical spec")) {
        reject_unknown(o, {"id", "cardinality", "labels"}, "canonical variable");
        Variable v;
        v.id = require(o, "id", "canonical variable").get<std::string>();
        v.labels = o.value("labels", std::vector<std::string>{});
        v.cardinality = o.contains("cardinality") ? o.at("cardinality").get<int>()
                                                  : (v.labels.empty() ? 2 : static_cast<int>(v.labels.size()));
        endo.push_back(std::move(v));
    }
    std::vector<std::pair<std::string, std::string>> arcs;
    for (const auto& a : j.value("arcs", json::array())) {
        if (!a.is_array() || a.size() != 2) throw ModelError("canonical spec: each arc must be a [parent, child] pair");
        arcs.emplace_back(a[0].get<std::string>(), a[1].get<std::string>());
    }
    std::vector<ExoGroup> groups;
    for (const auto& o : require(j, "exogenous", "canonical spec")) {
        reject_unknown(o, {"id", "children"}, "canonical exogenous");
        groups.push_back({require(o, "id", "canonical exogenous").get<std::string>(),
                          require(o, "children", "canonical exogenous").get<std::vector<std::string>>()});
    }
    CanonicalOptions options;
    if (j.contains("max_exo_states")) options.max_exo_states = j.at("max_exo_states").get<std::uint64_t>();
    if (j.contains("keep")) {
        for (const auto& [id, list] : j.at("keep").items()) {
            options.keep[id] = list.get<std::vector<std::vector<std::uint64_t>>>();
        }
    }
    return build_canonical_pscm(endo, arcs, groups, options);
}

Assignment assignment_from_json(const json& j, const Pscm& model) {
    if (j.is_null()) return {};
    if (!j.is_object()) throw ModelError("an assignment must be an object {variable: state}");
    Assignment a;
    for (const auto& [id, state] : j.items()) {
        auto v = model.find(id);
        if (!v) throw ModelError("unknown variable '" + id + "'");
        a[*v] = state_from_json(state, model.variable(*v));
    }
    return a;
}

json assignment_to_json(const Assignment& a, const Pscm& model) {
    json j = json::object();
    for (const auto& [v, s] : a) j[model.variable(v).id] = model.variable(v).label_of(s);
    return j;
}

// -- data ------------------------------------------------------------------------

Dataset read_csv(std::istream& in, const Pscm& model, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_line(line);
            break;
        }
    }
    if (header.empty()) throw ModelError(source + ": empty file");
    const bool has_count = header.back() == "count";
    if (has_count) header.pop_back();

    Dataset d;
    for (const auto& id : header) d.columns.push_back(endogenous_of(model, id, source));
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        const std::string where = source + ":" + std::to_string(line_no);
        if (cells.size() != header.size() + (has_count ? 1 : 0)) throw ModelError(where + ": wrong number of cells");
        Record r;
        for (std::size_t i = 0; i < header.size(); ++i) {
            try {
                r.values.push_back(model.variable(d.columns[i]).state_of(cells[i]));
            } catch (const ModelError& e) {
                throw ModelError(where + ": " + e.what());
            }
        }
        if (has_count) {
            std::size_t pos = 0;
            long long c = 0;
            try {
                c = std::stoll(cells.back(), &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != cells.back().size() || c <= 0) throw ModelError(where + ": count must be a positive integer");
            r.count = c;
        }
        d.rows.push_back(std::move(r));
    }
    d.validate(model);
    return d;
}

Dataset load_csv(const fs::path& path, const Pscm& model) {
    std::istringstream in(read_file(path));
    return read_csv(in, model, path.filename().string());
}

std::string csv_string(const Dataset& data, const Pscm& model) {
    std::ostringstream out;
    for (VarIndex c : data.columns) out << model.variable(c).id << ",";
    out << "count\n";
    for (const auto& r : data.rows) {
        for (std::size_t i = 0; i < r.values.size(); ++i) out << model.variable(data.columns[i]).label_of(r.values[i]) << ",";
        out << r.count << "\n";
    }
    return out.str();
}

// -- configs ---------------------------------------------------------------------

json em_config_to_json(const EmConfig& cfg) {
    return {{"restarts", cfg.restarts},
            {"tol", cfg.tol},
            {"max_iter", cfg.max_iter},
            {"seed", cfg.seed},
            {"concentration", cfg.concentration},
            {"compat_tol_per_record", cfg.compat_tol_per_record},
            {"compat_tol", cfg.compat_tol ? json(*cfg.compat_tol) : json(nullptr)},
            {"threads", cfg.threads},
            {"init_attempts", cfg.init_attempts}};
}

EmConfig em_config_from_json(const json& j, EmConfig cfg) {
    if (j.is_null()) return cfg;
    reject_unknown(j,
                   {"restarts", "tol", "max_iter", "seed", "concentration", "compat_tol_per_record", "compat_tol",
                    "threads", "init_attempts"},
                   "config");
    if (j.contains("restarts")) cfg.restarts = j.at("restarts").get<int>();
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("concentration")) cfg.concentration = j.at("concentration").get<double>();
    if (j.contains("compat_tol_per_record")) cfg.compat_tol_per_record = j.at("compat_tol_per_record").get<double>();
    if (j.contains("compat_tol")) {
        if (j.at("compat_tol").is_null()) {
            cfg.compat_tol.reset();
        } else {
            cfg.compat_tol = j.at("compat_tol").get<double>();
        }
    }
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("init_attempts")) cfg.init_attempts = j.at("init_attempts").get<int>();
    cfg.validate();
    return cfg;
}

json bench_config_to_json(const BenchConfig& cfg) {
    return {{"min_nodes", cfg.min_nodes},
            {"max_nodes", cfg.max_nodes},
            {"edge_probability", cfg.edge_probability},
            {"max_endo_parents", cfg.max_endo_parents},
            {"max_exo_states", cfg.max_exo_states},
            {"n1", cfg.n1},
            {"n2_factor", cfg.n2_factor},
            {"max_total_records", cfg.max_total_records},
            {"growth", cfg.growth},
            {"n_models", cfg.n_models},
            {"seed", cfg.seed},
            {"min_width", cfg.min_width},
            {"em", em_config_to_json(cfg.em)}};
}

BenchConfig bench_config_from_json(const json& j) {
    BenchConfig cfg;
    if (j.is_null()) return cfg;
    reject_unknown(j,
                   {"min_nodes", "max_nodes", "edge_probability", "max_endo_parents", "max_exo_states", "n1",
                    "n2_factor", "max_total_records", "growth", "n_models", "seed", "min_width", "em"},
                   "bench config");
    if (j.contains("min_nodes")) cfg.min_nodes = j.at("min_nodes").get<int>();
    if (j.contains("max_nodes")) cfg.max_nodes = j.at("max_nodes").get<int>();
    if (j.contains("edge_probability")) cfg.edge_probability = j.at("edge_probability").get<double>();
    if (j.contains("max_endo_parents")) cfg.max_endo_parents = j.at("max_endo_parents").get<int>();
    if (j.contains("max_exo_states")) cfg.max_exo_states = j.at("max_exo_states").get<std::uint64_t>();
    if (j.contains("n1")) cfg.n1 = j.at("n1").get<int>();
    if (j.contains("n2_factor")) cfg.n2_factor = j.at("n2_factor").get<double>();
    if (j.contains("max_total_records")) cfg.max_total_records = j.at("max_total_records").get<int>();
    if (j.contains("growth")) cfg.growth = j.at("growth").get<double>();
    if (j.contains("n_models")) cfg.n_models = j.at("n_models").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("min_width")) cfg.min_width = j.at("min_width").get<double>();
    if (j.contains("em")) cfg.em = em_config_from_json(j.at("em"), BenchConfig::default_em());
    cfg.validate();
    return cfg;
}

// -- manifests and queries -------------------------------------------------------

RunManifest load_manifest(const fs::path& path) {
    const json j = load_json(path);
    reject_unknown(j, {"model", "studies", "queries", "config", "output"}, "manifest");
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    RunManifest m;
    m.path = path;
    m.model = dir / require(j, "model", "manifest").get<std::string>();
    for (const auto& s : require(j, "studies", "manifest")) {
        reject_unknown(s, {"name", "data", "intervention"}, "manifest study");
        StudySpec spec;
        spec.data = dir / require(s, "data", "manifest study").get<std::string>();
        spec.name = s.value("name", spec.data.stem().string());
        spec.intervention = s.value("intervention", json::object());
        m.studies.push_back(std::move(spec));
    }
    if (m.studies.empty()) throw ModelError("manifest lists no studies");
    for (const auto& q : j.value("queries", json::array())) {
        if (q.is_string()) {
            m.queries.push_back(load_json(dir / q.get<std::string>()));
        } else {
            m.queries.push_back(q);
        }
    }
    m.config = em_config_from_json(j.value("config", json(nullptr)));
    if (j.contains("output")) m.output = dir / j.at("output").get<std::string>();
    return m;
}

std::vector<Study> load_studies(const RunManifest& manifest, const Pscm& model) {
    std::vector<Study> out;
    std::set<std::string> names;
    for (const auto& spec : manifest.studies) {
        Study s;
        s.name = spec.name;
        if (!names.insert(s.name).second) throw ModelError("manifest repeats study name '" + s.name + "'");
        s.data = load_csv(spec.data, model);
        s.intervention = assignment_from_json(spec.intervention, model);
        s.validate(model);
        out.push_back(std::move(s));
    }
    return out;
}

Query query_from_json(const json& j, const Pscm& model) {
    const auto kind = require(j, "kind", "query").get<std::string>();
    Query q;
    q.name = j.value("name", kind);
    if (kind == "pns") {
        reject_unknown(j,
                       {"name", "kind", "cause", "effect", "condition", "cause_positive", "cause_negative",
                        "effect_positive", "effect_negative"},
                       "pns query");
        PnsQuery p;
        p.cause = endogenous_of(model, require(j, "cause", "pns query").get<std::string>(), "pns query");
        p.effect = endogenous_of(model, require(j, "effect", "pns query").get<std::string>(), "pns query");
        p.condition = assignment_from_json(j.value("condition", json::object()), model);
        auto state = [&](const char* key, VarIndex v) {
            return j.contains(key) ? state_from_json(j.at(key), model.variable(v)) : -1;
        };
        p.cause_positive = state("cause_positive", p.cause);
        p.cause_negative = state("cause_negative", p.cause);
        p.effect_positive = state("effect_positive", p.effect);
        p.effect_negative = state("effect_negative", p.effect);
        q.body = p;
    } else if (kind == "counterfactual") {
        reject_unknown(j, {"name", "kind", "twin_interventions", "factual_evidence", "target", "factual_target"},
                       "counterfactual query");
        CounterfactualSpec c;
        c.twin_interventions = assignment_from_json(j.value("twin_interventions", json::object()), model);
        c.factual_evidence = assignment_from_json(j.value("factual_evidence", json::object()), model);
        c.target = assignment_from_json(require(j, "target", "counterfactual query"), model);
        c.factual_target = assignment_from_json(j.value("factual_target", json::object()), model);
        q.body = c;
    } else {
        throw ModelError("query kind must be 'pns' or 'counterfactual', got '" + kind + "'");
    }
    return q;
}

json query_to_json(const Query& q, const Pscm& model) {
    json j;
    j["name"] = q.name;
    if (const auto* p = std::get_if<PnsQuery>(&q.body)) {
        j["kind"] = "pns";
        j["cause"] = model.variable(p->cause).id;
        j["effect"] = model.variable(p->effect).id;
        j["condition"] = assignment_to_json(p->condition, model);
        const auto put = [&](const char* key, int s, VarIndex v) {
            if (s >= 0) j[key] = model.variable(v).label_of(s);
        };
        put("cause_positive", p->cause_positive, p->cause);
        put("cause_negative", p->cause_negative, p->cause);
        put("effect_positive", p->effect_positive, p->effect);
        put("effect_negative", p->effect_negative, p->effect);
    } else {
        const auto& c = std::get<CounterfactualSpec>(q.body);
        j["kind"] = "counterfactual";
        j["twin_interventions"] = assignment_to_json(c.twin_interventions, model);
        j["factual_evidence"] = assignment_to_json(c.factual_evidence, model);
        j["target"] = assignment_to_json(c.target, model);
        j["factual_target"] = assignment_to_json(c.factual_target, model);
    }
    return j;
}

// -- results ---------------------------------------------------------------------

std::string input_hash(const Pscm& model, const std::vector<Study>& studies, const EmConfig& cfg) {
    json j;
    j["model"] = model_to_json(model);
    json config = em_config_to_json(cfg);
    config.erase("threads");  // does not affect results
    j["config"] = std::move(config);
    json ss = json::array();
    for (const auto& s : studies) {
        Dataset d = s.data.aligned_to(model);
        d.compact();
        json rows = json::array();
        for (const auto& r : d.rows) {
            json row = r.values;
            row.push_back(r.count);
            rows.push_back(std::move(row));
        }
        ss.push_back({{"name", s.name}, {"intervention", assignment_to_json(s.intervention, model)}, {"rows", rows}});
    }
    j["studies"] = std::move(ss);
    return fnv1a_hex(j.dump());
}

json exo_params_to_json(const ExoParams& theta, const Pscm& model) {
    json j = json::object();
    for (VarIndex u : model.exogenous()) {
        const auto& p = theta.pmf(u);
        j[model.variable(u).id] = std::vector<double>(p.data(), p.data() + p.size());
    }
    return j;
}

ExoParams exo_params_from_json(const json& j, const Pscm& model) {
    ExoParams theta(model);
    for (VarIndex u : model.exogenous()) {
        const auto& id = model.variable(u).id;
        const auto v = require(j, id.c_str(), "theta").get<std::vector<double>>();
        theta.pmf(u) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    theta.validate(model, 1e-9);
    return theta;
}

json fit_to_json(const FitReport& fit, const Pscm& model, const std::vector<Study>& studies) {
    const auto& r = fit.result;
    json j;
    j["format"] = "scmfuse-fit/1";
    j["hash"] = fit.hash;
    j["seed"] = fit.config.seed;
    j["config"] = em_config_to_json(fit.config);
    j["total_records"] = r.total_records;
    json ss = json::array();
    for (std::size_t k = 0; k < studies.size(); ++k) {
        json s;
        s["name"] = studies[k].name;
        s["records"] = studies[k].data.total();
        s["intervention"] = assignment_to_json(studies[k].intervention, model);
        if (k < r.maxima.size()) {
            const auto& m = r.maxima[k];
            s["max_ll"] = number(m.value);
            s["bound"] = number(m.bound);
            s["em_best"] = number(m.em_best);
            s["max_source"] = m.source == MaxSource::bound ? "bound" : "em";
        }
        ss.push_back(std::move(s));
    }
    j["studies"] = std::move(ss);
    json per_study = json::array();
    for (double m : r.verdict.per_study_max_ll) per_study.push_back(number(m));
    j["verdict"] = {{"compatible", r.verdict.compatible},
                    {"achieved_ll", number(r.verdict.achieved_ll)},
                    {"per_study_max_ll", per_study},
                    {"gap", number(r.verdict.gap)},
                    {"tolerance", number(r.verdict.tolerance)}};
    json runs = json::array();
    for (const auto& run : r.runs) {
        json o{{"seed", run.seed},
               {"attempts", run.attempts},
               {"iterations", run.iterations},
               {"converged", run.converged},
               {"initial_ll", number(run.initial_ll)},
               {"final_ll", number(run.final_ll)},
               {"gap", number(run.gap)},
               {"retained", run.retained}};
        if (!run.error.empty()) o["error"] = run.error;
        runs.push_back(std::move(o));
    }
    j["runs"] = std::move(runs);
    j["retained"] = r.params.size();
    json params = json::array();
    for (std::size_t i = 0; i < r.params.size(); ++i) {
        params.push_back({{"ll", number(r.params.ll_values[i])}, {"theta", exo_params_to_json(r.params.thetas[i], model)}});
    }
    j["params"] = std::move(params);
    return j;
}

FitReport fit_from_json(const json& j, const Pscm& model) {
    if (j.value("format", std::string()) != "scmfuse-fit/1") throw ModelError("not a fit-result file");
    FitReport fit;
    fit.config = em_config_from_json(require(j, "config", "fit"));
    fit.hash = j.value("hash", std::string());
    fit.result.total_records = j.value("total_records", std::int64_t{0});
    for (const auto& s : j.value("studies", json::array())) {
        fit.study_names.push_back(s.value("name", std::string()));
        fit.study_records.push_back(s.value("records", std::int64_t{0}));
    }
    const auto& v = require(j, "verdict", "fit");
    fit.result.verdict.compatible = v.at("compatible").get<bool>();
    fit.result.verdict.achieved_ll = number_from(v.at("achieved_ll"));
    for (const auto& m : v.at("per_study_max_ll")) fit.result.verdict.per_study_max_ll.push_back(number_from(m));
    fit.result.verdict.gap = number_from(v.at("gap"));
    fit.result.verdict.tolerance = number_from(v.at("tolerance"));
    for (const auto& p : require(j, "params", "fit")) {
        fit.result.params.thetas.push_back(exo_params_from_json(p.at("theta"), model));
        fit.result.params.ll_values.push_back(number_from(p.at("ll")));
    }
    return fit;
}

json query_result_to_json(const QueryResult& r, const Query& q, const Pscm& model, bool paper_rounding) {
    json j;
    j["name"] = r.name;
    j["query"] = query_to_json(q, model);
    j["lower"] = paper_rounding ? round2(r.lower) : r.lower;
    j["upper"] = paper_rounding ? round2(r.upper) : r.upper;
    j["lower_exact"] = r.lower;
    j["upper_exact"] = r.upper;
    j["width"] = r.width();
    j["identifiable"] = r.identifiable;
    j["points"] = r.points;
    return j;
}

json bench_record_to_json(const BenchRecord& r) {
    auto interval = [](const std::optional<BenchInterval>& i) -> json {
        if (!i) return nullptr;
        return {{"lower", i->lower},
                {"upper", i->upper},
                {"compatible", i->compatible},
                {"gap", number(i->gap)},
                {"retained", i->retained}};
    };
    auto opt = [](const std::optional<double>& x) -> json { return x ? json(*x) : json(nullptr); };
    return {{"model_index", r.model_index},
            {"seed", r.seed},
            {"sampled_nodes", r.sampled_nodes},
            {"n_endogenous", r.n_endogenous},
            {"n_exogenous", r.n_exogenous},
            {"exo_cardinalities", r.exo_cardinalities},
            {"cause", r.cause},
            {"effect", r.effect},
            {"n1", r.n1},
            {"n2", r.n2},
            {"attempts", r.attempts},
            {"interval_obs", interval(r.obs)},
            {"interval_rct", interval(r.rct)},
            {"interval_joint", interval(r.joint)},
            {"shrink_vs_obs", opt(r.shrink_vs_obs)},
            {"shrink_vs_rct", opt(r.shrink_vs_rct)},
            {"emitted", r.emitted},
            {"skip_reason", r.skip_reason}};
}

json bench_summary_to_json(const BenchSummary& s, const BenchConfig& cfg) {
    auto stats = [](const ShrinkStats& x, double reference) -> json {
        return {{"n", x.n},       {"mean", x.mean}, {"min", x.min}, {"q1", x.q1},
                {"median", x.median}, {"q3", x.q3},   {"max", x.max}, {"reference_mean", reference}};
    };
    return {{"format", "scmfuse-bench/1"},
            {"config", bench_config_to_json(cfg)},
            {"models", s.models},
            {"emitted", s.emitted},
            {"skipped", s.skipped},
            {"shrink_vs_obs", stats(s.vs_obs, s.reference_vs_obs)},
            {"shrink_vs_rct", stats(s.vs_rct, s.reference_vs_rct)},
            {"inclusion_slack", s.inclusion_slack},
            {"inclusion_rate", s.inclusion_rate}};
}

std::string shrink_boxplot_csv(const BenchSummary& s) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "series,n,mean,min,q1,median,q3,max,reference_mean\n";
    auto row = [&](const char* name, const ShrinkStats& x, double ref) {
        out << name << "," << x.n << "," << x.mean << "," << x.min << "," << x.q1 << "," << x.median << "," << x.q3
            << "," << x.max << "," << ref << "\n";
    };
    row("vs_obs", s.vs_obs, s.reference_vs_obs);
    row("vs_rct", s.vs_rct, s.reference_vs_rct);
    return out.str();
}

json oracle_to_json(const OracleResult& r, double step) {
    return {{"format", "scmfuse-oracle/1"},
            {"step", step},
            {"feasible", r.feasible},
            {"lower", r.lower},
            {"upper", r.upper},
            {"grid_points", r.grid_points},
            {"retained", r.retained},
            {"epsilon", r.epsilon},
            {"slack", r.slack}};
}

}  // namespace scmfuse
