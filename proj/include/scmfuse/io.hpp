#ifndef SCMFUSE_IO_HPP
#define SCMFUSE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "scmfuse/bench.hpp"

namespace scmfuse {

using json = nlohmann::json;

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Two-space indented dump with a trailing newline. Keys are sorted, so equal
/// documents give equal bytes.
std::string dump(const json& j);

/// FNV-1a, 64 bit, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

// -- models ----------------------------------------------------------------------

json model_to_json(const Pscm& model);
Pscm model_from_json(const json& j);
Pscm load_model(const std::filesystem::path& path);

/// {"endogenous": [...], "arcs": [[a, b], ...], "exogenous": [{"id", "children"}],
///  "max_exo_states": n, "keep": {id: [[k, ...], ...]}} -> canonical PSCM.
Pscm canonical_from_json(const json& j);

/// Labels (or integer strings) to states, by variable id.
Assignment assignment_from_json(const json& j, const Pscm& model);
json assignment_to_json(const Assignment& a, const Pscm& model);

// -- data ------------------------------------------------------------------------

/// CSV with a header of endogenous ids and an optional trailing `count` column.
/// Cells are state labels or state indices.
Dataset read_csv(std::istream& in, const Pscm& model, const std::string& source = "csv");
Dataset load_csv(const std::filesystem::path& path, const Pscm& model);
std::string csv_string(const Dataset& data, const Pscm& model);

// -- configs ---------------------------------------------------------------------

json em_config_to_json(const EmConfig& cfg);
/// Missing keys keep the defaults in `base`; unknown keys are rejected.
EmConfig em_config_from_json(const json& j, EmConfig base = {});

json bench_config_to_json(const BenchConfig& cfg);
BenchConfig bench_config_from_json(const json& j);

// -- manifests and queries -------------------------------------------------------

struct StudySpec {
    std::string name;
    std::filesystem::path data;  // resolved against the manifest directory
    json intervention = json::object();
};

struct RunManifest {
    std::filesystem::path path;
    std::filesystem::path model;
    std::vector<StudySpec> studies;
    std::vector<json> queries;  // inline query objects (files are read at load time)
    EmConfig config;
    std::filesystem::path output;  // empty when unset
};

RunManifest load_manifest(const std::filesystem::path& path);
std::vector<Study> load_studies(const RunManifest& manifest, const Pscm& model);

Query query_from_json(const json& j, const Pscm& model);
json query_to_json(const Query& q, const Pscm& model);

// -- results ---------------------------------------------------------------------

/// Hash of everything that determines a fit: model, studies and config.
std::string input_hash(const Pscm& model, const std::vector<Study>& studies, const EmConfig& cfg);

json exo_params_to_json(const ExoParams& theta, const Pscm& model);
ExoParams exo_params_from_json(const json& j, const Pscm& model);

struct FitReport {
    EmConfig config;
    std::string hash;
    std::vector<std::string> study_names;
    std::vector<std::int64_t> study_records;
    EmccResult result;
};

json fit_to_json(const FitReport& fit, const Pscm& model, const std::vector<Study>& studies);
/// Reads back the config, hash, verdict and retained parameters.
FitReport fit_from_json(const json& j, const Pscm& model);

json query_result_to_json(const QueryResult& r, const Query& q, const Pscm& model, bool paper_rounding);

json bench_record_to_json(const BenchRecord& r);
json bench_summary_to_json(const BenchSummary& s, const BenchConfig& cfg);
/// Box-plot statistics of both shrink ratios as CSV.
std::string shrink_boxplot_csv(const BenchSummary& s);

json oracle_to_json(const OracleResult& r, double step);

/// JSON has no infinities; they are written as the strings "inf"/"-inf".
json number(double x);
double number_from(const json& j);

}  // namespace scmfuse

#endif  // SCMFUSE_IO_HPP
