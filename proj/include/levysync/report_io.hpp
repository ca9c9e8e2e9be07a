#pragma once

// Report serialization: CSV rows, JSON-lines manifest and atomic file output.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "levysync/config.hpp"
#include "levysync/mc.hpp"

namespace levysync {

inline constexpr const char* kReportHeader = "sweep_value,estimator,value,lo,hi,n_effective,excluded";


inline void write_report_csv(std::ostream& os, const ExperimentReport& report) {
    os << kReportHeader << '\n';
    for (const auto& r : report.rows)
        os << detail::format_double(r.sweep_value) << ',' << r.estimator << ',' << detail::format_double(r.value) << ','
           << detail::format_double(r.lo) << ',' << detail::format_double(r.hi) << ',' << r.n_effective << ',' << r.excluded << '\n';
}

inline std::string report_csv(const ExperimentReport& report) {
    std::ostringstream os;
    write_report_csv(os, report);
    return os.str();
}

/// One JSON object per line: a "run" record with the manifest and the
/// canonical configuration, then one "check" record per acceptance check.
inline std::string manifest_jsonl(const ExperimentReport& report, const std::string& config_text,
                                  const std::vector<std::string>& outputs, const std::vector<std::string>& warnings) {
    using nlohmann::ordered_json;
    const auto& m = report.manifest;
    ordered_json run;
    run["record"] = "run";
    run["experiment"] = m.experiment;
    run["master_seed"] = m.master_seed;
    run["spec_id"] = m.spec_id;
    run["code_version"] = m.code_version;
    run["grid"] = m.grid;
    ordered_json params = ordered_json::object();
    for (const auto& [k, v] : m.parameters) params[k] = v;
    run["parameters"] = params;
    run["rows"] = report.rows.size();
    run["outputs"] = outputs;
    run["warnings"] = warnings;
    run["passed"] = report.passed();
    run["config"] = config_text;
    std::string out = run.dump() + "\n";
    for (const auto& c : report.checks) {
        ordered_json rec;
        rec["record"] = "check";
        rec["name"] = c.name;
        rec["passed"] = c.passed;
        rec["detail"] = c.detail;
        out += rec.dump() + "\n";
    }
    return out;
}

/// Writes to a sibling temporary file and renames it over the target, so a
/// reader never sees a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace levysync
