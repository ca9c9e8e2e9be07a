#pragma once

// Run configuration: a flat, sectioned key = value document.
//
//   schema = levy-sync/1
//   experiment = averaging
//   [spec]
//   f = tanh_dissipative
//   f.a = 2
//   ...
//
// Every key is typed and known in advance; anything else is a ParseError
// carrying the line and field. Cross-field rules are checked afterwards and
// raise ValidationError.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "levysync/errors.hpp"
#include "levysync/mc.hpp"
#include "levysync/synchro.hpp"

namespace levysync {

inline constexpr const char* kSchemaTag = "levy-sync/1";

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"sampler-check", "averaging", "persistence", "moments",
                                                "attractor",     "mixing",    "holder"};
    return names;
}

struct DriftChoice {
    std::string name = "tanh_dissipative";
    DriftParams params;
};

struct SpecConfig {
    DriftChoice f{"tanh_dissipative", {{"a", 2.0}, {"b", 1.0}}};
    DriftChoice g{"tanh_dissipative", {{"a", 1.0}, {"b", 0.5}}};
    double sigma1 = 1.0;
    double sigma2 = 0.5;
    double alpha = 1.5;
    std::size_t dim = 1;
    double nu = 10.0;
    Convention convention = Convention::UnitExponent;
    std::string id = "tanh-default";
    bool override_hypotheses = false;

    CoupledSpec build() const {
        return CoupledSpec::make(make_drift(f.name, f.params, dim), make_drift(g.name, g.params, dim), sigma1, sigma2,
                                 nu, StableLaw::make(alpha, dim, 1.0, convention), id);
    }
};

struct SamplerConfig {
    std::vector<double> alphas{1.2, 1.5, 1.8, 2.0};
    std::size_t n_samples = 1'000'000;
    std::vector<double> frequencies{0.5, 1.0, 2.0, 3.0};
};

struct AttractorConfig {
    double ic_min = -5.0;
    double ic_max = 5.0;
    std::size_t ic_count = 8;
    double h = 1e-3;
    double frozen_fast = 0.0;
};

struct MixingConfig {
    double x = 0.0;              // frozen slow state, broadcast
    double y1 = 2.0;
    double y2 = -2.0;
    double horizon_relax = 5.0;  // curve length in relaxation times eps/2
    std::size_t n_steps = 200;
};

struct HolderConfig {
    double T = 1.0;
    std::size_t n_steps = 256;
    std::vector<double> lag_steps{1, 4, 16, 64};
};

struct RunConfig {
    std::string experiment = "averaging";
    std::string output_dir = "out";
    bool emit_plots = true;
    SpecConfig spec;
    MCConfig mc;
    SamplerConfig sampler;
    AttractorConfig attractor;
    MixingConfig mixing;
    HolderConfig holder;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& v, std::size_t line, const std::string& field) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) throw ParseError(line, field, "expected a number, got '" + v + "'");
    return out;
}

inline std::uint64_t parse_unsigned(const std::string& v, std::size_t line, const std::string& field) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ParseError(line, field, "expected a non-negative integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& v, std::size_t line, const std::string& field) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError(line, field, "expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& v, std::size_t line, const std::string& field) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), line, field));
    if (out.empty()) throw ParseError(line, field, "expected a comma-separated list of numbers");
    return out;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, std::size_t, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    auto num = [](auto member) -> Setter {
        return [member](RunConfig& c, const std::string& v, std::size_t l, const std::string& k) {
            member(c) = parse_double(v, l, k);
        };
    };
    auto count = [](auto member) -> Setter {
        return [member](RunConfig& c, const std::string& v, std::size_t l, const std::string& k) {
            member(c) = static_cast<std::size_t>(parse_unsigned(v, l, k));
        };
    };
    auto list = [](auto member) -> Setter {
        return [member](RunConfig& c, const std::string& v, std::size_t l, const std::string& k) {
            member(c) = parse_list(v, l, k);
        };
    };
    auto flag = [](auto member) -> Setter {
        return [member](RunConfig& c, const std::string& v, std::size_t l, const std::string& k) {
            member(c) = parse_bool(v, l, k);
        };
    };
    auto text = [](auto member) -> Setter {
        return [member](RunConfig& c, const std::string& v, std::size_t, const std::string&) { member(c) = v; };
    };
    static const std::map<std::string, Setter> table{
        {"schema", [](RunConfig&, const std::string& v, std::size_t l, const std::string& k) {
             if (v != kSchemaTag) throw ParseError(l, k, "unsupported schema '" + v + "', expected " + kSchemaTag);
         }},
        {"experiment", text([](RunConfig& c) -> auto& { return c.experiment; })},
        {"output_dir", text([](RunConfig& c) -> auto& { return c.output_dir; })},
        {"emit_plots", flag([](RunConfig& c) -> auto& { return c.emit_plots; })},

        {"spec.f", text([](RunConfig& c) -> auto& { return c.spec.f.name; })},
        {"spec.g", text([](RunConfig& c) -> auto& { return c.spec.g.name; })},
        {"spec.sigma1", num([](RunConfig& c) -> auto& { return c.spec.sigma1; })},
        {"spec.sigma2", num([](RunConfig& c) -> auto& { return c.spec.sigma2; })},
        {"spec.alpha", num([](RunConfig& c) -> auto& { return c.spec.alpha; })},
        {"spec.dim", count([](RunConfig& c) -> auto& { return c.spec.dim; })},
        {"spec.nu", num([](RunConfig& c) -> auto& { return c.spec.nu; })},
        {"spec.id", text([](RunConfig& c) -> auto& { return c.spec.id; })},
        {"spec.override_hypotheses", flag([](RunConfig& c) -> auto& { return c.spec.override_hypotheses; })},
        {"spec.convention", [](RunConfig& c, const std::string& v, std::size_t l, const std::string& k) {
             if (v == "unit") c.spec.convention = Convention::UnitExponent;
             else if (v == "c1") c.spec.convention = Convention::C1Scaled;
             else throw ParseError(l, k, "expected unit or c1, got '" + v + "'");
         }},

        {"mc.p", num([](RunConfig& c) -> auto& { return c.mc.p; })},
        {"mc.n_paths", count([](RunConfig& c) -> auto& { return c.mc.n_paths; })},
        {"mc.T", num([](RunConfig& c) -> auto& { return c.mc.T; })},
        {"mc.seed", [](RunConfig& c, const std::string& v, std::size_t l, const std::string& k) {
             c.mc.master_seed = parse_unsigned(v, l, k);
         }},
        {"mc.epsilon_list", list([](RunConfig& c) -> auto& { return c.mc.epsilon_list; })},
        {"mc.nu_list", list([](RunConfig& c) -> auto& { return c.mc.nu_list; })},
        {"mc.delta_rule", [](RunConfig& c, const std::string& v, std::size_t l, const std::string& k) {
             if (v == "schedule") c.mc.delta_rule = DeltaRule::LogSchedule;
             else if (v == "fixed") c.mc.delta_rule = DeltaRule::Fixed;
             else throw ParseError(l, k, "expected schedule or fixed, got '" + v + "'");
         }},
        {"mc.delta", num([](RunConfig& c) -> auto& { return c.mc.delta_value; })},
        {"mc.h_factor", num([](RunConfig& c) -> auto& { return c.mc.h_factor; })},
        {"mc.mesh_points", count([](RunConfig& c) -> auto& { return c.mc.mesh_points; })},
        {"mc.x0", list([](RunConfig& c) -> auto& { return c.mc.x0; })},
        {"mc.y0", list([](RunConfig& c) -> auto& { return c.mc.y0; })},

        {"sampler.alphas", list([](RunConfig& c) -> auto& { return c.sampler.alphas; })},
        {"sampler.n_samples", count([](RunConfig& c) -> auto& { return c.sampler.n_samples; })},
        {"sampler.frequencies", list([](RunConfig& c) -> auto& { return c.sampler.frequencies; })},

        {"attractor.ic_min", num([](RunConfig& c) -> auto& { return c.attractor.ic_min; })},
        {"attractor.ic_max", num([](RunConfig& c) -> auto& { return c.attractor.ic_max; })},
        {"attractor.ic_count", count([](RunConfig& c) -> auto& { return c.attractor.ic_count; })},
        {"attractor.h", num([](RunConfig& c) -> auto& { return c.attractor.h; })},
        {"attractor.frozen_fast", num([](RunConfig& c) -> auto& { return c.attractor.frozen_fast; })},

        {"mixing.x", num([](RunConfig& c) -> auto& { return c.mixing.x; })},
        {"mixing.y1", num([](RunConfig& c) -> auto& { return c.mixing.y1; })},
        {"mixing.y2", num([](RunConfig& c) -> auto& { return c.mixing.y2; })},
        {"mixing.horizon_relax", num([](RunConfig& c) -> auto& { return c.mixing.horizon_relax; })},
        {"mixing.n_steps", count([](RunConfig& c) -> auto& { return c.mixing.n_steps; })},

        {"holder.T", num([](RunConfig& c) -> auto& { return c.holder.T; })},
        {"holder.n_steps", count([](RunConfig& c) -> auto& { return c.holder.n_steps; })},
        {"holder.lag_steps", list([](RunConfig& c) -> auto& { return c.holder.lag_steps; })},
    };
    return table;
}

}  // namespace detail

/// Cross-field rules; raises ValidationError naming the broken rule.
inline void validate(const RunConfig& c) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end())
        throw ValidationError("unknown experiment '" + c.experiment + "'");
    if (c.output_dir.empty()) throw ValidationError("output_dir must not be empty");
    try {
        c.spec.build();
    } catch (const DomainError& e) {
        throw ValidationError(std::string("spec: ") + e.what());
    }
    const double alpha = c.spec.alpha;
    if (!(c.mc.p > 1.0 && c.mc.p < alpha)) {
        std::ostringstream msg;
        msg << "mc.p = " << c.mc.p << " violates the moment rule 1 < p < alpha = " << alpha;
        throw ValidationError(msg.str());
    }
    try {
        c.mc.validate(alpha);
    } catch (const DomainError& e) {
        throw ValidationError(std::string("mc: ") + e.what());
    }
    for (const auto* v : {&c.mc.x0, &c.mc.y0})
        if (v->size() != 1 && v->size() != c.spec.dim) throw ValidationError("mc.x0 / mc.y0 must have 1 or dim entries");
    if (c.experiment == "sampler-check") {
        if (c.sampler.n_samples < 1000) throw ValidationError("sampler.n_samples must be >= 1000");
        for (double a : c.sampler.alphas)
            if (!(a > 1.0 && a <= 2.0)) throw ValidationError("sampler.alphas must lie in (1, 2]");
    }
    if (c.experiment == "attractor") {
        if (c.attractor.ic_count < 8) throw ValidationError("attractor.ic_count must be >= 8");
        if (!(c.attractor.h > 0.0)) throw ValidationError("attractor.h must be positive");
    }
    if (c.experiment == "mixing" || c.experiment == "holder" || c.experiment == "averaging" || c.experiment == "moments")
        if (c.mc.epsilon_list.empty()) throw ValidationError("mc.epsilon_list must not be empty");
    if (c.experiment == "persistence" && c.mc.nu_list.empty()) throw ValidationError("mc.nu_list must not be empty");
    if (c.experiment == "mixing") {
        if (c.mixing.n_steps < 2 || !(c.mixing.horizon_relax > 0.0))
            throw ValidationError("mixing.n_steps must be >= 2 and mixing.horizon_relax positive");
        if (c.mixing.y1 == c.mixing.y2) throw ValidationError("mixing.y1 and mixing.y2 must differ");
    }
    if (c.experiment == "holder") {
        if (c.holder.n_steps < 2 || !(c.holder.T > 0.0)) throw ValidationError("holder.n_steps must be >= 2 and holder.T positive");
        if (c.holder.lag_steps.size() < 2) throw ValidationError("holder.lag_steps needs at least two lags");
        for (double s : c.holder.lag_steps)
            if (!(s >= 1.0) || s != std::floor(s) || s > static_cast<double>(c.holder.n_steps))
                throw ValidationError("holder.lag_steps must be integers in [1, n_steps]");
    }
}

/// Parses and validates a configuration document.
inline RunConfig parse_config(std::string_view text) {
    RunConfig c;
    // Drift parameters are only known once the drift name is; collect them first.
    std::map<std::string, std::pair<std::string, std::size_t>> drift_params;
    std::set<std::string> seen;
    const auto& table = detail::setters();
    std::string section;
    bool schema_seen = false;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, line, "unterminated section header");
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            static const std::set<std::string> sections{"spec", "mc", "sampler", "attractor", "mixing", "holder"};
            if (!sections.contains(section)) throw ParseError(line_no, section, "unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, line, "expected key = value");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "", "missing key");
        const std::string field = section.empty() ? key : section + "." + key;
        if (value.empty()) throw ParseError(line_no, field, "missing value");
        if (!seen.insert(field).second) throw ParseError(line_no, field, "duplicate key");
        if (section == "spec" && (key.starts_with("f.") || key.starts_with("g.")) && key.size() > 2) {
            drift_params[field] = {value, line_no};
            continue;
        }
        const auto it = table.find(field);
        if (it == table.end()) throw ParseError(line_no, field, "unknown key");
        if (field == "schema") schema_seen = true;
        it->second(c, value, line_no, field);
    }
    if (!schema_seen) throw ParseError(line_no, "schema", std::string("missing schema tag; expected schema = ") + kSchemaTag);

    // Explicit drift names reset the default parameters.
    if (seen.contains("spec.f")) c.spec.f.params.clear();
    if (seen.contains("spec.g")) c.spec.g.params.clear();
    for (const auto& [field, entry] : drift_params) {
        const std::string key = field.substr(5);  // "f.a"
        auto& choice = key[0] == 'f' ? c.spec.f : c.spec.g;
        choice.params[key.substr(2)] = detail::parse_double(entry.first, entry.second, field);
    }
    validate(c);
    return c;
}

/// Canonical document for a configuration; parse_config(render_config(c))
/// reproduces c exactly.
inline std::string render_config(const RunConfig& c) {
    using detail::format_double;
    using detail::format_list;
    std::ostringstream os;
    os << "schema = " << kSchemaTag << "\n"
       << "experiment = " << c.experiment << "\n"
       << "output_dir = " << c.output_dir << "\n"
       << "emit_plots = " << (c.emit_plots ? "true" : "false") << "\n\n[spec]\n"
       << "f = " << c.spec.f.name << "\n";
    for (const auto& [k, v] : c.spec.f.params) os << "f." << k << " = " << format_double(v) << "\n";
    os << "g = " << c.spec.g.name << "\n";
    for (const auto& [k, v] : c.spec.g.params) os << "g." << k << " = " << format_double(v) << "\n";
    os << "sigma1 = " << format_double(c.spec.sigma1) << "\n"
       << "sigma2 = " << format_double(c.spec.sigma2) << "\n"
       << "alpha = " << format_double(c.spec.alpha) << "\n"
       << "dim = " << c.spec.dim << "\n"
       << "nu = " << format_double(c.spec.nu) << "\n"
       << "convention = " << (c.spec.convention == Convention::UnitExponent ? "unit" : "c1") << "\n"
       << "id = " << c.spec.id << "\n"
       << "override_hypotheses = " << (c.spec.override_hypotheses ? "true" : "false") << "\n\n[mc]\n"
       << "p = " << format_double(c.mc.p) << "\n"
       << "n_paths = " << c.mc.n_paths << "\n"
       << "T = " << format_double(c.mc.T) << "\n"
       << "seed = " << c.mc.master_seed << "\n"
       << "epsilon_list = " << format_list(c.mc.epsilon_list) << "\n"
       << "nu_list = " << format_list(c.mc.nu_list) << "\n"
       << "delta_rule = " << (c.mc.delta_rule == DeltaRule::LogSchedule ? "schedule" : "fixed") << "\n"
       << "delta = " << format_double(c.mc.delta_value) << "\n"
       << "h_factor = " << format_double(c.mc.h_factor) << "\n"
       << "mesh_points = " << c.mc.mesh_points << "\n"
       << "x0 = " << format_list(c.mc.x0) << "\n"
       << "y0 = " << format_list(c.mc.y0) << "\n\n[sampler]\n"
       << "alphas = " << format_list(c.sampler.alphas) << "\n"
       << "n_samples = " << c.sampler.n_samples << "\n"
       << "frequencies = " << format_list(c.sampler.frequencies) << "\n\n[attractor]\n"
       << "ic_min = " << format_double(c.attractor.ic_min) << "\n"
       << "ic_max = " << format_double(c.attractor.ic_max) << "\n"
       << "ic_count = " << c.attractor.ic_count << "\n"
       << "h = " << format_double(c.attractor.h) << "\n"
       << "frozen_fast = " << format_double(c.attractor.frozen_fast) << "\n\n[mixing]\n"
       << "x = " << format_double(c.mixing.x) << "\n"
       << "y1 = " << format_double(c.mixing.y1) << "\n"
       << "y2 = " << format_double(c.mixing.y2) << "\n"
       << "horizon_relax = " << format_double(c.mixing.horizon_relax) << "\n"
       << "n_steps = " << c.mixing.n_steps << "\n\n[holder]\n"
       << "T = " << format_double(c.holder.T) << "\n"
       << "n_steps = " << c.holder.n_steps << "\n"
       << "lag_steps = " << format_list(c.holder.lag_steps) << "\n";
    return os.str();
}

}  // namespace levysync
