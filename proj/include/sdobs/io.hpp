#pragma once

// JSON scenario files, trace/event CSV output and the metrics document.

#include "sdobs/analysis.hpp"
#include "sdobs/scenario.hpp"
#include "sdobs/simulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace sdobs {

struct LoadedScenario {
    Scenario scenario;
    std::string canonical;  // normalized JSON text the hash is taken over
    std::string hash;       // FNV-1a 64, hex
};

/// Parses a scenario document. `seed_override` replaces the top-level seed
/// and the sampling/noise seeds.
LoadedScenario parse_scenario(const std::string& text,
                              std::optional<std::uint64_t> seed_override = std::nullopt);
LoadedScenario load_scenario(const std::string& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

/// Returns a copy of the document with one dotted key (e.g. "sampling.B")
/// set to `value`.
std::string override_parameter(const std::string& text, const std::string& dotted_key,
                               double value);

std::string fnv1a_hex(const std::string& data);

/// Columns t, x_*, z_*, w_*, xi_p_*, e_obs, e_pred; absent channels are "nan".
void write_trace_csv(const SimTrace& trace, std::ostream& out);
/// Columns tau, v_*, w_pre_*, w_post_*.
void write_events_csv(const SimTrace& trace, std::ostream& out);

std::string metrics_json(const Scenario& scenario, const Metrics& metrics, const SimTrace& trace);
std::string report_json(const Setup& setup);

/// %.17g rendering (round-trips doubles).
std::string format_double(double v);

}  // namespace sdobs
