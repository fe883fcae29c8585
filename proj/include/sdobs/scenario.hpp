#pragma once

// Scenario description (plant, gains, schedule, noise, predictor, initial
// data) and its preparation: derived constants plus every gain condition the
// selected pipeline relies on.

#include "sdobs/observer.hpp"
#include "sdobs/plant.hpp"
#include "sdobs/predictor.hpp"
#include "sdobs/sampling.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sdobs {

enum class Mode { full_pipeline, predictor_only, observer_only };
enum class PredictorKind { none, cascade, lti, gas };

std::string to_string(Mode mode);
std::string to_string(PredictorKind kind);

struct PlantSpec {
    std::string kind = "scalar_linear";  // scalar_linear | lti | chain | limit_cycle
    double a = 1.0;                      // scalar_linear
    Mat F, G, H;                         // lti
    double omega = 1.0;                  // limit_cycle
};

struct ObserverSpec {
    bool present = false;
    Mat P;
    Mat K;
    double q = 0.0;
    std::optional<double> L;
    double saturation_radius = 0.0;  // > 0 enables the saturated injection
};

struct SamplingSpec {
    double b = 0.1;
    double B = 0.1;
    ScheduleKind kind = ScheduleKind::uniform;
    std::uint64_t seed = 0;
};

struct PredictorSpec {
    PredictorKind kind = PredictorKind::none;
    int p = 1;
    double mu = 2.0;
    std::optional<double> sigma;  // defaults to the observer's sigma
    /// "z0" (constant z(0)), "matched" (ξ_i(θ) = x0(θ − r + iδ)) or "constant".
    std::string xi_init = "z0";
    std::vector<Vec> xi_constant;  // one per stage when xi_init == "constant"
};

/// Initial state history x0 on [−r, 0].
struct HistorySpec {
    enum class Kind { constant, sinusoid, table, trajectory };
    Kind kind = Kind::constant;
    Vec value;  // constant value, sinusoid offset, or x(0) for a trajectory
    Vec amplitude;
    double omega = 1.0;
    double phase = 0.0;
    std::vector<double> times;  // table (linear interpolation)
    std::vector<Vec> values;
};

struct InputSpec {
    std::vector<double> times{0.0};
    std::vector<Vec> values;  // empty: zero input
};

struct Scenario {
    std::string name = "scenario";
    PlantSpec plant;
    InputSpec input;
    ObserverSpec observer;
    SamplingSpec sampling;
    NoiseModel noise;
    PredictorSpec predictor;
    double delay = 0.0;  // r
    HistorySpec x0;
    std::optional<Vec> z0;
    std::optional<Vec> w0;
    double horizon = 10.0;
    double dt = 1e-3;
    Mode mode = Mode::full_pipeline;
    Vec feed_offset;  // d in predictor-only mode
    int stride = 1;
    std::uint64_t seed = 0;
    double converge_tol = 1e-3;
    std::optional<double> fit_start;
    std::optional<double> fit_end;
    double tail_fraction = 0.25;
};

struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool pass = false;
    bool required = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<Check> checks;
    bool ok() const;
    const Check* first_failure() const;
};

/// Theoretical constants that the measured quantities are compared against.
struct TheoryConstants {
    double small_gain = NAN;  // C B e^{σB}
    double beta = NAN;        // single stage (cascade) or β_gas
    double beta_p = NAN;
    double Gamma = NAN;  // γ β^p e^{σB} / (1 − C B e^{σB})
};

/// Everything derived from a Scenario before integration.
struct Setup {
    Plant plant;
    std::optional<GasPlantData> gas;
    std::optional<ObserverGains> gains;
    std::optional<ObserverConstants> constants;
    std::optional<CascadeConfig> cascade;
    std::optional<GasPredictorConfig> gas_predictor;
    InputSignal input;
    SamplingSchedule schedule;
    double dt = 0.0;
    double delta = 0.0;  // predictor step; 0 without predictor
    double L = NAN;      // Lipschitz constant used by the conditions
    double sigma_pred = NAN;
    TheoryConstants theory;
    ValidationReport report;
};

Plant build_plant(const PlantSpec& spec, double r, std::optional<GasPlantData>* gas = nullptr);

/// Derives constants and evaluates all applicable checks. Throws ConfigError
/// on malformed data; failed gain conditions are recorded, not thrown.
Setup prepare(const Scenario& scenario);

/// Throws GainConditionViolated (or ConfigError for alignment) for the first
/// failing required check.
void enforce(const ValidationReport& report);

}  // namespace sdobs
