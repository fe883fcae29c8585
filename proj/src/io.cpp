#include "sdobs/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sdobs {

using nlohmann::json;

namespace {

Vec to_vec(const json& j) {
    if (j.is_number()) return Vec::Constant(1, j.get<double>());
    if (!j.is_array()) throw ConfigError("expected a number array, got " + j.dump());
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Mat to_mat(const json& j) {
    if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw ConfigError("expected a matrix, got " + j.dump());
    if (!j[0].is_array()) {
        // A flat array is a column.
        return to_vec(j);
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ConfigError("ragged matrix rows in " + j.dump());
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

ScheduleKind schedule_kind(const std::string& s) {
    if (s == "uniform") return ScheduleKind::uniform;
    if (s == "jittered") return ScheduleKind::jittered;
    throw ConfigError("sampling.kind must be uniform or jittered");
}

NoiseModel::Kind noise_kind(const std::string& s) {
    if (s == "zero") return NoiseModel::Kind::zero;
    if (s == "constant") return NoiseModel::Kind::constant;
    if (s == "bounded_random") return NoiseModel::Kind::bounded_random;
    if (s == "decaying") return NoiseModel::Kind::decaying;
    throw ConfigError("noise.kind must be zero, constant, bounded_random or decaying");
}

PredictorKind predictor_kind(const std::string& s) {
    if (s == "none") return PredictorKind::none;
    if (s == "cascade") return PredictorKind::cascade;
    if (s == "lti") return PredictorKind::lti;
    if (s == "gas") return PredictorKind::gas;
    throw ConfigError("predictor.kind must be none, cascade, lti or gas");
}

Mode mode_of(const std::string& s) {
    if (s == "full_pipeline") return Mode::full_pipeline;
    if (s == "predictor_only") return Mode::predictor_only;
    if (s == "observer_only") return Mode::observer_only;
    throw ConfigError("mode must be full_pipeline, predictor_only or observer_only");
}

HistorySpec history_of(const json& j) {
    HistorySpec h;
    if (!j.is_object()) {
        h.value = to_vec(j);
        return h;
    }
    const std::string kind = get_or<std::string>(j, "kind", "constant");
    if (kind == "constant") h.kind = HistorySpec::Kind::constant;
    else if (kind == "sinusoid") h.kind = HistorySpec::Kind::sinusoid;
    else if (kind == "table") h.kind = HistorySpec::Kind::table;
    else if (kind == "trajectory") h.kind = HistorySpec::Kind::trajectory;
    else throw ConfigError("initial x0 kind must be constant, sinusoid, table or trajectory");
    if (j.contains("value")) h.value = to_vec(j.at("value"));
    if (j.contains("amplitude")) h.amplitude = to_vec(j.at("amplitude"));
    h.omega = get_or(j, "omega", 1.0);
    h.phase = get_or(j, "phase", 0.0);
    if (j.contains("times")) h.times = j.at("times").get<std::vector<double>>();
    if (j.contains("values"))
        for (const json& v : j.at("values")) h.values.push_back(to_vec(v));
    return h;
}

Scenario scenario_of(const json& doc) {
    Scenario s;
    s.name = get_or<std::string>(doc, "name", "scenario");
    s.seed = get_or<std::uint64_t>(doc, "seed", 0);

    const json& plant = doc.at("plant");
    s.plant.kind = plant.at("kind").get<std::string>();
    s.plant.a = get_or(plant, "a", 1.0);
    s.plant.omega = get_or(plant, "omega", 1.0);
    if (plant.contains("F")) s.plant.F = to_mat(plant.at("F"));
    if (plant.contains("G")) s.plant.G = to_mat(plant.at("G"));
    if (plant.contains("H")) s.plant.H = to_mat(plant.at("H"));

    if (doc.contains("input")) {
        const json& in = doc.at("input");
        if (in.contains("constant")) {
            s.input.times = {0.0};
            s.input.values = {to_vec(in.at("constant"))};
        } else {
            s.input.times = in.at("times").get<std::vector<double>>();
            for (const json& v : in.at("values")) s.input.values.push_back(to_vec(v));
        }
    }

    if (doc.contains("observer")) {
        const json& o = doc.at("observer");
        s.observer.present = true;
        s.observer.P = to_mat(o.at("P"));
        s.observer.K = to_mat(o.at("K"));
        s.observer.q = o.at("q").get<double>();
        if (o.contains("L")) s.observer.L = o.at("L").get<double>();
        s.observer.saturation_radius = get_or(o, "saturation_radius", 0.0);
    }

    if (doc.contains("sampling")) {
        const json& smp = doc.at("sampling");
        s.sampling.B = smp.at("B").get<double>();
        s.sampling.b = get_or(smp, "b", s.sampling.B);
        s.sampling.kind = schedule_kind(get_or<std::string>(smp, "kind", "uniform"));
        s.sampling.seed = get_or<std::uint64_t>(smp, "seed", s.seed);
    } else {
        s.sampling.seed = s.seed;
    }

    s.noise.seed = s.seed;
    if (doc.contains("noise")) {
        const json& nz = doc.at("noise");
        s.noise.kind = noise_kind(get_or<std::string>(nz, "kind", "zero"));
        s.noise.epsilon = get_or(nz, "epsilon", 0.0);
        s.noise.rate = get_or(nz, "rate", 0.0);
        s.noise.seed = get_or<std::uint64_t>(nz, "seed", s.seed);
    }

    if (doc.contains("predictor")) {
        const json& p = doc.at("predictor");
        s.predictor.kind = predictor_kind(get_or<std::string>(p, "kind", "cascade"));
        s.predictor.p = get_or(p, "p", 1);
        s.predictor.mu = get_or(p, "mu", 2.0);
        if (p.contains("sigma")) s.predictor.sigma = p.at("sigma").get<double>();
        s.predictor.xi_init = get_or<std::string>(p, "xi_init", "z0");
        if (p.contains("xi_constant"))
            for (const json& v : p.at("xi_constant")) s.predictor.xi_constant.push_back(to_vec(v));
    }

    s.delay = get_or(doc, "delay", 0.0);
    if (doc.contains("initial")) {
        const json& ini = doc.at("initial");
        if (ini.contains("x0")) s.x0 = history_of(ini.at("x0"));
        if (ini.contains("z0")) s.z0 = to_vec(ini.at("z0"));
        if (ini.contains("w0")) s.w0 = to_vec(ini.at("w0"));
    }
    s.horizon = get_or(doc, "horizon", 10.0);
    s.dt = get_or(doc, "dt", 1e-3);
    s.mode = mode_of(get_or<std::string>(doc, "mode", "full_pipeline"));
    if (doc.contains("feed_offset")) s.feed_offset = to_vec(doc.at("feed_offset"));
    if (doc.contains("output")) s.stride = get_or(doc.at("output"), "stride", 1);
    if (doc.contains("analysis")) {
        const json& a = doc.at("analysis");
        s.converge_tol = get_or(a, "converge_tol", 1e-3);
        if (a.contains("fit_start")) s.fit_start = a.at("fit_start").get<double>();
        if (a.contains("fit_end")) s.fit_end = a.at("fit_end").get<double>();
        s.tail_fraction = get_or(a, "tail_fraction", 0.25);
    }
    return s;
}

}  // namespace

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

LoadedScenario parse_scenario(const std::string& text, std::optional<std::uint64_t> seed_override) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid scenario JSON: ") + e.what());
    }
    if (seed_override) {
        doc["seed"] = *seed_override;
        if (doc.contains("sampling")) doc["sampling"]["seed"] = *seed_override;
        if (doc.contains("noise")) doc["noise"]["seed"] = *seed_override;
    }
    LoadedScenario out;
    try {
        out.scenario = scenario_of(doc);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    out.canonical = doc.dump();
    out.hash = fnv1a_hex(out.canonical);
    return out;
}

LoadedScenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), seed_override);
}

std::string override_parameter(const std::string& text, const std::string& dotted_key,
                               double value) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid scenario JSON: ") + e.what());
    }
    json* node = &doc;
    std::stringstream keys(dotted_key);
    std::string key;
    std::vector<std::string> parts;
    while (std::getline(keys, key, '.')) parts.push_back(key);
    if (parts.empty()) throw ConfigError("empty parameter name");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
    return doc.dump();
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void put_block(std::ostream& out, const std::vector<Vec>& channel, std::size_t row, int width) {
    for (int i = 0; i < width; ++i) {
        out << ',';
        if (row < channel.size()) out << format_double(channel[row](i));
        else out << "nan";
    }
}

void put_value(std::ostream& out, const std::vector<double>& channel, std::size_t row) {
    out << ',' << (row < channel.size() ? format_double(channel[row]) : std::string("nan"));
}

json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "inf" : "-inf";
}

}  // namespace

void write_trace_csv(const SimTrace& trace, std::ostream& out) {
    const int n = trace.n, k = trace.k;
    out << 't';
    for (int i = 1; i <= n; ++i) out << ",x_" << i;
    for (int i = 1; i <= n; ++i) out << ",z_" << i;
    for (int i = 1; i <= k; ++i) out << ",w_" << i;
    for (int i = 1; i <= n; ++i) out << ",xi_p_" << i;
    out << ",e_obs,e_pred\n";
    for (std::size_t j = 0; j < trace.size(); ++j) {
        out << format_double(trace.t[j]);
        put_block(out, trace.x, j, n);
        put_block(out, trace.z, j, n);
        put_block(out, trace.w, j, k);
        put_block(out, trace.xi_p, j, n);
        put_value(out, trace.e_obs, j);
        put_value(out, trace.e_pred, j);
        out << '\n';
    }
}

void write_events_csv(const SimTrace& trace, std::ostream& out) {
    const int k = trace.k;
    out << "tau";
    for (int i = 1; i <= k; ++i) out << ",v_" << i;
    for (int i = 1; i <= k; ++i) out << ",w_pre_" << i;
    for (int i = 1; i <= k; ++i) out << ",w_post_" << i;
    out << '\n';
    for (const ResetRecord& e : trace.events) {
        out << format_double(e.tau);
        for (int i = 0; i < k; ++i) out << ',' << format_double(e.v(i));
        for (int i = 0; i < k; ++i) out << ',' << format_double(e.w_pre(i));
        for (int i = 0; i < k; ++i) out << ',' << format_double(e.w_post(i));
        out << '\n';
    }
}

std::string metrics_json(const Scenario& sc, const Metrics& m, const SimTrace& trace) {
    json doc;
    doc["scenario"] = sc.name;
    doc["config_hash"] = trace.config_hash;
    doc["seed"] = trace.seed;
    doc["dt"] = trace.dt;
    json c;
    if (m.has_constants) {
        c["sigma"] = number(m.constants.sigma);
        c["gamma"] = number(m.constants.gamma);
        c["C"] = number(m.constants.C);
        c["M_slope"] = number(m.constants.M_slope);
        c["B_simple"] = number(m.constants.B_simple);
        c["B_star"] = number(m.constants.B_star);
    }
    c["small_gain"] = number(m.theory.small_gain);
    c["beta"] = number(m.theory.beta);
    c["beta_p"] = number(m.theory.beta_p);
    c["Gamma"] = number(m.theory.Gamma);
    doc["constants"] = c;
    json meas;
    meas["fitted_rate"] = number(m.fitted_rate);
    meas["fit_degenerate"] = m.fit_degenerate;
    meas["e_pred_initial"] = number(m.e_pred_initial);
    meas["e_pred_terminal"] = number(m.e_pred_terminal);
    meas["e_obs_terminal"] = number(m.e_obs_terminal);
    meas["iss_gain"] = number(m.iss_gain);
    meas["apriori_worst_ratio"] = number(m.diagnostics.apriori_worst_ratio);
    meas["saturation_worst_ratio"] = number(m.diagnostics.saturation_worst_ratio);
    meas["steps"] = m.diagnostics.steps;
    meas["resets"] = trace.events.size();
    doc["measured"] = meas;
    json flags;
    flags["conditions_ok"] = m.conditions_ok;
    flags["converged"] = m.converged;
    flags["iss_within_bound"] = m.iss_within_bound;
    doc["flags"] = flags;
    return doc.dump(2);
}

std::string report_json(const Setup& setup) {
    json doc;
    doc["ok"] = setup.report.ok();
    json checks = json::array();
    for (const Check& c : setup.report.checks) {
        json e;
        e["name"] = c.name;
        e["value"] = number(c.value);
        e["limit"] = number(c.limit);
        e["pass"] = c.pass;
        e["required"] = c.required;
        if (!c.detail.empty()) e["detail"] = c.detail;
        checks.push_back(e);
    }
    doc["checks"] = checks;
    if (const Check* f = setup.report.first_failure()) doc["first_failure"] = f->name;
    return doc.dump(2);
}

}  // namespace sdobs
