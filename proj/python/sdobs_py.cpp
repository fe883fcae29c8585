#include "sdobs/analysis.hpp"
#include "sdobs/io.hpp"
#include "sdobs/predictor.hpp"
#include "sdobs/saturation.hpp"
#include "sdobs/scenario.hpp"
#include "sdobs/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace sdobs;

namespace {

// Stacks per-sample vectors into an (N, dim) array.
Mat stack(const std::vector<Vec>& rows) {
    if (rows.empty()) return Mat(0, 0);
    Mat out(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return out;
}

py::dict theory_dict(const TheoryConstants& t) {
    py::dict d;
    d["small_gain"] = t.small_gain;
    d["beta"] = t.beta;
    d["beta_p"] = t.beta_p;
    d["Gamma"] = t.Gamma;
    return d;
}

py::dict report_dict(const Setup& s) {
    py::list checks;
    for (const Check& c : s.report.checks) {
        py::dict d;
        d["name"] = c.name;
        d["value"] = c.value;
        d["limit"] = c.limit;
        d["pass"] = c.pass;
        d["required"] = c.required;
        d["detail"] = c.detail;
        checks.append(d);
    }
    py::dict out;
    out["ok"] = s.report.ok();
    out["checks"] = checks;
    out["theory"] = theory_dict(s.theory);
    out["dt"] = s.dt;
    out["delta"] = s.delta;
    out["L"] = s.L;
    if (s.constants) {
        py::dict c;
        c["sigma"] = s.constants->sigma;
        c["gamma"] = s.constants->gamma;
        c["C"] = s.constants->C;
        c["B_star"] = s.constants->B_star;
        out["constants"] = c;
    }
    return out;
}

py::dict trace_dict(const SimTrace& tr) {
    py::dict d;
    d["t"] = Vec(Eigen::Map<const Vec>(tr.t.data(), static_cast<Eigen::Index>(tr.t.size())));
    d["x"] = stack(tr.x);
    d["z"] = stack(tr.z);
    d["w"] = stack(tr.w);
    d["xi_p"] = stack(tr.xi_p);
    d["e_obs"] = tr.e_obs;
    d["e_pred"] = tr.e_pred;
    d["stage_err"] = tr.stage_err;
    py::list events;
    for (const ResetRecord& e : tr.events) events.append(py::make_tuple(e.tau, e.w_pre, e.w_post));
    d["events"] = events;
    d["seed"] = tr.seed;
    d["config_hash"] = tr.config_hash;
    return d;
}

LoadedScenario load(const std::string& path, std::optional<std::uint64_t> seed) { return load_scenario(path, seed); }

}  // namespace

PYBIND11_MODULE(_sdobs, m) {
    m.doc() = "Sampled-data observer and predictor simulations";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<GainConditionViolated>(m, "GainConditionViolated", base.ptr());
    py::register_exception<IntegrationDiverged>(m, "IntegrationDiverged", base.ptr());
    py::register_exception<WindowUnderflow>(m, "WindowUnderflow", base.ptr());

    m.def(
        "validate",
        [](const std::string& path, std::optional<std::uint64_t> seed) {
            return report_dict(prepare(load(path, seed).scenario));
        },
        py::arg("path"), py::arg("seed") = py::none(), "Check every condition of a scenario file.");

    m.def(
        "run",
        [](const std::string& path, std::optional<std::uint64_t> seed, bool force,
           std::optional<double> horizon) {
            LoadedScenario ls = load(path, seed);
            if (horizon) ls.scenario.horizon = *horizon;
            const Setup setup = prepare(ls.scenario);
            if (!force) enforce(setup.report);
            SimTrace tr;
            {
                py::gil_scoped_release release;
                tr = simulate(ls.scenario, setup);
            }
            tr.config_hash = ls.hash;
            const Metrics met = compute_metrics(ls.scenario, setup, tr);
            py::dict out = trace_dict(tr);
            out["metrics"] = py::module_::import("json").attr("loads")(metrics_json(ls.scenario, met, tr));
            return out;
        },
        py::arg("path"), py::arg("seed") = py::none(), py::arg("force") = false,
        py::arg("horizon") = py::none(), "Simulate a scenario file and return traces and metrics.");

    m.def("config_hash", [](const std::string& path) { return load(path, std::nullopt).hash; });

    m.def("cascade_beta", &cascade_beta, py::arg("sigma"), py::arg("delta"), py::arg("L"));
    m.def(
        "validate_cascade",
        [](double r, int p, double mu, double sigma, double L) {
            const CascadeConfig c = validate_cascade(r, p, mu, sigma, L);
            py::dict d;
            d["delta"] = c.delta;
            d["beta"] = c.beta;
            d["gain_product"] = c.gain_product;
            return d;
        },
        py::arg("r"), py::arg("p"), py::arg("mu"), py::arg("sigma"), py::arg("L"));
    m.def("beta_gas", &beta_gas, py::arg("sigma"), py::arg("delta"), py::arg("G1"), py::arg("G2"));
    m.def("small_gain_product", &small_gain_product, py::arg("C"), py::arg("sigma"), py::arg("B"));
    m.def("saturation_q", &saturation_q, py::arg("s"));
}
