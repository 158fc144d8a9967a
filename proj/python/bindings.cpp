#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "pacfl/errors.hpp"
#include "pacfl/experiment.hpp"

namespace py = pybind11;

namespace {

pacfl::ExperimentConfig config_from(const std::string& text) {
  auto cfg = pacfl::parse_config_text(text).get<pacfl::ExperimentConfig>();
  cfg.scenario.validate();
  return cfg;
}

// Runs a subcommand and returns (exit code, log text).
template <typename F>
py::tuple run_cmd(F&& f) {
  std::ostringstream log;
  int rc;
  {
    py::gil_scoped_release release;
    rc = f(log);
  }
  return py::make_tuple(rc, log.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of pacfl";

  static py::exception<pacfl::ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<pacfl::NumericError> numeric_error(m, "NumericError",
                                                          PyExc_ArithmeticError);
  static py::exception<pacfl::IoError> io_error(m, "IoError", PyExc_OSError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pacfl::ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const pacfl::NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const pacfl::IoError& e) {
      py::set_error(io_error, e.what());
    }
  });

  m.def("privacy_upper_bound",
        [](double gamma, double m_, double c_a, double D, double delta_up, double c2, double c_b,
           int T) {
          const auto b = pacfl::privacy_upper_bound(gamma, m_, c_a, D, delta_up, c2, c_b, T);
          return py::make_tuple(b.rhs, b.precondition_ok, b.threshold);
        },
        py::arg("gamma"), py::arg("m"), py::arg("c_a"), py::arg("D"), py::arg("delta_up"),
        py::arg("c2"), py::arg("c_b"), py::arg("T"),
        "Returns (rhs, precondition_ok, threshold).");
  m.def("utility_upper_bound", &pacfl::utility_upper_bound, py::arg("C"), py::arg("lam"),
        py::arg("delta_two"), py::arg("M"), py::arg("d"), py::arg("D"), py::arg("eta"),
        py::arg("m"));
  m.def("utility_upper_bound_he", &pacfl::utility_upper_bound_he, py::arg("C"), py::arg("lam"),
        py::arg("M"), py::arg("d"), py::arg("D"), py::arg("eta"), py::arg("m"));
  m.def("covering_number", &pacfl::covering_number, py::arg("d"), py::arg("D"), py::arg("lam"));
  m.def("log_covering_number", &pacfl::log_covering_number, py::arg("d"), py::arg("D"),
        py::arg("lam"));
  m.def("sample_lower_bound", &pacfl::sample_lower_bound, py::arg("eps"), py::arg("delta"),
        py::arg("c_a"), py::arg("delta_up"));
  m.def("not_pac_condition", &pacfl::not_pac_condition, py::arg("delta_up"), py::arg("m_prot"),
        py::arg("eps"));
  m.def("private_pac_sample_size", &pacfl::private_pac_sample_size, py::arg("alpha"),
        py::arg("eps_p"), py::arg("c2"), py::arg("eta"), py::arg("constant_factor") = 1.0);
  m.def("bound_names", &pacfl::bound_names);
  m.def("trial_seed", &pacfl::trial_seed, py::arg("master_seed"), py::arg("trial"));

  m.def("default_config", [] { return pacfl::Json(pacfl::ExperimentConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) {
    return pacfl::Json(config_from(text)).dump();
  });
  m.def("run_trial",
        [](const std::string& text, int trial) {
          const auto cfg = config_from(text);
          pacfl::TrialResult r;
          {
            py::gil_scoped_release release;
            const auto c = cfg.scenario.fixed_constants
                               ? *cfg.scenario.fixed_constants
                               : pacfl::calibrate(cfg.scenario, cfg.master_seed);
            r = pacfl::run_trial(cfg.scenario, c, trial,
                                 pacfl::trial_seed(cfg.master_seed, trial));
          }
          return pacfl::Json(r).dump();
        },
        py::arg("config"), py::arg("trial") = 0);
  m.def("verify_bound",
        [](const std::string& name, const std::string& text) {
          const auto cfg = config_from(text);
          pacfl::BoundReport rep;
          {
            py::gil_scoped_release release;
            rep = pacfl::verify_bound(name, cfg.scenario, cfg.trials, cfg.master_seed,
                                      cfg.effective_threads());
          }
          return pacfl::Json(rep).dump();
        },
        py::arg("bound"), py::arg("config"));

  m.def("train", [](const std::string& text) {
    const auto cfg = config_from(text);
    return run_cmd([&](std::ostream& log) { return pacfl::cmd_train(cfg, log); });
  });
  m.def("attack",
        [](const std::string& text, const std::string& run_dir, bool dump) {
          const auto cfg = config_from(text);
          return run_cmd(
              [&](std::ostream& log) { return pacfl::cmd_attack(cfg, run_dir, dump, log); });
        },
        py::arg("config"), py::arg("run_dir"), py::arg("dump_trajectory") = false);
  m.def("verify", [](const std::string& text, const std::string& bound) {
    const auto cfg = config_from(text);
    return run_cmd([&](std::ostream& log) { return pacfl::cmd_verify(cfg, bound, log); });
  });
  m.def("sweep",
        [](const std::string& text, const std::string& axis, const std::vector<double>& values) {
          const auto cfg = config_from(text);
          return run_cmd(
              [&](std::ostream& log) { return pacfl::cmd_sweep(cfg, axis, values, log); });
        });
  m.def("estimate_constants", [](const std::string& text) {
    const auto cfg = config_from(text);
    return run_cmd([&](std::ostream& log) { return pacfl::cmd_estimate_constants(cfg, log); });
  });
}
