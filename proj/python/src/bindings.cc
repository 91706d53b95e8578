// Copyright 2026 The dpmob Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpmob/cli.h"
#include "dpmob/data.h"
#include "dpmob/errors.h"
#include "dpmob/forecast.h"
#include "dpmob/privacy.h"

namespace py = pybind11;

namespace dpmob {
namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor ToTensor(const Array& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Tensor({rows, cols}, std::vector<double>(a.data(), a.data() + a.size()));
}

Array ToArray(const Tensor& t) {
  Array out({t.dim(0), t.dim(1)});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::tuple RunCliCaptured(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"dpmob"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace
}  // namespace dpmob

PYBIND11_MODULE(_dpmob, m) {
  using namespace dpmob;
  m.doc() = "Bindings for the dpmob library.";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<RunFailed>(m, "RunFailed", PyExc_RuntimeError);

  m.def("version", &Version);

  m.def("gaussian_sigma", &GaussianSigma, py::arg("l2_sensitivity"), py::arg("epsilon"),
        py::arg("delta"));
  m.def(
      "compute_epsilon",
      [](double q, double noise_multiplier, std::int64_t steps, double delta) {
        const EpsilonResult r = ComputeEpsilon(q, noise_multiplier, steps, delta);
        return py::make_tuple(r.epsilon, r.order);
      },
      py::arg("q"), py::arg("noise_multiplier"), py::arg("steps"), py::arg("delta"),
      "Returns (epsilon, optimal Renyi order).");
  m.def("delta_budget_check", &DeltaBudgetCheck, py::arg("delta"), py::arg("n"));
  m.def("utility_loss", &UtilityLoss, py::arg("dp"), py::arg("non_private"));

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("rmse", &MetricsReport::rmse)
      .def_readonly("mae", &MetricsReport::mae)
      .def_readonly("mean_rmse", &MetricsReport::mean_rmse)
      .def_readonly("mean_mae", &MetricsReport::mean_mae)
      .def_readonly("std_rmse", &MetricsReport::std_rmse);
  m.def(
      "compute_metrics",
      [](const Array& y, const Array& y_hat) { return ComputeMetrics(ToTensor(y), ToTensor(y_hat)); },
      py::arg("y"), py::arg("y_hat"));

  py::class_<RegionStats>(m, "RegionStats")
      .def_readonly("min", &RegionStats::min)
      .def_readonly("max", &RegionStats::max)
      .def_readonly("mean", &RegionStats::mean)
      .def_readonly("std", &RegionStats::std)
      .def_readonly("median", &RegionStats::median);

  py::class_<MobilitySeries>(m, "MobilitySeries")
      .def_property_readonly("regions", &MobilitySeries::regions)
      .def_property_readonly("timestamps",
                             [](const MobilitySeries& s) {
                               std::vector<std::string> out;
                               for (Timestamp t : s.timestamps()) out.push_back(FormatTimestamp(t));
                               return out;
                             })
      .def_property_readonly("counts", [](const MobilitySeries& s) { return ToArray(s.counts()); })
      .def("__len__", &MobilitySeries::length);

  m.def("load_csv", &LoadCsv, py::arg("path"));
  m.def("iqr_clean", &IqrClean, py::arg("series"));
  m.def("descriptive_stats", &DescriptiveStats, py::arg("series"));

  m.def("run_cli", &RunCliCaptured, py::arg("args"),
        "Runs the dpmob command line; returns (exit_code, stdout, stderr).");
}
