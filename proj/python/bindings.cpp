/*
 * Copyright 2026 The nandspin-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Python bindings. Models, tensors, configs and reports cross the boundary as
// JSON text in the same formats the command line tool reads and writes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "nandspin/cli.hpp"
#include "nandspin/device.hpp"
#include "nandspin/fixed_point.hpp"
#include "nandspin/io.hpp"
#include "nandspin/primitives.hpp"
#include "nandspin/reference.hpp"
#include "nandspin/runtime.hpp"
#include "nandspin/toy.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace nandspin;

namespace {

RunOptions options_from(const std::string& config_json, int threads, bool trace) {
  RunConfig cfg = config_json.empty() ? RunConfig{} : RunConfig::from_json(parse_json(config_json, "<config>"));
  if (threads > 0) cfg.options.threads = threads;
  if (trace) cfg.options.trace = true;
  cfg.validate();
  return cfg.options;
}

ModelSpec model_from(const std::string& text) { return model_from_json(parse_json(text, "<model>")); }

FixedPointTensor tensor_from(const std::string& text, const ModelSpec& model) {
  std::optional<int> bits;
  if (model.input) bits = model.input->bits;
  else if (!model.layers.empty() && model.layers.front().k_i > 0) bits = model.layers.front().k_i;
  return tensor_from_json(parse_json(text, "<input>"), bits);
}

FixedPointTensor matrix(const std::vector<std::vector<std::int64_t>>& rows, int bits) {
  if (rows.empty() || rows.front().empty()) fail(ErrorCode::DimMismatch, "empty matrix");
  FixedPointTensor t({static_cast<int>(rows.size()), static_cast<int>(rows.front().size())}, bits);
  t.values.clear();
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) fail(ErrorCode::DimMismatch, "ragged matrix");
    t.values.insert(t.values.end(), r.begin(), r.end());
  }
  t.validate();
  return t;
}

std::string run(const std::string& model_json, const std::string& input_json, const std::string& config_json,
                int threads, bool trace) {
  const ModelSpec model = model_from(model_json);
  Runtime rt(options_from(config_json, threads, trace));
  const RunResult r = rt.run_model(model, tensor_from(input_json, model));
  json out = {{"output", output_document(r.output, r.argmax)}, {"report", report_json(r.ledger, rt.options().params)}};
  out["layers"] = json::array();
  for (const auto& l : r.layers)
    out["layers"].push_back({{"layer", l.layer},
                             {"label", l.label},
                             {"energy_fj", l.ledger.total_energy()},
                             {"latency_ns", l.ledger.total_latency()}});
  if (trace) out["trace"] = trace_jsonl(r.trace);
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "NAND-SPIN processing-in-MRAM functional simulator";

  // Messages start with the error code, e.g. "CapacityExceeded: ...".
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::enum_<MtjState>(m, "MtjState").value("AP", MtjState::AP).value("P", MtjState::P);

  py::class_<NandSpinDevice>(m, "Device")
      .def(py::init<int>(), py::arg("group_size") = NandSpinDevice::kDefaultGroupSize)
      .def_property_readonly("group_size", &NandSpinDevice::group_size)
      .def("erase", &NandSpinDevice::erase)
      .def(
          "program",
          [](NandSpinDevice& d, int i, bool bit, bool strict) {
            d.program(i, bit, strict ? ProgramCheck::Strict : ProgramCheck::Permissive);
          },
          py::arg("index"), py::arg("bit"), py::arg("strict") = true)
      .def("read", &NandSpinDevice::read)
      .def("and_sense", &NandSpinDevice::and_sense)
      .def("state", &NandSpinDevice::state)
      .def_property_readonly("data", &NandSpinDevice::data);

  m.def("run_model", &run, py::arg("model"), py::arg("input"), py::arg("config") = "", py::arg("threads") = 0,
        py::arg("trace") = false, "Simulate a model; returns a JSON document with output, report and layers.");

  m.def(
      "run_reference",
      [](const std::string& model_json, const std::string& input_json) {
        const ModelSpec model = model_from(model_json);
        const FixedPointTensor r = run_reference(model, tensor_from(input_json, model));
        std::optional<int> am;
        if (!model.layers.empty() && r.dims.size() == 1) am = argmax(r);
        return output_document(r, am).dump();
      },
      py::arg("model"), py::arg("input"), "Pure-integer reference pipeline.");

  m.def(
      "bitwise_convolution",
      [](const std::vector<std::vector<std::int64_t>>& input, int input_bits,
         const std::vector<std::vector<std::int64_t>>& weight, int weight_bits, int stride) {
        const auto out =
            bitwise_convolution(decompose(matrix(input, input_bits)), decompose(matrix(weight, weight_bits)), stride);
        std::vector<std::vector<std::int64_t>> rows(static_cast<std::size_t>(out.dims[0]));
        for (int y = 0; y < out.dims[0]; ++y)
          rows[y].assign(out.values.begin() + static_cast<std::ptrdiff_t>(y) * out.dims[1],
                         out.values.begin() + static_cast<std::ptrdiff_t>(y + 1) * out.dims[1]);
        return rows;
      },
      py::arg("input"), py::arg("input_bits"), py::arg("weight"), py::arg("weight_bits"), py::arg("stride") = 1);

  m.def(
      "quantize",
      [](const std::vector<std::int64_t>& v, double qmin, double qmax, int k) { return quantize(v, qmin, qmax, k); },
      py::arg("values"), py::arg("qmin"), py::arg("qmax"), py::arg("k"));
  m.def(
      "batch_norm",
      [](const std::vector<std::int64_t>& v, double mu, double sigma, double gamma, double beta, double eps, int k) {
        return batch_norm(v, BatchNormParams{mu, sigma, gamma, beta, eps}, k);
      },
      py::arg("values"), py::arg("mu"), py::arg("sigma"), py::arg("gamma"), py::arg("beta"), py::arg("eps") = 1e-5,
      py::arg("k") = 8);

  m.def(
      "toy_model", [](std::uint64_t seed) { return model_to_json(make_toy_model(seed)).dump(); }, py::arg("seed"));
  m.def(
      "toy_input",
      [](std::uint64_t seed) { return tensor_to_json(make_toy_input(make_toy_model(seed), seed)).dump(); },
      py::arg("seed"));
}
