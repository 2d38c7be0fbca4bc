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

#include "nandspin/cli.hpp"

#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "nandspin/io.hpp"
#include "nandspin/reference.hpp"
#include "nandspin/toy.hpp"

namespace nandspin {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::DimMismatch:
    case ErrorCode::StrideInvalid:
    case ErrorCode::DegenerateRange:
    case ErrorCode::InvalidParameter:
    case ErrorCode::UnknownOpKind:
      return kExitParse;
    case ErrorCode::CapacityExceeded:
      return kExitCapacity;
    default:
      return kExitInternal;
  }
}

namespace {

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Runs `body`, mapping simulator errors to exit codes with one stderr line.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error [InvariantViolation]: " << e.what() << "\n";
    return kExitInternal;
  }
}

RunConfig config_for(const CliArgs& args) {
  RunConfig cfg = load_config(args.config);
  if (args.threads) cfg.options.threads = *args.threads;
  if (args.trace) cfg.options.trace = true;
  cfg.out_dir = args.out_dir;
  cfg.seed = args.seed;
  cfg.validate();
  return cfg;
}

std::optional<int> input_bits(const ModelSpec& m) {
  if (m.input) return m.input->bits;
  if (!m.layers.empty() && m.layers.front().k_i > 0) return m.layers.front().k_i;
  return std::nullopt;
}

std::string dims_text(const std::vector<int>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? ", " : "") + std::to_string(d[i]);
  return s + "]";
}

}  // namespace

json output_document(const FixedPointTensor& t, std::optional<int> am) {
  json j = tensor_to_json(t);
  if (am) j["argmax"] = *am;
  return j;
}

std::string trace_jsonl(const std::vector<TraceEvent>& trace) {
  std::string s;
  for (const auto& e : trace) {
    json j = {{"op", e.op},
              {"subarray", e.subarray},
              {"rows", e.rows},
              {"category", std::string(to_string(e.category))},
              {"energy_fj", e.energy_fj},
              {"latency_ns", e.latency_ns}};
    if (!e.note.empty()) j["note"] = e.note;
    s += j.dump();
    s += '\n';
  }
  return s;
}

int cmd_infer(const CliArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = config_for(args);
    const ModelSpec model = load_model(args.model);
    const FixedPointTensor input = load_tensor(args.input, input_bits(model));
    Runtime rt(cfg.options);
    const RunResult r = rt.run_model(model, input);
    const auto& dir = cfg.out_dir;
    write_text_file(dir / "output.json", dump(output_document(r.output, r.argmax)));
    json report = report_json(r.ledger, rt.options().params);
    report["layers"] = json::array();
    for (const auto& l : r.layers)
      report["layers"].push_back({{"layer", l.layer},
                                  {"label", l.label},
                                  {"energy_fj", l.ledger.total_energy()},
                                  {"latency_ns", l.ledger.total_latency()}});
    write_text_file(dir / "report.json", dump(report));
    write_text_file(dir / "report.csv", report_csv(r.ledger));
    write_text_file(dir / "plan.json", dump(r.plan.to_json()));
    if (cfg.options.trace) write_text_file(dir / "trace.jsonl", trace_jsonl(r.trace));
    out << "output " << dims_text(r.output.dims) << " written to " << (dir / "output.json").string() << "\n";
    out << "energy " << r.ledger.total_energy() << " fJ, latency " << r.ledger.total_latency() << " ns\n";
    if (r.argmax) out << "argmax " << *r.argmax << " (host)\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_oracle(const CliArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ModelSpec model = load_model(args.model);
    const FixedPointTensor input = load_tensor(args.input, input_bits(model));
    const FixedPointTensor r = run_reference(model, input);
    std::optional<int> am;
    if (!model.layers.empty() && r.dims.size() == 1) am = argmax(r);
    write_text_file(args.out_dir / "output.json", dump(output_document(r, am)));
    out << "oracle output " << dims_text(r.dims) << " written to " << (args.out_dir / "output.json").string()
        << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_diff(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const json ja = load_json_file(a), jb = load_json_file(b);
    FixedPointTensor ta, tb;
    try {
      ta = tensor_from_json(ja, 32);
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, a.string() + ": " + e.what());
    }
    try {
      tb = tensor_from_json(jb, 32);
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, b.string() + ": " + e.what());
    }
    if (ta.dims != tb.dims) {
      out << "shape mismatch: " << dims_text(ta.dims) << " vs " << dims_text(tb.dims) << "\n";
      return static_cast<int>(kExitMismatch);
    }
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < ta.values.size(); ++i)
      if (ta.values[i] != tb.values[i]) {
        if (mismatches < 10) out << "index " << i << ": " << ta.values[i] << " vs " << tb.values[i] << "\n";
        ++mismatches;
      }
    if (mismatches) {
      out << mismatches << " of " << ta.values.size() << " values differ\n";
      return static_cast<int>(kExitMismatch);
    }
    out << "identical (" << ta.values.size() << " values)\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_memtest(const CliArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = config_for(args);
    const auto& g = cfg.options.geometry;
    CostParams params = cfg.options.params;
    params.group_size = g.group_size;
    int failures = 0;

    // Signal-level truth tables on a single device.
    for (int i = 0; i < g.group_size; ++i)
      for (int d = 0; d < 2; ++d)
        for (int w = 0; w < 2; ++w) {
          NandSpinDevice dev(g.group_size);
          ControlSignals erase{true, true, false, std::vector<bool>(static_cast<std::size_t>(g.group_size)), false, false};
          apply_signals(dev, erase);
          ControlSignals prog = erase;
          prog.er = false;
          prog.column_select = d;
          prog.row_select[static_cast<std::size_t>(i)] = true;
          apply_signals(dev, prog);
          ControlSignals sense{false, true, false, prog.row_select, static_cast<bool>(w), true};
          const auto o = apply_signals(dev, sense);
          if (!o || *o != (d && w)) ++failures;
        }

    // Row-group round trips over the whole subarray.
    Subarray sub(g, 0, &params, cfg.options.check);
    sub.set_category(Category::Load);
    std::mt19937_64 rng(cfg.seed);
    for (int dr = 0; dr < g.device_rows; ++dr) {
      std::vector<BitRow> data(static_cast<std::size_t>(g.group_size), zeros(static_cast<std::size_t>(g.columns)));
      for (auto& row : data)
        for (auto& b : row) b = static_cast<std::uint8_t>(rng() & 1);
      sub.write_row_group(dr, data);
      for (int k = 0; k < g.group_size; ++k)
        if (sub.read_bit_row(dr * g.group_size + k) != data[static_cast<std::size_t>(k)]) ++failures;
    }
    write_text_file(cfg.out_dir / "report.json", dump(report_json(sub.ledger(), params)));
    write_text_file(cfg.out_dir / "report.csv", report_csv(sub.ledger()));
    out << "memtest: " << g.device_rows << " row groups, " << g.bit_rows() << " bit rows x " << g.columns
        << " columns, " << failures << " failures\n";
    return failures ? static_cast<int>(kExitInternal) : static_cast<int>(kExitOk);
  });
}

int cmd_gen(const CliArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ModelSpec m = make_toy_model(args.seed);
    const FixedPointTensor in = make_toy_input(m, args.seed);
    write_text_file(args.out_dir / "model.json", dump(model_to_json(m)));
    write_text_file(args.out_dir / "input.json", dump(tensor_to_json(in)));
    out << "toy model (seed " << args.seed << ") written to " << args.out_dir.string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Functional simulator of a NAND-SPIN processing-in-MRAM accelerator"};
  app.require_subcommand(1);
  CliArgs args;
  std::string out_dir = ".";
  std::string config;
  int threads = 0;

  auto common = [&](CLI::App* sub, bool model_input) {
    sub->add_option("--config", config, "Run configuration JSON (falls back to $NANDSPIN_CONFIG)");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", args.seed, "Seed for built-in random generators")->capture_default_str();
    if (model_input) {
      sub->add_option("--model", args.model, "Model JSON")->required();
      sub->add_option("--input", args.input, "Input tensor (JSON or binary)")->required();
    }
  };

  auto* infer = app.add_subcommand("infer", "Run a model on simulated subarrays");
  common(infer, true);
  infer->add_flag("--trace", args.trace, "Write trace.jsonl");
  infer->add_option("--threads", threads, "Worker threads for independent subarrays")->check(CLI::PositiveNumber);

  auto* oracle = app.add_subcommand("oracle", "Run the pure-integer reference pipeline");
  common(oracle, true);

  auto* diff = app.add_subcommand("diff", "Compare two output tensors");
  std::string diff_a, diff_b;
  diff->add_option("a", diff_a, "First output JSON")->required();
  diff->add_option("b", diff_b, "Second output JSON")->required();

  auto* memtest = app.add_subcommand("memtest", "Memory-mode self test");
  common(memtest, false);

  auto* gen = app.add_subcommand("gen", "Write a random toy model and input");
  common(gen, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitParse;
  }
  args.out_dir = out_dir;
  if (!config.empty()) args.config = config;
  if (threads > 0) args.threads = threads;

  if (infer->parsed()) return cmd_infer(args, std::cout, std::cerr);
  if (oracle->parsed()) return cmd_oracle(args, std::cout, std::cerr);
  if (diff->parsed()) return cmd_diff(diff_a, diff_b, std::cout, std::cerr);
  if (memtest->parsed()) return cmd_memtest(args, std::cout, std::cerr);
  return cmd_gen(args, std::cout, std::cerr);
}

}  // namespace nandspin
