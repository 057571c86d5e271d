#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cots/binding.hpp"
#include "cots/driver.hpp"
#include "cots/mock_sut.hpp"
#include "cots/openapi.hpp"
#include "cots/parser.hpp"
#include "cots/report.hpp"
#include "cots/runtime.hpp"
#include "cots/semantics.hpp"

namespace fs = std::filesystem;
using namespace cots;

namespace {

// Exit statuses are a scripting contract:
//   0 all runs passed, 1 at least one fault verdict,
//   2 usage or validation error, 3 transport failure before any oracle ran.
constexpr int kExitOk = 0;
constexpr int kExitFault = 1;
constexpr int kExitUsage = 2;
constexpr int kExitTransport = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

parser::ParsedModel load_model(const std::string& path, const std::string& name) {
  auto defs = parser::parse_file(slurp(path));
  if (name.empty()) {
    if (defs.size() != 1)
      throw std::runtime_error(path + " defines " + std::to_string(defs.size()) +
                               " models; pick one with --model-name");
    return std::move(defs.front());
  }
  for (auto& d : defs)
    if (d.name == name) return std::move(d);
  throw std::runtime_error("no model named '" + name + "' in " + path);
}

runtime::Preamble load_preamble_with_env(const std::string& path) {
  runtime::Preamble p = path.empty() ? runtime::Preamble{} : runtime::load_preamble_file(path);
  if (const char* key = std::getenv("COTS_API_KEY"); key && *key) {
    if (!p.auth) p.auth = runtime::AuthConfig{};
    p.auth->value = key;
  }
  return p;
}

// Checks that every generator and assertion predicate the model mentions is
// known. Returns problems as strings.
std::vector<std::string> check_preamble_refs(const parser::ParsedModel& model,
                                             const runtime::Preamble& preamble) {
  std::vector<std::string> problems;
  std::function<void(const ast::SessionPtr&)> go = [&](const ast::SessionPtr& s) {
    if (!s) return;
    if (const auto* rec = std::get_if<ast::Rec>(&s->node)) {
      go(rec->body);
    } else if (const auto* ic = std::get_if<ast::InternalChoice>(&s->node)) {
      for (const auto& b : ic->branches) {
        for (const auto& a : b.args)
          if (a.is_fresh() && !runtime::find_generator(preamble, a.generator))
            problems.push_back("unknown generator '" + a.generator + "' (in !" + b.op + ")");
        go(b.cont);
      }
    } else if (const auto* ec = std::get_if<ast::ExternalChoice>(&s->node)) {
      for (const auto& b : ec->branches) {
        if (b.assertion) {
          auto it = preamble.assertions.find(b.assertion->predicate);
          if (it == preamble.assertions.end())
            problems.push_back("unknown assertion predicate '" + b.assertion->predicate + "'");
          else if (it->second.params.size() != b.assertion->args.size())
            problems.push_back("assertion '" + b.assertion->predicate + "' takes " +
                               std::to_string(it->second.params.size()) + " arguments, called with " +
                               std::to_string(b.assertion->args.size()));
        }
        go(b.cont);
      }
    }
  };
  go(model.root);
  return problems;
}

struct ValidatedInputs {
  parser::ParsedModel model;
  openapi::ApiSpec spec;
  runtime::Preamble preamble;
  binding::BindingPlan plan;
};

// Parses, binds and cross-checks everything; prints errors and returns
// nullopt when validation fails.
std::optional<ValidatedInputs> validate_inputs(const std::string& model_path,
                                               const std::string& spec_path,
                                               const std::string& preamble_path,
                                               const std::string& model_name, bool quiet) {
  try {
    ValidatedInputs v{load_model(model_path, model_name), openapi::load_spec_file(spec_path),
                      load_preamble_with_env(preamble_path), {}};
    for (const auto& w : v.spec.warnings) std::cerr << "warning: " << w << "\n";
    bool ok = true;
    auto bound = binding::bind(v.model, v.spec, v.preamble.aliases);
    for (const auto& e : bound.errors) {
      std::cout << "error[" << e.kind << "]: " << v.model.name << e.path << ": " << e.message << "\n";
      ok = false;
    }
    for (const auto& p : check_preamble_refs(v.model, v.preamble)) {
      std::cout << "error[Preamble]: " << p << "\n";
      ok = false;
    }
    if (!ok) return std::nullopt;
    v.plan = std::move(*bound.plan);
    if (!quiet) std::cout << "model '" << v.model.name << "' validates against " << spec_path << "\n";
    return v;
  } catch (const parser::SyntaxError& e) {
    std::cout << "error[Syntax]: " << e.what() << "\n";
  } catch (const parser::ModelError& e) {
    for (const auto& we : e.errors)
      std::cout << "error[WellFormedness]: " << we.path << ": " << we.message << "\n";
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << "\n";
  }
  return std::nullopt;
}

int cmd_run(const std::string& model_path, const std::string& spec_path,
            const std::string& preamble_path, const std::string& model_name,
            std::string base_url, int runs, uint64_t seed, const std::string& out_dir,
            int max_unfoldings, double timeout, bool stop_on_first_fail, int parallel) {
  auto v = validate_inputs(model_path, spec_path, preamble_path, model_name, true);
  if (!v) return kExitUsage;
  if (base_url.empty()) base_url = v->spec.base_url_hint;
  if (base_url.empty()) {
    std::cout << "error: no --base-url given and the spec declares no servers\n";
    return kExitUsage;
  }

  driver::RunConfig cfg;
  cfg.base_url = base_url;
  cfg.max_rec_unfoldings = max_unfoldings;
  cfg.request_timeout_sec = timeout;
  driver::CampaignConfig camp;
  camp.runs = runs;
  camp.base_seed = seed;
  camp.stop_on_first_fail = stop_on_first_fail;
  camp.parallel = parallel;

  driver::TestSetup setup{v->model, v->plan, v->preamble, v->spec};
  driver::CampaignReport report;
  try {
    report = driver::run_campaign(setup, cfg, camp);
  } catch (const runtime::ConfigError& e) {
    std::cout << "error[Config]: " << e.what() << "\n";
    return kExitUsage;
  }

  fs::create_directories(out_dir);
  std::ostringstream log;
  report::write_log(report.records, log, fs::path(out_dir));
  report::write_file_atomic(fs::path(out_dir) / "runs.jsonl", log.str());
  auto cov = report::coverage(v->model, report.records);
  report::write_file_atomic(fs::path(out_dir) / "coverage.json", cov.to_json().dump(2) + "\n");
  int scripts = 0;
  for (const auto& r : report.records) {
    if (!r.verdict.is_fault() || r.http_log.empty()) continue;
    report::write_file_atomic(fs::path(out_dir) / ("repro-run-" + std::to_string(r.run_index) + ".sh"),
                              report::emit_curl(r), /*executable=*/true);
    ++scripts;
  }

  std::cout << "runs: " << report.runs << "  pass: " << report.passes
            << "  exhausted: " << report.exhausted << "\n";
  std::cout << "bad_status_code: " << report.bad_status
            << "  bad_response_body: " << report.bad_body
            << "  assertion_fail: " << report.assertion_fails
            << "  transport_error: " << report.transport_errors << "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "coverage: nodes %d/%d (%.2f)  branches %d/%d (%.2f)",
                cov.nodes_covered, cov.nodes_total, cov.node_ratio(), cov.branches_covered,
                cov.branches_total, cov.branch_ratio());
  std::cout << buf << "\n";
  std::cout << "wrote " << (fs::path(out_dir) / "runs.jsonl").string() << ", coverage.json";
  if (scripts) std::cout << " and " << scripts << " repro script(s)";
  std::cout << " (" << report.wall_ms << " ms elapsed)\n";

  if (report.transport_errors > 0 && !report.any_response) return kExitTransport;
  if (report.fault_verdicts() > 0 || report.transport_errors > 0) return kExitFault;
  return kExitOk;
}

int cmd_enumerate(const std::string& model_path, const std::string& preamble_path,
                  const std::string& model_name, std::optional<int> rec_bound, bool dump) {
  try {
    auto model = load_model(model_path, model_name);
    auto preamble = load_preamble_with_env(preamble_path);
    auto cfg = semantics::EnumConfig::from_oracle(preamble.oracle, rec_bound);
    auto traces = semantics::enumerate_traces(model.root, cfg, runtime::Env{}, preamble.assertions);
    std::cout << traces.size() << (traces.size() == 1 ? " trace" : " traces") << "\n";
    if (dump)
      for (const auto& t : traces) std::cout << (t.empty() ? "(empty)" : semantics::trace_str(t)) << "\n";
    return kExitOk;
  } catch (const semantics::SemanticsError& e) {
    std::cout << "error[Semantics]: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_mock(int port, const std::vector<std::string>& faults, const std::string& api_key) {
  mock::FaultFlags flags;
  try {
    flags = mock::FaultFlags::parse(faults);
  } catch (const std::invalid_argument& e) {
    std::cout << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  mock::MockServer server(flags, api_key, /*log_requests=*/true);
  if (!server.start(port)) {
    std::cout << "error: cannot bind port " << port << "\n";
    return kExitFault;
  }
  std::cout << "mock SUT listening on " << server.base_url() << " (Ctrl-C to stop)\n";
  std::cout << "faults: " << flags.to_json().dump() << "\n";
  // block until interrupted; the server thread does the work
  while (true) std::this_thread::sleep_for(std::chrono::seconds(3600));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cots: model-based testing for REST APIs driven by COpenAPI session models"};
  app.require_subcommand(1);
  std::string model_name;
  app.add_option("--model-name", model_name, "definition to use when a .capi file has several");

  std::string model_path, spec_path, preamble_path;

  auto* validate = app.add_subcommand("validate", "parse a model and bind it against an OpenAPI spec");
  validate->add_option("--model", model_path, "COpenAPI model file (.capi)")->required();
  validate->add_option("--spec", spec_path, "OpenAPI 3.x document (JSON or YAML)")->required();
  validate->add_option("--preamble", preamble_path, "preamble (generators/assertions/aliases/auth)");

  std::string base_url, out_dir = "cots-out";
  int runs = 50, max_unfoldings = 50, parallel = 1;
  uint64_t seed = 42;
  double timeout = 10.0;
  bool stop_on_first_fail = false;
  auto* run = app.add_subcommand("run", "execute a randomized test campaign against a live SUT");
  run->add_option("--model", model_path)->required();
  run->add_option("--spec", spec_path)->required();
  run->add_option("--preamble", preamble_path);
  run->add_option("--base-url", base_url, "SUT base URL (default: first server in the spec)");
  run->add_option("--runs", runs, "number of test runs");
  run->add_option("--seed", seed, "campaign seed; run i uses seed+i");
  run->add_option("--out", out_dir, "output directory for runs.jsonl, coverage.json, repro scripts");
  run->add_option("--max-unfoldings", max_unfoldings, "loop iterations per recursion binder");
  run->add_option("--timeout", timeout, "per-request timeout in seconds");
  run->add_flag("--stop-on-first-fail", stop_on_first_fail);
  run->add_option("--parallel", parallel,
                  "concurrent runs; runs against a stateful SUT may interfere, keep at 1 unless "
                  "the SUT isolates clients");

  bool dump = false;
  int rec_bound = -1;
  auto* enumerate = app.add_subcommand("enumerate", "enumerate the model's trace set (the oracle)");
  enumerate->add_option("--model", model_path)->required();
  enumerate->add_option("--preamble", preamble_path)->required();
  enumerate->add_option("--rec-bound", rec_bound, "recursion unfoldings (overrides oracle.recBound)");
  enumerate->add_flag("--dump", dump, "print each trace on one line");

  int port = 8080;
  std::vector<std::string> faults;
  std::string api_key = "test-api-key";
  auto* mock_cmd = app.add_subcommand("mock", "serve the fault-injectable fixture SUT");
  mock_cmd->add_option("--port", port);
  mock_cmd->add_option("--faults", faults, "fault flags to enable (F1..F5)")->delimiter(',');
  mock_cmd->add_option("--api-key", api_key, "required X-API-Key value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  if (validate->parsed()) {
    return validate_inputs(model_path, spec_path, preamble_path, model_name, false) ? kExitOk
                                                                                    : kExitUsage;
  }
  if (run->parsed()) {
    return cmd_run(model_path, spec_path, preamble_path, model_name, base_url, runs, seed, out_dir,
                   max_unfoldings, timeout, stop_on_first_fail, parallel);
  }
  if (enumerate->parsed()) {
    return cmd_enumerate(model_path, preamble_path, model_name,
                         rec_bound >= 0 ? std::optional<int>(rec_bound) : std::nullopt, dump);
  }
  if (mock_cmd->parsed()) {
    return cmd_mock(port, faults, api_key);
  }
  return kExitUsage;
}
