#include "cots/driver.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <thread>

#include <httplib.h>

namespace cots::driver {

using ast::SessionPtr;
using binding::ArgSlot;
using runtime::Env;

const char* Verdict::kind_name(Kind k) {
  switch (k) {
    case Kind::Pass: return "pass";
    case Kind::BadStatusCode: return "bad_status_code";
    case Kind::BadResponseBody: return "bad_response_body";
    case Kind::AssertionFail: return "assertion_fail";
    case Kind::TransportError: return "transport_error";
    case Kind::ModelExhausted: return "model_exhausted";
  }
  return "?";
}

Json Verdict::to_json() const {
  Json out{{"kind", kind_name(kind)}};
  switch (kind) {
    case Kind::BadStatusCode:
      out["expected"] = expected_codes;
      out["actual"] = actual_code;
      break;
    case Kind::BadResponseBody: {
      Json v = Json::array();
      for (const auto& violation : violations)
        v.push_back({{"path", violation.path}, {"message", violation.message}});
      out["violations"] = v;
      break;
    }
    case Kind::AssertionFail:
      out["predicate"] = predicate;
      out["args"] = assert_args;
      if (!note.empty()) out["note"] = note;
      break;
    case Kind::TransportError:
      out["detail"] = detail;
      break;
    case Kind::ModelExhausted:
      out["recBound"] = rec_bound;
      break;
    default:
      break;
  }
  return out;
}

namespace {

std::string url_encode(const std::string& s, bool keep_slash) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    bool safe = std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~' ||
                (keep_slash && c == '/');
    if (safe) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xf]);
    }
  }
  return out;
}

// JSON value -> path/query/header text: strings travel raw, everything else
// as compact JSON.
std::string value_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

struct PendingResponse {
  int status = 0;
  std::string body;
};

struct RunState {
  const TestSetup& setup;
  const RunConfig& cfg;
  runtime::Rng rng;
  runtime::GenState gen_state;
  Env env;
  RunRecord record;
  httplib::Client client;
  std::string base;

  RunState(const TestSetup& s, const RunConfig& c, int run_index)
      : setup(s), cfg(c), rng(c.seed), client(c.base_url) {
    record.run_index = run_index;
    record.seed = c.seed;
    base = c.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    auto whole = static_cast<time_t>(c.request_timeout_sec);
    auto frac_usec = static_cast<time_t>((c.request_timeout_sec - whole) * 1e6);
    client.set_connection_timeout(whole, frac_usec);
    client.set_read_timeout(whole, frac_usec);
    client.set_write_timeout(whole, frac_usec);
    client.set_keep_alive(true);  // one connection per run
  }
};

const ast::SendBranch& pick_branch(const ast::InternalChoice& ic, RunState& st) {
  double total = 0;
  std::vector<double> weights;
  for (const auto& b : ic.branches) {
    auto it = st.cfg.choice_weights.find(b.op);
    double w = it == st.cfg.choice_weights.end() ? 1.0 : it->second;
    weights.push_back(w);
    total += w;
  }
  double r = st.rng.next_unit() * total;
  double acc = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return ic.branches[i];
  }
  return ic.branches.back();
}

// Checks a generated value against its declared model type.
void check_generated(const RunState& st, const ast::Arg& a, const Json& v) {
  using K = ast::TypeName::Kind;
  auto bad = [&](const std::string& why) {
    throw runtime::ConfigError("generator '" + a.generator + "' for '" + a.name + "' " + why);
  };
  switch (a.type->kind) {
    case K::Int:
      if (!v.is_number_integer() && !v.is_number_unsigned()) bad("did not produce an integer");
      break;
    case K::Float:
      if (!v.is_number()) bad("did not produce a number");
      break;
    case K::Bool:
      if (!v.is_boolean()) bad("did not produce a boolean");
      break;
    case K::String:
      if (!v.is_string()) bad("did not produce a string");
      break;
    case K::Named: {
      auto it = st.setup.spec.schemas.find(a.type->schema);
      if (it == st.setup.spec.schemas.end()) bad("has unknown schema type " + a.type->schema);
      auto violations = openapi::validate_value(st.setup.spec, it->second, v);
      if (!violations.empty())
        bad("produced a value violating schema " + a.type->schema + " (" + violations[0].path +
            ": " + violations[0].message + ")");
      break;
    }
  }
}

// Fires the HTTP request for one send prefix. Returns false on transport
// failure (verdict already recorded).
bool fire_request(RunState& st, const ast::SendBranch& branch, const std::vector<Json>& values,
                  PendingResponse& pending) {
  const auto& bound = st.setup.plan.sends.at(branch.id);
  std::string path = bound.op.path_template;
  std::string query;
  HttpExchange ex;
  ex.method = bound.op.method;
  ex.base = st.base;

  for (size_t i = 0; i < branch.args.size(); ++i) {
    const auto& slot = bound.slots[i];
    const Json& v = values[i];
    switch (slot.kind) {
      case ArgSlot::Kind::PathParam: {
        std::string hole = "{" + slot.param + "}";
        size_t at = path.find(hole);
        if (at != std::string::npos) path.replace(at, hole.size(), url_encode(value_text(v), false));
        break;
      }
      case ArgSlot::Kind::QueryParam:
        query += (query.empty() ? "?" : "&") + url_encode(slot.param, false) + "=" +
                 url_encode(value_text(v), false);
        break;
      case ArgSlot::Kind::HeaderParam:
        ex.headers.emplace_back(slot.param, value_text(v));
        break;
      case ArgSlot::Kind::Body:
        ex.body = v.dump();
        break;
    }
  }

  const auto& auth = st.setup.preamble.auth;
  if (auth) {
    bool present = false;
    for (const auto& [k, _] : ex.headers)
      if (k == auth->header) present = true;
    if (!present) ex.headers.emplace_back(auth->header, auth->value);
  }
  if (ex.body) ex.headers.emplace_back("Content-Type", "application/json");
  ex.path_and_query = url_encode(path, true) + query;

  httplib::Headers headers;
  for (const auto& [k, v] : ex.headers)
    if (k != "Content-Type") headers.emplace(k, v);

  const std::string& m = bound.op.method;
  httplib::Result res;
  std::string body = ex.body.value_or("");
  if (m == "GET") {
    res = st.client.Get(ex.path_and_query, headers);
  } else if (m == "POST") {
    res = st.client.Post(ex.path_and_query, headers, body, "application/json");
  } else if (m == "PUT") {
    res = st.client.Put(ex.path_and_query, headers, body, "application/json");
  } else if (m == "PATCH") {
    res = st.client.Patch(ex.path_and_query, headers, body, "application/json");
  } else if (m == "DELETE") {
    res = ex.body ? st.client.Delete(ex.path_and_query, headers, body, "application/json")
                  : st.client.Delete(ex.path_and_query, headers);
  } else {
    throw std::logic_error("unsupported HTTP method " + m);
  }

  if (!res) {
    st.record.http_log.push_back(std::move(ex));
    st.record.verdict.kind = Verdict::Kind::TransportError;
    st.record.verdict.detail = httplib::to_string(res.error());
    return false;
  }
  ex.status = res->status;
  ex.response_body = res->body;
  pending.status = res->status;
  pending.body = res->body;
  st.record.http_log.push_back(std::move(ex));
  return true;
}

}  // namespace

RunRecord run_once(const TestSetup& setup, const RunConfig& cfg, int run_index) {
  auto t0 = std::chrono::steady_clock::now();
  RunState st(setup, cfg, run_index);

  const ast::Session* cur = setup.model.root.get();
  std::map<const ast::Session*, int> budgets;
  std::map<std::string, const ast::Session*> binders;
  std::optional<PendingResponse> pending;

  while (true) {
    if (std::holds_alternative<ast::End>(cur->node)) {
      st.record.verdict.kind = Verdict::Kind::Pass;
      break;
    }
    if (const auto* rv = std::get_if<ast::RecVar>(&cur->node)) {
      const ast::Session* rec_node = binders.at(rv->var);
      int& budget = budgets[rec_node];
      if (budget <= 0) {
        st.record.verdict.kind = Verdict::Kind::ModelExhausted;
        st.record.verdict.rec_bound = cfg.max_rec_unfoldings;
        break;
      }
      --budget;
      st.env.push_frame();
      cur = std::get<ast::Rec>(rec_node->node).body.get();
      continue;
    }
    if (const auto* rec = std::get_if<ast::Rec>(&cur->node)) {
      binders[rec->var] = cur;
      budgets[cur] = cfg.max_rec_unfoldings - 1;  // entering the body is the first iteration
      st.env.push_frame();
      cur = rec->body.get();
      continue;
    }
    if (const auto* ic = std::get_if<ast::InternalChoice>(&cur->node)) {
      const auto& branch = pick_branch(*ic, st);
      std::vector<Json> values;
      for (const auto& a : branch.args) {
        if (a.is_fresh()) {
          const auto* gen = runtime::find_generator(setup.preamble, a.generator);
          if (!gen) throw runtime::ConfigError("unknown generator '" + a.generator + "'");
          Json v = runtime::generate(*gen, st.rng, st.gen_state, a.generator);
          check_generated(st, a, v);
          if (!st.env.bind(a.name, v))
            throw std::logic_error("rebinding of '" + a.name + "' slipped past validation");
          values.push_back(std::move(v));
        } else {
          const Json* v = st.env.lookup(a.name);
          if (!v) throw std::logic_error("unbound variable '" + a.name + "' slipped past validation");
          values.push_back(*v);
        }
      }
      st.record.covered_nodes.insert(branch.id);
      st.record.trace.push_back({semantics::Event::Dir::Send, branch.op, values});
      PendingResponse resp;
      if (!fire_request(st, branch, values, resp)) break;
      pending = resp;
      cur = branch.cont.get();
      continue;
    }

    const auto& ec = std::get<ast::ExternalChoice>(cur->node);
    if (!pending) throw std::logic_error("external choice with no pending response");
    const ast::RecvBranch* branch = nullptr;
    for (const auto& b : ec.branches)
      if (b.code == pending->status) branch = &b;
    if (!branch) {
      st.record.verdict.kind = Verdict::Kind::BadStatusCode;
      for (const auto& b : ec.branches) st.record.verdict.expected_codes.push_back(b.code);
      st.record.verdict.actual_code = pending->status;
      break;
    }

    const auto& bound = setup.plan.recvs.at(branch->id);
    std::vector<Json> decl_values;
    if (bound.response_schema) {
      Json body = Json::parse(pending->body, nullptr, false);
      if (body.is_discarded()) {
        st.record.verdict.kind = Verdict::Kind::BadResponseBody;
        st.record.verdict.violations.push_back({"$", "response body is not valid JSON"});
        break;
      }
      auto violations = openapi::validate_value(setup.spec, bound.response_schema, body);
      if (!violations.empty()) {
        st.record.verdict.kind = Verdict::Kind::BadResponseBody;
        st.record.verdict.violations = std::move(violations);
        break;
      }
      for (size_t i = 0; i < branch->decls.size(); ++i) {
        const auto& proj = bound.decls[i];
        if (proj.whole_body) {
          decl_values.push_back(body);
        } else if (body.is_object() && body.contains(proj.field)) {
          decl_values.push_back(body[proj.field]);
        } else {
          st.record.verdict.kind = Verdict::Kind::BadResponseBody;
          st.record.verdict.violations.push_back({"$." + proj.field, "missing projected field"});
          break;
        }
      }
      if (st.record.verdict.kind == Verdict::Kind::BadResponseBody) break;
    }
    st.record.covered_nodes.insert(branch->id);
    for (size_t i = 0; i < decl_values.size(); ++i)
      if (!st.env.bind(branch->decls[i].first, decl_values[i]))
        throw std::logic_error("rebinding of '" + branch->decls[i].first + "' slipped past validation");
    st.record.trace.push_back(
        {semantics::Event::Dir::Recv, std::to_string(branch->code), decl_values});

    if (branch->assertion) {
      std::vector<Json> args;
      for (const auto& an : branch->assertion->args) {
        const Json* v = st.env.lookup(an);
        if (!v) throw std::logic_error("unbound assertion argument '" + an + "'");
        args.push_back(*v);
      }
      auto ait = setup.preamble.assertions.find(branch->assertion->predicate);
      if (ait == setup.preamble.assertions.end())
        throw runtime::ConfigError("unknown assertion predicate '" + branch->assertion->predicate + "'");
      auto result = runtime::eval_assertion(ait->second, args);
      if (!result.value) {
        st.record.verdict.kind = Verdict::Kind::AssertionFail;
        st.record.verdict.predicate = branch->assertion->predicate;
        st.record.verdict.assert_args = std::move(args);
        st.record.verdict.note = result.note;
        break;
      }
    }
    pending.reset();
    cur = branch->cont.get();
  }

  auto t1 = std::chrono::steady_clock::now();
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  st.record.duration_ms = (ms / 1000) * 1000;
  return std::move(st.record);
}

CampaignReport run_campaign(const TestSetup& setup, const RunConfig& cfg,
                            const CampaignConfig& campaign) {
  auto t0 = std::chrono::steady_clock::now();
  CampaignReport report;
  report.records.resize(campaign.runs);

  auto execute = [&](int i) {
    RunConfig run_cfg = cfg;
    run_cfg.seed = campaign.base_seed + static_cast<uint64_t>(i);
    report.records[i] = run_once(setup, run_cfg, i);
  };

  int parallel = std::max(1, campaign.parallel);
  if (parallel == 1) {
    for (int i = 0; i < campaign.runs; ++i) {
      execute(i);
      if (campaign.stop_on_first_fail && report.records[i].verdict.is_fault()) {
        report.records.resize(i + 1);
        break;
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < parallel; ++w)
      workers.emplace_back([&] {
        for (int i = next.fetch_add(1); i < campaign.runs; i = next.fetch_add(1)) execute(i);
      });
    for (auto& t : workers) t.join();
  }

  for (const auto& r : report.records) {
    ++report.runs;
    switch (r.verdict.kind) {
      case Verdict::Kind::Pass: ++report.passes; break;
      case Verdict::Kind::ModelExhausted: ++report.exhausted; break;
      case Verdict::Kind::BadStatusCode: ++report.bad_status; break;
      case Verdict::Kind::BadResponseBody: ++report.bad_body; break;
      case Verdict::Kind::AssertionFail: ++report.assertion_fails; break;
      case Verdict::Kind::TransportError: ++report.transport_errors; break;
    }
    report.covered_nodes.insert(r.covered_nodes.begin(), r.covered_nodes.end());
    for (const auto& ex : r.http_log)
      if (ex.status != 0) report.any_response = true;
  }
  auto t1 = std::chrono::steady_clock::now();
  report.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  return report;
}

}  // namespace cots::driver
