#include "cots/report.hpp"

#include <fstream>
#include <sstream>

namespace cots::report {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

json CoverageReport::to_json() const {
  return json{{"nodes", {{"covered", nodes_covered}, {"total", nodes_total}}},
              {"branches", {{"covered", branches_covered}, {"total", branches_total}}}};
}

CoverageReport coverage(const parser::ParsedModel& model,
                        const std::vector<driver::RunRecord>& records) {
  std::set<int> covered;
  for (const auto& r : records) {
    for (int id : r.covered_nodes) {
      if (id < 0 || id >= model.prefix_count)
        throw ForeignRecord("record " + std::to_string(r.run_index) + " mentions node " +
                            std::to_string(id) + " which is not part of model '" + model.name + "'");
      covered.insert(id);
    }
  }
  CoverageReport out;
  out.nodes_total = model.prefix_count;
  out.nodes_covered = static_cast<int>(covered.size());
  for (const auto& arms : ast::decision_arms(model.root)) {
    for (int head : arms) {
      ++out.branches_total;
      if (covered.count(head)) ++out.branches_covered;
    }
  }
  return out;
}

namespace {

constexpr size_t kPayloadLimit = 2048;

ordered_json event_json(const semantics::Event& ev, bool& truncated) {
  ordered_json out;
  out["dir"] = ev.dir == semantics::Event::Dir::Send ? "send" : "recv";
  out["label"] = ev.label;
  json payload = ev.payload;
  std::string dumped = payload.dump();
  if (dumped.size() > kPayloadLimit) {
    truncated = true;
    out["payload"] = json{{"truncated", true}, {"bytes", dumped.size()}};
  } else {
    out["payload"] = payload;
  }
  return out;
}

json full_record_json(const driver::RunRecord& r) {
  json events = json::array();
  for (const auto& ev : r.trace)
    events.push_back({{"dir", ev.dir == semantics::Event::Dir::Send ? "send" : "recv"},
                      {"label", ev.label},
                      {"payload", ev.payload}});
  json http = json::array();
  for (const auto& ex : r.http_log) {
    json h = json::object();
    for (const auto& [k, v] : ex.headers) h[k] = v;
    http.push_back({{"method", ex.method},
                    {"url", ex.base + ex.path_and_query},
                    {"headers", h},
                    {"body", ex.body ? json(*ex.body) : json(nullptr)},
                    {"status", ex.status},
                    {"responseBody", ex.response_body}});
  }
  return json{{"run", r.run_index},
              {"seed", r.seed},
              {"verdict", r.verdict.to_json()},
              {"events", events},
              {"http", http},
              {"ms", r.duration_ms}};
}

}  // namespace

ordered_json log_entry_impl(const driver::RunRecord& r,
                            const std::optional<fs::path>& sidecar_dir) {
  ordered_json entry;
  entry["run"] = r.run_index;
  entry["seed"] = r.seed;
  entry["verdict"] = r.verdict.to_json();
  ordered_json events = ordered_json::array();
  bool truncated = false;
  for (const auto& ev : r.trace) events.push_back(event_json(ev, truncated));
  entry["events"] = std::move(events);
  entry["ms"] = r.duration_ms;
  if (truncated && sidecar_dir) {
    fs::create_directories(*sidecar_dir);
    write_file_atomic(*sidecar_dir / ("run-" + std::to_string(r.run_index) + ".json"),
                      full_record_json(r).dump(2) + "\n");
  }
  return entry;
}

nlohmann::json log_entry(const driver::RunRecord& record,
                         const std::optional<fs::path>& sidecar_dir) {
  return log_entry_impl(record, sidecar_dir);
}

void write_log(const std::vector<driver::RunRecord>& records, std::ostream& sink,
               const std::optional<fs::path>& sidecar_dir) {
  for (const auto& r : records) {
    sink << log_entry_impl(r, sidecar_dir).dump() << "\n";
    sink.flush();  // crash-safe tail
  }
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out.push_back(c);
  }
  out += "'";
  return out;
}

std::string describe_outcome(const driver::Verdict& v) {
  using K = driver::Verdict::Kind;
  switch (v.kind) {
    case K::Pass: return "run passed";
    case K::ModelExhausted: return "run stopped at the recursion bound";
    case K::BadStatusCode: {
      std::string codes;
      for (int c : v.expected_codes) codes += (codes.empty() ? "" : ", ") + std::to_string(c);
      return "expected status in {" + codes + "}, observed " + std::to_string(v.actual_code);
    }
    case K::BadResponseBody: {
      std::string out = "response body violated the declared schema";
      if (!v.violations.empty())
        out += " (" + v.violations[0].path + ": " + v.violations[0].message + ")";
      return out;
    }
    case K::AssertionFail: return "assertion " + v.predicate + " evaluated to false";
    case K::TransportError: return "transport error: " + v.detail;
  }
  return "?";
}

}  // namespace

std::string emit_curl(const driver::RunRecord& record) {
  std::ostringstream out;
  out << "#!/bin/sh\n";
  out << "# reproduction script for run " << record.run_index << " (seed " << record.seed << ")\n";
  out << "# verdict: " << driver::Verdict::kind_name(record.verdict.kind) << "\n";
  out << "# replays " << record.http_log.size()
      << " request(s) in order and prints one HTTP status per line\n";
  std::string base = record.http_log.empty() ? "" : record.http_log.front().base;
  out << "BASE=\"${BASE_URL:-" << base << "}\"\n\n";
  for (size_t i = 0; i < record.http_log.size(); ++i) {
    const auto& ex = record.http_log[i];
    out << "# request " << i + 1 << ": recorded status " << ex.status << "\n";
    out << "curl -sS -o /dev/null -w '%{http_code}\\n' -X " << ex.method;
    out << " \"$BASE\"" << shell_quote(ex.path_and_query);
    for (const auto& [k, v] : ex.headers) out << " \\\n  -H " << shell_quote(k + ": " + v);
    if (ex.body) out << " \\\n  --data-binary " << shell_quote(*ex.body);
    out << "\n\n";
  }
  if (!record.http_log.empty()) {
    out << "# final request: " << describe_outcome(record.verdict) << "\n";
  }
  return out.str();
}

void write_file_atomic(const fs::path& path, const std::string& content, bool executable) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    f << content;
  }
  if (executable) {
    fs::permissions(tmp,
                    fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec |
                        fs::perms::others_read | fs::perms::others_exec,
                    fs::perm_options::replace);
  }
  fs::rename(tmp, path);
}

}  // namespace cots::report
