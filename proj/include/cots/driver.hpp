#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cots/binding.hpp"
#include "cots/openapi.hpp"
#include "cots/parser.hpp"
#include "cots/runtime.hpp"
#include "cots/semantics.hpp"

namespace cots::driver {

using Json = nlohmann::json;

struct RunConfig {
  std::string base_url;
  uint64_t seed = 0;
  int max_rec_unfoldings = 50;  // loop iterations per recursion binder
  double request_timeout_sec = 10.0;
  std::map<std::string, double> choice_weights;  // branch operationId -> weight (default 1)
};

struct Verdict {
  enum class Kind {
    Pass,
    BadStatusCode,
    BadResponseBody,
    AssertionFail,
    TransportError,
    ModelExhausted,
  };
  Kind kind = Kind::Pass;
  std::vector<int> expected_codes;                  // BadStatusCode
  int actual_code = 0;                              // BadStatusCode
  std::vector<openapi::SchemaViolation> violations; // BadResponseBody
  std::string predicate;                            // AssertionFail
  std::vector<Json> assert_args;                    // AssertionFail
  std::string note;                                 // AssertionFail detail
  std::string detail;                               // TransportError
  int rec_bound = 0;                                // ModelExhausted

  bool is_fault() const {
    return kind == Kind::BadStatusCode || kind == Kind::BadResponseBody ||
           kind == Kind::AssertionFail;
  }
  Json to_json() const;
  static const char* kind_name(Kind k);
};

struct HttpExchange {
  std::string method;
  std::string base;            // scheme://host:port
  std::string path_and_query;  // percent-encoded
  std::vector<std::pair<std::string, std::string>> headers;  // explicit headers, in send order
  std::optional<std::string> body;
  int status = 0;  // 0 = transport failure
  std::string response_body;
};

struct RunRecord {
  int run_index = 0;
  uint64_t seed = 0;
  semantics::Trace trace;
  std::vector<HttpExchange> http_log;  // one entry per send event
  Verdict verdict;
  std::set<int> covered_nodes;
  // wall time rounded down to whole seconds, so identical reruns log
  // identical bytes; sub-second runs log 0
  int64_t duration_ms = 0;
};

// Everything a run needs, shared and immutable.
struct TestSetup {
  const parser::ParsedModel& model;
  const binding::BindingPlan& plan;
  const runtime::Preamble& preamble;
  const openapi::ApiSpec& spec;
};

RunRecord run_once(const TestSetup& setup, const RunConfig& cfg, int run_index = 0);

struct CampaignConfig {
  int runs = 0;
  uint64_t base_seed = 0;
  bool stop_on_first_fail = false;
  int parallel = 1;  // >1 runs concurrently; unsafe against a stateful SUT
};

struct CampaignReport {
  std::vector<RunRecord> records;
  int runs = 0;
  int passes = 0;
  int exhausted = 0;
  int bad_status = 0;
  int bad_body = 0;
  int assertion_fails = 0;
  int transport_errors = 0;
  std::set<int> covered_nodes;  // union over runs
  bool any_response = false;    // at least one HTTP response was dispatched
  int64_t wall_ms = 0;          // real elapsed time, for the console summary only

  int fault_verdicts() const { return bad_status + bad_body + assertion_fails; }
};

// Runs `campaign.runs` runs with per-run seeds base_seed + i.
CampaignReport run_campaign(const TestSetup& setup, const RunConfig& cfg,
                            const CampaignConfig& campaign);

}  // namespace cots::driver
