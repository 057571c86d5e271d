#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cots/ast.hpp"
#include "cots/runtime.hpp"

namespace cots::semantics {

using Json = nlohmann::json;

struct Event {
  enum class Dir { Send, Recv };
  Dir dir = Dir::Send;
  std::string label;           // operationId for sends, status code for receives
  std::vector<Json> payload;   // instantiated prefix values, in prefix order

  bool operator==(const Event& o) const {
    return dir == o.dir && label == o.label && payload == o.payload;
  }
  bool operator<(const Event& o) const;
  std::string str() const;
};

using Trace = std::vector<Event>;

std::string trace_str(const Trace& t);

// Finite-domain configuration: recursion unfolding bound plus the value
// domains for generators (sends) and typed receive payloads.
struct EnumConfig {
  int rec_bound = 0;
  std::map<std::string, std::vector<Json>> domains;
  std::map<std::pair<int, std::string>, std::vector<Json>> input_domains;

  static EnumConfig from_oracle(const runtime::OracleConfig& o, std::optional<int> bound_override = {});
};

class SemanticsError : public std::runtime_error {
 public:
  enum class Kind { MissingDomain, UnboundedModel, IllFormed };
  SemanticsError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// All complete traces of the model under the finite domains, with every
// recursion binder unfolded at most cfg.rec_bound times (branches that are
// still running when the budget ends contribute nothing). Assertions filter
// receive instantiations.
std::set<Trace> enumerate_traces(const ast::SessionPtr& model, const EnumConfig& cfg,
                                 const runtime::Env& env,
                                 const std::map<std::string, runtime::AssertionSpec>& assertions);

// Equivalent to `trace ∈ enumerate_traces(...)` but walks the AST against the
// trace directly, so it scales past materializable domain sizes.
bool trace_membership(const ast::SessionPtr& model, const EnumConfig& cfg, const Trace& trace,
                      const std::map<std::string, runtime::AssertionSpec>& assertions);

}  // namespace cots::semantics
