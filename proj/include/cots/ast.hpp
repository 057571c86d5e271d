#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

// Abstract syntax of COpenAPI session models. Values are built once
// (by the parser or by test helpers) and treated as immutable afterwards,
// so trees can be shared freely between threads.
namespace cots::ast {

struct TypeName {
  enum class Kind { Int, String, Bool, Float, Named };
  Kind kind = Kind::String;
  std::string schema;  // only for Kind::Named

  static TypeName parse(const std::string& text);
  std::string str() const;
  bool operator==(const TypeName& o) const { return kind == o.kind && schema == o.schema; }
  bool operator!=(const TypeName& o) const { return !(*this == o); }
};

// Byte offsets plus 1-based line/column, for parser diagnostics.
struct SourceSpan {
  size_t begin = 0, end = 0;
  int line = 1, col = 1;
  int end_line = 1, end_col = 1;
};

// An argument of a send prefix: either a reference to a previously bound
// variable, or a fresh binding `name: Type(generator)`.
struct Arg {
  std::string name;
  std::optional<TypeName> type;  // engaged iff this is a fresh binding
  std::string generator;         // generator id, fresh bindings only

  bool is_fresh() const { return type.has_value(); }
};

struct AssertionCall {
  std::string predicate;
  std::vector<std::string> args;
};

struct Session;
using SessionPtr = std::shared_ptr<Session>;

struct SendBranch {
  int id = -1;  // prefix id, assigned by number_prefixes (preorder)
  std::string op;
  std::vector<Arg> args;
  SessionPtr cont;
  SourceSpan span;
};

struct RecvBranch {
  int id = -1;
  int code = 0;  // the nnn of `Cnnn`
  std::vector<std::pair<std::string, TypeName>> decls;
  std::optional<AssertionCall> assertion;
  SessionPtr cont;
  SourceSpan span;
};

struct InternalChoice {
  std::vector<SendBranch> branches;
};
struct ExternalChoice {
  std::vector<RecvBranch> branches;
};
struct Rec {
  std::string var;
  SessionPtr body;
};
struct RecVar {
  std::string var;
};
struct End {};

struct Session {
  std::variant<InternalChoice, ExternalChoice, Rec, RecVar, End> node;
};

SessionPtr make_end();
SessionPtr make_rec(std::string var, SessionPtr body);
SessionPtr make_rec_var(std::string var);
SessionPtr make_internal(std::vector<SendBranch> branches);
SessionPtr make_external(std::vector<RecvBranch> branches);
// A lone send/receive is a one-branch choice; there is no separate AST node.
SessionPtr make_send(std::string op, std::vector<Arg> args, SessionPtr cont);
SessionPtr make_recv(int code, std::vector<std::pair<std::string, TypeName>> decls,
                     std::optional<AssertionCall> assertion, SessionPtr cont);

struct WellFormednessError {
  std::string path;  // e.g. "rec X/+{}[2]/!getCust"
  std::string message;
};

// Empty result iff the model satisfies every structural invariant:
// non-empty choices, closed recursion, distinct arg/decl names, distinct
// response codes per external choice, variables bound before use, no
// rebinding within one recursion unfolding, codes within 100..599.
std::vector<WellFormednessError> check_well_formed(const SessionPtr& root);

// Data-variable names used but not bound along some path.
std::set<std::string> free_vars(const SessionPtr& s, std::set<std::string> bound_so_far);

// Assigns preorder ids to all send/receive prefixes; returns the count.
int number_prefixes(const SessionPtr& root);

// Count of send/receive prefixes (requires numbering to have run, or counts raw).
int count_prefixes(const SessionPtr& root);

// Heads of arms of real decision points (choices with >= 2 branches),
// grouped per choice. Used for branch coverage.
std::vector<std::vector<int>> decision_arms(const SessionPtr& root);

// Equality up to prefix ids and spans.
bool structural_equal(const SessionPtr& a, const SessionPtr& b);

}  // namespace cots::ast
