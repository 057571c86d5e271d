#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cots/openapi.hpp"
#include "cots/parser.hpp"

namespace cots::binding {

// Where one send argument travels in the HTTP request.
struct ArgSlot {
  enum class Kind { PathParam, QueryParam, HeaderParam, Body };
  Kind kind = Kind::Body;
  std::string param;  // parameter name; empty for Body
};

struct BoundSend {
  int prefix_id = -1;
  openapi::OperationShape op;    // copied: the plan stands alone
  std::vector<ArgSlot> slots;    // parallel to the branch's args
};

// How one receive declaration is read from the response body.
struct DeclProjection {
  bool whole_body = true;
  std::string field;  // top-level field name when !whole_body
};

struct BoundRecv {
  int prefix_id = -1;
  int code = 0;
  openapi::SchemaPtr response_schema;  // null = declared with no content
  std::vector<DeclProjection> decls;   // parallel to the branch's decls
};

struct BindingPlan {
  std::map<int, BoundSend> sends;
  std::map<int, BoundRecv> recvs;
};

struct BindError {
  // UnknownOperationId, UnknownResponseCode, UnboundArg, AmbiguousBody,
  // UnknownSchemaType, UncoveredParam, TypeMismatch, NoSchemaForDecls,
  // UnboundDecl, ReceiveWithoutRequest
  std::string kind;
  std::string path;
  std::string message;
};

struct BindResult {
  std::optional<BindingPlan> plan;  // engaged iff errors is empty
  std::vector<BindError> errors;
};

// Resolves every prefix of a well-formed model against the loaded spec.
// `aliases` maps model variable names to spec parameter / field names
// (typically Preamble::aliases). Never returns a partial plan.
BindResult bind(const parser::ParsedModel& model, const openapi::ApiSpec& spec,
                const std::map<std::string, std::string>& aliases);

}  // namespace cots::binding
