#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cots::openapi {

using Json = nlohmann::json;

struct JsonSchema;
using SchemaPtr = std::shared_ptr<const JsonSchema>;

// Structural subset of JSON Schema as used by OpenAPI documents.
struct JsonSchema {
  enum class Kind { Integer, Number, String, Boolean, Object, Array, Ref, Any };
  Kind kind = Kind::Any;
  std::map<std::string, SchemaPtr> properties;  // Object
  std::set<std::string> required;               // Object
  SchemaPtr items;                              // Array
  std::string ref;                              // Ref: component schema name
};

const char* kind_name(JsonSchema::Kind k);

struct Param {
  enum class In { Path, Query, Header };
  std::string name;
  In in = In::Query;
  SchemaPtr schema;
  bool required = false;
};

struct OperationShape {
  std::string id;
  std::string method;         // upper-case HTTP verb
  std::string path_template;  // with {param} holes
  std::vector<Param> params;
  SchemaPtr request_body;               // null if the operation takes no body
  std::map<int, SchemaPtr> responses;   // declared codes; value null = no schema
};

struct ApiSpec {
  std::map<std::string, OperationShape> operations;  // keyed by operationId
  std::map<std::string, SchemaPtr> schemas;          // component schemas
  std::string base_url_hint;                         // servers[0].url, may be empty
  std::string api_key_header = "X-API-Key";          // from securitySchemes when declared
  std::vector<std::string> warnings;                 // unsupported features we ignored
};

class SpecError : public std::runtime_error {
 public:
  enum class Kind { MalformedDocument, DuplicateOperationId, DanglingRef };
  SpecError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

enum class DocFormat { Json, Yaml };

ApiSpec load_spec(const std::string& text, DocFormat format);
// Format chosen by extension (.json vs .yaml/.yml).
ApiSpec load_spec_file(const std::string& path);

// Follows Ref nodes through the component table. Throws SpecError on a
// dangling reference (load_spec guarantees none remain).
SchemaPtr resolve(const ApiSpec& spec, const SchemaPtr& schema);

struct SchemaViolation {
  std::string path;  // JSON-path-ish location, "$" for the root
  std::string message;
};

// Empty iff `value` structurally conforms: kinds match, required fields
// present, array items conform. Unknown object fields are allowed.
std::vector<SchemaViolation> validate_value(const ApiSpec& spec, const SchemaPtr& schema,
                                            const Json& value);

// Shared YAML -> JSON bridge (also used for YAML preambles).
Json yaml_to_json(const std::string& text);

}  // namespace cots::openapi
