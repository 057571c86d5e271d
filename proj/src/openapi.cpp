#include "cots/openapi.hpp"

#include <fstream>
#include <functional>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace cots::openapi {

const char* kind_name(JsonSchema::Kind k) {
  switch (k) {
    case JsonSchema::Kind::Integer: return "integer";
    case JsonSchema::Kind::Number: return "number";
    case JsonSchema::Kind::String: return "string";
    case JsonSchema::Kind::Boolean: return "boolean";
    case JsonSchema::Kind::Object: return "object";
    case JsonSchema::Kind::Array: return "array";
    case JsonSchema::Kind::Ref: return "ref";
    case JsonSchema::Kind::Any: return "any";
  }
  return "?";
}

namespace {

Json yaml_node_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
      return nullptr;
    case YAML::NodeType::Scalar: {
      const std::string& s = node.Scalar();
      // Quoted scalars stay strings; plain scalars get the usual YAML 1.1 coercions.
      if (node.Tag() == "!") return s;
      if (s == "null" || s == "~" || s.empty()) return nullptr;
      if (s == "true") return true;
      if (s == "false") return false;
      static const std::regex int_re(R"(^[-+]?\d+$)");
      static const std::regex float_re(R"(^[-+]?(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?$)");
      if (std::regex_match(s, int_re)) {
        try {
          return std::stoll(s);
        } catch (const std::out_of_range&) {
          return s;
        }
      }
      if (std::regex_match(s, float_re) && s.find_first_of(".eE") != std::string::npos)
        return std::stod(s);
      return s;
    }
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      for (const auto& item : node) arr.push_back(yaml_node_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) obj[kv.first.Scalar()] = yaml_node_to_json(kv.second);
      return obj;
    }
    default:
      return nullptr;
  }
}

class Loader {
 public:
  explicit Loader(const Json& doc) : doc_(doc) {}

  ApiSpec load() {
    if (!doc_.is_object()) throw SpecError(SpecError::Kind::MalformedDocument, "document root is not an object");
    if (doc_.contains("servers") && doc_["servers"].is_array() && !doc_["servers"].empty()) {
      const auto& first = doc_["servers"][0];
      if (first.is_object() && first.contains("url") && first["url"].is_string())
        spec_.base_url_hint = first["url"].get<std::string>();
    }
    load_security_schemes();
    load_component_schemas();
    load_paths();
    check_refs();
    return std::move(spec_);
  }

 private:
  void warn(const std::string& msg) { spec_.warnings.push_back(msg); }

  void load_security_schemes() {
    const Json* schemes = dig(doc_, {"components", "securitySchemes"});
    if (!schemes || !schemes->is_object()) return;
    for (auto it = schemes->begin(); it != schemes->end(); ++it) {
      const Json& sch = it.value();
      if (!sch.is_object()) continue;
      std::string type = sch.value("type", "");
      if (type == "apiKey" && sch.value("in", "") == "header" && sch.contains("name")) {
        spec_.api_key_header = sch["name"].get<std::string>();
      } else {
        warn("unsupported security scheme '" + it.key() + "' (type " + type + ") ignored");
      }
    }
  }

  void load_component_schemas() {
    const Json* schemas = dig(doc_, {"components", "schemas"});
    if (!schemas) return;
    if (!schemas->is_object())
      throw SpecError(SpecError::Kind::MalformedDocument, "components.schemas is not an object");
    for (auto it = schemas->begin(); it != schemas->end(); ++it)
      spec_.schemas[it.key()] = parse_schema(it.value(), "components.schemas." + it.key());
  }

  SchemaPtr parse_schema(const Json& node, const std::string& where) {
    auto out = std::make_shared<JsonSchema>();
    if (!node.is_object()) {
      warn(where + ": schema is not an object, treated as unconstrained");
      return out;
    }
    if (node.contains("$ref")) {
      std::string ref = node["$ref"].get<std::string>();
      const std::string prefix = "#/components/schemas/";
      if (ref.rfind(prefix, 0) != 0)
        throw SpecError(SpecError::Kind::DanglingRef,
                        where + ": only local '#/components/schemas/' refs are supported, got '" + ref + "'");
      out->kind = JsonSchema::Kind::Ref;
      out->ref = ref.substr(prefix.size());
      return out;
    }
    for (const char* combo : {"oneOf", "anyOf", "allOf", "not"}) {
      if (node.contains(combo)) {
        warn(where + ": '" + combo + "' is not supported; schema treated as unconstrained");
        return out;
      }
    }
    std::string type = node.value("type", "");
    if (type == "integer") {
      out->kind = JsonSchema::Kind::Integer;
    } else if (type == "number") {
      out->kind = JsonSchema::Kind::Number;
    } else if (type == "string") {
      out->kind = JsonSchema::Kind::String;
    } else if (type == "boolean") {
      out->kind = JsonSchema::Kind::Boolean;
    } else if (type == "array") {
      out->kind = JsonSchema::Kind::Array;
      if (node.contains("items")) out->items = parse_schema(node["items"], where + ".items");
    } else if (type == "object" || node.contains("properties")) {
      out->kind = JsonSchema::Kind::Object;
      if (node.contains("properties") && node["properties"].is_object()) {
        for (auto it = node["properties"].begin(); it != node["properties"].end(); ++it)
          out->properties[it.key()] = parse_schema(it.value(), where + "." + it.key());
      }
      if (node.contains("required") && node["required"].is_array()) {
        for (const auto& r : node["required"])
          if (r.is_string()) out->required.insert(r.get<std::string>());
      }
    } else if (type.empty()) {
      out->kind = JsonSchema::Kind::Any;
    } else {
      warn(where + ": unknown type '" + type + "' treated as unconstrained");
    }
    return out;
  }

  void load_paths() {
    const Json* paths = dig(doc_, {"paths"});
    if (!paths) return;
    if (!paths->is_object())
      throw SpecError(SpecError::Kind::MalformedDocument, "paths is not an object");
    for (auto pit = paths->begin(); pit != paths->end(); ++pit) {
      const std::string& path = pit.key();
      const Json& item = pit.value();
      if (!item.is_object()) continue;
      std::vector<Param> shared_params;
      if (item.contains("parameters")) shared_params = parse_params(item["parameters"], path);
      for (const char* method : {"get", "put", "post", "delete", "patch", "head", "options"}) {
        std::string m = method;
        // also accept upper-case method keys, as in some informal documents
        std::string upper = m;
        for (auto& c : upper) c = std::toupper(static_cast<unsigned char>(c));
        const Json* op = item.contains(m) ? &item[m] : (item.contains(upper) ? &item[upper] : nullptr);
        if (!op || !op->is_object()) continue;
        load_operation(path, upper, *op, shared_params);
      }
      if (item.contains("callbacks")) warn(path + ": callbacks are not supported and were ignored");
    }
  }

  std::vector<Param> parse_params(const Json& node, const std::string& where) {
    std::vector<Param> out;
    if (!node.is_array()) return out;
    for (const auto& p : node) {
      if (!p.is_object() || !p.contains("name") || !p.contains("in")) continue;
      Param param;
      param.name = p["name"].get<std::string>();
      std::string in = p["in"].get<std::string>();
      if (in == "path") {
        param.in = Param::In::Path;
        param.required = true;
      } else if (in == "query") {
        param.in = Param::In::Query;
      } else if (in == "header") {
        param.in = Param::In::Header;
      } else {
        warn(where + ": parameter '" + param.name + "' in '" + in + "' is not supported, ignored");
        continue;
      }
      if (p.contains("required") && p["required"].is_boolean() && in != "path")
        param.required = p["required"].get<bool>();
      if (p.contains("schema")) param.schema = parse_schema(p["schema"], where + "." + param.name);
      out.push_back(std::move(param));
    }
    return out;
  }

  void load_operation(const std::string& path, const std::string& method, const Json& op,
                      const std::vector<Param>& shared_params) {
    if (!op.contains("operationId")) {
      warn(method + " " + path + ": no operationId, operation skipped");
      return;
    }
    OperationShape shape;
    shape.id = op["operationId"].get<std::string>();
    shape.method = method;
    shape.path_template = path;
    shape.params = shared_params;
    if (op.contains("parameters")) {
      for (auto& p : parse_params(op["parameters"], shape.id)) shape.params.push_back(std::move(p));
    }
    if (op.contains("requestBody")) {
      shape.request_body = content_schema(op["requestBody"], shape.id + ".requestBody");
    }
    if (op.contains("responses") && op["responses"].is_object()) {
      for (auto rit = op["responses"].begin(); rit != op["responses"].end(); ++rit) {
        const std::string& key = rit.key();
        if (key == "default") {
          warn(shape.id + ": 'default' response ignored");
          continue;
        }
        int code = 0;
        try {
          code = std::stoi(key);
        } catch (...) {
          warn(shape.id + ": response key '" + key + "' is not a status code, ignored");
          continue;
        }
        shape.responses[code] = content_schema(rit.value(), shape.id + ".responses." + key);
      }
    }
    if (op.contains("links")) warn(shape.id + ": links are not supported and were ignored");
    // every {hole} in the path must be declared as a path parameter
    static const std::regex hole_re(R"(\{([^}/]+)\})");
    for (auto it = std::sregex_iterator(path.begin(), path.end(), hole_re);
         it != std::sregex_iterator(); ++it) {
      std::string hole = (*it)[1].str();
      bool found = false;
      for (const auto& p : shape.params)
        if (p.in == Param::In::Path && p.name == hole) found = true;
      if (!found)
        throw SpecError(SpecError::Kind::MalformedDocument,
                        shape.id + ": path template hole '{" + hole + "}' has no path parameter");
    }
    std::string id = shape.id;
    auto [_, inserted] = spec_.operations.emplace(id, std::move(shape));
    if (!inserted)
      throw SpecError(SpecError::Kind::DuplicateOperationId, "duplicate operationId '" + id + "'");
  }

  // Extracts the application/json schema of a requestBody or response object;
  // null when the object declares no JSON content.
  SchemaPtr content_schema(const Json& node, const std::string& where) {
    if (!node.is_object() || !node.contains("content")) return nullptr;
    const Json& content = node["content"];
    if (!content.is_object()) return nullptr;
    for (auto it = content.begin(); it != content.end(); ++it) {
      if (it.key() == "application/json") {
        if (it.value().is_object() && it.value().contains("schema"))
          return parse_schema(it.value()["schema"], where);
        return nullptr;
      }
      warn(where + ": content type '" + it.key() + "' is not supported, ignored");
    }
    return nullptr;
  }

  void check_refs() {
    std::function<void(const SchemaPtr&, const std::string&)> go =
        [&](const SchemaPtr& s, const std::string& where) {
          if (!s) return;
          if (s->kind == JsonSchema::Kind::Ref) {
            if (!spec_.schemas.count(s->ref))
              throw SpecError(SpecError::Kind::DanglingRef,
                              where + ": reference to undefined schema '" + s->ref + "'");
            return;
          }
          for (const auto& [name, child] : s->properties) go(child, where + "." + name);
          go(s->items, where + "[]");
        };
    for (const auto& [name, s] : spec_.schemas) go(s, name);
    for (const auto& [id, op] : spec_.operations) {
      for (const auto& p : op.params) go(p.schema, id + "." + p.name);
      go(op.request_body, id + ".requestBody");
      for (const auto& [code, s] : op.responses) go(s, id + "." + std::to_string(code));
    }
  }

  static const Json* dig(const Json& root, std::initializer_list<const char*> keys) {
    const Json* cur = &root;
    for (const char* k : keys) {
      if (!cur->is_object() || !cur->contains(k)) return nullptr;
      cur = &(*cur)[k];
    }
    return cur;
  }

  const Json& doc_;
  ApiSpec spec_;
};

}  // namespace

Json yaml_to_json(const std::string& text) {
  try {
    YAML::Node root = YAML::Load(text);
    return yaml_node_to_json(root);
  } catch (const YAML::Exception& e) {
    throw SpecError(SpecError::Kind::MalformedDocument, std::string("YAML parse error: ") + e.what());
  }
}

ApiSpec load_spec(const std::string& text, DocFormat format) {
  Json doc;
  if (format == DocFormat::Json) {
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw SpecError(SpecError::Kind::MalformedDocument, std::string("JSON parse error: ") + e.what());
    }
  } else {
    doc = yaml_to_json(text);
  }
  return Loader(doc).load();
}

ApiSpec load_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError(SpecError::Kind::MalformedDocument, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return load_spec(buf.str(), json ? DocFormat::Json : DocFormat::Yaml);
}

SchemaPtr resolve(const ApiSpec& spec, const SchemaPtr& schema) {
  SchemaPtr cur = schema;
  int hops = 0;
  while (cur && cur->kind == JsonSchema::Kind::Ref) {
    auto it = spec.schemas.find(cur->ref);
    if (it == spec.schemas.end())
      throw SpecError(SpecError::Kind::DanglingRef, "dangling schema reference '" + cur->ref + "'");
    cur = it->second;
    if (++hops > 64)
      throw SpecError(SpecError::Kind::DanglingRef, "schema reference cycle at '" + schema->ref + "'");
  }
  return cur;
}

namespace {

void validate_rec(const ApiSpec& spec, const SchemaPtr& schema, const Json& value,
                  const std::string& path, std::vector<SchemaViolation>& out) {
  SchemaPtr s = resolve(spec, schema);
  if (!s || s->kind == JsonSchema::Kind::Any) return;
  switch (s->kind) {
    case JsonSchema::Kind::Integer:
      if (!value.is_number_integer() && !value.is_number_unsigned())
        out.push_back({path, "expected integer, got " + std::string(value.type_name())});
      return;
    case JsonSchema::Kind::Number:
      if (!value.is_number())
        out.push_back({path, "expected number, got " + std::string(value.type_name())});
      return;
    case JsonSchema::Kind::String:
      if (!value.is_string())
        out.push_back({path, "expected string, got " + std::string(value.type_name())});
      return;
    case JsonSchema::Kind::Boolean:
      if (!value.is_boolean())
        out.push_back({path, "expected boolean, got " + std::string(value.type_name())});
      return;
    case JsonSchema::Kind::Array: {
      if (!value.is_array()) {
        out.push_back({path, "expected array, got " + std::string(value.type_name())});
        return;
      }
      for (size_t i = 0; i < value.size(); ++i)
        if (s->items) validate_rec(spec, s->items, value[i], path + "[" + std::to_string(i) + "]", out);
      return;
    }
    case JsonSchema::Kind::Object: {
      if (!value.is_object()) {
        out.push_back({path, "expected object, got " + std::string(value.type_name())});
        return;
      }
      for (const auto& req : s->required)
        if (!value.contains(req)) out.push_back({path + "." + req, "missing required field"});
      for (const auto& [name, child] : s->properties)
        if (value.contains(name)) validate_rec(spec, child, value[name], path + "." + name, out);
      return;
    }
    default:
      return;
  }
}

}  // namespace

std::vector<SchemaViolation> validate_value(const ApiSpec& spec, const SchemaPtr& schema,
                                            const Json& value) {
  std::vector<SchemaViolation> out;
  validate_rec(spec, schema, value, "$", out);
  return out;
}

}  // namespace cots::openapi
