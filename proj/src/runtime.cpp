#include "cots/runtime.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "cots/openapi.hpp"

namespace cots::runtime {

namespace fs = std::filesystem;

bool Env::bind(const std::string& name, Json value) {
  for (size_t i = frame_starts_.back(); i < entries_.size(); ++i)
    if (entries_[i].first == name) return false;
  entries_.emplace_back(name, std::move(value));
  return true;
}

const Json* Env::lookup(const std::string& name) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
    if (it->first == name) return &it->second;
  return nullptr;
}

std::vector<std::string> Env::names() const {
  std::vector<std::string> out;
  for (const auto& [n, v] : entries_) out.push_back(n);
  return out;
}

const Json* json_path_get(const Json& value, const std::string& path) {
  const Json* cur = &value;
  size_t pos = 0;
  while (pos <= path.size()) {
    size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return cur;
}

namespace {

Json strip_ignored(const Json& v, const std::vector<std::string>& ignore) {
  if (v.is_object()) {
    Json out = Json::object();
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (std::find(ignore.begin(), ignore.end(), it.key()) != ignore.end()) continue;
      out[it.key()] = strip_ignored(it.value(), ignore);
    }
    return out;
  }
  if (v.is_array()) {
    Json out = Json::array();
    for (const auto& item : v) out.push_back(strip_ignored(item, ignore));
    return out;
  }
  return v;
}

}  // namespace

bool struct_eq(const Json& a, const Json& b, const std::vector<std::string>& ignore) {
  return strip_ignored(a, ignore) == strip_ignored(b, ignore);
}

namespace {

struct AssertEnv {
  const AssertionSpec& spec;
  const std::vector<Json>& args;

  const Json* value_of(const Operand& o, std::string& err) const {
    if (!o.is_var) return &o.literal;
    for (size_t i = 0; i < spec.params.size(); ++i)
      if (spec.params[i] == o.var) return &args[i];
    err = "unknown parameter '" + o.var + "'";
    return nullptr;
  }
};

AssertResult eval_expr(const AssertExprPtr& e, const AssertEnv& env) {
  if (!e) return {false, "empty assertion body"};
  std::string err;
  switch (e->op) {
    case AssertExpr::Op::Eq:
    case AssertExpr::Op::Neq: {
      const Json* a = env.value_of(e->a, err);
      const Json* b = env.value_of(e->b, err);
      if (!a || !b) return {false, err};
      bool eq = *a == *b;
      return {e->op == AssertExpr::Op::Eq ? eq : !eq, ""};
    }
    case AssertExpr::Op::FieldEq: {
      const Json* a = env.value_of(e->a, err);
      const Json* b = env.value_of(e->b, err);
      if (!a || !b) return {false, err};
      const Json* field = json_path_get(*a, e->field_path);
      if (!field) return {false, "fieldEq: path '" + e->field_path + "' is missing"};
      return {*field == *b, ""};
    }
    case AssertExpr::Op::StructEq: {
      const Json* a = env.value_of(e->a, err);
      const Json* b = env.value_of(e->b, err);
      if (!a || !b) return {false, err};
      return {struct_eq(*a, *b, e->ignore), ""};
    }
    case AssertExpr::Op::Contains: {
      const Json* a = env.value_of(e->a, err);
      const Json* b = env.value_of(e->b, err);
      if (!a || !b) return {false, err};
      if (a->is_string() && b->is_string())
        return {a->get<std::string>().find(b->get<std::string>()) != std::string::npos, ""};
      if (a->is_array()) {
        for (const auto& item : *a)
          if (item == *b) return {true, ""};
        return {false, ""};
      }
      if (a->is_object() && b->is_string()) return {a->contains(b->get<std::string>()), ""};
      return {false, "contains: unsupported operand kinds"};
    }
    case AssertExpr::Op::And: {
      for (const auto& c : e->children) {
        AssertResult r = eval_expr(c, env);
        if (!r.value) return r;
      }
      return {true, ""};
    }
    case AssertExpr::Op::Or: {
      AssertResult last{false, ""};
      for (const auto& c : e->children) {
        last = eval_expr(c, env);
        if (last.value) return last;
      }
      return last;
    }
    case AssertExpr::Op::Not: {
      AssertResult r = eval_expr(e->children.empty() ? nullptr : e->children[0], env);
      return {!r.value, ""};
    }
  }
  return {false, "unreachable"};
}

}  // namespace

AssertResult eval_assertion(const AssertionSpec& spec, const std::vector<Json>& args) {
  if (args.size() != spec.params.size())
    return {false, "arity mismatch: expected " + std::to_string(spec.params.size()) + " arguments, got " +
                       std::to_string(args.size())};
  return eval_expr(spec.body, AssertEnv{spec, args});
}

namespace {

Operand parse_operand(const Json& node) {
  Operand o;
  if (node.is_object() && node.size() == 1 && node.contains("var") && node["var"].is_string()) {
    o.is_var = true;
    o.var = node["var"].get<std::string>();
  } else if (node.is_object() && node.size() == 1 && node.contains("lit")) {
    o.literal = node["lit"];
  } else {
    o.literal = node;
  }
  return o;
}

AssertExprPtr parse_assert_expr(const Json& node, const std::string& where) {
  if (!node.is_object() || node.size() != 1)
    throw ConfigError(where + ": assertion expression must be a single-operator object");
  auto it = node.begin();
  const std::string& op = it.key();
  const Json& body = it.value();
  auto e = std::make_shared<AssertExpr>();
  auto need_pair = [&](AssertExpr::Op kind) {
    if (!body.is_array() || body.size() != 2)
      throw ConfigError(where + ": '" + op + "' takes [a, b]");
    e->op = kind;
    e->a = parse_operand(body[0]);
    e->b = parse_operand(body[1]);
  };
  if (op == "eq") {
    need_pair(AssertExpr::Op::Eq);
  } else if (op == "neq") {
    need_pair(AssertExpr::Op::Neq);
  } else if (op == "fieldEq") {
    if (!body.is_array() || body.size() != 3 || !body[1].is_string())
      throw ConfigError(where + ": 'fieldEq' takes [value, \"path\", expected]");
    e->op = AssertExpr::Op::FieldEq;
    e->a = parse_operand(body[0]);
    e->field_path = body[1].get<std::string>();
    e->b = parse_operand(body[2]);
  } else if (op == "structEq") {
    if (!body.is_array() || body.size() < 2 || body.size() > 3)
      throw ConfigError(where + ": 'structEq' takes [a, b] or [a, b, [ignoredFields...]]");
    e->op = AssertExpr::Op::StructEq;
    e->a = parse_operand(body[0]);
    e->b = parse_operand(body[1]);
    if (body.size() == 3) {
      if (!body[2].is_array()) throw ConfigError(where + ": structEq ignore list must be an array");
      for (const auto& f : body[2]) e->ignore.push_back(f.get<std::string>());
    }
  } else if (op == "contains") {
    need_pair(AssertExpr::Op::Contains);
  } else if (op == "and" || op == "or") {
    if (!body.is_array() || body.empty())
      throw ConfigError(where + ": '" + op + "' takes a non-empty array of expressions");
    e->op = op == "and" ? AssertExpr::Op::And : AssertExpr::Op::Or;
    for (const auto& c : body) e->children.push_back(parse_assert_expr(c, where));
  } else if (op == "not") {
    e->op = AssertExpr::Op::Not;
    e->children.push_back(parse_assert_expr(body, where));
  } else {
    throw ConfigError(where + ": unknown assertion operator '" + op + "'");
  }
  return e;
}

GeneratorSpec parse_generator(const Json& node, const std::string& where, const std::string& base_dir);

GeneratorSpec parse_generator_kind(const std::string& kind, const Json& arg, const Json& node,
                                   const std::string& where, const std::string& base_dir) {
  GeneratorSpec g;
  if (kind == "const") {
    g.kind = GeneratorSpec::Kind::Const;
    g.const_value = arg;
  } else if (kind == "uuid") {
    g.kind = GeneratorSpec::Kind::Uuid;
  } else if (kind == "randString") {
    if (!arg.is_number_integer() || arg.get<int>() <= 0)
      throw ConfigError(where + ": randString takes a positive length");
    g.kind = GeneratorSpec::Kind::RandString;
    g.len = arg.get<int>();
  } else if (kind == "randInt") {
    if (!arg.is_array() || arg.size() != 2 || !arg[0].is_number_integer() || !arg[1].is_number_integer())
      throw ConfigError(where + ": randInt takes [lo, hi]");
    g.kind = GeneratorSpec::Kind::RandInt;
    g.lo = arg[0].get<int64_t>();
    g.hi = arg[1].get<int64_t>();
    if (g.lo > g.hi) throw ConfigError(where + ": randInt requires lo <= hi");
  } else if (kind == "oneOf") {
    if (!arg.is_array() || arg.empty()) throw ConfigError(where + ": oneOf takes a non-empty array");
    g.kind = GeneratorSpec::Kind::OneOf;
    for (const auto& v : arg) g.one_of.push_back(v);
  } else if (kind == "object") {
    if (!arg.is_object()) throw ConfigError(where + ": object takes a field map");
    g.kind = GeneratorSpec::Kind::Object;
    for (auto it = arg.begin(); it != arg.end(); ++it)
      g.fields[it.key()] =
          std::make_shared<GeneratorSpec>(parse_generator(it.value(), where + "." + it.key(), base_dir));
  } else if (kind == "fromFile") {
    if (!arg.is_object() || !arg.contains("path"))
      throw ConfigError(where + ": fromFile takes {\"path\": ..., \"strategy\": \"cycle\"|\"random\"}");
    g.kind = GeneratorSpec::Kind::FromFile;
    std::string strategy = arg.value("strategy", "cycle");
    if (strategy == "cycle") {
      g.file_cycle = true;
    } else if (strategy == "random") {
      g.file_cycle = false;
    } else {
      throw ConfigError(where + ": fromFile strategy must be 'cycle' or 'random'");
    }
    fs::path p = fs::path(arg["path"].get<std::string>());
    if (p.is_relative()) p = fs::path(base_dir) / p;
    std::ifstream in(p);
    if (!in) throw ConfigError(where + ": cannot open value file '" + p.string() + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        g.file_values.push_back(Json::parse(line));
      } catch (const Json::parse_error& e) {
        throw ConfigError(where + ": bad JSON line in '" + p.string() + "': " + e.what());
      }
    }
    if (g.file_values.empty()) throw ConfigError(where + ": value file '" + p.string() + "' is empty");
  } else {
    throw ConfigError(where + ": unknown generator kind '" + kind + "'");
  }
  if (node.is_object() && node.contains("oracleDomain")) {
    const Json& dom = node["oracleDomain"];
    if (!dom.is_array() || dom.empty())
      throw ConfigError(where + ": oracleDomain must be a non-empty array");
    for (const auto& v : dom) g.oracle_domain.push_back(v);
  }
  return g;
}

GeneratorSpec parse_generator(const Json& node, const std::string& where, const std::string& base_dir) {
  if (node.is_string() && node.get<std::string>() == "uuid")
    return parse_generator_kind("uuid", Json{}, node, where, base_dir);
  if (!node.is_object()) throw ConfigError(where + ": generator must be an object");
  static const char* kinds[] = {"const", "uuid", "randString", "randInt", "oneOf", "object", "fromFile"};
  for (const char* k : kinds)
    if (node.contains(k)) return parse_generator_kind(k, node[k], node, where, base_dir);
  throw ConfigError(where + ": no known generator kind among the keys");
}

}  // namespace

Preamble load_preamble(const Json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError("preamble root must be an object");
  Preamble p;
  if (doc.contains("generators")) {
    if (!doc["generators"].is_object()) throw ConfigError("'generators' must be an object");
    for (auto it = doc["generators"].begin(); it != doc["generators"].end(); ++it)
      p.generators[it.key()] = parse_generator(it.value(), "generators." + it.key(), base_dir);
  }
  if (doc.contains("assertions")) {
    if (!doc["assertions"].is_object()) throw ConfigError("'assertions' must be an object");
    for (auto it = doc["assertions"].begin(); it != doc["assertions"].end(); ++it) {
      const Json& a = it.value();
      if (!a.is_object() || !a.contains("params") || !a.contains("body"))
        throw ConfigError("assertions." + it.key() + ": needs 'params' and 'body'");
      AssertionSpec spec;
      for (const auto& prm : a["params"]) spec.params.push_back(prm.get<std::string>());
      spec.body = parse_assert_expr(a["body"], "assertions." + it.key());
      // the body may only mention declared parameters
      std::function<void(const AssertExprPtr&)> check = [&](const AssertExprPtr& e) {
        if (!e) return;
        for (const Operand* o : {&e->a, &e->b})
          if (o->is_var &&
              std::find(spec.params.begin(), spec.params.end(), o->var) == spec.params.end())
            throw ConfigError("assertions." + it.key() + ": body references unknown parameter '" +
                              o->var + "'");
        for (const auto& c : e->children) check(c);
      };
      check(spec.body);
      p.assertions[it.key()] = std::move(spec);
    }
  }
  if (doc.contains("aliases")) {
    if (!doc["aliases"].is_object()) throw ConfigError("'aliases' must be an object");
    for (auto it = doc["aliases"].begin(); it != doc["aliases"].end(); ++it)
      p.aliases[it.key()] = it.value().get<std::string>();
  }
  if (doc.contains("auth")) {
    const Json& a = doc["auth"];
    if (!a.is_object() || !a.contains("value")) throw ConfigError("'auth' needs a 'value'");
    AuthConfig auth;
    auth.header = a.value("header", "X-API-Key");
    auth.value = a["value"].get<std::string>();
    p.auth = auth;
  }
  if (doc.contains("oracle")) {
    const Json& o = doc["oracle"];
    if (!o.is_object()) throw ConfigError("'oracle' must be an object");
    if (o.contains("recBound")) {
      if (!o["recBound"].is_number_integer() || o["recBound"].get<int>() < 0)
        throw ConfigError("oracle.recBound must be a non-negative integer");
      p.oracle.rec_bound = o["recBound"].get<int>();
    }
    if (o.contains("domains")) {
      for (auto it = o["domains"].begin(); it != o["domains"].end(); ++it) {
        if (!it.value().is_array() || it.value().empty())
          throw ConfigError("oracle.domains." + it.key() + " must be a non-empty array");
        for (const auto& v : it.value()) p.oracle.domains[it.key()].push_back(v);
      }
    }
    if (o.contains("inputDomains")) {
      for (const auto& entry : o["inputDomains"]) {
        if (!entry.is_object() || !entry.contains("code") || !entry.contains("type") ||
            !entry.contains("values") || !entry["values"].is_array() || entry["values"].empty())
          throw ConfigError("oracle.inputDomains entries need code, type and non-empty values");
        auto key = std::make_pair(entry["code"].get<int>(), entry["type"].get<std::string>());
        for (const auto& v : entry["values"]) p.oracle.input_domains[key].push_back(v);
      }
    }
  }
  // generator-level oracleDomain feeds the enumeration config unless overridden
  for (const auto& [name, g] : p.generators)
    if (!g.oracle_domain.empty() && !p.oracle.domains.count(name))
      p.oracle.domains[name] = g.oracle_domain;
  return p;
}

Preamble load_preamble_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open preamble '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string dir = fs::path(path).parent_path().string();
  if (dir.empty()) dir = ".";
  bool yaml = path.size() >= 5 && (path.substr(path.size() - 5) == ".yaml" ||
                                   path.substr(path.size() - 4) == ".yml");
  Json doc;
  if (yaml) {
    doc = openapi::yaml_to_json(buf.str());
  } else {
    try {
      doc = Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
      throw ConfigError("preamble '" + path + "': " + e.what());
    }
  }
  return load_preamble(doc, dir);
}

namespace {

constexpr char kStringAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";

std::string rand_string(Rng& rng, int len) {
  std::string out;
  out.reserve(len);
  for (int i = 0; i < len; ++i) out.push_back(kStringAlphabet[rng.below(sizeof(kStringAlphabet) - 1)]);
  return out;
}

std::string format_uuid(uint64_t hi, uint64_t lo) {
  // RFC 4122 v4 layout
  hi = (hi & ~0xf000ULL) | 0x4000ULL;
  lo = (lo & ~(0xc0ULL << 56)) | (0x80ULL << 56);
  char buf[37];
  std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%04x%08x",
                static_cast<uint32_t>(hi >> 32), static_cast<uint32_t>((hi >> 16) & 0xffff),
                static_cast<uint32_t>(hi & 0xffff), static_cast<uint32_t>(lo >> 48),
                static_cast<uint32_t>((lo >> 32) & 0xffff), static_cast<uint32_t>(lo & 0xffffffff));
  return buf;
}

}  // namespace

Json generate(const GeneratorSpec& spec, Rng& rng, GenState& state, const std::string& key) {
  switch (spec.kind) {
    case GeneratorSpec::Kind::Const:
      return spec.const_value;
    case GeneratorSpec::Kind::Uuid: {
      uint64_t hi = rng.next_u64();
      uint64_t lo = rng.next_u64();
      return format_uuid(hi, lo);
    }
    case GeneratorSpec::Kind::RandString:
      return rand_string(rng, spec.len);
    case GeneratorSpec::Kind::RandInt: {
      uint64_t span = static_cast<uint64_t>(spec.hi - spec.lo) + 1;
      return spec.lo + static_cast<int64_t>(rng.below(span));
    }
    case GeneratorSpec::Kind::OneOf:
      return spec.one_of[rng.below(spec.one_of.size())];
    case GeneratorSpec::Kind::Object: {
      Json out = Json::object();
      for (const auto& [field, sub] : spec.fields)  // std::map: sorted, deterministic order
        out[field] = generate(*sub, rng, state, key + "." + field);
      return out;
    }
    case GeneratorSpec::Kind::FromFile: {
      if (spec.file_cycle) {
        size_t& pos = state.cycle_pos[key];
        Json v = spec.file_values[pos % spec.file_values.size()];
        ++pos;
        return v;
      }
      return spec.file_values[rng.below(spec.file_values.size())];
    }
  }
  throw ConfigError("unreachable generator kind");
}

const GeneratorSpec* find_generator(const Preamble& p, const std::string& gen_id) {
  auto it = p.generators.find(gen_id);
  if (it != p.generators.end()) return &it->second;
  if (gen_id == "uuid") {
    static const GeneratorSpec builtin_uuid{GeneratorSpec::Kind::Uuid, {}, 0, 0, 0, {}, {}, {}, true, {}};
    return &builtin_uuid;
  }
  return nullptr;
}

std::string alias_of(const Preamble& p, const std::string& var) {
  auto it = p.aliases.find(var);
  return it == p.aliases.end() ? var : it->second;
}

}  // namespace cots::runtime
