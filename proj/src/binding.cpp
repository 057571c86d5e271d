#include "cots/binding.hpp"

#include <set>

namespace cots::binding {

using ast::SessionPtr;
using ast::TypeName;
using openapi::ApiSpec;
using openapi::JsonSchema;
using openapi::SchemaPtr;

namespace {

std::string aliased(const std::map<std::string, std::string>& aliases, const std::string& var) {
  auto it = aliases.find(var);
  return it == aliases.end() ? var : it->second;
}

// Does the declared model type agree with the (possibly ref) schema?
bool type_matches(const TypeName& t, const SchemaPtr& schema, const ApiSpec& spec) {
  if (!schema) return false;
  if (t.kind == TypeName::Kind::Named) {
    SchemaPtr cur = schema;
    int hops = 0;
    while (cur && cur->kind == JsonSchema::Kind::Ref && hops++ < 64) {
      if (cur->ref == t.schema) return true;
      auto it = spec.schemas.find(cur->ref);
      cur = it == spec.schemas.end() ? nullptr : it->second;
    }
    return false;
  }
  SchemaPtr r = openapi::resolve(spec, schema);
  if (!r || r->kind == JsonSchema::Kind::Any) return true;
  switch (t.kind) {
    case TypeName::Kind::Int:
      return r->kind == JsonSchema::Kind::Integer || r->kind == JsonSchema::Kind::Number;
    case TypeName::Kind::Float:
      return r->kind == JsonSchema::Kind::Number;
    case TypeName::Kind::Bool:
      return r->kind == JsonSchema::Kind::Boolean;
    case TypeName::Kind::String:
      return r->kind == JsonSchema::Kind::String;
    default:
      return false;
  }
}

struct Binder {
  const ApiSpec& spec;
  const std::map<std::string, std::string>& aliases;
  BindingPlan plan;
  std::vector<BindError> errors;

  // Typing context for variables, frame-scoped like the runtime env.
  using TypeCtx = std::vector<std::vector<std::pair<std::string, TypeName>>>;

  void fail(std::string kind, const std::string& path, std::string message) {
    errors.push_back({std::move(kind), path, std::move(message)});
  }

  static const TypeName* ctx_lookup(const TypeCtx& ctx, const std::string& name) {
    for (auto fit = ctx.rbegin(); fit != ctx.rend(); ++fit)
      for (auto vit = fit->rbegin(); vit != fit->rend(); ++vit)
        if (vit->first == name) return &vit->second;
    return nullptr;
  }

  // `pending` is the operation whose response the next external choice
  // dispatches on; receives anywhere else cannot be driven over HTTP.
  void walk(const SessionPtr& s, TypeCtx ctx, const std::string& path,
            const openapi::OperationShape* pending) {
    if (!s) return;
    if (std::holds_alternative<ast::End>(s->node) || std::holds_alternative<ast::RecVar>(s->node))
      return;
    if (const auto* rec = std::get_if<ast::Rec>(&s->node)) {
      ctx.emplace_back();
      walk(rec->body, std::move(ctx), path + "/rec " + rec->var, nullptr);
      return;
    }
    if (const auto* ic = std::get_if<ast::InternalChoice>(&s->node)) {
      for (const auto& b : ic->branches) {
        auto branch_ctx = ctx;
        std::string bp = path + "/!" + b.op;
        bind_send(b, branch_ctx, bp);
        auto oit = spec.operations.find(b.op);
        walk(b.cont, std::move(branch_ctx), bp,
             oit == spec.operations.end() ? nullptr : &oit->second);
      }
      return;
    }
    const auto& ec = std::get<ast::ExternalChoice>(s->node);
    if (!pending) {
      fail("ReceiveWithoutRequest", path,
           "external choice is not the continuation of a request; nothing to dispatch on");
      return;
    }
    for (const auto& b : ec.branches) {
      auto branch_ctx = ctx;
      std::string bp = path + "/?C" + std::to_string(b.code);
      bind_recv(b, *pending, branch_ctx, bp);
      walk(b.cont, std::move(branch_ctx), bp, nullptr);
    }
  }

  void bind_send(const ast::SendBranch& b, TypeCtx& ctx, const std::string& path) {
    auto oit = spec.operations.find(b.op);
    if (oit == spec.operations.end()) {
      fail("UnknownOperationId", path, "no operation with operationId '" + b.op + "' in the spec");
      for (const auto& a : b.args)  // keep types flowing for later diagnostics
        if (a.is_fresh()) ctx.back().emplace_back(a.name, *a.type);
      return;
    }
    const auto& op = oit->second;
    BoundSend bound;
    bound.prefix_id = b.id;
    bound.op = op;

    std::vector<size_t> unmatched;
    std::set<std::string> covered;
    for (size_t i = 0; i < b.args.size(); ++i) {
      const auto& a = b.args[i];
      std::string target = aliased(aliases, a.name);
      const openapi::Param* param = nullptr;
      for (const auto& p : op.params)
        if (p.name == target) param = &p;
      ArgSlot slot;
      if (param) {
        slot.kind = param->in == openapi::Param::In::Path     ? ArgSlot::Kind::PathParam
                    : param->in == openapi::Param::In::Query  ? ArgSlot::Kind::QueryParam
                                                              : ArgSlot::Kind::HeaderParam;
        slot.param = param->name;
        covered.insert(param->name);
        check_arg_type(a, param->schema, ctx, path);
      } else {
        unmatched.push_back(i);
      }
      bound.slots.push_back(slot);
      if (a.is_fresh()) {
        if (a.type->kind == TypeName::Kind::Named && !spec.schemas.count(a.type->schema))
          fail("UnknownSchemaType", path,
               "'" + a.name + "' has unknown schema type '" + a.type->schema + "'");
        ctx.back().emplace_back(a.name, *a.type);
      }
    }

    if (unmatched.size() == 1) {
      if (op.request_body) {
        const auto& a = b.args[unmatched[0]];
        bound.slots[unmatched[0]] = {ArgSlot::Kind::Body, ""};
        check_arg_type(a, op.request_body, ctx, path);
      } else {
        fail("UnboundArg", path,
             "argument '" + b.args[unmatched[0]].name + "' matches no parameter of '" + b.op +
                 "' and the operation takes no request body");
      }
    } else if (unmatched.size() > 1) {
      if (op.request_body) {
        std::string names;
        for (size_t i : unmatched) names += (names.empty() ? "" : ", ") + b.args[i].name;
        fail("AmbiguousBody", path,
             "several arguments (" + names + ") could be the request body of '" + b.op + "'");
      } else {
        for (size_t i : unmatched)
          fail("UnboundArg", path,
               "argument '" + b.args[i].name + "' matches no parameter of '" + b.op + "'");
      }
    }

    for (const auto& p : op.params) {
      if (covered.count(p.name)) continue;
      bool is_path = p.in == openapi::Param::In::Path;
      bool is_auth_header = p.in == openapi::Param::In::Header && p.name == spec.api_key_header;
      if ((is_path || p.required) && !is_auth_header)
        fail("UncoveredParam", path,
             "required parameter '" + p.name + "' of '" + b.op + "' is not supplied by the model");
    }

    plan.sends.emplace(b.id, std::move(bound));
  }

  void check_arg_type(const ast::Arg& a, const SchemaPtr& schema, const TypeCtx& ctx,
                      const std::string& path) {
    if (!schema) return;
    const TypeName* t = nullptr;
    if (a.is_fresh()) {
      t = &*a.type;
    } else {
      t = ctx_lookup(ctx, a.name);
      if (!t) return;  // unbound: well-formedness reports it
    }
    if (t->kind == TypeName::Kind::Named && !spec.schemas.count(t->schema)) return;
    if (!type_matches(*t, schema, spec))
      fail("TypeMismatch", path,
           "argument '" + a.name + "' has type " + t->str() +
               " which does not match the declared schema");
  }

  void bind_recv(const ast::RecvBranch& b, const openapi::OperationShape& op, TypeCtx& ctx,
                 const std::string& path) {
    BoundRecv bound;
    bound.prefix_id = b.id;
    bound.code = b.code;
    auto rit = op.responses.find(b.code);
    if (rit == op.responses.end()) {
      fail("UnknownResponseCode", path,
           "operation '" + op.id + "' does not declare response code " + std::to_string(b.code));
      record_decl_types(b, ctx);
      return;
    }
    bound.response_schema = rit->second;

    if (!bound.response_schema) {
      if (!b.decls.empty()) {
        fail("NoSchemaForDecls", path,
             "response " + std::to_string(b.code) + " declares no schema but the branch binds " +
                 std::to_string(b.decls.size()) + " variable(s)");
        record_decl_types(b, ctx);
        return;
      }
      plan.recvs.emplace(b.id, std::move(bound));
      return;
    }

    SchemaPtr resolved = openapi::resolve(spec, bound.response_schema);
    for (const auto& [name, type] : b.decls) {
      std::string field = aliased(aliases, name);
      bool has_field = resolved && resolved->kind == JsonSchema::Kind::Object &&
                       resolved->properties.count(field) > 0;
      DeclProjection proj;
      if (b.decls.size() > 1 || has_field) {
        // several declarations, or a single one naming a top-level field,
        // project object fields; the field must be required so that a
        // schema-valid body always carries it
        if (!has_field) {
          fail("UnboundDecl", path,
               "declaration '" + name + "' matches no top-level field '" + field +
                   "' of the response schema");
          continue;
        }
        if (!resolved->required.count(field)) {
          fail("UnboundDecl", path,
               "declaration '" + name + "' projects field '" + field +
                   "' which is not required; a conforming response may omit it");
          continue;
        }
        proj.whole_body = false;
        proj.field = field;
        if (!type_matches(type, resolved->properties.at(field), spec))
          fail("TypeMismatch", path,
               "declaration '" + name + ": " + type.str() + "' does not match field '" + field + "'");
      } else {
        proj.whole_body = true;
        if (type.kind == TypeName::Kind::Named && !spec.schemas.count(type.schema)) {
          fail("UnknownSchemaType", path,
               "'" + name + "' has unknown schema type '" + type.schema + "'");
        } else if (!type_matches(type, bound.response_schema, spec)) {
          fail("TypeMismatch", path,
               "declaration '" + name + ": " + type.str() + "' does not match the response schema");
        }
      }
      bound.decls.push_back(proj);
    }
    record_decl_types(b, ctx);
    plan.recvs.emplace(b.id, std::move(bound));
  }

  void record_decl_types(const ast::RecvBranch& b, TypeCtx& ctx) {
    for (const auto& [name, type] : b.decls) ctx.back().emplace_back(name, type);
  }
};

}  // namespace

BindResult bind(const parser::ParsedModel& model, const openapi::ApiSpec& spec,
                const std::map<std::string, std::string>& aliases) {
  Binder binder{spec, aliases, {}, {}};
  binder.walk(model.root, {{}}, "", nullptr);
  BindResult out;
  out.errors = std::move(binder.errors);
  if (out.errors.empty()) out.plan = std::move(binder.plan);
  return out;
}

}  // namespace cots::binding
