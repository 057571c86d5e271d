#include "cots/semantics.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace cots::semantics {

using ast::SessionPtr;
using runtime::Env;

bool Event::operator<(const Event& o) const {
  if (dir != o.dir) return dir < o.dir;
  if (label != o.label) return label < o.label;
  if (payload.size() != o.payload.size()) return payload.size() < o.payload.size();
  for (size_t i = 0; i < payload.size(); ++i) {
    if (payload[i] != o.payload[i]) return payload[i].dump() < o.payload[i].dump();
  }
  return false;
}

std::string Event::str() const {
  std::ostringstream out;
  out << (dir == Dir::Send ? "!" : "?") << label << "(";
  for (size_t i = 0; i < payload.size(); ++i) {
    if (i) out << ",";
    out << payload[i].dump();
  }
  out << ")";
  return out.str();
}

std::string trace_str(const Trace& t) {
  std::ostringstream out;
  for (size_t i = 0; i < t.size(); ++i) {
    if (i) out << " ";
    out << t[i].str();
  }
  return out.str();
}

EnumConfig EnumConfig::from_oracle(const runtime::OracleConfig& o, std::optional<int> bound_override) {
  EnumConfig cfg;
  if (bound_override) {
    cfg.rec_bound = *bound_override;
  } else if (o.rec_bound) {
    cfg.rec_bound = *o.rec_bound;
  } else {
    cfg.rec_bound = -1;  // flags "omitted"; enumerate rejects recursive models
  }
  cfg.domains = o.domains;
  cfg.input_domains = o.input_domains;
  return cfg;
}

namespace {

struct EnumCtx {
  const EnumConfig& cfg;
  const std::map<std::string, runtime::AssertionSpec>& assertions;

  const std::vector<Json>& gen_domain(const std::string& gen_id) const {
    auto it = cfg.domains.find(gen_id);
    if (it == cfg.domains.end())
      throw SemanticsError(SemanticsError::Kind::MissingDomain,
                           "no oracle domain for generator '" + gen_id + "'");
    return it->second;
  }

  const std::vector<Json>& input_domain(int code, const ast::TypeName& type) const {
    auto it = cfg.input_domains.find({code, type.str()});
    if (it == cfg.input_domains.end())
      throw SemanticsError(SemanticsError::Kind::MissingDomain,
                           "no input domain for (C" + std::to_string(code) + ", " + type.str() + ")");
    return it->second;
  }
};

// Enumerate all value tuples for one prefix; call `f(values)` for each.
void tuples(const std::vector<std::vector<Json>>& domains, std::vector<Json>& acc,
            const std::function<void(const std::vector<Json>&)>& f) {
  if (acc.size() == domains.size()) {
    f(acc);
    return;
  }
  for (const auto& v : domains[acc.size()]) {
    acc.push_back(v);
    tuples(domains, acc, f);
    acc.pop_back();
  }
}

// Recursion budgets keyed by binder node; overwritten on re-entry, which is
// exactly a fresh activation of that binder.
using Budgets = std::map<const ast::Session*, int>;
using Binders = std::map<std::string, const ast::Session*>;

struct Enumerator {
  const EnumCtx& ctx;

  std::set<Trace> eval(const SessionPtr& s, Env env, Budgets budgets, Binders binders) {
    if (std::holds_alternative<ast::End>(s->node)) return {Trace{}};
    if (const auto* rv = std::get_if<ast::RecVar>(&s->node)) {
      auto bit = binders.find(rv->var);
      if (bit == binders.end())
        throw SemanticsError(SemanticsError::Kind::IllFormed,
                             "free recursion variable '" + rv->var + "'");
      const ast::Session* rec_node = bit->second;
      int& budget = budgets[rec_node];
      if (budget <= 0) return {};
      --budget;
      env.push_frame();
      return eval(std::get<ast::Rec>(rec_node->node).body, std::move(env), std::move(budgets),
                  std::move(binders));
    }
    if (const auto* rec = std::get_if<ast::Rec>(&s->node)) {
      if (ctx.cfg.rec_bound < 0)
        throw SemanticsError(SemanticsError::Kind::UnboundedModel,
                             "model is recursive and no recursion bound was given");
      binders[rec->var] = s.get();
      budgets[s.get()] = ctx.cfg.rec_bound;
      env.push_frame();
      return eval(rec->body, std::move(env), std::move(budgets), std::move(binders));
    }
    std::set<Trace> out;
    if (const auto* ic = std::get_if<ast::InternalChoice>(&s->node)) {
      for (const auto& b : ic->branches) {
        std::vector<std::vector<Json>> doms;
        for (const auto& a : b.args) {
          if (a.is_fresh()) {
            doms.push_back(ctx.gen_domain(a.generator));
          } else {
            const Json* v = env.lookup(a.name);
            if (!v)
              throw SemanticsError(SemanticsError::Kind::IllFormed,
                                   "unbound variable '" + a.name + "'");
            doms.push_back({*v});
          }
        }
        std::vector<Json> acc;
        tuples(doms, acc, [&](const std::vector<Json>& values) {
          Env env2 = env;
          for (size_t i = 0; i < b.args.size(); ++i)
            if (b.args[i].is_fresh()) env2.bind(b.args[i].name, values[i]);
          Event ev{Event::Dir::Send, b.op, values};
          for (const auto& rest : eval(b.cont, env2, budgets, binders)) {
            Trace t;
            t.reserve(rest.size() + 1);
            t.push_back(ev);
            t.insert(t.end(), rest.begin(), rest.end());
            out.insert(std::move(t));
          }
        });
      }
      return out;
    }
    const auto& ec = std::get<ast::ExternalChoice>(s->node);
    for (const auto& b : ec.branches) {
      std::vector<std::vector<Json>> doms;
      for (const auto& [name, type] : b.decls) doms.push_back(ctx.input_domain(b.code, type));
      std::vector<Json> acc;
      tuples(doms, acc, [&](const std::vector<Json>& values) {
        Env env2 = env;
        for (size_t i = 0; i < b.decls.size(); ++i) env2.bind(b.decls[i].first, values[i]);
        if (b.assertion) {
          std::vector<Json> args;
          for (const auto& an : b.assertion->args) {
            const Json* v = env2.lookup(an);
            if (!v)
              throw SemanticsError(SemanticsError::Kind::IllFormed,
                                   "unbound assertion argument '" + an + "'");
            args.push_back(*v);
          }
          auto ait = ctx.assertions.find(b.assertion->predicate);
          if (ait == ctx.assertions.end())
            throw SemanticsError(SemanticsError::Kind::IllFormed,
                                 "unknown assertion predicate '" + b.assertion->predicate + "'");
          if (!runtime::eval_assertion(ait->second, args).value) return;  // filtered out
        }
        Event ev{Event::Dir::Recv, std::to_string(b.code), values};
        for (const auto& rest : eval(b.cont, env2, budgets, binders)) {
          Trace t;
          t.reserve(rest.size() + 1);
          t.push_back(ev);
          t.insert(t.end(), rest.begin(), rest.end());
          out.insert(std::move(t));
        }
      });
    }
    return out;
  }
};

struct Matcher {
  const EnumCtx& ctx;
  const Trace& trace;

  bool match(const SessionPtr& s, Env env, Budgets budgets, Binders binders, size_t idx) {
    if (std::holds_alternative<ast::End>(s->node)) return idx == trace.size();
    if (const auto* rv = std::get_if<ast::RecVar>(&s->node)) {
      auto bit = binders.find(rv->var);
      if (bit == binders.end()) return false;
      const ast::Session* rec_node = bit->second;
      int& budget = budgets[rec_node];
      if (budget <= 0) return false;
      --budget;
      env.push_frame();
      return match(std::get<ast::Rec>(rec_node->node).body, std::move(env), std::move(budgets),
                   std::move(binders), idx);
    }
    if (const auto* rec = std::get_if<ast::Rec>(&s->node)) {
      if (ctx.cfg.rec_bound < 0)
        throw SemanticsError(SemanticsError::Kind::UnboundedModel,
                             "model is recursive and no recursion bound was given");
      binders[rec->var] = s.get();
      budgets[s.get()] = ctx.cfg.rec_bound;
      env.push_frame();
      return match(rec->body, std::move(env), std::move(budgets), std::move(binders), idx);
    }
    if (idx >= trace.size()) return false;
    const Event& ev = trace[idx];
    if (const auto* ic = std::get_if<ast::InternalChoice>(&s->node)) {
      if (ev.dir != Event::Dir::Send) return false;
      for (const auto& b : ic->branches) {
        if (b.op != ev.label || b.args.size() != ev.payload.size()) continue;
        bool ok = true;
        Env env2 = env;
        for (size_t i = 0; i < b.args.size() && ok; ++i) {
          const auto& a = b.args[i];
          if (a.is_fresh()) {
            const auto& dom = ctx.gen_domain(a.generator);
            if (std::find(dom.begin(), dom.end(), ev.payload[i]) == dom.end()) ok = false;
            else env2.bind(a.name, ev.payload[i]);
          } else {
            const Json* v = env2.lookup(a.name);
            if (!v || *v != ev.payload[i]) ok = false;
          }
        }
        if (ok && match(b.cont, std::move(env2), budgets, binders, idx + 1)) return true;
      }
      return false;
    }
    const auto& ec = std::get<ast::ExternalChoice>(s->node);
    if (ev.dir != Event::Dir::Recv) return false;
    for (const auto& b : ec.branches) {
      if (std::to_string(b.code) != ev.label || b.decls.size() != ev.payload.size()) continue;
      bool ok = true;
      Env env2 = env;
      for (size_t i = 0; i < b.decls.size() && ok; ++i) {
        const auto& dom = ctx.input_domain(b.code, b.decls[i].second);
        if (std::find(dom.begin(), dom.end(), ev.payload[i]) == dom.end()) ok = false;
        else env2.bind(b.decls[i].first, ev.payload[i]);
      }
      if (ok && b.assertion) {
        std::vector<Json> args;
        for (const auto& an : b.assertion->args) {
          const Json* v = env2.lookup(an);
          if (!v) {
            ok = false;
            break;
          }
          args.push_back(*v);
        }
        if (ok) {
          auto ait = ctx.assertions.find(b.assertion->predicate);
          if (ait == ctx.assertions.end() || !runtime::eval_assertion(ait->second, args).value)
            ok = false;
        }
      }
      if (ok && match(b.cont, std::move(env2), budgets, binders, idx + 1)) return true;
    }
    return false;
  }
};

}  // namespace

std::set<Trace> enumerate_traces(const SessionPtr& model, const EnumConfig& cfg, const Env& env,
                                 const std::map<std::string, runtime::AssertionSpec>& assertions) {
  EnumCtx ctx{cfg, assertions};
  Enumerator e{ctx};
  return e.eval(model, env, {}, {});
}

bool trace_membership(const SessionPtr& model, const EnumConfig& cfg, const Trace& trace,
                      const std::map<std::string, runtime::AssertionSpec>& assertions) {
  EnumCtx ctx{cfg, assertions};
  Matcher m{ctx, trace};
  return m.match(model, Env{}, {}, {}, 0);
}

}  // namespace cots::semantics
