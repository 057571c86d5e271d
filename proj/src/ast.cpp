#include "cots/ast.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace cots::ast {

TypeName TypeName::parse(const std::string& text) {
  if (text == "Int") return {Kind::Int, {}};
  if (text == "String") return {Kind::String, {}};
  if (text == "Bool") return {Kind::Bool, {}};
  if (text == "Float") return {Kind::Float, {}};
  return {Kind::Named, text};
}

std::string TypeName::str() const {
  switch (kind) {
    case Kind::Int: return "Int";
    case Kind::String: return "String";
    case Kind::Bool: return "Bool";
    case Kind::Float: return "Float";
    case Kind::Named: return schema;
  }
  return "?";
}

SessionPtr make_end() { return std::make_shared<Session>(Session{End{}}); }

SessionPtr make_rec(std::string var, SessionPtr body) {
  return std::make_shared<Session>(Session{Rec{std::move(var), std::move(body)}});
}

SessionPtr make_rec_var(std::string var) {
  return std::make_shared<Session>(Session{RecVar{std::move(var)}});
}

SessionPtr make_internal(std::vector<SendBranch> branches) {
  return std::make_shared<Session>(Session{InternalChoice{std::move(branches)}});
}

SessionPtr make_external(std::vector<RecvBranch> branches) {
  return std::make_shared<Session>(Session{ExternalChoice{std::move(branches)}});
}

SessionPtr make_send(std::string op, std::vector<Arg> args, SessionPtr cont) {
  SendBranch b;
  b.op = std::move(op);
  b.args = std::move(args);
  b.cont = std::move(cont);
  return make_internal({std::move(b)});
}

SessionPtr make_recv(int code, std::vector<std::pair<std::string, TypeName>> decls,
                     std::optional<AssertionCall> assertion, SessionPtr cont) {
  RecvBranch b;
  b.code = code;
  b.decls = std::move(decls);
  b.assertion = std::move(assertion);
  b.cont = std::move(cont);
  return make_external({std::move(b)});
}

namespace {

// Scope frames mirror the runtime environment: entering a rec body opens a
// fresh frame, so rebinding across unfoldings is fine while rebinding within
// one unfolding is rejected.
struct Scope {
  std::vector<std::set<std::string>> frames{{}};

  bool bound(const std::string& n) const {
    for (const auto& f : frames)
      if (f.count(n)) return true;
    return false;
  }
  bool bound_in_top(const std::string& n) const { return frames.back().count(n) > 0; }
  void bind(const std::string& n) { frames.back().insert(n); }
  void push() { frames.emplace_back(); }
};

struct WfWalker {
  std::vector<WellFormednessError>& errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back({path, msg}); }

  void walk(const SessionPtr& s, Scope scope, std::set<std::string> rec_vars,
            const std::string& path) {
    if (!s) {
      fail(path, "null session node");
      return;
    }
    if (std::holds_alternative<End>(s->node)) return;
    if (const auto* rv = std::get_if<RecVar>(&s->node)) {
      if (!rec_vars.count(rv->var))
        fail(path + "/" + rv->var, "unbound recursion variable '" + rv->var + "'");
      return;
    }
    if (const auto* rec = std::get_if<Rec>(&s->node)) {
      rec_vars.insert(rec->var);
      scope.push();
      walk(rec->body, std::move(scope), std::move(rec_vars), path + "/rec " + rec->var);
      return;
    }
    if (const auto* ic = std::get_if<InternalChoice>(&s->node)) {
      if (ic->branches.empty()) {
        fail(path, "internal choice with no branches");
        return;
      }
      for (size_t i = 0; i < ic->branches.size(); ++i) {
        const auto& b = ic->branches[i];
        std::string bp = path + "/!" + b.op;
        if (ic->branches.size() > 1) bp = path + "/+{}[" + std::to_string(i) + "]/!" + b.op;
        std::set<std::string> names;
        Scope sc = scope;
        for (const auto& a : b.args) {
          if (!names.insert(a.name).second)
            fail(bp, "duplicate argument name '" + a.name + "'");
          if (a.is_fresh()) {
            if (sc.bound_in_top(a.name))
              fail(bp, "variable '" + a.name + "' rebound within one unfolding");
            else
              sc.bind(a.name);
          } else if (!sc.bound(a.name)) {
            fail(bp, "variable '" + a.name + "' used before being bound");
          }
        }
        walk(b.cont, std::move(sc), rec_vars, bp);
      }
      return;
    }
    const auto& ec = std::get<ExternalChoice>(s->node);
    if (ec.branches.empty()) {
      fail(path, "external choice with no branches");
      return;
    }
    std::set<int> codes;
    for (size_t i = 0; i < ec.branches.size(); ++i) {
      const auto& b = ec.branches[i];
      std::string bp = path + "/?C" + std::to_string(b.code);
      if (ec.branches.size() > 1)
        bp = path + "/&{}[" + std::to_string(i) + "]/?C" + std::to_string(b.code);
      if (b.code < 100 || b.code > 599)
        fail(bp, "response code " + std::to_string(b.code) + " outside 100..599");
      if (!codes.insert(b.code).second)
        fail(bp, "duplicate response code C" + std::to_string(b.code) + " in external choice");
      std::set<std::string> names;
      Scope sc = scope;
      for (const auto& [name, type] : b.decls) {
        (void)type;
        if (!names.insert(name).second) fail(bp, "duplicate declaration name '" + name + "'");
        if (sc.bound_in_top(name))
          fail(bp, "variable '" + name + "' rebound within one unfolding");
        else
          sc.bind(name);
      }
      if (b.assertion) {
        for (const auto& a : b.assertion->args)
          if (!sc.bound(a))
            fail(bp, "assertion argument '" + a + "' is not bound at this point");
      }
      walk(b.cont, std::move(sc), rec_vars, bp);
    }
  }
};

}  // namespace

std::vector<WellFormednessError> check_well_formed(const SessionPtr& root) {
  std::vector<WellFormednessError> errors;
  WfWalker w{errors};
  w.walk(root, Scope{}, {}, "");
  return errors;
}

std::set<std::string> free_vars(const SessionPtr& s, std::set<std::string> bound_so_far) {
  std::set<std::string> free;
  std::function<void(const SessionPtr&, std::set<std::string>)> go =
      [&](const SessionPtr& node, std::set<std::string> bound) {
        if (!node) return;
        if (const auto* rec = std::get_if<Rec>(&node->node)) {
          go(rec->body, std::move(bound));
        } else if (const auto* ic = std::get_if<InternalChoice>(&node->node)) {
          for (const auto& b : ic->branches) {
            auto sc = bound;
            for (const auto& a : b.args) {
              if (a.is_fresh())
                sc.insert(a.name);
              else if (!sc.count(a.name))
                free.insert(a.name);
            }
            go(b.cont, std::move(sc));
          }
        } else if (const auto* ec = std::get_if<ExternalChoice>(&node->node)) {
          for (const auto& b : ec->branches) {
            auto sc = bound;
            for (const auto& [n, t] : b.decls) {
              (void)t;
              sc.insert(n);
            }
            if (b.assertion)
              for (const auto& a : b.assertion->args)
                if (!sc.count(a)) free.insert(a);
            go(b.cont, std::move(sc));
          }
        }
      };
  go(s, std::move(bound_so_far));
  return free;
}

namespace {

template <typename SendFn, typename RecvFn>
void visit_prefixes(const SessionPtr& s, SendFn on_send, RecvFn on_recv) {
  if (!s) return;
  if (const auto* rec = std::get_if<Rec>(&s->node)) {
    visit_prefixes(rec->body, on_send, on_recv);
  } else if (const auto* ic = std::get_if<InternalChoice>(&s->node)) {
    for (const auto& b : ic->branches) {
      on_send(const_cast<SendBranch&>(b));
      visit_prefixes(b.cont, on_send, on_recv);
    }
  } else if (const auto* ec = std::get_if<ExternalChoice>(&s->node)) {
    for (const auto& b : ec->branches) {
      on_recv(const_cast<RecvBranch&>(b));
      visit_prefixes(b.cont, on_send, on_recv);
    }
  }
}

}  // namespace

int number_prefixes(const SessionPtr& root) {
  int next = 0;
  visit_prefixes(
      root, [&](SendBranch& b) { b.id = next++; }, [&](RecvBranch& b) { b.id = next++; });
  return next;
}

int count_prefixes(const SessionPtr& root) {
  int n = 0;
  visit_prefixes(
      root, [&](SendBranch&) { ++n; }, [&](RecvBranch&) { ++n; });
  return n;
}

std::vector<std::vector<int>> decision_arms(const SessionPtr& root) {
  std::vector<std::vector<int>> arms;
  std::function<void(const SessionPtr&)> go = [&](const SessionPtr& s) {
    if (!s) return;
    if (const auto* rec = std::get_if<Rec>(&s->node)) {
      go(rec->body);
    } else if (const auto* ic = std::get_if<InternalChoice>(&s->node)) {
      if (ic->branches.size() >= 2) {
        std::vector<int> heads;
        for (const auto& b : ic->branches) heads.push_back(b.id);
        arms.push_back(std::move(heads));
      }
      for (const auto& b : ic->branches) go(b.cont);
    } else if (const auto* ec = std::get_if<ExternalChoice>(&s->node)) {
      if (ec->branches.size() >= 2) {
        std::vector<int> heads;
        for (const auto& b : ec->branches) heads.push_back(b.id);
        arms.push_back(std::move(heads));
      }
      for (const auto& b : ec->branches) go(b.cont);
    }
  };
  go(root);
  return arms;
}

bool structural_equal(const SessionPtr& a, const SessionPtr& b) {
  if (!a || !b) return a == b;
  if (a->node.index() != b->node.index()) return false;
  if (std::holds_alternative<End>(a->node)) return true;
  if (const auto* ra = std::get_if<RecVar>(&a->node))
    return ra->var == std::get<RecVar>(b->node).var;
  if (const auto* ca = std::get_if<Rec>(&a->node)) {
    const auto& cb = std::get<Rec>(b->node);
    return ca->var == cb.var && structural_equal(ca->body, cb.body);
  }
  if (const auto* ia = std::get_if<InternalChoice>(&a->node)) {
    const auto& ib = std::get<InternalChoice>(b->node);
    if (ia->branches.size() != ib.branches.size()) return false;
    for (size_t i = 0; i < ia->branches.size(); ++i) {
      const auto& x = ia->branches[i];
      const auto& y = ib.branches[i];
      if (x.op != y.op || x.args.size() != y.args.size()) return false;
      for (size_t j = 0; j < x.args.size(); ++j) {
        const auto& p = x.args[j];
        const auto& q = y.args[j];
        if (p.name != q.name || p.type != q.type || p.generator != q.generator) return false;
      }
      if (!structural_equal(x.cont, y.cont)) return false;
    }
    return true;
  }
  const auto& ea = std::get<ExternalChoice>(a->node);
  const auto& eb = std::get<ExternalChoice>(b->node);
  if (ea.branches.size() != eb.branches.size()) return false;
  for (size_t i = 0; i < ea.branches.size(); ++i) {
    const auto& x = ea.branches[i];
    const auto& y = eb.branches[i];
    if (x.code != y.code || x.decls != y.decls) return false;
    if (x.assertion.has_value() != y.assertion.has_value()) return false;
    if (x.assertion &&
        (x.assertion->predicate != y.assertion->predicate || x.assertion->args != y.assertion->args))
      return false;
    if (!structural_equal(x.cont, y.cont)) return false;
  }
  return true;
}

}  // namespace cots::ast
