#include "cots/mock_sut.hpp"

#include <cstdio>
#include <stdexcept>

#include <httplib.h>

namespace cots::mock {

Json FaultFlags::to_json() const {
  return Json{{"F1", F1_get_after_delete},
              {"F2", F2_inconsistent_ids},
              {"F3", F3_wrong_create_code},
              {"F4", F4_schema_violation},
              {"F5", F5_constraint_delete_allowed}};
}

void FaultFlags::set(const std::string& name, bool value) {
  if (name == "F1") F1_get_after_delete = value;
  else if (name == "F2") F2_inconsistent_ids = value;
  else if (name == "F3") F3_wrong_create_code = value;
  else if (name == "F4") F4_schema_violation = value;
  else if (name == "F5") F5_constraint_delete_allowed = value;
  else throw std::invalid_argument("unknown fault flag '" + name + "'");
}

FaultFlags FaultFlags::parse(const std::vector<std::string>& names) {
  FaultFlags f;
  for (const auto& n : names) f.set(n, true);
  return f;
}

void Store::clear() {
  customers.clear();
  deleted_customers.clear();
  cards.clear();
  addresses.clear();
  features.clear();
  constraints.clear();
}

uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string content_id(const std::string& prefix, const Json& body) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(body.dump())));
  return prefix + "-" + std::string(buf, 12);
}

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
  mutable std::mutex mu;
  Store store;
  FaultFlags flags;
  std::string api_key;
  bool log_requests;
};

MockServer::MockServer(FaultFlags flags, std::string api_key, bool log_requests)
    : impl_(std::make_unique<Impl>()) {
  impl_->flags = flags;
  impl_->api_key = std::move(api_key);
  impl_->log_requests = log_requests;

  auto& svr = impl_->server;
  Impl* st = impl_.get();

  auto send_json = [](httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  auto authed = [st, send_json](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("X-API-Key") != st->api_key) {
      send_json(res, 401, Json{{"error", "missing or wrong X-API-Key"}});
      return false;
    }
    return true;
  };

  auto parse_body = [send_json](const httplib::Request& req, httplib::Response& res, Json& out) {
    try {
      out = Json::parse(req.body);
      return true;
    } catch (const Json::parse_error&) {
      send_json(res, 400, Json{{"error", "request body is not valid JSON"}});
      return false;
    }
  };

  // ---- customer API -------------------------------------------------------

  svr.Post("/customer", [=](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    Json body;
    if (!parse_body(req, res, body)) return;
    if (!body.is_object()) {
      send_json(res, 400, Json{{"error", "customer must be a JSON object"}});
      return;
    }
    std::lock_guard lock(st->mu);
    std::string id = content_id("c", body);
    st->store.customers[id] = body;
    st->store.deleted_customers.erase(id);
    send_json(res, st->flags.F3_wrong_create_code ? 200 : 201, Json{{"id", id}});
  });

  svr.Get(R"(/customer/([^/]+))", [=](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    std::string id = req.matches[1];
    std::lock_guard lock(st->mu);
    auto it = st->store.customers.find(id);
    bool alive = it != st->store.customers.end();
    bool tombstoned = st->store.deleted_customers.count(id) > 0;
    if (!alive && !(tombstoned && st->flags.F1_get_after_delete)) {
      send_json(res, 404, Json{{"error", "no such customer"}});
      return;
    }
    Json body = alive ? it->second : Json::object();
    body["id"] = st->flags.F2_inconsistent_ids ? id + "-alt" : id;
    if (st->flags.F4_schema_violation) body.erase("email");
    send_json(res, 200, body);
  });

  svr.Delete(R"(/customer/([^/]+))", [=](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    std::string id = req.matches[1];
    std::lock_guard lock(st->mu);
    auto it = st->store.customers.find(id);
    if (it == st->store.customers.end()) {
      send_json(res, 404, Json{{"error", "no such customer"}});
      return;
    }
    st->store.deleted_customers.insert(id);
    if (st->flags.F1_get_after_delete) {
      // the faulty server keeps the record around, which is the bug
    } else {
      st->store.customers.erase(it);
    }
    res.status = 204;
  });

  auto sub_resource = [=](const char* prefix,
                          std::map<std::string, Json> Store::*table) {
    return [=](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      Json body;
      if (!parse_body(req, res, body)) return;
      std::string cust_id = req.get_param_value("custId");
      std::lock_guard lock(st->mu);
      if (!st->store.customers.count(cust_id) ||
          st->store.deleted_customers.count(cust_id)) {
        send_json(res, 404, Json{{"error", "no such customer"}});
        return;
      }
      std::string id = content_id(prefix, body);
      (st->store.*table)[id] = Json{{"custId", cust_id}, {"data", body}};
      send_json(res, 201, Json{{"id", id}});
    };
  };
  svr.Post("/card", sub_resource("card", &Store::cards));
  svr.Post("/address", sub_resource("addr", &Store::addresses));

  // ---- features API -------------------------------------------------------

  svr.Post("/features", [=](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    Json body;
    if (!parse_body(req, res, body)) return;
    if (!body.is_string()) {
      send_json(res, 400, Json{{"error", "feature name must be a JSON string"}});
      return;
    }
    std::lock_guard lock(st->mu);
    st->store.features.insert(body.get<std::string>());
    res.status = 201;  // re-adding an existing feature is an idempotent create
  });

  svr.Post(R"(/features/([^/]+)/constraints)",
           [=](const httplib::Request& req, httplib::Response& res) {
             if (!authed(req, res)) return;
             std::string required = req.matches[1];
             Json body;
             if (!parse_body(req, res, body)) return;
             if (!body.is_string()) {
               send_json(res, 400, Json{{"error", "dependent feature name must be a JSON string"}});
               return;
             }
             std::string dependent = body.get<std::string>();
             std::lock_guard lock(st->mu);
             if (!st->store.features.count(required) || !st->store.features.count(dependent)) {
               send_json(res, 404, Json{{"error", "constraint references a missing feature"}});
               return;
             }
             st->store.constraints.insert({required, dependent});
             res.status = 201;
           });

  svr.Delete(R"(/features/([^/]+))", [=](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    std::string name = req.matches[1];
    std::lock_guard lock(st->mu);
    if (!st->store.features.count(name)) {
      send_json(res, 404, Json{{"error", "no such feature"}});
      return;
    }
    bool required_by_active = false;
    for (const auto& [required, dependent] : st->store.constraints)
      if (required == name && st->store.features.count(dependent)) required_by_active = true;
    if (required_by_active && !st->flags.F5_constraint_delete_allowed) {
      send_json(res, 400, Json{{"error", "feature is required by an active constraint"}});
      return;
    }
    st->store.features.erase(name);
    for (auto it = st->store.constraints.begin(); it != st->store.constraints.end();)
      it = (it->first == name || it->second == name) ? st->store.constraints.erase(it) : ++it;
    res.status = 204;
  });

  // ---- admin plane (not part of the fixture OpenAPI document) -------------

  svr.Post("/__admin/reset", [=](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(st->mu);
    st->store.clear();
    res.status = 204;
  });

  svr.Get("/__admin/faults", [=](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(st->mu);
    send_json(res, 200, st->flags.to_json());
  });

  svr.Post("/__admin/faults", [=](const httplib::Request& req, httplib::Response& res) {
    Json body;
    if (!parse_body(req, res, body)) return;
    std::lock_guard lock(st->mu);
    try {
      for (auto it = body.begin(); it != body.end(); ++it)
        st->flags.set(it.key(), it.value().get<bool>());
    } catch (const std::exception& e) {
      send_json(res, 400, Json{{"error", e.what()}});
      return;
    }
    res.status = 204;
  });

  if (log_requests) {
    svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      std::fprintf(stderr, "%s %s -> %d\n", req.method.c_str(), req.path.c_str(), res.status);
    });
  }
}

MockServer::~MockServer() { stop(); }

bool MockServer::start(int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    port_ = svr.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) return false;
  } else {
    if (!svr.bind_to_port("127.0.0.1", port)) return false;
    port_ = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return true;
}

void MockServer::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

FaultFlags MockServer::faults() const {
  std::lock_guard lock(impl_->mu);
  return impl_->flags;
}

void MockServer::set_faults(FaultFlags flags) {
  std::lock_guard lock(impl_->mu);
  impl_->flags = flags;
}

void MockServer::reset_store() {
  std::lock_guard lock(impl_->mu);
  impl_->store.clear();
}

}  // namespace cots::mock
