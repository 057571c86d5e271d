#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace cots::mock {

using Json = nlohmann::json;

// Seeded faults, one observable behaviour each. All off = conformant server.
struct FaultFlags {
  bool F1_get_after_delete = false;     // deleted customers stay retrievable
  bool F2_inconsistent_ids = false;     // returned customer id differs from the assigned one
  bool F3_wrong_create_code = false;    // POST /customer answers 200 instead of 201
  bool F4_schema_violation = false;     // GET /customer/{id} omits the required email field
  bool F5_constraint_delete_allowed = false;  // deleting a required feature answers 204, not 400

  Json to_json() const;
  // names like "F1"; throws std::invalid_argument on unknown names
  static FaultFlags parse(const std::vector<std::string>& names);
  void set(const std::string& name, bool value);
};

// In-memory state. Ids are derived from the created content, so a repro
// script replayed on a reset server reconstructs the very same ids.
struct Store {
  std::map<std::string, Json> customers;
  std::set<std::string> deleted_customers;  // tombstones, for F1
  std::map<std::string, Json> cards;        // id -> {custId, card}
  std::map<std::string, Json> addresses;
  std::set<std::string> features;
  std::set<std::pair<std::string, std::string>> constraints;  // (required, dependent)

  void clear();
};

class MockServer {
 public:
  explicit MockServer(FaultFlags flags = {}, std::string api_key = "test-api-key",
                      bool log_requests = false);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds to `port`, or to any free port when port == 0. Returns false if the
  // port cannot be bound. The server runs on a background thread.
  bool start(int port = 0);
  void stop();

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  FaultFlags faults() const;
  void set_faults(FaultFlags flags);
  void reset_store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

uint64_t fnv1a64(const std::string& data);
std::string content_id(const std::string& prefix, const Json& body);

}  // namespace cots::mock
