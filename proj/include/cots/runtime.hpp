#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cots::runtime {

using Json = nlohmann::json;

// splitmix64: the pinned, platform-independent random stream behind all
// generated values and branch picks. Per-run seeds are baseSeed + runIndex.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  uint64_t state_;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct GeneratorSpec {
  enum class Kind { Const, Uuid, RandString, RandInt, OneOf, Object, FromFile };
  Kind kind = Kind::Const;
  Json const_value;                                        // Const
  int len = 0;                                             // RandString
  int64_t lo = 0, hi = 0;                                  // RandInt
  std::vector<Json> one_of;                                // OneOf
  std::map<std::string, std::shared_ptr<GeneratorSpec>> fields;  // Object
  std::vector<Json> file_values;                           // FromFile (loaded eagerly)
  bool file_cycle = true;                                  // cycle vs random
  std::vector<Json> oracle_domain;                         // finite domain for enumeration
};

// Dot-separated field paths into JSON objects, e.g. "card.expiry".
const Json* json_path_get(const Json& value, const std::string& path);

// Assertion bodies are closed boolean expressions over the declared
// parameters; operands are parameter references or literals.
struct AssertExpr;
using AssertExprPtr = std::shared_ptr<const AssertExpr>;

struct Operand {
  bool is_var = false;
  std::string var;
  Json literal;
};

struct AssertExpr {
  enum class Op { Eq, Neq, FieldEq, StructEq, Contains, And, Or, Not };
  Op op;
  Operand a, b;
  std::string field_path;              // FieldEq
  std::vector<std::string> ignore;     // StructEq
  std::vector<AssertExprPtr> children; // And / Or / Not
};

struct AssertionSpec {
  std::vector<std::string> params;
  AssertExprPtr body;
};

struct AssertResult {
  bool value = false;
  std::string note;  // non-empty when failure has a structural cause (e.g. missing field)
};

// Pure and total: a missing fieldEq path yields false with a note, never a crash.
AssertResult eval_assertion(const AssertionSpec& spec, const std::vector<Json>& args);

// Deep equality ignoring the named object keys (at any depth) and key order.
bool struct_eq(const Json& a, const Json& b, const std::vector<std::string>& ignore);

// Variable environment. Binding into the current frame twice is an error;
// each recursion unfolding pushes a frame, so loop-carried names shadow
// instead of clashing. Copying an Env snapshots it.
class Env {
 public:
  Env() : frame_starts_{0} {}

  // false iff the name is already bound in the current frame
  bool bind(const std::string& name, Json value);
  const Json* lookup(const std::string& name) const;  // innermost binding, or null
  void push_frame() { frame_starts_.push_back(entries_.size()); }
  std::vector<std::string> names() const;

 private:
  std::vector<std::pair<std::string, Json>> entries_;
  std::vector<size_t> frame_starts_;
};

struct AuthConfig {
  std::string header = "X-API-Key";
  std::string value;
};

// Finite-domain configuration for the trace-enumeration oracle.
struct OracleConfig {
  std::optional<int> rec_bound;
  std::map<std::string, std::vector<Json>> domains;  // generator id -> values
  // (status code, declared type) -> values for receive payloads
  std::map<std::pair<int, std::string>, std::vector<Json>> input_domains;
};

struct Preamble {
  std::map<std::string, GeneratorSpec> generators;
  std::map<std::string, AssertionSpec> assertions;
  std::map<std::string, std::string> aliases;  // model variable -> spec parameter name
  std::optional<AuthConfig> auth;
  OracleConfig oracle;
};

Preamble load_preamble(const Json& doc, const std::string& base_dir = ".");
Preamble load_preamble_file(const std::string& path);  // JSON or YAML

// Mutable per-run generation state (fromFile cycle positions).
struct GenState {
  std::map<std::string, size_t> cycle_pos;
};

// Deterministic in (spec, rng position, state). `key` identifies the
// generator instance for cycle bookkeeping.
Json generate(const GeneratorSpec& spec, Rng& rng, GenState& state, const std::string& key);

// Looks `gen_id` up in the preamble; "uuid" is available as a builtin.
const GeneratorSpec* find_generator(const Preamble& p, const std::string& gen_id);

std::string alias_of(const Preamble& p, const std::string& var);

}  // namespace cots::runtime
