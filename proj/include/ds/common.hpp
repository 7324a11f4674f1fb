#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace ds {

using json = nlohmann::json;

// All timestamps and durations are milliseconds. The sim backend counts from
// 0 at run start; the local backend uses wall-clock ms since the Unix epoch.
using TimeMs = std::int64_t;

inline constexpr TimeMs seconds(std::int64_t s) { return s * 1000; }

// Config and job metadata values: the only scalar shapes accepted in the
// input files.
using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using Params = std::map<std::string, Scalar>;

enum class Errc {
  malformed_document,
  schema_violation,
  infeasible_packing,
  empty_task_list,
  duplicate_task_id,
  queue_already_exists,
  queue_deleted,
  stale_receipt,
  invalid_key,
  no_such_key,
  io_failure,
  fleet_already_active,
  fleet_cancelled,
  already_registered,
  unbound_placeholder,
  execution_failed,
  missing_declared_output,
  tag_mutation,
  timestamp_regression,
  phase_violation,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_document: return "MalformedDocument";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::infeasible_packing: return "InfeasiblePacking";
    case Errc::empty_task_list: return "EmptyTaskList";
    case Errc::duplicate_task_id: return "DuplicateTaskId";
    case Errc::queue_already_exists: return "QueueAlreadyExists";
    case Errc::queue_deleted: return "QueueDeleted";
    case Errc::stale_receipt: return "StaleReceipt";
    case Errc::invalid_key: return "InvalidKey";
    case Errc::no_such_key: return "NoSuchKey";
    case Errc::io_failure: return "IoFailure";
    case Errc::fleet_already_active: return "FleetAlreadyActive";
    case Errc::fleet_cancelled: return "FleetCancelled";
    case Errc::already_registered: return "AlreadyRegistered";
    case Errc::unbound_placeholder: return "UnboundPlaceholder";
    case Errc::execution_failed: return "ExecutionFailed";
    case Errc::missing_declared_output: return "MissingDeclaredOutput";
    case Errc::tag_mutation: return "TagMutation";
    case Errc::timestamp_regression: return "TimestampRegression";
    case Errc::phase_violation: return "PhaseViolation";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::string path = {})
      : std::runtime_error(std::string(errc_name(code)) +
                           (path.empty() ? "" : " at '" + path + "'") + ": " +
                           message),
        code_(code),
        path_(std::move(path)) {}

  Errc code() const { return code_; }
  const std::string& path() const { return path_; }

 private:
  Errc code_;
  std::string path_;
};

[[noreturn]] inline void fail(Errc code, std::string message,
                              std::string path = {}) {
  throw Error(code, std::move(message), std::move(path));
}

// splitmix64 finalizer; the only randomness primitive in the codebase so
// that seeded runs replay bit-identically on any platform.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_step(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ mix64(v));
}

inline std::uint64_t hash_str(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) h = h * 1099511628211ULL + c;
  return mix64(h);
}

// Uniform in [0,1) from the top 53 bits.
inline double unit_from_hash(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline std::string zero_pad(std::uint64_t n, int width) {
  std::string digits = std::to_string(n);
  if (static_cast<int>(digits.size()) < width)
    digits.insert(0, width - digits.size(), '0');
  return digits;
}

// Keeps [A-Za-z0-9_-]; everything else becomes '_'. Used for ids that end up
// in queue names, object keys, and export file names.
inline std::string sanitize_id(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '-';
    out.push_back(ok ? c : '_');
  }
  return out;
}

inline bool valid_app_name(std::string_view s) {
  if (s.empty() || s.size() > 64) return false;
  for (char c : s) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

inline bool valid_param_key(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
              (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

inline std::string scalar_to_string(const Scalar& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const std::int64_t* i = std::get_if<std::int64_t>(&v))
    return std::to_string(*i);
  if (const double* d = std::get_if<double>(&v)) return json(*d).dump();
  return std::get<std::string>(v);
}

inline json scalar_to_json(const Scalar& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

inline Scalar scalar_from_json(const json& j, const std::string& path) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_unsigned()) return static_cast<std::int64_t>(j.get<std::uint64_t>());
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  fail(Errc::schema_violation, "expected a scalar (string, number, or bool)",
       path);
}

inline json params_to_json(const Params& p) {
  json j = json::object();
  for (const auto& [k, v] : p) j[k] = scalar_to_json(v);
  return j;
}

inline Params params_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) fail(Errc::schema_violation, "expected an object", path);
  Params out;
  for (const auto& [k, v] : j.items()) {
    if (!valid_param_key(k))
      fail(Errc::schema_violation, "key must match [A-Za-z0-9_]+",
           path + "." + k);
    out.emplace(k, scalar_from_json(v, path + "." + k));
  }
  return out;
}

}  // namespace ds
