#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ds/common.hpp"

namespace ds {

struct MachineType {
  std::string name;
  std::int64_t cpu_units = 0;  // 1024 = 1 vCPU
  std::int64_t memory_mb = 0;

  bool operator==(const MachineType&) const = default;
};

struct DoneCheck {
  bool enabled = false;
  std::int64_t expected_file_count = 1;

  bool operator==(const DoneCheck&) const = default;
};

// The run description a user edits per run: naming, machine shape and count,
// bid ceiling, queue behaviour, and the worker command.
struct RunConfig {
  std::string app_name;
  std::string image_ref;
  MachineType machine_type;
  std::int64_t fleet_size = 0;
  double max_price_per_hour = 0.0;
  std::int64_t tasks_per_machine = 0;
  std::int64_t task_cpu_units = 0;
  std::int64_t task_memory_mb = 0;
  std::int64_t visibility_timeout_s = 0;
  std::int64_t max_receive_count = 0;
  std::string output_prefix;
  DoneCheck done_check;
  std::int64_t monitor_period_s = 0;
  std::int64_t teardown_hysteresis_ticks = 0;
  std::string command_template;

  bool operator==(const RunConfig&) const = default;
};

struct JobSpec {
  Params shared;
  std::vector<Params> tasks;  // order preserved exactly as written

  bool operator==(const JobSpec&) const = default;
};

// Account-specific infrastructure identifiers. Opaque in the sim/local
// backends; validated for presence only.
struct FleetSpec {
  std::string account_id;
  std::string region;
  std::vector<std::string> subnet_ids;
  std::vector<std::string> security_group_ids;
  std::string instance_role;
  std::string key_name;

  bool operator==(const FleetSpec&) const = default;
};

// One parallel work unit as it travels through the queue.
struct TaskMessage {
  std::string task_id;
  Params parameters;
  std::string output_prefix;

  bool operator==(const TaskMessage&) const = default;
};

struct Diagnostic {
  enum class Severity { error, warn };
  Severity severity;
  std::string path;
  std::string message;
};

namespace detail {

inline json parse_json_document(const std::string& bytes) {
  json j = json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    fail(Errc::malformed_document, "input is not valid JSON");
  if (!j.is_object())
    fail(Errc::malformed_document, "top-level value must be an object");
  return j;
}

inline const json& require_field(const json& j, const std::string& key,
                                 const std::string& parent) {
  auto it = j.find(key);
  if (it == j.end())
    fail(Errc::schema_violation, "missing required field",
         parent.empty() ? key : parent + "." + key);
  return *it;
}

inline void reject_unknown_keys(const json& j,
                                const std::set<std::string>& known,
                                const std::string& parent) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k))
      fail(Errc::schema_violation, "unknown key",
           parent.empty() ? k : parent + "." + k);
  }
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(Errc::schema_violation, "expected a string", path);
  return j.get<std::string>();
}

inline std::string get_nonempty_string(const json& j, const std::string& path) {
  std::string s = get_string(j, path);
  if (s.empty()) fail(Errc::schema_violation, "must be non-empty", path);
  return s;
}

inline std::int64_t get_positive_int(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    fail(Errc::schema_violation, "expected an integer", path);
  std::int64_t v = j.get<std::int64_t>();
  if (v <= 0) fail(Errc::schema_violation, "must be a positive integer", path);
  return v;
}

inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(Errc::schema_violation, "expected a bool", path);
  return j.get<bool>();
}

inline double get_nonneg_number(const json& j, const std::string& path) {
  if (!j.is_number())
    fail(Errc::schema_violation, "expected a number", path);
  double v = j.get<double>();
  if (v < 0.0) fail(Errc::schema_violation, "must be >= 0", path);
  return v;
}

inline std::vector<std::string> get_string_list(const json& j,
                                                const std::string& path) {
  if (!j.is_array()) fail(Errc::schema_violation, "expected an array", path);
  if (j.empty()) fail(Errc::schema_violation, "must be non-empty", path);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(
        get_nonempty_string(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& bytes) {
  using namespace detail;
  json j = parse_json_document(bytes);
  static const std::set<std::string> known = {
      "app_name",        "image_ref",
      "machine_type",    "fleet_size",
      "max_price_per_hour", "tasks_per_machine",
      "task_cpu_units",  "task_memory_mb",
      "visibility_timeout_s", "max_receive_count",
      "output_prefix",   "done_check",
      "monitor_period_s", "teardown_hysteresis_ticks",
      "command_template"};
  reject_unknown_keys(j, known, "");

  RunConfig c;
  c.app_name = get_nonempty_string(require_field(j, "app_name", ""), "app_name");
  if (!valid_app_name(c.app_name))
    fail(Errc::schema_violation, "must match [A-Za-z0-9_-]{1,64}", "app_name");
  c.image_ref =
      get_nonempty_string(require_field(j, "image_ref", ""), "image_ref");

  const json& mt = require_field(j, "machine_type", "");
  if (!mt.is_object())
    fail(Errc::schema_violation, "expected an object", "machine_type");
  reject_unknown_keys(mt, {"name", "cpu_units", "memory_mb"}, "machine_type");
  c.machine_type.name = get_nonempty_string(
      require_field(mt, "name", "machine_type"), "machine_type.name");
  c.machine_type.cpu_units = get_positive_int(
      require_field(mt, "cpu_units", "machine_type"), "machine_type.cpu_units");
  c.machine_type.memory_mb = get_positive_int(
      require_field(mt, "memory_mb", "machine_type"), "machine_type.memory_mb");

  c.fleet_size =
      get_positive_int(require_field(j, "fleet_size", ""), "fleet_size");
  c.max_price_per_hour = get_nonneg_number(
      require_field(j, "max_price_per_hour", ""), "max_price_per_hour");
  c.tasks_per_machine = get_positive_int(
      require_field(j, "tasks_per_machine", ""), "tasks_per_machine");
  c.task_cpu_units =
      get_positive_int(require_field(j, "task_cpu_units", ""), "task_cpu_units");
  c.task_memory_mb =
      get_positive_int(require_field(j, "task_memory_mb", ""), "task_memory_mb");
  c.visibility_timeout_s = get_positive_int(
      require_field(j, "visibility_timeout_s", ""), "visibility_timeout_s");
  c.max_receive_count = get_positive_int(
      require_field(j, "max_receive_count", ""), "max_receive_count");
  c.output_prefix = get_nonempty_string(require_field(j, "output_prefix", ""),
                                        "output_prefix");

  const json& dc = require_field(j, "done_check", "");
  if (!dc.is_object())
    fail(Errc::schema_violation, "expected an object", "done_check");
  reject_unknown_keys(dc, {"enabled", "expected_file_count"}, "done_check");
  c.done_check.enabled =
      get_bool(require_field(dc, "enabled", "done_check"), "done_check.enabled");
  c.done_check.expected_file_count =
      get_positive_int(require_field(dc, "expected_file_count", "done_check"),
                       "done_check.expected_file_count");

  c.monitor_period_s = get_positive_int(
      require_field(j, "monitor_period_s", ""), "monitor_period_s");
  c.teardown_hysteresis_ticks =
      get_positive_int(require_field(j, "teardown_hysteresis_ticks", ""),
                       "teardown_hysteresis_ticks");
  c.command_template = get_string(require_field(j, "command_template", ""),
                                  "command_template");

  if (c.tasks_per_machine * c.task_cpu_units > c.machine_type.cpu_units)
    fail(Errc::infeasible_packing,
         "tasks_per_machine x task_cpu_units exceeds machine_type.cpu_units");
  if (c.tasks_per_machine * c.task_memory_mb > c.machine_type.memory_mb)
    fail(Errc::infeasible_packing,
         "tasks_per_machine x task_memory_mb exceeds machine_type.memory_mb");
  return c;
}

inline json run_config_to_json(const RunConfig& c) {
  json j;
  j["app_name"] = c.app_name;
  j["image_ref"] = c.image_ref;
  j["machine_type"] = {{"name", c.machine_type.name},
                       {"cpu_units", c.machine_type.cpu_units},
                       {"memory_mb", c.machine_type.memory_mb}};
  j["fleet_size"] = c.fleet_size;
  j["max_price_per_hour"] = c.max_price_per_hour;
  j["tasks_per_machine"] = c.tasks_per_machine;
  j["task_cpu_units"] = c.task_cpu_units;
  j["task_memory_mb"] = c.task_memory_mb;
  j["visibility_timeout_s"] = c.visibility_timeout_s;
  j["max_receive_count"] = c.max_receive_count;
  j["output_prefix"] = c.output_prefix;
  j["done_check"] = {{"enabled", c.done_check.enabled},
                     {"expected_file_count", c.done_check.expected_file_count}};
  j["monitor_period_s"] = c.monitor_period_s;
  j["teardown_hysteresis_ticks"] = c.teardown_hysteresis_ticks;
  j["command_template"] = c.command_template;
  return j;
}

// nlohmann::json keeps object keys sorted, so dump(2) is the canonical
// 2-space, lexicographically ordered form used by every file we write.
inline std::string serialize_run_config(const RunConfig& c) {
  return run_config_to_json(c).dump(2) + "\n";
}

inline JobSpec parse_job_spec(const std::string& bytes) {
  using namespace detail;
  json j = parse_json_document(bytes);
  reject_unknown_keys(j, {"shared", "tasks"}, "");
  JobSpec spec;
  spec.shared = params_from_json(require_field(j, "shared", ""), "shared");
  const json& tasks = require_field(j, "tasks", "");
  if (!tasks.is_array())
    fail(Errc::schema_violation, "expected an array", "tasks");
  if (tasks.empty()) fail(Errc::empty_task_list, "tasks must be non-empty");
  for (std::size_t i = 0; i < tasks.size(); ++i)
    spec.tasks.push_back(
        params_from_json(tasks[i], "tasks[" + std::to_string(i) + "]"));
  return spec;
}

inline std::string serialize_job_spec(const JobSpec& spec) {
  json j;
  j["shared"] = params_to_json(spec.shared);
  j["tasks"] = json::array();
  for (const Params& t : spec.tasks) j["tasks"].push_back(params_to_json(t));
  return j.dump(2) + "\n";
}

inline FleetSpec parse_fleet_spec(const std::string& bytes) {
  using namespace detail;
  json j = parse_json_document(bytes);
  static const std::set<std::string> known = {
      "account_id",         "region",       "subnet_ids",
      "security_group_ids", "instance_role", "key_name"};
  reject_unknown_keys(j, known, "");
  FleetSpec f;
  f.account_id =
      get_nonempty_string(require_field(j, "account_id", ""), "account_id");
  f.region = get_nonempty_string(require_field(j, "region", ""), "region");
  f.subnet_ids =
      get_string_list(require_field(j, "subnet_ids", ""), "subnet_ids");
  f.security_group_ids = get_string_list(
      require_field(j, "security_group_ids", ""), "security_group_ids");
  f.instance_role = get_nonempty_string(require_field(j, "instance_role", ""),
                                        "instance_role");
  f.key_name = get_nonempty_string(require_field(j, "key_name", ""), "key_name");
  return f;
}

inline std::string serialize_fleet_spec(const FleetSpec& f) {
  json j;
  j["account_id"] = f.account_id;
  j["region"] = f.region;
  j["subnet_ids"] = f.subnet_ids;
  j["security_group_ids"] = f.security_group_ids;
  j["instance_role"] = f.instance_role;
  j["key_name"] = f.key_name;
  return j.dump(2) + "\n";
}

// Flattens a job file into queue messages. Parameters are shared ∪ task with
// task-level keys winning. Ids are "<zero-padded ordinal>-<task-level values,
// sorted, sanitized>"; the ordinal alone guarantees uniqueness.
inline std::vector<TaskMessage> expand_jobs(const JobSpec& job,
                                            const RunConfig& config) {
  std::vector<TaskMessage> out;
  out.reserve(job.tasks.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < job.tasks.size(); ++i) {
    const Params& task = job.tasks[i];
    TaskMessage m;
    m.parameters = job.shared;
    for (const auto& [k, v] : task) m.parameters[k] = v;

    std::vector<std::string> values;
    values.reserve(task.size());
    for (const auto& [k, v] : task)
      values.push_back(sanitize_id(scalar_to_string(v)));
    std::sort(values.begin(), values.end());

    m.task_id = zero_pad(i, 6);
    for (const std::string& v : values) m.task_id += "-" + v;
    m.output_prefix = config.output_prefix + "/" + m.task_id;

    if (!seen.insert(m.task_id).second)
      fail(Errc::duplicate_task_id, "generated task_id collides", m.task_id);
    out.push_back(std::move(m));
  }
  return out;
}

inline json task_message_to_json(const TaskMessage& m) {
  return json{{"task_id", m.task_id},
              {"parameters", params_to_json(m.parameters)},
              {"output_prefix", m.output_prefix}};
}

inline TaskMessage task_message_from_json(const json& j) {
  TaskMessage m;
  m.task_id = j.at("task_id").get<std::string>();
  m.parameters = params_from_json(j.at("parameters"), "parameters");
  m.output_prefix = j.at("output_prefix").get<std::string>();
  return m;
}

// Cross-checks a parsed config and fleet spec; empty result means the run is
// executable. task_count_hint, when known, enables the overprovisioning warn.
inline std::vector<Diagnostic> validate_run(
    const RunConfig& c, const FleetSpec& f,
    std::optional<std::int64_t> task_count_hint = std::nullopt) {
  std::vector<Diagnostic> out;
  auto err = [&](std::string path, std::string msg) {
    out.push_back({Diagnostic::Severity::error, std::move(path), std::move(msg)});
  };
  auto warn = [&](std::string path, std::string msg) {
    out.push_back({Diagnostic::Severity::warn, std::move(path), std::move(msg)});
  };

  if (!valid_app_name(c.app_name))
    err("app_name", "must match [A-Za-z0-9_-]{1,64}");
  if (c.machine_type.cpu_units <= 0) err("machine_type.cpu_units", "must be positive");
  if (c.machine_type.memory_mb <= 0) err("machine_type.memory_mb", "must be positive");
  if (c.fleet_size <= 0) err("fleet_size", "must be positive");
  if (c.max_price_per_hour < 0) err("max_price_per_hour", "must be >= 0");
  if (c.tasks_per_machine <= 0) err("tasks_per_machine", "must be positive");
  if (c.task_cpu_units <= 0) err("task_cpu_units", "must be positive");
  if (c.task_memory_mb <= 0) err("task_memory_mb", "must be positive");
  if (c.visibility_timeout_s <= 0) err("visibility_timeout_s", "must be positive");
  if (c.max_receive_count <= 0) err("max_receive_count", "must be positive");
  if (c.output_prefix.empty()) err("output_prefix", "must be non-empty");
  if (c.monitor_period_s <= 0) err("monitor_period_s", "must be positive");
  if (c.teardown_hysteresis_ticks <= 0)
    err("teardown_hysteresis_ticks", "must be positive");
  if (c.done_check.enabled && c.done_check.expected_file_count <= 0)
    err("done_check.expected_file_count", "must be positive");

  if (c.tasks_per_machine > 0 && c.task_cpu_units > 0 &&
      c.tasks_per_machine * c.task_cpu_units > c.machine_type.cpu_units)
    err("tasks_per_machine", "cpu reservation exceeds machine_type.cpu_units");
  if (c.tasks_per_machine > 0 && c.task_memory_mb > 0 &&
      c.tasks_per_machine * c.task_memory_mb > c.machine_type.memory_mb)
    err("tasks_per_machine", "memory reservation exceeds machine_type.memory_mb");

  if (c.monitor_period_s > c.visibility_timeout_s)
    warn("monitor_period_s",
         "exceeds visibility_timeout_s; the monitor may observe phantom "
         "in-flight counts and downscale late");
  if (task_count_hint && c.fleet_size * c.tasks_per_machine > *task_count_hint)
    warn("fleet_size", "fleet capacity exceeds the number of tasks");

  if (f.account_id.empty()) err("account_id", "must be non-empty");
  if (f.region.empty()) err("region", "must be non-empty");
  if (f.subnet_ids.empty()) err("subnet_ids", "must be non-empty");
  if (f.security_group_ids.empty())
    err("security_group_ids", "must be non-empty");
  if (f.instance_role.empty()) err("instance_role", "must be non-empty");
  if (f.key_name.empty()) err("key_name", "must be non-empty");
  return out;
}

}  // namespace ds
