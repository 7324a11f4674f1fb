#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ds/fleet.hpp"

namespace ds {

struct TaskDefinition {
  std::string taskdef_id;
  std::string image_ref;
  std::int64_t cpu_units = 0;
  std::int64_t memory_mb = 0;
  std::map<std::string, std::string> environment;

  bool operator==(const TaskDefinition&) const = default;
};

enum class PlacementState { starting, running, stopped };

struct Placement {
  std::string placement_id;
  std::string instance_id;
  std::string taskdef_id;
  std::int64_t slot_index = 0;
  PlacementState state = PlacementState::starting;
};

struct PlacementAction {
  enum class Kind { start, stop };
  Kind kind{};
  std::string placement_id;
  std::string instance_id;
  std::int64_t slot_index = 0;
  TimeMs time = 0;
};

// Places worker-agent containers onto running instances at a fixed density
// of tasks_per_machine identical slots. Terminated instances get their
// placements stopped; running instances get deficits repaired.
class ClusterState {
 public:
  // Idempotent for a bit-identical config; a conflicting re-register for the
  // same app is an error.
  TaskDefinition register_task_definition(const RunConfig& config) {
    std::lock_guard lk(mu_);
    TaskDefinition def;
    def.taskdef_id = "td-" + config.app_name;
    def.image_ref = config.image_ref;
    def.cpu_units = config.task_cpu_units;
    def.memory_mb = config.task_memory_mb;
    def.environment = {{"DS_APP_NAME", config.app_name},
                       {"DS_QUEUE_NAME", config.app_name + "-queue"},
                       {"DS_OUTPUT_PREFIX", config.output_prefix}};
    auto it = taskdefs_.find(config.app_name);
    if (it != taskdefs_.end()) {
      if (it->second == def) return it->second;
      fail(Errc::already_registered,
           "task definition for '" + config.app_name +
               "' already registered with different settings");
    }
    taskdefs_.emplace(config.app_name, def);
    return def;
  }

  std::vector<PlacementAction> reconcile(const std::vector<Instance>& instances,
                                         const TaskDefinition& def,
                                         std::int64_t tasks_per_machine,
                                         TimeMs now) {
    std::lock_guard lk(mu_);
    std::vector<PlacementAction> actions;

    std::map<std::string, const Instance*> by_id;
    for (const Instance& inst : instances) by_id.emplace(inst.instance_id, &inst);

    for (const auto& [iid, inst] : by_id) {
      auto& slots = placements_[iid];

      if (inst->state == InstanceState::terminated) {
        for (Placement& p : slots) {
          if (p.state == PlacementState::stopped) continue;
          p.state = PlacementState::stopped;
          actions.push_back({PlacementAction::Kind::stop, p.placement_id, iid,
                             p.slot_index, now});
        }
        continue;
      }
      if (inst->state != InstanceState::running) continue;

      for (std::int64_t slot = 0; slot < tasks_per_machine; ++slot) {
        bool live = false;
        for (const Placement& p : slots)
          if (p.slot_index == slot && p.state != PlacementState::stopped)
            live = true;
        if (live) continue;
        Placement p;
        p.placement_id = "p-" + zero_pad(next_placement_seq_++, 8);
        p.instance_id = iid;
        p.taskdef_id = def.taskdef_id;
        p.slot_index = slot;
        p.state = PlacementState::starting;
        actions.push_back({PlacementAction::Kind::start, p.placement_id, iid,
                           p.slot_index, now});
        slots.push_back(p);
      }
      // parse-time packing validation makes overcommit impossible here
      std::int64_t live = 0;
      for (const Placement& p : slots)
        if (p.state != PlacementState::stopped) ++live;
      if (live > tasks_per_machine)
        fail(Errc::infeasible_packing,
             "more live placements than tasks_per_machine on " + iid);
    }
    for (const auto& a : actions) action_log_.push_back(a);
    return actions;
  }

  void mark_running(const std::string& placement_id) {
    std::lock_guard lk(mu_);
    for (auto& [iid, slots] : placements_)
      for (Placement& p : slots)
        if (p.placement_id == placement_id && p.state == PlacementState::starting)
          p.state = PlacementState::running;
  }

  std::int64_t live_placements(const std::string& instance_id) const {
    std::lock_guard lk(mu_);
    auto it = placements_.find(instance_id);
    if (it == placements_.end()) return 0;
    std::int64_t n = 0;
    for (const Placement& p : it->second)
      if (p.state != PlacementState::stopped) ++n;
    return n;
  }

  bool is_live(const std::string& placement_id) const {
    std::lock_guard lk(mu_);
    for (const auto& [iid, slots] : placements_)
      for (const Placement& p : slots)
        if (p.placement_id == placement_id)
          return p.state != PlacementState::stopped;
    return false;
  }

  std::vector<Placement> placements() const {
    std::lock_guard lk(mu_);
    std::vector<Placement> out;
    for (const auto& [iid, slots] : placements_)
      for (const Placement& p : slots) out.push_back(p);
    return out;
  }

  std::vector<PlacementAction> action_log() const {
    std::lock_guard lk(mu_);
    return action_log_;
  }

  json to_json() const {
    std::lock_guard lk(mu_);
    json defs = json::object();
    for (const auto& [app, d] : taskdefs_)
      defs[app] = {{"taskdef_id", d.taskdef_id},
                   {"image_ref", d.image_ref},
                   {"cpu_units", d.cpu_units},
                   {"memory_mb", d.memory_mb},
                   {"environment", d.environment}};
    json pls = json::array();
    for (const auto& [iid, slots] : placements_)
      for (const Placement& p : slots)
        pls.push_back({{"placement_id", p.placement_id},
                       {"instance_id", p.instance_id},
                       {"taskdef_id", p.taskdef_id},
                       {"slot_index", p.slot_index},
                       {"state", p.state == PlacementState::starting ? "starting"
                                 : p.state == PlacementState::running ? "running"
                                                                      : "stopped"}});
    return json{{"taskdefs", defs},
                {"placements", pls},
                {"next_placement_seq", next_placement_seq_}};
  }

  static std::unique_ptr<ClusterState> from_json(const json& j) {
    auto c = std::make_unique<ClusterState>();
    for (const auto& [app, dj] : j.at("taskdefs").items()) {
      TaskDefinition d;
      d.taskdef_id = dj.at("taskdef_id").get<std::string>();
      d.image_ref = dj.at("image_ref").get<std::string>();
      d.cpu_units = dj.at("cpu_units").get<std::int64_t>();
      d.memory_mb = dj.at("memory_mb").get<std::int64_t>();
      d.environment =
          dj.at("environment").get<std::map<std::string, std::string>>();
      c->taskdefs_.emplace(app, d);
    }
    for (const json& pj : j.at("placements")) {
      Placement p;
      p.placement_id = pj.at("placement_id").get<std::string>();
      p.instance_id = pj.at("instance_id").get<std::string>();
      p.taskdef_id = pj.at("taskdef_id").get<std::string>();
      p.slot_index = pj.at("slot_index").get<std::int64_t>();
      std::string st = pj.at("state").get<std::string>();
      p.state = st == "starting" ? PlacementState::starting
                : st == "running" ? PlacementState::running
                                  : PlacementState::stopped;
      c->placements_[p.instance_id].push_back(p);
    }
    c->next_placement_seq_ = j.at("next_placement_seq").get<std::uint64_t>();
    return c;
  }

  std::optional<TaskDefinition> task_definition(const std::string& app) const {
    std::lock_guard lk(mu_);
    auto it = taskdefs_.find(app);
    if (it == taskdefs_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::string, TaskDefinition> taskdefs_;
  std::map<std::string, std::vector<Placement>> placements_;
  std::vector<PlacementAction> action_log_;
  std::uint64_t next_placement_seq_ = 1;
  mutable std::mutex mu_;
};

}  // namespace ds
