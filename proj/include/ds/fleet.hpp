#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ds/specfiles.hpp"

namespace ds {

// Flat monitoring overhead, dollars per machine-hour.
inline constexpr double kMonitoringRatePerMachineHour = 0.0001;

enum class InstanceState { pending, running, terminated };

enum class TerminationReason { none, capacity_reduced, market_interrupted, fleet_cancelled };

inline std::string_view to_string(InstanceState s) {
  switch (s) {
    case InstanceState::pending: return "pending";
    case InstanceState::running: return "running";
    case InstanceState::terminated: return "terminated";
  }
  return "?";
}

inline std::string_view to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::none: return "none";
    case TerminationReason::capacity_reduced: return "capacity_reduced";
    case TerminationReason::market_interrupted: return "market_interrupted";
    case TerminationReason::fleet_cancelled: return "fleet_cancelled";
  }
  return "?";
}

struct Instance {
  std::string instance_id;
  InstanceState state = InstanceState::pending;
  TimeMs launch_ms = 0;
  TimeMs ready_ms = -1;
  TimeMs termination_ms = -1;
  double price_per_hour = 0.0;  // market price at launch
  TerminationReason reason = TerminationReason::none;
};

struct FleetEvent {
  TimeMs time = 0;
  std::string instance_id;
  std::string transition;  // launched | ready | terminated
  TerminationReason reason = TerminationReason::none;
  double price = 0.0;

  // Line-delimited record for the oracle replay and the run report.
  std::string to_line() const {
    return std::to_string(time) + "\t" + instance_id + "\t" + transition +
           "\t" + std::string(to_string(reason)) + "\t" + json(price).dump();
  }
};

struct CostEntry {
  std::string instance_id;
  double seconds_billed = 0.0;
  double price_per_hour = 0.0;
  double compute_cost = 0.0;
};

struct CostLedger {
  std::vector<CostEntry> instances;
  double monitoring_overhead = 0.0;
  double total = 0.0;

  json to_json() const {
    json entries = json::array();
    for (const auto& e : instances)
      entries.push_back({{"instance_id", e.instance_id},
                         {"seconds_billed", e.seconds_billed},
                         {"price_per_hour", e.price_per_hour},
                         {"compute_cost", e.compute_cost}});
    return json{{"instances", entries},
                {"monitoring_overhead", monitoring_overhead},
                {"total", total}};
  }
};

// Deterministic seeded spot price path, piecewise-constant per price step.
// The multiplier table plus an integer hash keeps the path bit-identical on
// any platform; spikes model market excursions past the user's bid. An
// optional per-instance interruption hazard covers reclaims that happen even
// below the bid.
struct MarketModel {
  std::uint64_t seed = 0;
  double base_price_per_hour = 0.10;
  std::int64_t step_s = 60;
  int spike_per_mille = 0;          // chance per step that price spikes
  double spike_multiplier = 10.0;
  double interruption_hazard_per_hour = 0.0;

  double price_at(TimeMs now) const {
    static const double multipliers[] = {0.8, 0.9, 1.0, 1.1, 1.2};
    std::int64_t step = now / seconds(step_s);
    std::uint64_t h = hash_step(seed, static_cast<std::uint64_t>(step) + 1);
    if (spike_per_mille > 0 &&
        static_cast<int>(h % 1000) < spike_per_mille)
      return base_price_per_hour * spike_multiplier;
    std::uint64_t pick = mix64(h) % 5;
    return base_price_per_hour * multipliers[pick];
  }

  json to_json() const {
    return json{{"seed", seed},
                {"base_price_per_hour", base_price_per_hour},
                {"step_s", step_s},
                {"spike_per_mille", spike_per_mille},
                {"spike_multiplier", spike_multiplier},
                {"interruption_hazard_per_hour", interruption_hazard_per_hour}};
  }

  static MarketModel from_json(const json& j) {
    MarketModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.base_price_per_hour = j.at("base_price_per_hour").get<double>();
    m.step_s = j.at("step_s").get<std::int64_t>();
    m.spike_per_mille = j.at("spike_per_mille").get<int>();
    m.spike_multiplier = j.at("spike_multiplier").get<double>();
    m.interruption_hazard_per_hour =
        j.at("interruption_hazard_per_hour").get<double>();
    return m;
  }
};

// Spot-fleet lifecycle: keeps capacity at the target while the market price
// stays at or below the bid, reclaims everything when it does not, and
// accounts per-second cost for every instance it ever launched.
class Fleet {
 public:
  using SlotCounter = std::function<std::int64_t(const std::string&)>;

  Fleet() = default;
  Fleet(const RunConfig& config, const FleetSpec&)
      : fleet_id_("sfr-" + config.app_name),
        machine_type_(config.machine_type),
        target_capacity_(config.fleet_size),
        max_price_per_hour_(config.max_price_per_hour) {}

  const std::string& fleet_id() const { return fleet_id_; }
  bool cancelled() const {
    std::lock_guard lk(mu_);
    return cancelled_;
  }
  std::int64_t target_capacity() const {
    std::lock_guard lk(mu_);
    return target_capacity_;
  }
  TimeMs startup_delay_ms() const { return startup_delay_ms_; }
  void set_startup_delay_ms(TimeMs d) { startup_delay_ms_ = d; }

  // Scale-down victims are picked emptiest-first; wire this to
  // placement::live_placements so busy machines die last.
  void set_slot_counter(SlotCounter f) { slot_counter_ = std::move(f); }

  void set_target_capacity(std::int64_t n) {
    std::lock_guard lk(mu_);
    require_active();
    target_capacity_ = n < 0 ? 0 : n;
  }

  // One reconciliation pass, in fixed rule order:
  //   1. market price above bid (or hazard draw) interrupts instances
  //   2. excess over target is terminated, emptiest machines first
  //   3. deficit is launched at the current price, if payable
  //   4. pending instances past the startup delay become running
  std::vector<FleetEvent> tick(const MarketModel& market, TimeMs now) {
    std::lock_guard lk(mu_);
    require_active();
    std::vector<FleetEvent> out;
    const double price = market.price_at(now);

    if (price > max_price_per_hour_) {
      for (auto& [id, inst] : instances_)
        if (inst.state != InstanceState::terminated)
          terminate(inst, TerminationReason::market_interrupted, now, out);
    } else if (market.interruption_hazard_per_hour > 0.0 && last_tick_ms_ >= 0) {
      double dt_hours = static_cast<double>(now - last_tick_ms_) / 3600000.0;
      double p = market.interruption_hazard_per_hour * dt_hours;
      for (auto& [id, inst] : instances_) {
        if (inst.state == InstanceState::terminated) continue;
        std::uint64_t h = hash_str(hash_step(market.seed, now), id);
        if (unit_from_hash(h) < p)
          terminate(inst, TerminationReason::market_interrupted, now, out);
      }
    }

    std::vector<Instance*> alive;
    for (auto& [id, inst] : instances_)
      if (inst.state != InstanceState::terminated) alive.push_back(&inst);

    if (static_cast<std::int64_t>(alive.size()) > target_capacity_) {
      std::stable_sort(alive.begin(), alive.end(),
                       [&](const Instance* a, const Instance* b) {
                         std::int64_t sa = count_slots(a->instance_id);
                         std::int64_t sb = count_slots(b->instance_id);
                         if (sa != sb) return sa < sb;
                         return a->instance_id < b->instance_id;
                       });
      std::int64_t excess = static_cast<std::int64_t>(alive.size()) - target_capacity_;
      for (std::int64_t i = 0; i < excess; ++i)
        terminate(*alive[i], TerminationReason::capacity_reduced, now, out);
      alive.erase(alive.begin(), alive.begin() + excess);
    }

    if (price <= max_price_per_hour_) {
      std::int64_t deficit =
          target_capacity_ - static_cast<std::int64_t>(alive.size());
      for (std::int64_t i = 0; i < deficit; ++i) {
        Instance inst;
        inst.instance_id = "i-" + zero_pad(next_instance_seq_++, 8);
        inst.state = InstanceState::pending;
        inst.launch_ms = now;
        inst.price_per_hour = price;
        out.push_back({now, inst.instance_id, "launched",
                       TerminationReason::none, inst.price_per_hour});
        instances_.emplace(inst.instance_id, inst);
      }
    }

    for (auto& [id, inst] : instances_) {
      if (inst.state == InstanceState::pending &&
          inst.launch_ms + startup_delay_ms_ <= now) {
        inst.state = InstanceState::running;
        inst.ready_ms = now;
        out.push_back({now, id, "ready", TerminationReason::none,
                       inst.price_per_hour});
      }
    }

    last_tick_ms_ = now;
    for (const auto& e : out) event_log_.push_back(e);
    return out;
  }

  std::vector<FleetEvent> cancel(TimeMs now) {
    std::lock_guard lk(mu_);
    std::vector<FleetEvent> out;
    if (cancelled_) return out;
    for (auto& [id, inst] : instances_)
      if (inst.state != InstanceState::terminated)
        terminate(inst, TerminationReason::fleet_cancelled, now, out);
    cancelled_ = true;
    for (const auto& e : out) event_log_.push_back(e);
    return out;
  }

  // Per-second billing against the hourly price paid at launch; terminated
  // instances are frozen at their termination time.
  CostLedger accrue_cost(TimeMs now) const {
    std::lock_guard lk(mu_);
    CostLedger ledger;
    double machine_seconds = 0.0;
    for (const auto& [id, inst] : instances_) {
      TimeMs end = inst.state == InstanceState::terminated ? inst.termination_ms : now;
      double secs = static_cast<double>(end - inst.launch_ms) / 1000.0;
      if (secs < 0) secs = 0;
      CostEntry e;
      e.instance_id = id;
      e.seconds_billed = secs;
      e.price_per_hour = inst.price_per_hour;
      e.compute_cost = secs / 3600.0 * inst.price_per_hour;
      machine_seconds += secs;
      ledger.total += e.compute_cost;
      ledger.instances.push_back(std::move(e));
    }
    ledger.monitoring_overhead =
        machine_seconds / 3600.0 * kMonitoringRatePerMachineHour;
    ledger.total += ledger.monitoring_overhead;
    return ledger;
  }

  std::vector<Instance> instances() const {
    std::lock_guard lk(mu_);
    std::vector<Instance> out;
    out.reserve(instances_.size());
    for (const auto& [id, inst] : instances_) out.push_back(inst);
    return out;
  }

  std::int64_t count_state(InstanceState s) const {
    std::lock_guard lk(mu_);
    std::int64_t n = 0;
    for (const auto& [id, inst] : instances_)
      if (inst.state == s) ++n;
    return n;
  }

  std::int64_t launched_total() const {
    std::lock_guard lk(mu_);
    return static_cast<std::int64_t>(instances_.size());
  }

  std::vector<FleetEvent> event_log() const {
    std::lock_guard lk(mu_);
    return event_log_;
  }

  json to_json() const {
    std::lock_guard lk(mu_);
    json insts = json::array();
    for (const auto& [id, inst] : instances_)
      insts.push_back({{"instance_id", inst.instance_id},
                       {"state", std::string(to_string(inst.state))},
                       {"launch_ms", inst.launch_ms},
                       {"ready_ms", inst.ready_ms},
                       {"termination_ms", inst.termination_ms},
                       {"price_per_hour", inst.price_per_hour},
                       {"reason", std::string(to_string(inst.reason))}});
    return json{{"fleet_id", fleet_id_},
                {"machine_type",
                 {{"name", machine_type_.name},
                  {"cpu_units", machine_type_.cpu_units},
                  {"memory_mb", machine_type_.memory_mb}}},
                {"target_capacity", target_capacity_},
                {"max_price_per_hour", max_price_per_hour_},
                {"cancelled", cancelled_},
                {"startup_delay_ms", startup_delay_ms_},
                {"last_tick_ms", last_tick_ms_},
                {"next_instance_seq", next_instance_seq_},
                {"instances", insts}};
  }

  static std::unique_ptr<Fleet> from_json(const json& j) {
    auto f = std::make_unique<Fleet>();
    f->fleet_id_ = j.at("fleet_id").get<std::string>();
    f->machine_type_.name = j.at("machine_type").at("name").get<std::string>();
    f->machine_type_.cpu_units =
        j.at("machine_type").at("cpu_units").get<std::int64_t>();
    f->machine_type_.memory_mb =
        j.at("machine_type").at("memory_mb").get<std::int64_t>();
    f->target_capacity_ = j.at("target_capacity").get<std::int64_t>();
    f->max_price_per_hour_ = j.at("max_price_per_hour").get<double>();
    f->cancelled_ = j.at("cancelled").get<bool>();
    f->startup_delay_ms_ = j.at("startup_delay_ms").get<TimeMs>();
    f->last_tick_ms_ = j.at("last_tick_ms").get<TimeMs>();
    f->next_instance_seq_ = j.at("next_instance_seq").get<std::uint64_t>();
    for (const json& ij : j.at("instances")) {
      Instance inst;
      inst.instance_id = ij.at("instance_id").get<std::string>();
      std::string st = ij.at("state").get<std::string>();
      inst.state = st == "pending" ? InstanceState::pending
                   : st == "running" ? InstanceState::running
                                     : InstanceState::terminated;
      inst.launch_ms = ij.at("launch_ms").get<TimeMs>();
      inst.ready_ms = ij.at("ready_ms").get<TimeMs>();
      inst.termination_ms = ij.at("termination_ms").get<TimeMs>();
      inst.price_per_hour = ij.at("price_per_hour").get<double>();
      std::string rs = ij.at("reason").get<std::string>();
      inst.reason = rs == "capacity_reduced" ? TerminationReason::capacity_reduced
                    : rs == "market_interrupted" ? TerminationReason::market_interrupted
                    : rs == "fleet_cancelled" ? TerminationReason::fleet_cancelled
                                              : TerminationReason::none;
      f->instances_.emplace(inst.instance_id, inst);
    }
    return f;
  }

 private:
  void require_active() const {
    if (cancelled_) fail(Errc::fleet_cancelled, "fleet '" + fleet_id_ + "' is cancelled");
  }

  std::int64_t count_slots(const std::string& instance_id) const {
    return slot_counter_ ? slot_counter_(instance_id) : 0;
  }

  void terminate(Instance& inst, TerminationReason reason, TimeMs now,
                 std::vector<FleetEvent>& out) {
    inst.state = InstanceState::terminated;
    inst.termination_ms = now;
    inst.reason = reason;
    out.push_back({now, inst.instance_id, "terminated", reason, inst.price_per_hour});
  }

  std::string fleet_id_;
  MachineType machine_type_;
  std::int64_t target_capacity_ = 0;
  double max_price_per_hour_ = 0.0;
  bool cancelled_ = false;
  TimeMs startup_delay_ms_ = seconds(30);
  TimeMs last_tick_ms_ = -1;
  std::uint64_t next_instance_seq_ = 1;
  std::map<std::string, Instance> instances_;
  std::vector<FleetEvent> event_log_;
  SlotCounter slot_counter_;
  mutable std::mutex mu_;
};

}  // namespace ds
