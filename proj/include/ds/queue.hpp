#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "ds/specfiles.hpp"

namespace ds {

struct Receipt {
  std::string message_id;
  std::string token;
  TimeMs leased_until = 0;
};

struct QueuedMessage {
  std::string message_id;
  TaskMessage body;
  std::int64_t receive_count = 0;
  TimeMs visible_at = 0;
  std::string current_token;  // empty when not leased
};

struct QueueCounts {
  std::int64_t visible = 0;
  std::int64_t in_flight = 0;
  std::int64_t dlq = 0;
  bool deleted = false;
};

struct LeaseResult {
  TaskMessage message;
  Receipt receipt;
  std::int64_t receive_count = 0;  // which delivery this is, 1-based
};

enum class QueueEventKind { enqueued, leased, extended, acked, moved_to_dlq, purged };

struct QueueEvent {
  TimeMs time = 0;
  QueueEventKind kind{};
  std::string message_id;
  std::int64_t receive_count = 0;
};

// At-least-once queue with visibility timeouts, receive counting, and a
// paired dead-letter store. All operations are linearizable; timestamps come
// from the caller so the sim and local backends share one state machine.
// Messages that exhausted max_receive_count move to the DLQ lazily, whenever
// an operation next observes them.
class Queue {
 public:
  Queue() = default;
  Queue(std::string name, std::int64_t visibility_timeout_s,
        std::int64_t max_receive_count)
      : name_(std::move(name)),
        visibility_timeout_s_(visibility_timeout_s),
        max_receive_count_(max_receive_count) {}

  const std::string& name() const { return name_; }
  std::int64_t visibility_timeout_s() const { return visibility_timeout_s_; }
  bool deleted() const {
    std::lock_guard lk(mu_);
    return deleted_;
  }

  std::string enqueue(const TaskMessage& body, TimeMs now) {
    std::lock_guard lk(mu_);
    require_live();
    QueuedMessage m;
    m.message_id = "m-" + zero_pad(next_message_seq_++, 8);
    m.body = body;
    m.receive_count = 0;
    m.visible_at = now;  // visible immediately
    messages_.emplace(m.message_id, m);
    ++enqueued_total_;
    log({now, QueueEventKind::enqueued, m.message_id, 0});
    return m.message_id;
  }

  // Oldest visible message first, message_id as tie-break. Candidates that
  // already burned max_receive_count deliveries go to the DLQ instead of
  // being leased again.
  std::optional<std::pair<TaskMessage, Receipt>> lease(TimeMs now) {
    std::lock_guard lk(mu_);
    require_live();
    settle(now);
    const QueuedMessage* best = nullptr;
    for (const auto& [id, m] : messages_) {
      if (m.visible_at > now) continue;
      if (!best || m.visible_at < best->visible_at) best = &m;
      // map order already breaks visible_at ties by smallest id
    }
    if (!best) return std::nullopt;
    QueuedMessage& m = messages_.at(best->message_id);
    m.receive_count += 1;
    m.visible_at = now + seconds(visibility_timeout_s_);
    m.current_token = "t-" + zero_pad(next_token_seq_++, 8);
    log({now, QueueEventKind::leased, m.message_id, m.receive_count});
    return std::make_pair(m.body,
                          Receipt{m.message_id, m.current_token, m.visible_at});
  }

  Receipt extend_lease(const Receipt& r, std::int64_t extra_s, TimeMs now) {
    std::lock_guard lk(mu_);
    require_live();
    QueuedMessage& m = require_current(r, now);
    m.visible_at = now + seconds(extra_s);
    m.current_token = "t-" + zero_pad(next_token_seq_++, 8);
    log({now, QueueEventKind::extended, m.message_id, m.receive_count});
    return Receipt{m.message_id, m.current_token, m.visible_at};
  }

  void ack(const Receipt& r, TimeMs now) {
    std::lock_guard lk(mu_);
    require_live();
    QueuedMessage& m = require_current(r, now);
    log({now, QueueEventKind::acked, m.message_id, m.receive_count});
    ++acked_total_;
    messages_.erase(m.message_id);
  }

  QueueCounts counts(TimeMs now) {
    std::lock_guard lk(mu_);
    QueueCounts c;
    c.deleted = deleted_;
    if (deleted_) return c;
    settle(now);
    for (const auto& [id, m] : messages_) {
      if (m.visible_at > now)
        ++c.in_flight;
      else
        ++c.visible;
    }
    c.dlq = static_cast<std::int64_t>(dead_letter_.size());
    return c;
  }

  // Idempotent. Drops everything; the caller snapshots dead_letter() first if
  // the run report needs it.
  void purge_and_delete(TimeMs now = 0) {
    std::lock_guard lk(mu_);
    if (deleted_) return;
    for (const auto& [id, m] : messages_)
      log({now, QueueEventKind::purged, id, m.receive_count});
    for (const auto& m : dead_letter_)
      log({now, QueueEventKind::purged, m.message_id, m.receive_count});
    messages_.clear();
    dead_letter_.clear();
    deleted_ = true;
  }

  std::vector<QueuedMessage> dead_letter() const {
    std::lock_guard lk(mu_);
    return dead_letter_;
  }

  std::vector<QueueEvent> events() const {
    std::lock_guard lk(mu_);
    return events_;
  }

  std::int64_t enqueued_total() const {
    std::lock_guard lk(mu_);
    return enqueued_total_;
  }
  std::int64_t acked_total() const {
    std::lock_guard lk(mu_);
    return acked_total_;
  }

  json to_json() const {
    std::lock_guard lk(mu_);
    json msgs = json::array();
    for (const auto& [id, m] : messages_) msgs.push_back(message_to_json(m));
    json dlq = json::array();
    for (const auto& m : dead_letter_) dlq.push_back(message_to_json(m));
    return json{{"name", name_},
                {"visibility_timeout_s", visibility_timeout_s_},
                {"max_receive_count", max_receive_count_},
                {"deleted", deleted_},
                {"next_message_seq", next_message_seq_},
                {"next_token_seq", next_token_seq_},
                {"enqueued_total", enqueued_total_},
                {"acked_total", acked_total_},
                {"messages", msgs},
                {"dead_letter", dlq}};
  }

  static std::unique_ptr<Queue> from_json(const json& j) {
    auto q = std::make_unique<Queue>(j.at("name").get<std::string>(),
                                     j.at("visibility_timeout_s").get<std::int64_t>(),
                                     j.at("max_receive_count").get<std::int64_t>());
    q->deleted_ = j.at("deleted").get<bool>();
    q->next_message_seq_ = j.at("next_message_seq").get<std::uint64_t>();
    q->next_token_seq_ = j.at("next_token_seq").get<std::uint64_t>();
    q->enqueued_total_ = j.at("enqueued_total").get<std::int64_t>();
    q->acked_total_ = j.at("acked_total").get<std::int64_t>();
    for (const json& m : j.at("messages")) {
      QueuedMessage qm = message_from_json(m);
      q->messages_.emplace(qm.message_id, std::move(qm));
    }
    for (const json& m : j.at("dead_letter"))
      q->dead_letter_.push_back(message_from_json(m));
    return q;
  }

 private:
  void require_live() const {
    if (deleted_) fail(Errc::queue_deleted, "queue '" + name_ + "' is deleted");
  }

  // A receipt is current iff it is the message's latest token and the lease
  // has not lapsed. Anything else is stale: the message may already be
  // redelivered, so the caller must treat the work as possibly duplicated.
  QueuedMessage& require_current(const Receipt& r, TimeMs now) {
    auto it = messages_.find(r.message_id);
    if (it == messages_.end())
      fail(Errc::stale_receipt, "message no longer exists", r.message_id);
    QueuedMessage& m = it->second;
    if (m.current_token != r.token || m.visible_at <= now)
      fail(Errc::stale_receipt, "receipt expired or superseded", r.message_id);
    return m;
  }

  // Lapsed leases lose their token; messages past the delivery budget move
  // to the DLQ.
  void settle(TimeMs now) {
    for (auto it = messages_.begin(); it != messages_.end();) {
      QueuedMessage& m = it->second;
      if (m.visible_at <= now && !m.current_token.empty()) m.current_token.clear();
      if (m.visible_at <= now && m.receive_count >= max_receive_count_) {
        log({now, QueueEventKind::moved_to_dlq, m.message_id, m.receive_count});
        dead_letter_.push_back(m);
        it = messages_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void log(QueueEvent e) { events_.push_back(std::move(e)); }

  static json message_to_json(const QueuedMessage& m) {
    return json{{"message_id", m.message_id},
                {"body", task_message_to_json(m.body)},
                {"receive_count", m.receive_count},
                {"visible_at", m.visible_at},
                {"current_token", m.current_token}};
  }

  static QueuedMessage message_from_json(const json& j) {
    QueuedMessage m;
    m.message_id = j.at("message_id").get<std::string>();
    m.body = task_message_from_json(j.at("body"));
    m.receive_count = j.at("receive_count").get<std::int64_t>();
    m.visible_at = j.at("visible_at").get<TimeMs>();
    m.current_token = j.at("current_token").get<std::string>();
    return m;
  }

  std::string name_;
  std::int64_t visibility_timeout_s_ = 0;
  std::int64_t max_receive_count_ = 0;
  mutable std::mutex mu_;
  std::map<std::string, QueuedMessage> messages_;
  std::vector<QueuedMessage> dead_letter_;
  std::vector<QueueEvent> events_;
  bool deleted_ = false;
  std::uint64_t next_message_seq_ = 1;
  std::uint64_t next_token_seq_ = 1;
  std::int64_t enqueued_total_ = 0;
  std::int64_t acked_total_ = 0;
};

}  // namespace ds
