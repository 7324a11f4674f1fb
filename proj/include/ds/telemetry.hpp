#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ds/common.hpp"

namespace ds {

struct LogEntry {
  TimeMs time = 0;
  std::string severity;  // info | warn | error
  std::string line;
};

struct LogStream {
  std::string stream_id;
  Params tags;  // immutable after creation; the task's parameters + instance_id
  std::vector<LogEntry> entries;
};

struct MetricPoint {
  TimeMs time = 0;
  double value = 0.0;
};

struct ExportManifest {
  std::int64_t log_files = 0;
  std::int64_t metric_files = 0;
  std::filesystem::path manifest_path;
};

// Log streams tagged by job parameters, plus named time series. Streams are
// created on first append; tags can never change afterwards.
class Telemetry {
 public:
  std::string append_log(const std::string& stream_id, const Params& tags,
                         const std::string& severity, const std::string& line,
                         TimeMs now) {
    std::lock_guard lk(mu_);
    std::string id = sanitize_id(stream_id);
    auto it = streams_.find(id);
    if (it == streams_.end()) {
      LogStream s;
      s.stream_id = id;
      s.tags = tags;
      it = streams_.emplace(id, std::move(s)).first;
    } else if (!tags.empty() && tags != it->second.tags) {
      fail(Errc::tag_mutation,
           "stream '" + id + "' already exists with different tags");
    }
    LogStream& s = it->second;
    // wall clocks can step backwards across threads; per-stream order is
    // non-decreasing by construction
    TimeMs t = now;
    if (!s.entries.empty() && t < s.entries.back().time)
      t = s.entries.back().time;
    s.entries.push_back({t, severity, line});
    return id;
  }

  void put_metric(const std::string& name, double value, TimeMs now) {
    std::lock_guard lk(mu_);
    auto& series = series_[name];
    if (!series.empty() && now < series.back().time)
      fail(Errc::timestamp_regression,
           "metric '" + name + "' timestamp went backwards");
    series.push_back({now, value});
  }

  // Streams whose tags are a superset of the filter, ordered by stream_id.
  std::vector<LogStream> query_logs(const Params& filter) const {
    std::lock_guard lk(mu_);
    std::vector<LogStream> out;
    for (const auto& [id, s] : streams_) {
      bool match = true;
      for (const auto& [k, v] : filter) {
        auto it = s.tags.find(k);
        if (it == s.tags.end() || !(it->second == v)) {
          match = false;
          break;
        }
      }
      if (match) out.push_back(s);
    }
    return out;
  }

  std::vector<MetricPoint> metric(const std::string& name) const {
    std::lock_guard lk(mu_);
    auto it = series_.find(name);
    if (it == series_.end()) return {};
    return it->second;
  }

  std::size_t stream_count() const {
    std::lock_guard lk(mu_);
    return streams_.size();
  }

  // Drops log streams (metrics stay). Export first; this is the optional
  // teardown cleanup.
  void delete_logs() {
    std::lock_guard lk(mu_);
    streams_.clear();
  }

  // Layout: logs/<stream_id>.log, metrics/<name>.tsv, manifest.json.
  // Deterministic file naming and contents: exporting twice yields
  // byte-identical trees.
  ExportManifest export_to(const std::filesystem::path& dir) const {
    std::lock_guard lk(mu_);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "logs", ec);
    fs::create_directories(dir / "metrics", ec);
    if (ec) fail(Errc::io_failure, "cannot create export directory: " + ec.message());

    json manifest;
    manifest["logs"] = json::array();
    manifest["metrics"] = json::array();

    for (const auto& [id, s] : streams_) {
      fs::path file = dir / "logs" / (id + ".log");
      std::ofstream out(file, std::ios::binary | std::ios::trunc);
      if (!out) fail(Errc::io_failure, "cannot write " + file.string());
      for (const LogEntry& e : s.entries)
        out << e.time << "\t" << e.severity << "\t" << e.line << "\n";
      manifest["logs"].push_back({{"stream_id", id},
                                  {"file", "logs/" + id + ".log"},
                                  {"entries", s.entries.size()},
                                  {"tags", params_to_json(s.tags)}});
    }
    for (const auto& [name, series] : series_) {
      std::string fname = sanitize_id(name);
      fs::path file = dir / "metrics" / (fname + ".tsv");
      std::ofstream out(file, std::ios::binary | std::ios::trunc);
      if (!out) fail(Errc::io_failure, "cannot write " + file.string());
      for (const MetricPoint& p : series)
        out << p.time << "\t" << json(p.value).dump() << "\n";
      manifest["metrics"].push_back({{"name", name},
                                     {"file", "metrics/" + fname + ".tsv"},
                                     {"points", series.size()}});
    }

    ExportManifest result;
    result.log_files = static_cast<std::int64_t>(streams_.size());
    result.metric_files = static_cast<std::int64_t>(series_.size());
    result.manifest_path = dir / "manifest.json";
    std::ofstream out(result.manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot write manifest");
    out << manifest.dump(2) << "\n";
    return result;
  }

  json to_json() const {
    std::lock_guard lk(mu_);
    json streams = json::array();
    for (const auto& [id, s] : streams_) {
      json entries = json::array();
      for (const LogEntry& e : s.entries)
        entries.push_back({{"time", e.time}, {"severity", e.severity}, {"line", e.line}});
      streams.push_back({{"stream_id", id},
                         {"tags", params_to_json(s.tags)},
                         {"entries", entries}});
    }
    json series = json::object();
    for (const auto& [name, pts] : series_) {
      json arr = json::array();
      for (const MetricPoint& p : pts)
        arr.push_back({{"time", p.time}, {"value", p.value}});
      series[name] = arr;
    }
    return json{{"streams", streams}, {"series", series}};
  }

  static std::unique_ptr<Telemetry> from_json(const json& j) {
    auto t = std::make_unique<Telemetry>();
    for (const json& sj : j.at("streams")) {
      LogStream s;
      s.stream_id = sj.at("stream_id").get<std::string>();
      s.tags = params_from_json(sj.at("tags"), "tags");
      for (const json& ej : sj.at("entries"))
        s.entries.push_back({ej.at("time").get<TimeMs>(),
                             ej.at("severity").get<std::string>(),
                             ej.at("line").get<std::string>()});
      t->streams_.emplace(s.stream_id, std::move(s));
    }
    for (const auto& [name, pts] : j.at("series").items()) {
      auto& series = t->series_[name];
      for (const json& pj : pts)
        series.push_back({pj.at("time").get<TimeMs>(), pj.at("value").get<double>()});
    }
    return t;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, LogStream> streams_;
  std::map<std::string, std::vector<MetricPoint>> series_;
};

}  // namespace ds
