#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ds/common.hpp"

namespace ds {

using Blob = std::string;

struct ObjectInfo {
  std::string key;
  std::uint64_t size = 0;
};

// Keys use "/" separators, never start with "/", and may not contain empty
// or ".." segments (the filesystem backend maps them 1:1 to paths).
inline void validate_object_key(const std::string& key) {
  if (key.empty()) fail(Errc::invalid_key, "key must be non-empty");
  if (key.front() == '/') fail(Errc::invalid_key, "key must not start with '/'", key);
  std::size_t start = 0;
  while (start <= key.size()) {
    std::size_t slash = key.find('/', start);
    std::size_t end = slash == std::string::npos ? key.size() : slash;
    std::string_view seg(key.data() + start, end - start);
    if (seg.empty()) fail(Errc::invalid_key, "empty path segment", key);
    if (seg == "..") fail(Errc::invalid_key, "'..' segment not allowed", key);
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
}

// Key-addressed blob store. put is last-writer-wins and atomic: readers see
// complete blobs only.
class ObjectStore {
 public:
  virtual ~ObjectStore() = default;
  virtual void put(const std::string& key, const Blob& blob) = 0;
  virtual Blob get(const std::string& key) const = 0;
  virtual std::vector<ObjectInfo> list_prefix(const std::string& prefix) const = 0;

  std::int64_t count_prefix(const std::string& prefix) const {
    return static_cast<std::int64_t>(list_prefix(prefix).size());
  }
};

class MemoryObjectStore : public ObjectStore {
 public:
  void put(const std::string& key, const Blob& blob) override {
    validate_object_key(key);
    std::lock_guard lk(mu_);
    objects_[key] = blob;
  }

  Blob get(const std::string& key) const override {
    std::lock_guard lk(mu_);
    auto it = objects_.find(key);
    if (it == objects_.end()) fail(Errc::no_such_key, "no such object", key);
    return it->second;
  }

  std::vector<ObjectInfo> list_prefix(const std::string& prefix) const override {
    std::lock_guard lk(mu_);
    std::vector<ObjectInfo> out;
    for (auto it = objects_.lower_bound(prefix); it != objects_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out.push_back({it->first, it->second.size()});
    }
    return out;
  }

  json to_json() const {
    std::lock_guard lk(mu_);
    json j = json::object();
    for (const auto& [k, v] : objects_) j[k] = hex_encode(v);
    return j;
  }

  void load_json(const json& j) {
    std::lock_guard lk(mu_);
    objects_.clear();
    for (const auto& [k, v] : j.items())
      objects_[k] = hex_decode(v.get<std::string>());
  }

 private:
  static std::string hex_encode(const Blob& b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (unsigned char c : b) {
      out.push_back(digits[c >> 4]);
      out.push_back(digits[c & 0xf]);
    }
    return out;
  }
  static Blob hex_decode(const std::string& s) {
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      return c - 'a' + 10;
    };
    Blob out;
    out.reserve(s.size() / 2);
    for (std::size_t i = 0; i + 1 < s.size(); i += 2)
      out.push_back(static_cast<char>(nibble(s[i]) << 4 | nibble(s[i + 1])));
    return out;
  }

  mutable std::mutex mu_;
  std::map<std::string, Blob> objects_;
};

// Maps key "a/b/c" to <root>/a/b/c. Writes go through a temp file + rename so
// concurrent readers never see torn blobs.
class FilesystemObjectStore : public ObjectStore {
 public:
  explicit FilesystemObjectStore(std::filesystem::path root)
      : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) fail(Errc::io_failure, "cannot create store root: " + ec.message());
  }

  const std::filesystem::path& root() const { return root_; }

  void put(const std::string& key, const Blob& blob) override {
    validate_object_key(key);
    std::lock_guard lk(mu_);
    std::filesystem::path target = root_ / key;
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    if (ec) fail(Errc::io_failure, "mkdir failed: " + ec.message(), key);
    std::filesystem::path tmp = target;
    tmp += ".tmp" + std::to_string(++tmp_seq_);
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(Errc::io_failure, "cannot open temp file", key);
      out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
      if (!out) fail(Errc::io_failure, "short write", key);
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) fail(Errc::io_failure, "rename failed: " + ec.message(), key);
  }

  Blob get(const std::string& key) const override {
    validate_object_key(key);
    std::lock_guard lk(mu_);
    std::ifstream in(root_ / key, std::ios::binary);
    if (!in) fail(Errc::no_such_key, "no such object", key);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return data;
  }

  std::vector<ObjectInfo> list_prefix(const std::string& prefix) const override {
    std::lock_guard lk(mu_);
    std::vector<ObjectInfo> out;
    std::error_code ec;
    std::filesystem::recursive_directory_iterator it(root_, ec), end;
    if (ec) return out;
    for (; it != end; it.increment(ec)) {
      if (ec) fail(Errc::io_failure, "directory walk failed: " + ec.message());
      if (!it->is_regular_file()) continue;
      std::string key =
          std::filesystem::relative(it->path(), root_).generic_string();
      if (key.compare(0, prefix.size(), prefix) != 0) continue;
      out.push_back({key, static_cast<std::uint64_t>(it->file_size())});
    }
    std::sort(out.begin(), out.end(),
              [](const ObjectInfo& a, const ObjectInfo& b) { return a.key < b.key; });
    return out;
  }

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::uint64_t tmp_seq_ = 0;
};

}  // namespace ds
