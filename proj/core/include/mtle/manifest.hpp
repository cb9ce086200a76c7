#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mtle {

// Everything needed to reproduce a run: the resolved configuration, the seed
// and digests of every input file. Timestamps are informational.
struct RunManifest {
  std::string command;
  std::string engine_version;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // key, value
  std::vector<std::pair<std::string, std::string>> inputs;  // path, fnv1a64 hex digest
  std::string started_at;
  std::string finished_at;

  RunManifest();
  explicit RunManifest(std::string command_name);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void add_input(const std::string& path);  // hashes the file contents
  void finish();                            // stamps finished_at

  std::string format() const;  // key=value lines
  void write(const std::string& path) const;
};

std::string iso8601_utc_now();
std::uint64_t digest_file(const std::string& path);

}  // namespace mtle
