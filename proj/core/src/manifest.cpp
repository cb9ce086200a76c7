#include "mtle/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "mtle/error.hpp"
#include "mtle/rng.hpp"
#include "mtle/version.hpp"

namespace mtle {

RunManifest::RunManifest() : RunManifest("") {}

RunManifest::RunManifest(std::string command_name)
    : command(std::move(command_name)),
      engine_version(kEngineVersion),
      started_at(iso8601_utc_now()) {}

void RunManifest::set(const std::string& key, const std::string& value) {
  config.emplace_back(key, value);
}

void RunManifest::set(const std::string& key, double value) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  config.emplace_back(key, buf);
}

void RunManifest::set(const std::string& key, long long value) {
  config.emplace_back(key, std::to_string(value));
}

void RunManifest::add_input(const std::string& path) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest_file(path)));
  inputs.emplace_back(path, buf);
}

void RunManifest::finish() { finished_at = iso8601_utc_now(); }

std::string RunManifest::format() const {
  std::ostringstream out;
  out << "command=" << command << '\n';
  out << "engine_version=" << engine_version << '\n';
  out << "seed=" << seed << '\n';
  for (const auto& [key, value] : config) out << key << '=' << value << '\n';
  for (const auto& [path, digest] : inputs)
    out << "input=" << path << " digest=" << digest << '\n';
  out << "started_at=" << started_at << '\n';
  out << "finished_at=" << (finished_at.empty() ? iso8601_utc_now() : finished_at) << '\n';
  return out.str();
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write manifest '" + path + "'");
  out << format();
}

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

std::uint64_t digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for digest");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace mtle
