#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pnp {

/*
 * Plain "key = value" text used for manifests and run configs. Blank lines and
 * lines starting with '#' are skipped; keys may repeat (e.g. `layer = ...`).
 * Every entry remembers its source line so errors can point at it.
 */
class KeyValueFile
{
public:
  struct Entry
  {
    std::string key;
    std::string value;
    int line = 0;
  };

  KeyValueFile() = default;
  static KeyValueFile parse(std::string const &text, std::string source = "<string>");
  static KeyValueFile load(std::filesystem::path const &path);

  void add(std::string key, std::string value);
  std::string str() const;
  void save(std::filesystem::path const &path) const;

  bool has(std::string const &key) const;
  Entry const *find(std::string const &key) const; // last occurrence
  std::vector<Entry const *> all(std::string const &key) const;
  std::vector<Entry> const &entries() const { return entries_; }
  std::string const &source() const { return source_; }

  std::string get(std::string const &key) const;
  std::string get(std::string const &key, std::string const &fallback) const;
  double get_double(std::string const &key) const;
  double get_double(std::string const &key, double fallback) const;
  long get_int(std::string const &key) const;
  long get_int(std::string const &key, long fallback) const;
  bool get_bool(std::string const &key, bool fallback) const;

  // ConfigError naming the source, line and key.
  [[noreturn]] void fail(Entry const &e, std::string const &what) const;

private:
  std::string source_;
  std::vector<Entry> entries_;
};

double parse_double(std::string const &s); // accepts inf/+inf
std::vector<std::string> split_ws(std::string const &s);

// 64-bit FNV-1a, used for archive integrity and configuration hashes.
std::uint64_t fnv1a(std::span<std::byte const> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::string const &s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t h);

} // namespace pnp
