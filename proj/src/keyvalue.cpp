#include "pnpmrf/keyvalue.hpp"
#include "pnpmrf/core.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pnp {

namespace {

std::string trim(std::string const &s)
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) { return {}; }
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

KeyValueFile KeyValueFile::parse(std::string const &text, std::string source)
{
  KeyValueFile kv;
  kv.source_ = std::move(source);
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    line++;
    auto const s = trim(raw);
    if (s.empty() || s[0] == '#') { continue; }
    auto const eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(kv.source_ + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    auto key = trim(s.substr(0, eq));
    if (key.empty()) { throw ConfigError(kv.source_ + ":" + std::to_string(line) + ": empty key"); }
    kv.entries_.push_back({std::move(key), trim(s.substr(eq + 1)), line});
  }
  return kv;
}

KeyValueFile KeyValueFile::load(std::filesystem::path const &path)
{
  std::ifstream f(path);
  if (!f) { throw ConfigError("cannot open " + path.string()); }
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValueFile::add(std::string key, std::string value)
{
  int const line = entries_.empty() ? 1 : entries_.back().line + 1;
  entries_.push_back({std::move(key), std::move(value), line});
}

std::string KeyValueFile::str() const
{
  std::string out;
  for (auto const &e : entries_) { out += e.key + " = " + e.value + "\n"; }
  return out;
}

void KeyValueFile::save(std::filesystem::path const &path) const
{
  std::ofstream f(path, std::ios::trunc);
  if (!f) { throw Error("cannot open " + path.string() + " for writing"); }
  f << str();
}

bool KeyValueFile::has(std::string const &key) const { return find(key) != nullptr; }

KeyValueFile::Entry const *KeyValueFile::find(std::string const &key) const
{
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->key == key) { return &*it; }
  }
  return nullptr;
}

std::vector<KeyValueFile::Entry const *> KeyValueFile::all(std::string const &key) const
{
  std::vector<Entry const *> out;
  for (auto const &e : entries_) {
    if (e.key == key) { out.push_back(&e); }
  }
  return out;
}

void KeyValueFile::fail(Entry const &e, std::string const &what) const
{
  throw ConfigError(source_ + ":" + std::to_string(e.line) + ": field '" + e.key + "': " + what);
}

std::string KeyValueFile::get(std::string const &key) const
{
  if (auto e = find(key)) { return e->value; }
  throw ConfigError(source_ + ": missing required field '" + key + "'");
}

std::string KeyValueFile::get(std::string const &key, std::string const &fallback) const
{
  auto e = find(key);
  return e ? e->value : fallback;
}

double KeyValueFile::get_double(std::string const &key) const
{
  auto e = find(key);
  if (!e) { throw ConfigError(source_ + ": missing required field '" + key + "'"); }
  try {
    return parse_double(e->value);
  } catch (ConfigError const &) {
    fail(*e, "expected a number, found '" + e->value + "'");
  }
}

double KeyValueFile::get_double(std::string const &key, double fallback) const
{
  return has(key) ? get_double(key) : fallback;
}

long KeyValueFile::get_int(std::string const &key) const
{
  auto e = find(key);
  if (!e) { throw ConfigError(source_ + ": missing required field '" + key + "'"); }
  long v = 0;
  auto const *b = e->value.data();
  auto const *end = b + e->value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end) { fail(*e, "expected an integer, found '" + e->value + "'"); }
  return v;
}

long KeyValueFile::get_int(std::string const &key, long fallback) const
{
  return has(key) ? get_int(key) : fallback;
}

bool KeyValueFile::get_bool(std::string const &key, bool fallback) const
{
  auto e = find(key);
  if (!e) { return fallback; }
  if (e->value == "true" || e->value == "1" || e->value == "yes") { return true; }
  if (e->value == "false" || e->value == "0" || e->value == "no") { return false; }
  fail(*e, "expected a boolean, found '" + e->value + "'");
}

double parse_double(std::string const &s)
{
  if (s == "inf" || s == "+inf" || s == "infinity") { return INFINITY; }
  if (s == "-inf") { return -INFINITY; }
  double v = 0;
  auto const *end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) { throw ConfigError("not a number: '" + s + "'"); }
  return v;
}

std::vector<std::string> split_ws(std::string const &s)
{
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) { out.push_back(tok); }
  return out;
}

std::uint64_t fnv1a(std::span<std::byte const> bytes, std::uint64_t seed)
{
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= std::uint64_t(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string const &s, std::uint64_t seed)
{
  return fnv1a(std::as_bytes(std::span(s.data(), s.size())), seed);
}

std::string hex64(std::uint64_t h)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace pnp
