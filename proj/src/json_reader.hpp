#pragma once

// Strict reader for config objects: absent keys keep their defaults, unknown
// keys and type mismatches raise ConfigError.

#include <set>
#include <string>

#include "pacfl/errors.hpp"
#include "pacfl/serialize.hpp"

namespace pacfl::detail {

class Reader {
 public:
  Reader(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j.is_object()) throw ConfigError(what_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(what_ + "." + key + ": " + e.what());
    }
  }

  // Enum stored as a string.
  template <class T, class Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string name;
    bool present = j_.contains(key);
    get(key, name);
    if (present) out = parse(name);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError("unknown key '" + item.key() + "' in " + what_);
  }

 private:
  const Json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

}  // namespace pacfl::detail
