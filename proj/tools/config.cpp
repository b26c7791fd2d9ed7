#include "config.hpp"

namespace lft::cli {

Section::Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) {
    throw ConfigError(path_ + ": expected a JSON object");
  }
}

const json& Section::at(const std::string& key) {
  used_.insert(key);
  return j_.at(key);
}

std::string Section::str(const std::string& key, const std::string& fallback) {
  std::string v = fallback;
  if (has(key)) {
    const json& x = at(key);
    if (!x.is_string()) {
      throw ConfigError(path_ + key + ": expected a string");
    }
    v = x.get<std::string>();
  }
  resolved_[key] = v;
  return v;
}

double Section::num(const std::string& key, double fallback) {
  double v = fallback;
  if (has(key)) {
    const json& x = at(key);
    if (!x.is_number()) {
      throw ConfigError(path_ + key + ": expected a number");
    }
    v = x.get<double>();
  }
  resolved_[key] = v;
  return v;
}

std::uint64_t Section::uint(const std::string& key, std::uint64_t fallback) {
  std::uint64_t v = fallback;
  if (has(key)) {
    const json& x = at(key);
    if (!x.is_number_unsigned()) {
      throw ConfigError(path_ + key + ": expected a non-negative integer");
    }
    v = x.get<std::uint64_t>();
  }
  resolved_[key] = v;
  return v;
}

bool Section::flag(const std::string& key, bool fallback) {
  bool v = fallback;
  if (has(key)) {
    const json& x = at(key);
    if (!x.is_boolean()) {
      throw ConfigError(path_ + key + ": expected true or false");
    }
    v = x.get<bool>();
  }
  resolved_[key] = v;
  return v;
}

std::vector<std::size_t> Section::uint_list(const std::string& key, const std::vector<std::size_t>& fallback) {
  std::vector<std::size_t> v = fallback;
  if (has(key)) {
    const json& x = at(key);
    if (!x.is_array()) {
      throw ConfigError(path_ + key + ": expected an array of non-negative integers");
    }
    v.clear();
    for (const json& e : x) {
      if (!e.is_number_unsigned()) {
        throw ConfigError(path_ + key + ": expected an array of non-negative integers");
      }
      v.push_back(e.get<std::size_t>());
    }
  }
  resolved_[key] = v;
  return v;
}

std::vector<std::string> Section::str_list(const std::string& key, const std::vector<std::string>& fallback) {
  std::vector<std::string> v = fallback;
  if (has(key)) {
    const json& x = at(key);
    if (!x.is_array()) {
      throw ConfigError(path_ + key + ": expected an array of strings");
    }
    v.clear();
    for (const json& e : x) {
      if (!e.is_string()) {
        throw ConfigError(path_ + key + ": expected an array of strings");
      }
      v.push_back(e.get<std::string>());
    }
  }
  resolved_[key] = v;
  return v;
}

Section Section::sub(const std::string& key) {
  if (!has(key)) {
    return Section(json::object(), path_ + key + ".");
  }
  return Section(at(key), path_ + key + ".");
}

std::vector<Section> Section::objects(const std::string& key) {
  std::vector<Section> out;
  if (!has(key)) {
    return out;
  }
  const json& x = at(key);
  if (!x.is_array()) {
    throw ConfigError(path_ + key + ": expected an array of objects");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.emplace_back(x[i], path_ + key + "[" + std::to_string(i) + "].");
  }
  return out;
}

void Section::adopt(const std::string& key, const Section& child) {
  child.finish();
  resolved_[key] = child.resolved();
}

void Section::adopt(const std::string& key, const std::vector<Section>& children) {
  json arr = json::array();
  for (const Section& c : children) {
    c.finish();
    arr.push_back(c.resolved());
  }
  resolved_[key] = arr;
}

void Section::finish() const {
  std::string unknown;
  for (const auto& [key, value] : j_.items()) {
    if (!used_.count(key)) {
      unknown += (unknown.empty() ? "" : ", ") + path_ + key;
    }
  }
  if (!unknown.empty()) {
    throw ConfigError("unknown config key(s): " + unknown);
  }
}

}  // namespace lft::cli
