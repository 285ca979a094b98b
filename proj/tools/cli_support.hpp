#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "markovlm/markovlm.h"

namespace cli {

using json = nlohmann::ordered_json;

// Bad configuration; the message starts with the JSON path.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ApiError : std::runtime_error {
  ApiError(mlm_status s, const std::string& what)
      : std::runtime_error(what), status(s) {}
  mlm_status status;
};

inline void check(mlm_status s) {
  if (s != MLM_OK)
    throw ApiError(s, std::string(mlm_status_name(s)) + ": " + mlm_last_error());
}

template <class T, void (*Free)(T*)>
struct Handle {
  Handle() = default;
  explicit Handle(T* p) : ptr(p, Free) {}
  T* get() const { return ptr.get(); }
  T** out() {
    raw = nullptr;
    return &raw;
  }
  void adopt() { ptr.reset(raw, Free); }
  std::shared_ptr<T> ptr;
  T* raw = nullptr;
};

// Wraps a C API constructor: make<Matrix>([&](auto** o) { return f(..., o); }).
template <class H, class F>
H make(F&& f) {
  H h;
  check(f(h.out()));
  h.adopt();
  return h;
}

using Matrix = Handle<mlm_matrix, mlm_matrix_free>;
using Oracle = Handle<mlm_oracle, mlm_oracle_free>;
using Logits = Handle<mlm_logits, mlm_logits_free>;
using Toy = Handle<mlm_toy, mlm_toy_free>;
using Curve = Handle<mlm_risk_curve, mlm_risk_curve_free>;
using MockServer = Handle<mlm_mock_server, mlm_mock_server_free>;

inline std::string take(char* s) {
  std::string out = s ? s : "";
  mlm_free_string(s);
  return out;
}

// Typed view of a config object that records which keys were read, so
// leftovers can be rejected as unknown.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& k) const { return j_.contains(k); }

  std::string at_path(const std::string& k) const { return path_ + "." + k; }

  const json& raw(const std::string& k) {
    used_.insert(k);
    if (!j_.contains(k)) throw ValidationError(at_path(k) + ": required key is missing");
    return j_.at(k);
  }

  Obj obj(const std::string& k) { return Obj(raw(k), at_path(k)); }

  template <class T>
  T get(const std::string& k) {
    const json& v = raw(k);
    return convert<T>(v, at_path(k));
  }

  template <class T>
  T get(const std::string& k, T fallback) {
    used_.insert(k);
    if (!j_.contains(k)) return fallback;
    return convert<T>(j_.at(k), at_path(k));
  }

  template <class T>
  std::vector<T> list(const std::string& k) {
    const json& v = raw(k);
    return to_list<T>(v, at_path(k));
  }

  template <class T>
  std::vector<T> list(const std::string& k, std::vector<T> fallback) {
    used_.insert(k);
    if (!j_.contains(k)) return fallback;
    return to_list<T>(j_.at(k), at_path(k));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        throw ValidationError(at_path(it.key()) + ": unknown key");
  }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(path + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(path + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (v.is_number_integer() || v.is_number_unsigned()) {
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && v.get<std::int64_t>() < 0)
            throw ValidationError(path + ": expected a non-negative integer");
        }
        return v.get<T>();
      }
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == static_cast<double>(static_cast<std::int64_t>(d)) &&
            (!std::is_unsigned_v<T> || d >= 0))
          return static_cast<T>(d);
      }
      throw ValidationError(path + ": expected an integer");
    } else {
      if (!v.is_number()) throw ValidationError(path + ": expected a number");
      return v.get<T>();
    }
  }

 private:
  template <class T>
  static std::vector<T> to_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw ValidationError(path + ": expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(convert<T>(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct RunContext {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string command;
  json resolved;  // config plus command and seed

  std::string config_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(resolved.dump())));
    return buf;
  }

  std::string header_line() const {
    return std::string("# tool=markovlm version=") + mlm_version() +
           " command=" + command + " config_hash=" + config_hash() +
           " seed=" + std::to_string(seed);
  }

  json header_json() const {
    return json{{"tool", "markovlm"},
                {"version", mlm_version()},
                {"command", command},
                {"config_hash", config_hash()},
                {"seed", seed},
                {"config", resolved}};
  }

  std::filesystem::path write(const std::string& name, const std::string& body) const {
    const auto path = out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << body;
    if (!f) throw std::runtime_error("failed writing " + path.string());
    return path;
  }

  void write_csv(const std::string& name, const std::string& body) const {
    write(name, header_line() + "\n" + body);
  }

  // The header goes first, under "header".
  void write_json(const std::string& name, const json& body) const {
    json doc;
    doc["header"] = header_json();
    for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
    write(name, doc.dump(2) + "\n");
  }
};

inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_steps(std::int64_t v) { return v < 0 ? "+inf" : std::to_string(v); }

inline json num_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? json("+inf") : json("-inf");
  if (std::isnan(v)) return json(nullptr);
  return json(v);
}

}  // namespace cli
