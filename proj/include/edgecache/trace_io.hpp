#pragma once

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "edgecache/demand.hpp"

namespace edgecache {

inline constexpr int kTraceFormatVersion = 1;

namespace detail {

inline void expect_keys(const nlohmann::json& obj, const std::string& where,
                        std::initializer_list<const char*> required, std::initializer_list<const char*> optional) {
  if (!obj.is_object()) throw ParseError(where, "expected an object");
  for (const char* k : required) {
    if (!obj.contains(k)) throw ParseError(k, "missing field in " + where);
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : required) known = known || it.key() == k;
    for (const char* k : optional) known = known || it.key() == k;
    if (!known) throw ParseError(it.key(), "unexpected field in " + where);
  }
}

inline double number_at(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ParseError(key, "expected a number");
  return j.get<double>();
}

inline std::size_t count_at(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() <= 0) throw ParseError(key, "expected a positive integer");
  return static_cast<std::size_t>(j.get<long long>());
}

inline std::vector<double> reals_at(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array()) throw ParseError(key, "expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(number_at(x, key));
  return out;
}

}  // namespace detail

inline nlohmann::json trace_to_json(const DemandTrace& trace) {
  nlohmann::json j;
  j["version"] = kTraceFormatVersion;
  j["slot_seconds"] = trace.slot_seconds;
  j["num_slots"] = trace.num_slots;
  j["num_users"] = trace.num_users;
  j["catalog"]["lengths_mnats"] = trace.catalog.lengths;
  if (!trace.catalog.popularity.empty()) j["catalog"]["popularity"] = trace.catalog.popularity;
  auto rows = nlohmann::json::array();
  for (std::size_t n = 0; n < trace.num_slots; ++n) {
    auto row = nlohmann::json::array();
    for (std::size_t u = 0; u < trace.num_users; ++u) row.push_back(trace.requests(n, u));
    rows.push_back(std::move(row));
  }
  j["requests"] = std::move(rows);
  return j;
}

inline DemandTrace trace_from_json(const nlohmann::json& j) {
  using detail::expect_keys;
  expect_keys(j, "trace", {"version", "slot_seconds", "num_slots", "num_users", "catalog", "requests"}, {});
  if (!j["version"].is_number_integer()) throw ParseError("version", "expected an integer");
  if (j["version"].get<long long>() != kTraceFormatVersion) {
    throw ParseError("version", "version mismatch: expected " + std::to_string(kTraceFormatVersion) + ", got " +
                                    j["version"].dump());
  }
  DemandTrace t;
  t.slot_seconds = detail::number_at(j["slot_seconds"], "slot_seconds");
  if (!(t.slot_seconds > 0.0)) throw ParseError("slot_seconds", "must be positive");
  t.num_slots = detail::count_at(j["num_slots"], "num_slots");
  t.num_users = detail::count_at(j["num_users"], "num_users");

  const auto& cat = j["catalog"];
  expect_keys(cat, "catalog", {"lengths_mnats"}, {"popularity"});
  t.catalog.lengths = detail::reals_at(cat["lengths_mnats"], "lengths_mnats");
  if (cat.contains("popularity")) t.catalog.popularity = detail::reals_at(cat["popularity"], "popularity");

  const auto& rows = j["requests"];
  if (!rows.is_array() || rows.size() != t.num_slots) {
    throw ParseError("requests", "expected num_slots rows");
  }
  t.requests = Grid<int>(t.num_slots, t.num_users, 0);
  for (std::size_t n = 0; n < t.num_slots; ++n) {
    const auto& row = rows[n];
    if (!row.is_array() || row.size() != t.num_users) throw ParseError("requests", "row length must equal num_users");
    for (std::size_t u = 0; u < t.num_users; ++u) {
      const auto& x = row[u];
      if (!x.is_number_integer()) throw ParseError("requests", "non-integer request id " + x.dump());
      const long long id = x.get<long long>();
      if (id < 0 || id > static_cast<long long>(t.catalog.num_files())) {
        throw ParseError("requests", "request id " + std::to_string(id) + " outside catalog");
      }
      t.requests(n, u) = static_cast<int>(id);
    }
  }
  try {
    t.catalog.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError("catalog", e.what());
  }
  return t;
}

inline void save_trace(const DemandTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << trace_to_json(trace).dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline DemandTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", std::string("malformed JSON in ") + path + ": " + e.what());
  }
  return trace_from_json(j);
}

}  // namespace edgecache
