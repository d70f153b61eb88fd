#pragma once

// Independent reference implementations used as test oracles. They are
// deliberately naive and share no code with the library.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace oracle {

struct IntBox {
  int x, y, w, h;
};

// IOU by counting unit cells on the integer grid.
inline double pixel_iou(const IntBox& a, const IntBox& b) {
  const int x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.x + a.w, b.x + b.w), y1 = std::max(a.y + a.h, b.y + b.h);
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
      const bool in_b = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Occlusion check written straight from the pseudocode:
//   max_iou = max(iou_vector); count = 0
//   for iou_score in iou_vector:
//     if iou_score > 0.1 and iou_score != max_iou: count += 1
//   return count > 1
inline bool occlusion_pseudocode(const std::vector<double>& iou_vector) {
  double max_iou = 0.0;
  bool first = true;
  for (double v : iou_vector) {
    if (first || v > max_iou) max_iou = v;
    first = false;
  }
  int count = 0;
  for (double iou_score : iou_vector)
    if (iou_score > 0.1 && iou_score != max_iou) count += 1;
  return count > 1;
}

// Hop distances by plain BFS over an adjacency map.
inline std::map<std::string, int> bfs(const std::map<std::string, std::vector<std::string>>& adj,
                                      const std::string& origin) {
  std::map<std::string, int> d{{origin, 0}};
  std::deque<std::string> q{origin};
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    auto it = adj.find(u);
    if (it == adj.end()) continue;
    for (const auto& v : it->second)
      if (!d.count(v)) {
        d[v] = d[u] + 1;
        q.push_back(v);
      }
  }
  return d;
}

// Minimal JSON-schema subset: type, required, properties, items, enum and
// "$ref" naming another top-level entry of `defs`.
inline std::string check_schema(const nlohmann::json& value, const nlohmann::json& schema, const nlohmann::json& defs,
                                const std::string& path = "$") {
  if (schema.contains("$ref")) return check_schema(value, defs.at(schema["$ref"].get<std::string>()), defs, path);
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& e : schema["enum"]) ok = ok || e == value;
    if (!ok) return path + ": value not in enum";
  }
  if (schema.contains("type")) {
    std::vector<std::string> types;
    if (schema["type"].is_array()) types = schema["type"].get<std::vector<std::string>>();
    else types.push_back(schema["type"].get<std::string>());
    bool ok = false;
    for (const auto& t : types) {
      if (t == "object") ok = ok || value.is_object();
      else if (t == "array") ok = ok || value.is_array();
      else if (t == "string") ok = ok || value.is_string();
      else if (t == "integer") ok = ok || value.is_number_integer();
      else if (t == "number") ok = ok || value.is_number();
      else if (t == "boolean") ok = ok || value.is_boolean();
      else if (t == "null") ok = ok || value.is_null();
    }
    if (!ok) return path + ": expected " + schema["type"].dump();
  }
  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& k : schema["required"])
        if (!value.contains(k.get<std::string>())) return path + ": missing " + k.get<std::string>();
    if (schema.contains("properties"))
      for (const auto& [k, sub] : schema["properties"].items())
        if (value.contains(k)) {
          auto err = check_schema(value[k], sub, defs, path + "." + k);
          if (!err.empty()) return err;
        }
  }
  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      auto err = check_schema(value[i], schema["items"], defs, path + "[" + std::to_string(i) + "]");
      if (!err.empty()) return err;
    }
  }
  return {};
}

}  // namespace oracle
