#pragma once

#include "planex/common.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace planex::json_io {

using nlohmann::json;

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, std::string_view what);

/// {"rows": r, "cols": c, "data": [row-major]}
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, std::string_view what);

json read_file(const std::string& path);
void write_file(const std::string& path, const json& j);

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

const json& require(const json& j, const char* key);

}  // namespace planex::json_io
