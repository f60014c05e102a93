#pragma once

// Internal JSON helpers shared by the file-format readers and writers.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include <graspalign/se3.hpp>

namespace graspalign::detail {

inline nlohmann::json matrix_json(const Transform3& t) {
  const Mat4 m = t.matrix();
  nlohmann::json arr = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      arr.push_back(m(r, c));
    }
  }
  return arr;
}

inline Transform3 matrix_from_json(const nlohmann::json& arr,
                                   const std::string& what) {
  if (!arr.is_array() || arr.size() != 16) {
    throw InvalidInput(what + ": expected a 16-element row-major matrix");
  }
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = arr[static_cast<size_t>(r) * 4 + c].get<double>();
    }
  }
  return Transform3::from_matrix(m);
}

inline nlohmann::json intrinsics_json(const Intrinsics& k) {
  return nlohmann::json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

inline Intrinsics intrinsics_from_json(const nlohmann::json& j,
                                       const std::string& what) {
  for (const char* key : {"fx", "fy", "cx", "cy"}) {
    if (!j.contains(key)) {
      throw InvalidInput(what + ": intrinsics missing key " + key);
    }
  }
  Intrinsics k{j["fx"].get<double>(), j["fy"].get<double>(),
               j["cx"].get<double>(), j["cy"].get<double>()};
  k.validate();
  return k;
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path,
                                      const std::string& what) {
  std::ifstream in(path);
  if (!in.good()) {
    throw InvalidInput(what + ": cannot open " + path.string());
  }
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(what + ": malformed JSON in " + path.string() + ": " +
                       e.what());
  }
}

}  // namespace graspalign::detail
