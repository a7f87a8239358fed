#include "funlag/hexfloat.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>

#include "funlag/errors.hpp"

namespace funlag {

std::string to_hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double real_from_json(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw SchemaError("expected a real (number or hex-float string)");
  const std::string s = v.get<std::string>();
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError("malformed real '" + s + "'");
  return d;
}

nlohmann::json hex_vector(const Vec& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(to_hex(v(i)));
  return out;
}

Vec vector_from_json(const nlohmann::json& v) {
  if (!v.is_array()) throw SchemaError("expected an array of reals");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = real_from_json(v[i]);
  return out;
}

nlohmann::json hex_matrix(const Mat& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(hex_vector(m.row(i).transpose()));
  return out;
}

Mat matrix_from_json(const nlohmann::json& v) {
  if (!v.is_array()) throw SchemaError("expected a 2-D array of reals");
  if (v.empty()) return Mat(0, 0);
  Mat out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v[0].size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec row = vector_from_json(v[i]);
    if (row.size() != out.cols()) throw ShapeError("ragged matrix");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

}  // namespace funlag
