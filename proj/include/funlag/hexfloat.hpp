#pragma once

// Bit-exact text encoding of doubles ("%a" hex-float) for certificates.

#include <string>

#include "funlag/model.hpp"

namespace funlag {

std::string to_hex(double v);
// Accepts a hex-float (or decimal) string, or a plain JSON number.
double real_from_json(const nlohmann::json& v);

nlohmann::json hex_vector(const Vec& v);
Vec vector_from_json(const nlohmann::json& v);
nlohmann::json hex_matrix(const Mat& m);
Mat matrix_from_json(const nlohmann::json& v);

}  // namespace funlag
