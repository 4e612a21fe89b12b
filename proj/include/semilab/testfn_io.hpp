#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "semilab/testfn.hpp"

namespace semilab {

/// Structured-text form {kind, a, h[], part, coefficients[]}. Doubles are written in shortest
/// round-trip form, so parse(serialize(f)) == f bit for bit.
nlohmann::json to_json(const TestFunction& f);
TestFunction test_function_from_json(const nlohmann::json& j);

std::string serialize_bank(const std::vector<TestFunction>& bank);
std::vector<TestFunction> parse_bank(const std::string& text);

nlohmann::json to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& field);

}  // namespace semilab
