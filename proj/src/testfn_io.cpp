#include "semilab/testfn_io.hpp"

#include "semilab/errors.hpp"

namespace semilab {

using nlohmann::json;

namespace {

const char* part_name(Part part) { return part == Part::Real ? "real" : "imag"; }

Part parse_part(const json& j, const std::string& field) {
  if (!j.contains("part")) return Part::Real;
  const std::string name = j.at("part").get<std::string>();
  if (name == "real") return Part::Real;
  if (name == "imag") return Part::Imag;
  throw ConfigError(field + ".part", "expected \"real\" or \"imag\", got \"" + name + "\"");
}

json atom_json(const TestFunction::Atom& atom) {
  if (const auto* cyl = std::get_if<CylindricalExp>(&atom))
    return {{"kind", "cylindrical"}, {"h", to_json(cyl->h)}, {"part", part_name(cyl->part)}};
  const auto& ou = std::get<OUIntegralFunction>(atom);
  json j = {{"kind", "ou_integral"}, {"a", ou.a}, {"h", to_json(ou.h)}, {"part", part_name(ou.part)}};
  if (ou.nodes > 0) j["nodes"] = ou.nodes;
  return j;
}

TestFunction::Atom parse_atom(const json& j, const std::string& field) {
  const std::string kind = j.at("kind").get<std::string>();
  const Vector h = vector_from_json(j.at("h"), field + ".h");
  if (kind == "cylindrical") return CylindricalExp{h, parse_part(j, field)};
  if (kind == "ou_integral") {
    if (!j.contains("a")) throw ConfigError(field + ".a", "missing upper limit");
    return OUIntegralFunction{j.at("a").get<double>(), h, parse_part(j, field), j.value("nodes", 0)};
  }
  throw ConfigError(field + ".kind", "unknown test-function kind \"" + kind + "\"");
}

}  // namespace

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field, "entry " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector row = vector_from_json(j[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
    if (i == 0) m.resize(rows, row.size());
    if (row.size() != m.cols()) throw ConfigError(field, "rows have different lengths");
    m.row(i) = row.transpose();
  }
  return m;
}

json to_json(const TestFunction& f) {
  const auto& terms = f.terms();
  if (terms.empty()) return {{"kind", "constant"}, {"coefficients", json::array({f.constant_term()})}};
  if (terms.size() == 1 && terms.front().coefficient == 1.0 && f.constant_term() == 0.0)
    return atom_json(terms.front().atom);
  json atoms = json::array();
  json coefficients = json::array();
  for (const auto& term : terms) {
    atoms.push_back(atom_json(term.atom));
    coefficients.push_back(term.coefficient);
  }
  return {{"kind", "combination"}, {"terms", atoms}, {"coefficients", coefficients}, {"constant", f.constant_term()}};
}

TestFunction test_function_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
      const json& c = j.at("coefficients");
      if (!c.is_array() || c.size() != 1) throw ConfigError("coefficients", "constant needs exactly one coefficient");
      return TestFunction::constant(c[0].get<double>());
    }
    if (kind == "combination") {
      const json& atoms = j.at("terms");
      const json& coefficients = j.at("coefficients");
      if (!atoms.is_array() || !coefficients.is_array() || atoms.size() != coefficients.size())
        throw ConfigError("terms", "terms and coefficients must be arrays of equal length");
      TestFunction f = TestFunction::constant(j.value("constant", 0.0));
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        TestFunction term(parse_atom(atoms[k], "terms[" + std::to_string(k) + "]"));
        f += coefficients[k].get<double>() * term;
      }
      return f;
    }
    return TestFunction(parse_atom(j, "test_function"));
  } catch (const json::exception& e) {
    throw ConfigError("test_function", e.what());
  }
}

std::string serialize_bank(const std::vector<TestFunction>& bank) {
  json out = json::array();
  for (const auto& f : bank) out.push_back(to_json(f));
  return out.dump(2) + "\n";
}

std::vector<TestFunction> parse_bank(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("bank", e.what());
  }
  if (!j.is_array()) throw ConfigError("bank", "expected an array of test functions");
  std::vector<TestFunction> bank;
  for (const auto& item : j) bank.push_back(test_function_from_json(item));
  return bank;
}

}  // namespace semilab
