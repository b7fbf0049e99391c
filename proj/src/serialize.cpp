#include "lqdemix/serialize.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

namespace lqdemix {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

namespace {

nlohmann::json rows_of(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

std::string to_json(const SolveResult& result, int indent) {
  nlohmann::json doc;
  doc["x1"] = rows_of(result.x1);
  doc["x2"] = rows_of(result.x2);
  doc["objective_trace"] = result.objective_trace;
  doc["residual_trace"] = result.residual_trace;
  doc["iterate_gap_trace"] = result.iterate_gap_trace;
  doc["iterations"] = result.iterations;
  doc["converged"] = result.converged;
  doc["final_beta"] = result.final_beta;
  doc["eta1"] = result.eta1;
  doc["eta2"] = result.eta2;
  doc["rho1"] = result.rho1;
  doc["rho2"] = result.rho2;
  doc["warnings"] = result.warnings;
  return doc.dump(indent);
}

}  // namespace lqdemix
