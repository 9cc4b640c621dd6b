#pragma once

#include "vibias/bias.hpp"
#include "vibias/lan.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/tangent.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace vibias {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal; "0" for both zeros, "inf", "-inf", "nan".
std::string format_double(double x);

/// CSV line from already formatted fields (no quoting needed for our data).
std::string csv_line(const std::vector<std::string>& fields);

Json to_json(const GridMeasure& m);
Json to_json(const GaussianMeasure& m);
Json to_json(const Measure& m);
/// Grid documents carry "axes"; Gaussian documents carry "mean" and "cov".
Measure measure_from_json(const Json& j);

Json to_json(const BlockStructure& b);
BlockStructure blocks_from_json(const Json& j, std::size_t dim);

/// {"poly": [[c, [e...]], ...]} | {"boxtail": {"lower": [t or null, ...]}} |
/// {"grid": {"coords": [...], "axes": [[...]], "values": [...]}}.
/// `dim` is used for empty polynomials and checked otherwise.
FunctionalSpec functional_from_json(const Json& j, std::size_t dim);
Json to_json(const FunctionalSpec& f);

Json to_json(const MeanFieldFit& fit);
Json to_json(const BiasReport& r);
Json to_json(const AnovaDecomposition& a);
Json to_json(const OrthogonalityReport& r);
Json to_json(const LanSweepResult& r);
Json to_json(const TangentAudit& a);
Json to_json(const ScalingResult& r);

const std::vector<std::string>& bias_csv_header();
std::vector<std::string> bias_csv_row(const BiasReport& r);

const std::vector<std::string>& lan_csv_header();
std::vector<std::vector<std::string>> lan_csv_rows(const LanSweepResult& r);

}  // namespace vibias
