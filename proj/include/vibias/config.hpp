#pragma once

#include "vibias/meanfield.hpp"
#include "vibias/serialize.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vibias {

/// The subset of TOML the experiment files use: [section] headers, bare or
/// quoted keys, strings, numbers, booleans and (possibly multi-line, nested)
/// arrays. Produces {section: {key: value}}; top-level keys land in "".
Json parse_toml(std::string_view text);

/// JSON when the first non-blank character is '{', TOML otherwise.
Json parse_config(std::string_view text);
Json load_config(const std::filesystem::path& path);

/// Command-line values that override the config file.
struct Overrides {
  std::optional<std::string> preset;
  std::optional<double> rho;
  std::optional<std::string> sigma_file;
  std::optional<std::string> functional;  ///< inline JSON or a path
  std::optional<std::vector<long>> n_grid;
  std::optional<double> tol;
  std::optional<std::size_t> grid_points;
};

struct Experiment {
  std::string preset;  ///< empty for custom posteriors
  Measure posterior;
  BlockStructure blocks;
  CaviConfig cavi;
  std::optional<FunctionalSpec> functional;
  std::string functional_id;
  std::vector<long> n_grid;
};

/// gaussian2d: N(0, [[1, rho], [rho, 1]]), rho defaults to 0.5.
/// gaussian3: N(0, sigma) with sigma read from a JSON matrix file (a fixed
///   3x3 default otherwise).
/// grid-bimodal: exp(-(x^2-1)^2 - (y-x)^2) on a 41x41 grid over [-3, 3]^2.
/// lan-default: N((2, -1), [[1, 0.3], [0.3, 1]]) with n = 10, 100, 1000.
inline constexpr std::string_view kPresets[] = {"gaussian2d", "gaussian3", "grid-bimodal", "lan-default"};

Experiment make_experiment(const Json& config, const Overrides& over = {});

GridMeasure bimodal_grid(std::size_t points = 41);
Eigen::MatrixXd default_gaussian3_cov();

/// Inline JSON when the text starts with '{', otherwise a file path.
FunctionalSpec parse_functional(std::string_view text_or_path, std::size_t dim);

}  // namespace vibias
