#include "vibias/config.hpp"

#include "vibias/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace vibias {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TomlValueParser {
 public:
  TomlValueParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  Json parse_all() {
    Json v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

  Json basic_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n':
            c = '\n';
            break;
          case 't':
            c = '\t';
            break;
          case '"':
          case '\\':
            c = e;
            break;
          default:
            fail("unsupported escape");
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  Json literal_string() {
    ++pos_;
    const std::size_t end = s_.find('\'', pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  Json array() {
    ++pos_;
    Json a = Json::array();
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return a;
      }
      a.push_back(value());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
      } else if (pos_ < s_.size() && s_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json number() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '+' ||
                               s_[end] == '-' || s_[end] == '.' || s_[end] == '_')) {
      ++end;
    }
    std::string tok;
    for (char c : s_.substr(pos_, end - pos_)) {
      if (c != '_') tok += c;
    }
    pos_ = end;
    if (tok.empty()) fail("expected a value");
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    const bool integral = tok.find_first_of(".eE") == std::string::npos;
    const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
    const char* last = tok.data() + tok.size();
    if (integral) {
      long long v = 0;
      const auto r = std::from_chars(first, last, v);
      if (r.ec == std::errc() && r.ptr == last) return v;
    } else {
      double v = 0.0;
      const auto r = std::from_chars(first, last, v);
      if (r.ec == std::errc() && r.ptr == last) return v;
    }
    fail("invalid value '" + tok + "'");
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

// Bracket depth of a line outside strings and comments.
int bracket_balance(std::string_view line) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      break;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

const Json* find(const Json& cfg, const char* section, const char* key) {
  if (!cfg.contains(section)) return nullptr;
  const Json& s = cfg.at(section);
  if (!s.is_object() || !s.contains(key)) return nullptr;
  return &s.at(key);
}

double get_number(const Json& cfg, const char* section, const char* key, double fallback) {
  const Json* j = find(cfg, section, key);
  if (!j) return fallback;
  if (!j->is_number()) throw Error(ErrorCode::ParseError, std::string(section) + "." + key + " must be a number");
  return j->get<double>();
}

std::optional<std::string> get_string(const Json& cfg, const char* section, const char* key) {
  const Json* j = find(cfg, section, key);
  if (!j) return std::nullopt;
  if (!j->is_string()) throw Error(ErrorCode::ParseError, std::string(section) + "." + key + " must be a string");
  return j->get<std::string>();
}

Eigen::MatrixXd matrix_from(const Json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::ParseError, "matrix must be a nonempty array of rows");
  const auto d = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) {
      throw Error(ErrorCode::ShapeMismatch, "matrix must be square");
    }
    for (Eigen::Index k = 0; k < d; ++k) {
      const Json& x = row[static_cast<std::size_t>(k)];
      if (!x.is_number()) throw Error(ErrorCode::ParseError, "matrix entries must be numbers");
      m(i, k) = x.get<double>();
    }
  }
  return m;
}

std::vector<long> n_list(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "sweep.n must be an array of integers");
  std::vector<long> out;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw Error(ErrorCode::ParseError, "sweep.n must hold integers");
    out.push_back(x.get<long>());
  }
  return out;
}

}  // namespace

Json parse_toml(std::string_view text) {
  Json root = Json::object();
  root[""] = Json::object();
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t start_line = lineno;
    std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      const std::size_t close = t.find(']');
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": unterminated section header");
      }
      std::string_view rest = trim(t.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') {
        throw Error(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": text after section header");
      }
      section = std::string(trim(t.substr(1, close - 1)));
      if (section.empty() || root.contains(section)) {
        throw Error(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": bad or repeated section");
      }
      root[section] = Json::object();
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key(trim(t.substr(0, eq)));
    if (key.size() >= 2 && (key.front() == '"' || key.front() == '\'') && key.back() == key.front()) {
      key = key.substr(1, key.size() - 2);
    }
    if (key.empty()) throw Error(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": empty key");
    std::string value(t.substr(eq + 1));
    int depth = bracket_balance(value);
    while (depth > 0 && std::getline(in, line)) {
      ++lineno;
      value += '\n';
      value += line;
      depth += bracket_balance(line);
    }
    Json& sec = root[section];
    if (sec.contains(key)) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(start_line) + ": duplicate key " + key);
    }
    sec[key] = TomlValueParser(value, start_line).parse_all();
  }
  return root;
}

Json parse_config(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    try {
      return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("invalid JSON config: ") + e.what());
    }
  }
  return parse_toml(text);
}

Json load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

GridMeasure bimodal_grid(std::size_t points) {
  if (points < 2) throw Error(ErrorCode::InvalidArgument, "bimodal grid needs at least 2 points per axis");
  Axes axes{linspace(-3.0, 3.0, points), linspace(-3.0, 3.0, points)};
  std::vector<double> lw;
  lw.reserve(points * points);
  for (double x : axes[0]) {
    for (double y : axes[1]) lw.push_back(-(x * x - 1.0) * (x * x - 1.0) - (y - x) * (y - x));
  }
  return normalize(GridMeasure(std::move(axes), std::move(lw)));
}

Eigen::MatrixXd default_gaussian3_cov() {
  Eigen::MatrixXd s(3, 3);
  s << 1.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.0;
  return s;
}

FunctionalSpec parse_functional(std::string_view text_or_path, std::size_t dim) {
  const auto first = text_or_path.find_first_not_of(" \t\r\n");
  std::string text = first != std::string_view::npos && text_or_path[first] == '{'
                         ? std::string(text_or_path)
                         : read_file(std::filesystem::path(std::string(text_or_path)));
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid functional JSON: ") + e.what());
  }
  return functional_from_json(j, dim);
}

Experiment make_experiment(const Json& config, const Overrides& over) {
  if (!config.is_object()) throw Error(ErrorCode::ParseError, "config must be a table");
  std::string preset = over.preset ? *over.preset : get_string(config, "posterior", "preset").value_or("");
  if (!preset.empty() &&
      std::find(std::begin(kPresets), std::end(kPresets), preset) == std::end(kPresets)) {
    throw Error(ErrorCode::InvalidArgument, "unknown preset " + preset);
  }
  const double rho_default = preset == "lan-default" ? 0.3 : 0.5;
  const double rho = over.rho ? *over.rho : get_number(config, "posterior", "rho", rho_default);
  std::optional<std::size_t> grid_points = over.grid_points;
  if (!grid_points) {
    if (const Json* g = find(config, "posterior", "grid_points")) {
      if (!g->is_number_unsigned()) throw Error(ErrorCode::ParseError, "posterior.grid_points must be a positive integer");
      grid_points = g->get<std::size_t>();
    }
  }

  std::optional<Measure> posterior;
  std::vector<long> n_grid;
  if (preset == "gaussian2d" || preset == "lan-default") {
    if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::NonPositiveDefinite, "rho must lie in (-1, 1)");
    Eigen::MatrixXd s(2, 2);
    s << 1.0, rho, rho, 1.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    if (preset == "lan-default") {
      mu << 2.0, -1.0;
      n_grid = {10, 100, 1000};
    }
    posterior = GaussianMeasure(mu, s);
  } else if (preset == "gaussian3") {
    const auto file = over.sigma_file ? over.sigma_file : get_string(config, "posterior", "sigma_file");
    Eigen::MatrixXd s = default_gaussian3_cov();
    if (file) {
      Json sj;
      try {
        sj = Json::parse(read_file(*file));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("invalid sigma file: ") + e.what());
      }
      s = matrix_from(sj.is_object() && sj.contains("cov") ? sj.at("cov") : sj);
    }
    posterior = GaussianMeasure(Eigen::VectorXd::Zero(s.rows()), s);
  } else if (preset == "grid-bimodal") {
    posterior = bimodal_grid(grid_points.value_or(41));
    grid_points.reset();
  } else if (const auto file = get_string(config, "posterior", "measure_file")) {
    Json mj;
    try {
      mj = Json::parse(read_file(*file));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("invalid measure file: ") + e.what());
    }
    posterior = measure_from_json(mj);
  } else if (const Json* cov = find(config, "posterior", "cov")) {
    const Eigen::MatrixXd s = matrix_from(*cov);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(s.rows());
    if (const Json* m = find(config, "posterior", "mean")) {
      if (!m->is_array() || static_cast<Eigen::Index>(m->size()) != s.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "posterior.mean does not match cov");
      }
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const Json& x = (*m)[static_cast<std::size_t>(i)];
        if (!x.is_number()) throw Error(ErrorCode::ParseError, "posterior.mean entries must be numbers");
        mu(i) = x.get<double>();
      }
    }
    posterior = GaussianMeasure(mu, s);
  } else if (find(config, "posterior", "axes")) {
    posterior = measure_from_json(config.at("posterior"));
  } else {
    throw Error(ErrorCode::InvalidArgument, "no posterior: give a preset, measure_file, cov or axes");
  }

  if (grid_points) {
    if (const auto* g = std::get_if<GaussianMeasure>(&*posterior)) {
      const double span = get_number(config, "posterior", "span_sd", 6.0);
      posterior = discretize(*g, GridConfig{*grid_points, span});
    }
  }

  const std::size_t dim = dim_of(*posterior);
  BlockStructure blocks = BlockStructure::fully_factorized(dim);
  if (const Json* b = find(config, "family", "blocks")) blocks = blocks_from_json(*b, dim);

  CaviConfig cavi;
  cavi.tol = over.tol ? *over.tol : get_number(config, "family", "tol", cavi.tol);
  const double sweeps = get_number(config, "family", "max_sweeps", static_cast<double>(cavi.max_sweeps));
  if (!(sweeps >= 1.0) || sweeps != std::floor(sweeps)) {
    throw Error(ErrorCode::ParseError, "family.max_sweeps must be a positive integer");
  }
  cavi.max_sweeps = static_cast<std::size_t>(sweeps);
  if (!(cavi.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");

  std::optional<FunctionalSpec> functional;
  std::string functional_id = get_string(config, "functional", "id").value_or("");
  if (over.functional) {
    functional = parse_functional(*over.functional, dim);
  } else if (const auto spec = get_string(config, "functional", "spec")) {
    functional = parse_functional(*spec, dim);
  } else if (const auto file = get_string(config, "functional", "file")) {
    functional = parse_functional(*file, dim);
  } else if (const Json* j = find(config, "functional", "poly")) {
    functional = functional_from_json(Json{{"poly", *j}}, dim);
  }
  if (functional && functional_id.empty()) functional_id = "h";

  if (over.n_grid) {
    n_grid = *over.n_grid;
  } else if (const Json* n = find(config, "sweep", "n")) {
    n_grid = n_list(*n);
  }
  return {preset, std::move(*posterior), std::move(blocks), cavi, std::move(functional), std::move(functional_id),
          std::move(n_grid)};
}

}  // namespace vibias
