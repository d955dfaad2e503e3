#include "slq/problem.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slq/errors.hpp"
#include "slq/matrix_kit.hpp"

namespace slq {

using nlohmann::json;

namespace {

constexpr double kSymmetrizeTol = 1e-9;

void check_shape(const MatrixPath& p, Eigen::Index r, Eigen::Index c, const char* name) {
  if (p.rows() != r || p.cols() != c) {
    throw DimensionError(std::string(name) + ": expected " + std::to_string(r) + "x" +
                         std::to_string(c) + ", got " + std::to_string(p.rows()) + "x" +
                         std::to_string(p.cols()));
  }
}

MatrixPath checked_symmetric(const MatrixPath& p, const TimeGrid& grid, const char* name) {
  const double asym = p.max_asymmetry(grid);
  if (asym > kSymmetrizeTol) {
    throw NonSymmetricWeight(std::string(name) + " is not symmetric (asymmetry " +
                             std::to_string(asym) + ")");
  }
  return p.as_symmetric();
}

}  // namespace

void ProblemSpec::fill_defaults() {
  auto fill = [](MatrixPath& p, Eigen::Index r, Eigen::Index c) {
    if (p.rows() == 0 && p.cols() == 0) p = MatrixPath::zero(r, c);
  };
  fill(b, n, 1);
  fill(sigma, n, 1);
  fill(S, m, n);
  fill(q, n, 1);
  fill(rho, m, 1);
  if (g.size() == 0) g = Vector::Zero(n);
}

ProblemData::ProblemData(ProblemSpec spec) : spec_(std::move(spec)) {
  validate();
  build_table();
}

void ProblemData::validate() {
  auto& s = spec_;
  if (s.n <= 0 || s.m <= 0) throw DimensionError("dims: n and m must be positive");
  if (s.grid.t0() < 0.0) throw DimensionError("horizon: t0 must be >= 0");
  s.fill_defaults();
  const auto n = s.n, m = s.m;
  check_shape(s.A, n, n, "A");
  check_shape(s.B, n, m, "B");
  check_shape(s.C, n, n, "C");
  check_shape(s.D, n, m, "D");
  check_shape(s.b, n, 1, "b");
  check_shape(s.sigma, n, 1, "sigma");
  check_shape(s.Q, n, n, "Q");
  check_shape(s.S, m, n, "S");
  check_shape(s.R, m, m, "R");
  check_shape(s.q, n, 1, "q");
  check_shape(s.rho, m, 1, "rho");
  if (s.G.rows() != n || s.G.cols() != n) throw DimensionError("G: expected n x n");
  if (s.g.size() != n) throw DimensionError("g: expected length n");
  if ((s.G - s.G.transpose()).cwiseAbs().maxCoeff() > kSymmetrizeTol) {
    throw NonSymmetricWeight("G is not symmetric");
  }
  s.G = sym(s.G);
  s.Q = checked_symmetric(s.Q, s.grid, "Q");
  s.R = checked_symmetric(s.R, s.grid, "R");
}

void ProblemData::build_table() {
  const auto& grid = spec_.grid;
  const std::size_t count = 2 * grid.n_steps() + 1;
  auto table = std::make_shared<std::vector<Coefficients>>(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double t = j == count - 1 ? grid.T() : grid.t0() + 0.5 * grid.h() * static_cast<double>(j);
    auto& c = (*table)[j];
    c.A = spec_.A(t);
    c.B = spec_.B(t);
    c.C = spec_.C(t);
    c.D = spec_.D(t);
    c.Q = spec_.Q(t);
    c.S = spec_.S(t);
    c.R = spec_.R(t);
    c.b = spec_.b(t);
    c.sigma = spec_.sigma(t);
    c.q = spec_.q(t);
    c.rho = spec_.rho(t);
  }
  table_ = std::move(table);
}

const Coefficients& ProblemData::coefficients(double t, Coefficients& scratch) const {
  const auto& grid = spec_.grid;
  const double half = 0.5 * grid.h();
  const double pos = (t - grid.t0()) / half;
  const double j = std::round(pos);
  if (j >= 0.0 && j < static_cast<double>(table_->size()) && std::abs(pos - j) < 1e-9) {
    return (*table_)[static_cast<std::size_t>(j)];
  }
  scratch.A = spec_.A(t);
  scratch.B = spec_.B(t);
  scratch.C = spec_.C(t);
  scratch.D = spec_.D(t);
  scratch.Q = spec_.Q(t);
  scratch.S = spec_.S(t);
  scratch.R = spec_.R(t);
  scratch.b = spec_.b(t);
  scratch.sigma = spec_.sigma(t);
  scratch.q = spec_.q(t);
  scratch.rho = spec_.rho(t);
  return scratch;
}

bool ProblemData::homogeneous() const {
  const auto& s = spec_;
  const auto& grid = s.grid;
  return s.b.max_norm(grid) == 0.0 && s.sigma.max_norm(grid) == 0.0 &&
         (s.g.size() == 0 || s.g.cwiseAbs().maxCoeff() == 0.0) && s.q.max_norm(grid) == 0.0 &&
         s.rho.max_norm(grid) == 0.0;
}

bool ProblemData::control_free_diffusion() const { return spec_.D.max_norm(spec_.grid) == 0.0; }

ProblemData ProblemData::homogeneous_part() const {
  ProblemSpec s = spec_;
  s.b = MatrixPath::zero(s.n, 1);
  s.sigma = MatrixPath::zero(s.n, 1);
  s.q = MatrixPath::zero(s.n, 1);
  s.rho = MatrixPath::zero(s.m, 1);
  s.g = Vector::Zero(s.n);
  return ProblemData(std::move(s));
}

ProblemData ProblemData::with_control_penalty(double eps) const {
  ProblemSpec s = spec_;
  const auto m = s.m;
  if (s.R.kind() == MatrixPath::Kind::constant) {
    s.R = MatrixPath::constant(s.R(0.0) + eps * Matrix::Identity(m, m), true);
  } else {
    MatrixPath base = spec_.R;
    s.R = MatrixPath::function(
        m, m, [base, eps, m](double t) -> Matrix { return base(t) + eps * Matrix::Identity(m, m); },
        true);
  }
  return ProblemData(std::move(s));
}

ProblemData ProblemData::with_grid(const TimeGrid& grid) const {
  ProblemSpec s = spec_;
  s.grid = grid;
  return ProblemData(std::move(s));
}

ProblemData ProblemData::restricted_to(double t) const { return with_grid(spec_.grid.tail_from(t)); }

StandardConditionsReport check_standard_conditions(const ProblemData& p) {
  StandardConditionsReport rep;
  rep.G_psd = psd_report(p.G()).is_psd;
  const auto& grid = p.grid();
  double delta = std::numeric_limits<double>::infinity();
  bool schur_ok = true;
  Coefficients scratch;
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    const auto& c = p.coefficients(grid.node(k), scratch);
    const double lam = min_eigenvalue(c.R);
    delta = std::min(delta, lam);
    if (lam > 0.0) {
      const Matrix schur = sym(c.Q - c.S.transpose() * c.R.ldlt().solve(c.S));
      if (min_eigenvalue(schur) < -kPsdTol) schur_ok = false;
    } else {
      schur_ok = false;
    }
  }
  rep.R_uniform_delta = std::max(0.0, delta);
  rep.schur_complement_psd = rep.R_uniform_delta > 0.0 && schur_ok;
  rep.holds = rep.G_psd && rep.R_uniform_delta > 0.0 && rep.schur_complement_psd;
  return rep;
}

// ---------------------------------------------------------------------------
// Problem file IO

namespace {

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ParseError(what + ": expected a nested array [[..],..]");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError(what + ": ragged matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ParseError(what + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

bool flagged_stochastic(const json& j) {
  return j.is_object() && j.contains("stochastic") && j["stochastic"].is_boolean() &&
         j["stochastic"].get<bool>();
}

MatrixPath path_from_json(const json& j, const std::string& what) {
  if (flagged_stochastic(j)) {
    throw UnsupportedStochasticData(what + ": random data is not supported");
  }
  if (j.is_array()) return MatrixPath::constant(matrix_from_json(j, what));
  if (!j.is_object()) throw ParseError(what + ": expected a path object");
  if (j.contains("const")) return MatrixPath::constant(matrix_from_json(j["const"], what));
  if (j.contains("poly")) {
    const auto& e = j["poly"];
    if (!e.is_array() || e.empty() || !e.front().is_array()) {
      throw ParseError(what + ".poly: expected [[[c0,c1,..],..],..]");
    }
    const auto rows = static_cast<Eigen::Index>(e.size());
    const auto cols = static_cast<Eigen::Index>(e.front().size());
    std::size_t degree = 0;
    for (const auto& row : e) {
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
        throw ParseError(what + ".poly: ragged entries");
      }
      for (const auto& entry : row) {
        if (!entry.is_array() || entry.empty()) {
          throw ParseError(what + ".poly: each entry must be a non-empty coefficient list");
        }
        degree = std::max(degree, entry.size());
      }
    }
    std::vector<Matrix> coeffs(degree, Matrix::Zero(rows, cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const auto& entry = e[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        for (std::size_t k = 0; k < entry.size(); ++k) {
          if (!entry[k].is_number()) throw ParseError(what + ".poly: non-numeric coefficient");
          coeffs[k](r, c) = entry[k].get<double>();
        }
      }
    }
    return MatrixPath::polynomial(std::move(coeffs));
  }
  if (j.contains("samples")) {
    const auto& s = j["samples"];
    if (!s.is_object() || !s.contains("times") || !s.contains("values")) {
      throw ParseError(what + ".samples: expected {times, values}");
    }
    std::vector<double> times;
    for (const auto& t : s["times"]) {
      if (!t.is_number()) throw ParseError(what + ".samples.times: non-numeric");
      times.push_back(t.get<double>());
    }
    std::vector<Matrix> values;
    for (const auto& v : s["values"]) values.push_back(matrix_from_json(v, what + ".samples"));
    try {
      return MatrixPath::sampled(std::move(times), std::move(values));
    } catch (const DimensionError& e) {
      throw ParseError(what + ": " + e.what());
    }
  }
  throw ParseError(what + ": path needs one of const, poly, samples");
}

json path_to_json(const MatrixPath& p) {
  return std::visit(
      [&](const auto& rep) -> json {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, MatrixPath::Constant>) {
          return json{{"const", matrix_to_json(rep.value)}};
        } else if constexpr (std::is_same_v<T, MatrixPath::Polynomial>) {
          json e = json::array();
          for (Eigen::Index r = 0; r < p.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < p.cols(); ++c) {
              json coeffs = json::array();
              for (const auto& m : rep.coefficients) coeffs.push_back(m(r, c));
              row.push_back(std::move(coeffs));
            }
            e.push_back(std::move(row));
          }
          return json{{"poly", std::move(e)}};
        } else if constexpr (std::is_same_v<T, MatrixPath::Sampled>) {
          json values = json::array();
          for (const auto& m : rep.values) values.push_back(matrix_to_json(m));
          return json{{"samples", {{"times", rep.times}, {"values", std::move(values)}}}};
        } else {
          throw Error("function-backed paths cannot be serialized; resample first");
        }
      },
      p.representation());
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  return j[key];
}

}  // namespace

ProblemData parse_problem(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("problem file must be a JSON object");
  if (flagged_stochastic(doc)) throw UnsupportedStochasticData("random data is not supported");

  ProblemSpec s;
  try {
    if (doc.contains("name") && doc["name"].is_string()) s.name = doc["name"].get<std::string>();
    const auto& hz = require(doc, "horizon", "problem");
    const double t0 = hz.value("t0", 0.0);
    const double T = require(hz, "T", "horizon").get<double>();
    const auto steps = hz.value("n_steps", 2000);
    if (steps < 2) throw DimensionError("horizon.n_steps must be >= 2");
    s.grid = TimeGrid(t0, T, static_cast<std::size_t>(steps));
    const auto& dims = require(doc, "dims", "problem");
    s.n = require(dims, "n", "dims").get<Eigen::Index>();
    s.m = require(dims, "m", "dims").get<Eigen::Index>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("horizon/dims: ") + e.what());
  }

  const auto& co = require(doc, "coefficients", "problem");
  const auto& we = require(doc, "weights", "problem");
  auto optional_path = [](const json& parent, const char* key, const std::string& where) {
    if (parent.contains(key)) return path_from_json(parent[key], where + "." + key);
    return MatrixPath();
  };
  s.A = path_from_json(require(co, "A", "coefficients"), "A");
  s.B = path_from_json(require(co, "B", "coefficients"), "B");
  s.C = path_from_json(require(co, "C", "coefficients"), "C");
  s.D = path_from_json(require(co, "D", "coefficients"), "D");
  s.b = optional_path(co, "b", "coefficients");
  s.sigma = optional_path(co, "sigma", "coefficients");

  {
    const auto& gj = require(we, "G", "weights");
    if (flagged_stochastic(gj)) throw UnsupportedStochasticData("G: random data is not supported");
    const MatrixPath G = path_from_json(gj, "G");
    if (G.kind() != MatrixPath::Kind::constant) throw ParseError("G must be a constant matrix");
    s.G = G(0.0);
  }
  s.Q = path_from_json(require(we, "Q", "weights"), "Q");
  s.S = optional_path(we, "S", "weights");
  s.R = path_from_json(require(we, "R", "weights"), "R");
  if (we.contains("g")) {
    const auto& gj = we["g"];
    if (flagged_stochastic(gj)) throw UnsupportedStochasticData("g: random data is not supported");
    const MatrixPath g = path_from_json(gj, "g");
    if (g.kind() != MatrixPath::Kind::constant || g.cols() != 1) {
      throw ParseError("g must be a constant column vector");
    }
    s.g = g(0.0).col(0);
  }
  s.q = optional_path(we, "q", "weights");
  s.rho = optional_path(we, "rho", "weights");
  return ProblemData(std::move(s));
}

MatrixPath parse_path(const std::string& json_text, const std::string& what) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": malformed JSON: " + e.what());
  }
  return path_from_json(doc, what);
}

ProblemData load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open problem file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

std::string serialize_problem(const ProblemData& p) {
  const auto& s = p.spec();
  json doc;
  if (!s.name.empty()) doc["name"] = s.name;
  doc["horizon"] = {{"t0", s.grid.t0()}, {"T", s.grid.T()}, {"n_steps", s.grid.n_steps()}};
  doc["dims"] = {{"n", s.n}, {"m", s.m}};
  doc["coefficients"] = {{"A", path_to_json(s.A)},         {"B", path_to_json(s.B)},
                         {"C", path_to_json(s.C)},         {"D", path_to_json(s.D)},
                         {"b", path_to_json(s.b)},         {"sigma", path_to_json(s.sigma)}};
  doc["weights"] = {{"G", json{{"const", matrix_to_json(s.G)}}},
                    {"Q", path_to_json(s.Q)},
                    {"S", path_to_json(s.S)},
                    {"R", path_to_json(s.R)},
                    {"g", json{{"const", matrix_to_json(s.g)}}},
                    {"q", path_to_json(s.q)},
                    {"rho", path_to_json(s.rho)}};
  return doc.dump(2);
}

}  // namespace slq
