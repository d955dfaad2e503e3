#include "slq/monte_carlo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "slq/errors.hpp"

namespace slq {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::mt19937_64 path_generator(std::uint64_t seed, std::size_t path) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(path))));
}

constexpr std::uint64_t kProbeStream = 0x70726F6265ULL;

// Coefficients and control data on the simulation nodes, flattened column-major.
struct Tables {
  Eigen::Index n = 0, m = 0;
  std::size_t N = 0;
  double h = 0.0;
  std::vector<Matrix> A, B, C, D, Q, S, R, Th;
  std::vector<Vector> b, sigma, q, rho, v;
  Matrix G;
  Vector g;
};

Tables build_tables(const ProblemData& p, const TimeGrid& grid) {
  Tables tb;
  tb.n = p.n();
  tb.m = p.m();
  tb.N = grid.n_steps();
  tb.h = grid.h();
  tb.G = p.G();
  tb.g = p.g();
  Coefficients scratch;
  for (std::size_t k = 0; k <= tb.N; ++k) {
    const auto& c = p.coefficients(grid.node(k), scratch);
    tb.A.push_back(c.A);
    tb.B.push_back(c.B);
    tb.C.push_back(c.C);
    tb.D.push_back(c.D);
    tb.Q.push_back(c.Q);
    tb.S.push_back(c.S);
    tb.R.push_back(c.R);
    tb.b.push_back(c.b);
    tb.sigma.push_back(c.sigma);
    tb.q.push_back(c.q);
    tb.rho.push_back(c.rho);
  }
  return tb;
}

// Quadratic form on raw storage; Eigen's dynamic-size expressions cost more
// than the arithmetic at these sizes.
inline double quad(const Matrix& M, const double* x, const double* y) {
  const auto r = M.rows(), c = M.cols();
  const double* d = M.data();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < c; ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) col += x[i] * d[i + j * r];
    acc += col * y[j];
  }
  return acc;
}

// Per-node closed-loop record under u = v + Theta X, flattened column-major:
// [A + B Theta | C + D Theta | Qbar | b + B v | sigma + D v | qbar | rbar] with
// running cost X' Qbar X + 2 qbar' X + rbar.
struct LoopTable {
  std::size_t n = 0, N = 0, stride = 0;
  double h = 0.0;
  std::vector<double> data;
  Matrix G;
  Vector g;
};

LoopTable loop_table(const Tables& tb) {
  const auto n = tb.n;
  const auto nn = static_cast<std::size_t>(n * n), un = static_cast<std::size_t>(n);
  LoopTable lt;
  lt.n = un;
  lt.N = tb.N;
  lt.h = tb.h;
  lt.G = tb.G;
  lt.g = tb.g;
  lt.stride = 3 * nn + 3 * un + 1;
  lt.data.resize(lt.stride * (tb.N + 1));
  const Matrix zero = Matrix::Zero(tb.m, n);
  for (std::size_t k = 0; k <= tb.N; ++k) {
    const Matrix& Th = tb.Th.empty() ? zero : tb.Th[k];
    const Vector& v = tb.v[k];
    const Matrix Rs = 0.5 * (tb.R[k] + tb.R[k].transpose());
    const Matrix SR = tb.S[k].transpose() * Th;
    const Matrix Ab = tb.A[k] + tb.B[k] * Th;
    const Matrix Cb = tb.C[k] + tb.D[k] * Th;
    const Matrix Qb = tb.Q[k] + SR + SR.transpose() + Th.transpose() * Rs * Th;
    const Vector bb = tb.b[k] + tb.B[k] * v;
    const Vector sb = tb.sigma[k] + tb.D[k] * v;
    const Vector qb = tb.q[k] + tb.S[k].transpose() * v + Th.transpose() * (Rs * v + tb.rho[k]);
    const double rb = v.dot(Rs * v) + 2.0 * tb.rho[k].dot(v);
    double* d = lt.data.data() + k * lt.stride;
    std::copy(Ab.data(), Ab.data() + nn, d);
    std::copy(Cb.data(), Cb.data() + nn, d + nn);
    std::copy(Qb.data(), Qb.data() + nn, d + 2 * nn);
    std::copy(bb.data(), bb.data() + un, d + 3 * nn);
    std::copy(sb.data(), sb.data() + un, d + 3 * nn + un);
    std::copy(qb.data(), qb.data() + un, d + 3 * nn + 2 * un);
    d[3 * nn + 3 * un] = rb;
  }
  return lt;
}

// Nfix > 0 fixes the state dimension at compile time.
template <std::size_t Nfix>
double path_cost(const LoopTable& lt, const Vector& x0, std::uint64_t seed, std::size_t path) {
  const std::size_t n = Nfix > 0 ? Nfix : lt.n, nn = n * n;
  auto gen = path_generator(seed, path);
  std::normal_distribution<double> normal;
  const double sq = std::sqrt(lt.h), h = lt.h;
  constexpr std::size_t cap = Nfix > 0 ? Nfix : 1;
  std::array<double, cap> Xs{}, Ns{};
  std::vector<double> Xd, Nd;
  double *X = Xs.data(), *next = Ns.data();
  if constexpr (Nfix == 0) {
    Xd.resize(n);
    Nd.resize(n);
    X = Xd.data();
    next = Nd.data();
  }
  for (std::size_t i = 0; i < n; ++i) X[i] = x0[static_cast<Eigen::Index>(i)];
  double running = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double* d = lt.data.data() + k * lt.stride;
    const double *A = d, *C = d + nn, *Q = d + 2 * nn;
    const double *b = d + 3 * nn, *s = b + n, *q = s + n;
    double l = q[n];
    for (std::size_t j = 0; j < n; ++j) {
      double col = 2.0 * q[j];
      for (std::size_t i = 0; i < n; ++i) col += X[i] * Q[i + j * n];
      l += col * X[j];
    }
    running += (k == 0 || k == lt.N) ? 0.5 * l : l;
    if (k == lt.N) break;
    const double dW = sq * normal(gen);
    for (std::size_t i = 0; i < n; ++i) next[i] = X[i] + b[i] * h + s[i] * dW;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = X[j] * h, xw = X[j] * dW;
      for (std::size_t i = 0; i < n; ++i) next[i] += A[i + j * n] * xh + C[i + j * n] * xw;
    }
    std::swap(X, next);
  }
  double terminal = 0.0;
  for (Eigen::Index j = 0; j < lt.G.cols(); ++j) {
    double col = 2.0 * lt.g[j];
    for (Eigen::Index i = 0; i < lt.G.rows(); ++i) col += X[i] * lt.G(i, j);
    terminal += col * X[j];
  }
  return h * running + terminal;
}

using PathCost = double (*)(const LoopTable&, const Vector&, std::uint64_t, std::size_t);

PathCost path_kernel(std::size_t n) {
  switch (n) {
    case 1: return &path_cost<1>;
    case 2: return &path_cost<2>;
    case 3: return &path_cost<3>;
    case 4: return &path_cost<4>;
    default: return &path_cost<0>;
  }
}

CostEstimate summarize(const std::vector<double>& costs) {
  CostEstimate out;
  out.n_paths = costs.size();
  double sum = 0.0;
  for (double c : costs) sum += c;
  out.mean = sum / static_cast<double>(costs.size());
  double ss = 0.0;
  for (double c : costs) ss += (c - out.mean) * (c - out.mean);
  const double var = costs.size() > 1 ? ss / static_cast<double>(costs.size() - 1) : 0.0;
  out.std_error = std::sqrt(var / static_cast<double>(costs.size()));
  return out;
}

void check_config(const SimulationConfig& cfg) {
  if (cfg.n_paths < 100) throw PreconditionError("simulation needs at least 100 paths");
  if (cfg.refine < 1) throw PreconditionError("simulation refine factor must be >= 1");
}

}  // namespace

std::vector<double> path_increments(std::uint64_t seed, std::size_t path, std::size_t steps) {
  auto gen = path_generator(seed, path);
  std::normal_distribution<double> normal;
  std::vector<double> out(steps);
  for (auto& z : out) z = normal(gen);
  return out;
}

std::vector<double> simulate_path_costs(const ProblemData& p, const Control& control, double t,
                                        const Vector& x, const SimulationConfig& cfg) {
  check_config(cfg);
  if (x.size() != p.n()) throw DimensionError("simulate: x has the wrong size");
  if (!control.feedback == !control.open_loop) {
    throw DimensionError("simulate: exactly one of feedback or open-loop control is required");
  }
  const TimeGrid grid = p.grid().tail_from(t).refined(cfg.refine);
  Tables tb = build_tables(p, grid);
  for (std::size_t k = 0; k <= tb.N; ++k) {
    const double s = grid.node(k);
    if (control.feedback) {
      const auto& law = *control.feedback;
      if (law.m() != p.m() || law.n() != p.n() || law.v.rows() != p.m() || law.v.cols() != 1) {
        throw DimensionError("simulate: feedback law dimensions do not match the problem");
      }
      tb.Th.push_back(law.Theta(s));
      tb.v.push_back(law.v(s));
    } else {
      const auto& u = *control.open_loop;
      if (u.rows() != p.m() || u.cols() != 1) {
        throw DimensionError("simulate: open-loop control must be m x 1");
      }
      tb.v.push_back(u(s));
    }
  }

  const LoopTable lt = loop_table(tb);
  const PathCost kernel = path_kernel(lt.n);
  std::vector<double> costs(cfg.n_paths);
  const auto count = static_cast<std::int64_t>(cfg.n_paths);
  if (cfg.execution == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
      costs[static_cast<std::size_t>(i)] = kernel(lt, x, cfg.seed, static_cast<std::size_t>(i));
    }
  } else {
    for (std::int64_t i = 0; i < count; ++i) {
      costs[static_cast<std::size_t>(i)] = kernel(lt, x, cfg.seed, static_cast<std::size_t>(i));
    }
  }
  return costs;
}

CostEstimate simulate_cost(const ProblemData& p, const Control& control, double t,
                           const Vector& x, const SimulationConfig& cfg) {
  return summarize(simulate_path_costs(p, control, t, x, cfg));
}

namespace {

std::size_t piece_of(double s, double t0, double T, std::size_t pieces) {
  const double r = (s - t0) / (T - t0) * static_cast<double>(pieces) + 1e-9;
  const auto j = static_cast<std::size_t>(std::max(0.0, std::floor(r)));
  return std::min(j, pieces - 1);
}

// Per-path cost form of piecewise-constant controls from x = 0. On piece j
// the state is X(s) = Psi(s) xi_j + Y(s) c_j with xi_j the state at the start
// of the piece, Psi the (random) transition of the uncontrolled equation and
// Y the response to the unit levels. The running cost over the piece is the
// quadratic form [xi_j; c_j]' Gamma_j [xi_j; c_j], and xi_{j+1} = Psi_j xi_j + Y_j c_j
// at its end. All of it is the Euler-Maruyama recursion regrouped, so a probe
// cost equals the cost of simulating the probe control on the same increments.
struct PieceForms {
  std::size_t n = 0, m = 0, pieces = 0;
  std::vector<double> gamma;  // pieces x (n+m)^2, column-major blocks
  std::vector<double> psi;    // pieces x n^2
  std::vector<double> y;      // pieces x n*m

  PieceForms(std::size_t n_, std::size_t m_, std::size_t p_)
      : n(n_), m(m_), pieces(p_), gamma(p_ * (n_ + m_) * (n_ + m_)), psi(p_ * n_ * n_),
        y(p_ * n_ * m_) {}
};

void piece_forms(const Tables& tb, const std::vector<std::size_t>& piece, std::uint64_t seed,
                 std::size_t path, PieceForms& f, std::vector<double>& Z, std::vector<double>& QZ,
                 std::vector<double>& SZ, std::vector<double>& next) {
  const std::size_t n = f.n, m = f.m, w = n + m;
  auto gen = path_generator(seed, path);
  std::normal_distribution<double> normal;
  const double sq = std::sqrt(tb.h);
  std::fill(f.gamma.begin(), f.gamma.end(), 0.0);
  // Pieces without nodes keep Psi = I, Y = 0.
  std::fill(f.psi.begin(), f.psi.end(), 0.0);
  std::fill(f.y.begin(), f.y.end(), 0.0);
  for (std::size_t j = 0; j < f.pieces; ++j) {
    for (std::size_t r = 0; r < n; ++r) f.psi[j * n * n + r * n + r] = 1.0;
  }

  // Z = [Psi | Y], n x (n + m), column-major.
  std::size_t cur = f.pieces;
  auto store = [&](std::size_t j) {
    std::copy(Z.begin(), Z.begin() + n * n, f.psi.begin() + j * n * n);
    std::copy(Z.begin() + n * n, Z.end(), f.y.begin() + j * n * m);
  };
  for (std::size_t k = 0;; ++k) {
    const std::size_t j = piece[k];
    if (j != cur) {
      if (cur < f.pieces) store(cur);
      std::fill(Z.begin(), Z.end(), 0.0);
      for (std::size_t r = 0; r < n; ++r) Z[r * n + r] = 1.0;
      cur = j;
    }
    const double wk = (k == 0 || k == tb.N) ? 0.5 * tb.h : tb.h;
    const double* Q = tb.Q[k].data();
    const double* S = tb.S[k].data();
    const double* R = tb.R[k].data();
    double* G = f.gamma.data() + j * w * w;
    for (std::size_t c = 0; c < w; ++c) {
      const double* zc = Z.data() + c * n;
      for (std::size_t r = 0; r < n; ++r) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += Q[r + i * n] * zc[i];
        QZ[r + c * n] = v;
      }
      for (std::size_t a = 0; a < m; ++a) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += S[a + i * m] * zc[i];
        SZ[a + c * m] = v;
      }
    }
    for (std::size_t c = 0; c < w; ++c) {
      const double* qc = QZ.data() + c * n;
      for (std::size_t r = 0; r <= c; ++r) {
        const double* zr = Z.data() + r * n;
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += zr[i] * qc[i];
        G[r + c * w] += wk * v;
      }
    }
    // 2<S X, u> with u = the last m coordinates; R on the control block.
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t a = 0; a < m; ++a) {
        const std::size_t r = n + a;
        const double v = wk * SZ[a + c * m];
        if (r == c) G[r + c * w] += 2.0 * v;
        else if (r < c) G[r + c * w] += v;
        else G[c + r * w] += v;
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a; b < m; ++b) G[(n + a) + (n + b) * w] += wk * R[a + b * m];
    }
    if (k == tb.N) break;

    const double dW = sq * normal(gen);
    const double* A = tb.A[k].data();
    const double* C = tb.C[k].data();
    const double* B = tb.B[k].data();
    const double* D = tb.D[k].data();
    for (std::size_t c = 0; c < w; ++c) {
      const double* zc = Z.data() + c * n;
      for (std::size_t r = 0; r < n; ++r) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (A[r + i * n] * tb.h + C[r + i * n] * dW) * zc[i];
        next[r + c * n] = zc[r] + v;
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t r = 0; r < n; ++r) next[r + (n + a) * n] += B[r + a * n] * tb.h + D[r + a * n] * dW;
    }
    std::swap(Z, next);
  }
  store(cur);
  // Mirror the upper triangles.
  for (std::size_t j = 0; j < f.pieces; ++j) {
    double* G = f.gamma.data() + j * w * w;
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t r = c + 1; r < w; ++r) G[r + c * w] = G[c + r * w];
    }
  }
}

// Cost of the probe with levels `levels` (m x pieces, column-major) on one path.
double probe_cost(const PieceForms& f, const Matrix& Gt, const double* levels,
                  std::vector<double>& xi, std::vector<double>& v, std::vector<double>& nxt) {
  const std::size_t n = f.n, m = f.m, w = n + m;
  std::fill(xi.begin(), xi.end(), 0.0);
  double cost = 0.0;
  for (std::size_t j = 0; j < f.pieces; ++j) {
    const double* c = levels + j * m;
    std::copy(xi.begin(), xi.end(), v.begin());
    std::copy(c, c + m, v.begin() + n);
    const double* G = f.gamma.data() + j * w * w;
    for (std::size_t b = 0; b < w; ++b) {
      double col = 0.0;
      for (std::size_t a = 0; a < w; ++a) col += G[a + b * w] * v[a];
      cost += col * v[b];
    }
    const double* P = f.psi.data() + j * n * n;
    const double* Y = f.y.data() + j * n * m;
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += P[r + i * n] * xi[i];
      for (std::size_t a = 0; a < m; ++a) s += Y[r + a * n] * c[a];
      nxt[r] = s;
    }
    std::swap(xi, nxt);
  }
  return cost + quad(Gt, xi.data(), xi.data());
}

// Running mean / M2 accumulator combined in a fixed order.
struct Moments {
  double count = 0.0, mean = 0.0, m2 = 0.0;
  void add(double v) {
    count += 1.0;
    const double d = v - mean;
    mean += d / count;
    m2 += d * (v - mean);
  }
  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    const double total = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / total;
    m2 += o.m2 + d * d * count * o.count / total;
    count = total;
  }
};

}  // namespace

ProbeControl probe_control(const ProblemData& p, std::uint64_t seed, std::size_t k,
                           std::size_t pieces) {
  if (pieces < 1) throw PreconditionError("probe needs at least one piece");
  std::mt19937_64 gen(splitmix64(seed ^ kProbeStream) ^ splitmix64(k + 1));
  std::normal_distribution<double> normal;
  Matrix levels(p.m(), static_cast<Eigen::Index>(pieces));
  for (Eigen::Index j = 0; j < levels.cols(); ++j) {
    for (Eigen::Index a = 0; a < levels.rows(); ++a) levels(a, j) = normal(gen);
  }
  const double t0 = p.grid().t0(), T = p.grid().T();
  const double norm2 = levels.squaredNorm() * (T - t0) / static_cast<double>(pieces);
  levels /= std::sqrt(norm2);
  ProbeControl out;
  out.levels = levels;
  out.path = MatrixPath::function(p.m(), 1, [levels, t0, T, pieces](double s) -> Matrix {
    return levels.col(static_cast<Eigen::Index>(piece_of(s, t0, T, pieces)));
  });
  return out;
}

ConvexityProbeResult convexity_probe(const ProblemData& p, std::size_t n_controls,
                                     const SimulationConfig& cfg, std::size_t pieces) {
  if (n_controls < 1) throw PreconditionError("convexity probe needs n_controls >= 1");
  check_config(cfg);
  const ProblemData h = p.homogeneous() ? p : p.homogeneous_part();
  const TimeGrid grid = h.grid().refined(cfg.refine);
  const Tables tb = build_tables(h, grid);
  std::vector<std::size_t> piece(tb.N + 1);
  for (std::size_t k = 0; k <= tb.N; ++k) piece[k] = piece_of(grid.node(k), grid.t0(), grid.T(), pieces);

  const std::size_t n = static_cast<std::size_t>(h.n());
  const std::size_t m = static_cast<std::size_t>(h.m());
  std::vector<ProbeControl> probes;
  for (std::size_t k = 0; k < n_controls; ++k) probes.push_back(probe_control(h, cfg.seed, k, pieces));

  constexpr std::size_t kChunk = 1000;
  const std::size_t n_chunks = (cfg.n_paths + kChunk - 1) / kChunk;
  std::vector<Moments> acc(n_chunks * n_controls);
  auto run_chunk = [&](std::size_t c) {
    PieceForms f(n, m, pieces);
    std::vector<double> Z(n * (n + m)), QZ(n * (n + m)), SZ(m * (n + m)), next(n * (n + m));
    std::vector<double> xi(n), v(n + m), nxt(n);
    const std::size_t begin = c * kChunk, end = std::min(cfg.n_paths, begin + kChunk);
    for (std::size_t path = begin; path < end; ++path) {
      piece_forms(tb, piece, cfg.seed, path, f, Z, QZ, SZ, next);
      for (std::size_t k = 0; k < n_controls; ++k) {
        acc[c * n_controls + k].add(probe_cost(f, tb.G, probes[k].levels.data(), xi, v, nxt));
      }
    }
  };
  const auto chunks = static_cast<std::int64_t>(n_chunks);
  if (cfg.execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < chunks; ++c) run_chunk(static_cast<std::size_t>(c));
  } else {
    for (std::int64_t c = 0; c < chunks; ++c) run_chunk(static_cast<std::size_t>(c));
  }

  ConvexityProbeResult out;
  out.n_controls = n_controls;
  std::optional<std::size_t> worst_violation;
  double worst_score = 0.0;
  for (std::size_t k = 0; k < n_controls; ++k) {
    Moments total;
    for (std::size_t c = 0; c < n_chunks; ++c) total.merge(acc[c * n_controls + k]);
    CostEstimate e;
    e.n_paths = cfg.n_paths;
    e.mean = total.mean;
    const double var = total.count > 1.0 ? total.m2 / (total.count - 1.0) : 0.0;
    e.std_error = std::sqrt(std::max(0.0, var) / total.count);
    if (k == 0 || e.mean < out.min_cost) {
      out.min_cost = e.mean;
      out.min_cost_std_error = e.std_error;
    }
    if (e.mean < -5.0 * e.std_error - 1e-12) {
      const double score = e.mean + 5.0 * e.std_error;
      if (!worst_violation || score < worst_score) {
        worst_violation = k;
        worst_score = score;
      }
    }
    out.costs.push_back(e);
  }
  out.min_ratio = out.min_cost;
  if (worst_violation) out.violating_control = probes[*worst_violation];
  return out;
}

}  // namespace slq
