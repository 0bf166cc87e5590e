#include "layervi/vi_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/SparseCholesky>

#include "layervi/error.hpp"

namespace layervi {

const char* to_string(InnerMethod m) {
  return m == InnerMethod::ProjectedSor ? "projected-sor" : "semismooth";
}

InnerMethod inner_method_from_string(const std::string& s) {
  if (s == "projected-sor") return InnerMethod::ProjectedSor;
  if (s == "semismooth") return InnerMethod::Semismooth;
  throw InputError("unknown inner method '" + s + "'");
}

void SolverConfig::validate() const {
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw InputError("solver tolerances must be > 0");
  if (outer_max_iters < 1 || inner_max_iters < 1)
    throw InputError("solver iteration limits must be >= 1");
  if (!(regularization_eps >= 0.0)) throw InputError("regularization_eps must be >= 0");
}

namespace {

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// min 1/2 x'Ax - b'x + sum w_k |x_i - x_j|  s.t.  x[lower] <= x[upper], over free dofs.
struct QP {
  RowMatrix A;
  Eigen::VectorXd b;
  std::vector<AbsTerm> abs;
  std::vector<std::pair<int, int>> cons;  // (upper, lower)
};

double arg(const AbsTerm& t, const Eigen::VectorXd& x) {
  return t.j < 0 ? x[t.i] : x[t.i] - x[t.j];
}

double abs_sum(const QP& qp, const Eigen::VectorXd& x) {
  double s = 0.0;
  for (const auto& t : qp.abs) s += t.weight * std::abs(arg(t, x));
  return s;
}

double objective(const QP& qp, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(qp.A * x) - qp.b.dot(x) + abs_sum(qp, x);
}

QP reduce(const VIProblem& problem, const SparseMatrix& k, const Eigen::VectorXd& b_full,
          const FrozenFriction& frozen) {
  const DofMap& dm = problem.dofs();
  const int n = dm.free_count();
  QP qp;
  Triplets trips;
  trips.reserve(k.nonZeros());
  for (int c = 0; c < k.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(k, c); it; ++it) {
      const int r = dm.free_index[it.row()], cc = dm.free_index[it.col()];
      if (r >= 0 && cc >= 0) trips.emplace_back(r, cc, it.value());
    }
  qp.A.resize(n, n);
  qp.A.setFromTriplets(trips.begin(), trips.end());
  qp.b.resize(n);
  for (int i = 0; i < n; ++i) qp.b[i] = b_full[dm.free_dofs[i]];
  for (const auto& t : frozen.abs_terms) {
    const int i = dm.free_index[t.i];
    const int j = t.j < 0 ? -1 : dm.free_index[t.j];
    if (i < 0 || (t.j >= 0 && j < 0)) continue;
    qp.abs.push_back({i, j, t.weight});
  }
  for (const auto& row : problem.constraint_rows()) {
    const int u = dm.free_index[row.upper_dof], l = dm.free_index[row.lower_dof];
    if (u >= 0 && l >= 0) qp.cons.emplace_back(u, l);
  }
  return qp;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

/// Face of the current point: dofs tied by tight constraints or kinked pair
/// terms share a variable; kinked single terms pin their dof to zero.
struct Face {
  std::vector<int> var;  // free dof -> reduced variable, -1 if pinned
  int count = 0;
};

Face build_face(int n, const std::vector<AbsTerm>& abs, const std::vector<bool>& kink,
                const std::vector<std::pair<int, int>>& cons, const std::vector<bool>& tight) {
  UnionFind uf(n);
  for (std::size_t k = 0; k < abs.size(); ++k)
    if (kink[k] && abs[k].j >= 0) uf.unite(abs[k].i, abs[k].j);
  for (std::size_t k = 0; k < cons.size(); ++k)
    if (tight[k]) uf.unite(cons[k].first, cons[k].second);
  std::vector<bool> pinned(n, false);
  for (std::size_t k = 0; k < abs.size(); ++k)
    if (kink[k] && abs[k].j < 0) pinned[uf.find(abs[k].i)] = true;
  Face f;
  f.var.assign(n, -1);
  std::vector<int> root_var(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    if (pinned[r]) continue;
    if (root_var[r] < 0) root_var[r] = f.count++;
    f.var[i] = root_var[r];
  }
  return f;
}

SparseMatrix face_matrix(const RowMatrix& a, const Face& f, const Triplets& extra = {}) {
  Triplets trips;
  trips.reserve(a.nonZeros() + extra.size());
  for (int r = 0; r < a.outerSize(); ++r) {
    const int vr = f.var[r];
    if (vr < 0) continue;
    for (RowMatrix::InnerIterator it(a, r); it; ++it) {
      const int vc = f.var[it.col()];
      if (vc >= 0) trips.emplace_back(vr, vc, it.value());
    }
  }
  for (const auto& t : extra) {
    const int vr = f.var[t.row()], vc = f.var[t.col()];
    if (vr >= 0 && vc >= 0) trips.emplace_back(vr, vc, t.value());
  }
  SparseMatrix h(f.count, f.count);
  h.setFromTriplets(trips.begin(), trips.end());
  return h;
}

Eigen::VectorXd face_restrict(const Eigen::VectorXd& g, const Face& f) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(f.count);
  for (int i = 0; i < static_cast<int>(f.var.size()); ++i)
    if (f.var[i] >= 0) r[f.var[i]] += g[i];
  return r;
}

Eigen::VectorXd face_extend(const Eigen::VectorXd& y, const Face& f) {
  Eigen::VectorXd x(f.var.size());
  for (int i = 0; i < static_cast<int>(f.var.size()); ++i) x[i] = f.var[i] >= 0 ? y[f.var[i]] : 0.0;
  return x;
}

void tie(Eigen::VectorXd& x, int a, int b) { x[a] = x[b] = 0.5 * (x[a] + x[b]); }

// ---------------------------------------------------------------------------
// Block Gauss-Seidel with exact local solves

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;

struct Block {
  std::vector<int> dofs;
  SmallMat q;
  std::vector<std::array<int, 2>> abs;  // local indices, second -1 for single
  std::vector<double> abs_w;
  std::vector<std::array<int, 2>> cons;  // local (upper, lower)
};

std::vector<Block> build_blocks(const QP& qp) {
  const int n = static_cast<int>(qp.b.size());
  // Free dofs come in (x, y) pairs of the same node; node id = dof / 2 is enough for grouping.
  UnionFind uf(n);
  for (int i = 0; i + 1 < n; i += 2) uf.unite(i, i + 1);
  for (const auto& t : qp.abs)
    if (t.j >= 0) uf.unite(t.i, t.j);
  for (const auto& [u, l] : qp.cons) uf.unite(u, l);
  std::vector<int> block_of(n, -1);
  std::vector<Block> blocks;
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    if (block_of[r] < 0) {
      block_of[r] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    block_of[i] = block_of[r];
    blocks[block_of[i]].dofs.push_back(i);
  }
  auto local = [&](const Block& b, int dof) {
    return static_cast<int>(std::find(b.dofs.begin(), b.dofs.end(), dof) - b.dofs.begin());
  };
  for (const auto& t : qp.abs) {
    Block& b = blocks[block_of[t.i]];
    b.abs.push_back({local(b, t.i), t.j < 0 ? -1 : local(b, t.j)});
    b.abs_w.push_back(t.weight);
  }
  for (const auto& [u, l] : qp.cons) {
    Block& b = blocks[block_of[u]];
    b.cons.push_back({local(b, u), local(b, l)});
  }
  for (auto& b : blocks) {
    const int m = static_cast<int>(b.dofs.size());
    if (m > 4 || b.abs.size() > 2 || b.cons.size() > 2)
      throw SolverError("unexpected coupling block in the contact structure");
    b.q.resize(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) b.q(r, c) = qp.A.coeff(b.dofs[r], b.dofs[c]);
  }
  return blocks;
}

double local_objective(const Block& b, const SmallVec& r, const SmallVec& z) {
  double v = 0.5 * z.dot(b.q * z) - r.dot(z);
  for (std::size_t k = 0; k < b.abs.size(); ++k) {
    const auto [i, j] = b.abs[k];
    v += b.abs_w[k] * std::abs(j < 0 ? z[i] : z[i] - z[j]);
  }
  return v;
}

void solve_block(const QP& qp, const Block& b, Eigen::VectorXd& x) {
  const int m = static_cast<int>(b.dofs.size());
  SmallVec r(m), z0(m);
  for (int k = 0; k < m; ++k) {
    const int d = b.dofs[k];
    z0[k] = x[d];
    r[k] = qp.b[d] - qp.A.row(d).dot(x);
  }
  r += b.q * z0;

  const int na = static_cast<int>(b.abs.size()), nc = static_cast<int>(b.cons.size());
  int states = 1;
  for (int k = 0; k < na; ++k) states *= 3;
  states <<= nc;

  SmallVec best = z0;
  double best_obj = local_objective(b, r, z0);
  for (int s = 0; s < states; ++s) {
    int code = s;
    std::array<int, 2> abs_state{};  // 0: +, 1: -, 2: kink
    std::array<bool, 2> active{};
    for (int k = 0; k < na; ++k) {
      abs_state[k] = code % 3;
      code /= 3;
    }
    for (int k = 0; k < nc; ++k) {
      active[k] = code & 1;
      code >>= 1;
    }
    SmallVec rhs_lin = r;
    SmallMat e(0, m);
    auto add_row = [&](int i, int j) {
      e.conservativeResize(e.rows() + 1, m);
      e.row(e.rows() - 1).setZero();
      e(e.rows() - 1, i) = 1.0;
      if (j >= 0) e(e.rows() - 1, j) = -1.0;
    };
    for (int k = 0; k < na; ++k) {
      const auto [i, j] = b.abs[k];
      if (abs_state[k] == 2) {
        add_row(i, j);
        continue;
      }
      const double sgn = abs_state[k] == 0 ? 1.0 : -1.0;
      rhs_lin[i] -= sgn * b.abs_w[k];
      if (j >= 0) rhs_lin[j] += sgn * b.abs_w[k];
    }
    for (int k = 0; k < nc; ++k)
      if (active[k]) add_row(b.cons[k][1], b.cons[k][0]);
    const int ne = static_cast<int>(e.rows());
    e *= b.q.diagonal().cwiseAbs().maxCoeff();  // same magnitude as q keeps the LU rank test scale-free
    SmallMat kkt = SmallMat::Zero(m + ne, m + ne);
    kkt.topLeftCorner(m, m) = b.q;
    kkt.block(m, 0, ne, m) = e;
    kkt.block(0, m, m, ne) = e.transpose();
    SmallVec rhs = SmallVec::Zero(m + ne);
    rhs.head(m) = rhs_lin;
    const Eigen::FullPivLU<SmallMat> lu(kkt);
    if (!lu.isInvertible()) continue;
    SmallVec z = lu.solve(rhs).head(m);
    for (int k = 0; k < na; ++k) {
      if (abs_state[k] != 2) continue;
      const auto [i, j] = b.abs[k];
      if (j < 0) {
        z[i] = 0.0;
      } else {
        z[i] = z[j] = 0.5 * (z[i] + z[j]);
      }
    }
    for (int k = 0; k < nc; ++k) {
      const auto [u, l] = b.cons[k];
      if (active[k] || z[l] > z[u]) z[u] = z[l] = 0.5 * (z[u] + z[l]);
    }
    const double obj = local_objective(b, r, z);
    if (obj < best_obj) {
      best_obj = obj;
      best = z;
    }
  }
  for (int k = 0; k < m; ++k) x[b.dofs[k]] = best[k];
}

/// Right derivative of t -> |u + t v|.
double abs_right_derivative(double u, double v) {
  if (u > 0.0) return v;
  if (u < 0.0) return -v;
  return std::abs(v);
}

/// Newton step on the face of x followed by an exact line search. Keeps x feasible.
void newton_step(const QP& qp, Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  std::vector<bool> kink(qp.abs.size()), tight(qp.cons.size());
  for (std::size_t k = 0; k < qp.abs.size(); ++k) kink[k] = arg(qp.abs[k], x) == 0.0;
  for (std::size_t k = 0; k < qp.cons.size(); ++k)
    tight[k] = x[qp.cons[k].second] == x[qp.cons[k].first];
  const Face face = build_face(n, qp.abs, kink, qp.cons, tight);
  if (face.count == 0) return;

  Eigen::VectorXd g = qp.b;
  for (std::size_t k = 0; k < qp.abs.size(); ++k) {
    if (kink[k]) continue;
    const auto& t = qp.abs[k];
    const double s = arg(t, x) > 0.0 ? t.weight : -t.weight;
    g[t.i] -= s;
    if (t.j >= 0) g[t.j] += s;
  }
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(face_matrix(qp.A, face));
  if (ldlt.info() != Eigen::Success) return;
  const Eigen::VectorXd y = ldlt.solve(face_restrict(g, face));
  if (ldlt.info() != Eigen::Success) return;
  // Projecting the full step keeps constraints that the face solve wants closed
  // from truncating the step to almost nothing.
  Eigen::VectorXd target = face_extend(y, face);
  for (const auto& [u, l] : qp.cons)
    if (target[l] > target[u]) tie(target, u, l);
  const Eigen::VectorXd d = target - x;
  if (d.squaredNorm() == 0.0) return;

  double t_max = std::numeric_limits<double>::infinity();
  int blocking = -1;
  for (std::size_t k = 0; k < qp.cons.size(); ++k) {
    const auto [u, l] = qp.cons[k];
    const double hd = d[l] - d[u];
    if (tight[k] || hd <= 0.0) continue;
    const double t = (x[u] - x[l]) / hd;
    if (t < t_max) {
      t_max = t;
      blocking = static_cast<int>(k);
    }
  }

  const Eigen::VectorXd ad = qp.A * d;
  const double slope0 = d.dot(qp.A * x) - qp.b.dot(d);
  const double curv = d.dot(ad);
  std::vector<double> cx(qp.abs.size()), cd(qp.abs.size());
  for (std::size_t k = 0; k < qp.abs.size(); ++k) {
    cx[k] = arg(qp.abs[k], x);
    cd[k] = arg(qp.abs[k], d);
  }
  auto dphi = [&](double t) {
    double v = slope0 + t * curv;
    for (std::size_t k = 0; k < qp.abs.size(); ++k)
      v += qp.abs[k].weight * abs_right_derivative(cx[k] + t * cd[k], cd[k]);
    return v;
  };
  if (dphi(0.0) >= 0.0) return;
  double t_star;
  if (std::isfinite(t_max) && dphi(t_max) < 0.0) {
    t_star = t_max;
  } else {
    double lo = 0.0, hi = std::isfinite(t_max) ? t_max : 1.0;
    for (int k = 0; k < 200 && dphi(hi) < 0.0; ++k) {
      lo = hi;
      hi *= 2.0;
    }
    for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
      const double mid = 0.5 * (lo + hi);
      (dphi(mid) < 0.0 ? lo : hi) = mid;
    }
    t_star = hi;
    blocking = -1;
  }

  Eigen::VectorXd xn = x + t_star * d;
  if (blocking >= 0) tie(xn, qp.cons[blocking].first, qp.cons[blocking].second);
  for (std::size_t k = 0; k < qp.cons.size(); ++k) {
    const auto [u, l] = qp.cons[k];
    if (tight[k] || xn[l] > xn[u]) tie(xn, u, l);
  }
  if (objective(qp, xn) <= objective(qp, x)) x = std::move(xn);
}

bool feasible(const QP& qp, const Eigen::VectorXd& x) {
  for (const auto& [u, l] : qp.cons)
    if (x[l] > x[u]) return false;
  return true;
}

int solve_qp_tnnmg(const QP& qp, Eigen::VectorXd& x, double tol, int max_iters,
                   std::vector<double>* energies) {
  const std::vector<Block> blocks = build_blocks(qp);
  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd prev = x;
    for (const auto& b : blocks) solve_block(qp, b, x);
    if (energies) energies->push_back(objective(qp, x));
    newton_step(qp, x);
    if (energies) energies->push_back(objective(qp, x));
    const Eigen::VectorXd dx = x - prev;
    const double corr = std::sqrt(std::max(0.0, dx.dot(qp.A * dx)));
    const double size = std::sqrt(std::max(0.0, x.dot(qp.A * x)));
    if (corr == 0.0 || corr <= tol * size) return it;
  }
  throw SolverError("projected-sor did not converge within " + std::to_string(max_iters) +
                    " iterations");
}

// ---------------------------------------------------------------------------
// Regularized semismooth Newton with a primal active set

double smooth_abs(double t, double eps) { return std::sqrt(t * t + eps * eps) - eps; }

int solve_qp_semismooth(const QP& qp, Eigen::VectorXd& x, double tol, int max_iters,
                        double eps_target) {
  if (!(eps_target > 0.0)) throw InputError("semismooth method needs regularization_eps > 0");
  const int n = static_cast<int>(x.size());
  auto f = [&](const Eigen::VectorXd& v, double eps) {
    double s = 0.5 * v.dot(qp.A * v) - qp.b.dot(v);
    for (const auto& t : qp.abs) s += t.weight * smooth_abs(arg(t, v), eps);
    return s;
  };

  double scale = x.lpNorm<Eigen::Infinity>();
  {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt{SparseMatrix(qp.A)};
    if (ldlt.info() == Eigen::Success)
      scale = std::max(scale, Eigen::VectorXd(ldlt.solve(qp.b)).lpNorm<Eigen::Infinity>());
  }
  double eps = std::max(eps_target, 1e-2 * scale);

  std::vector<bool> active(qp.cons.size());
  for (std::size_t k = 0; k < qp.cons.size(); ++k)
    active[k] = x[qp.cons[k].second] == x[qp.cons[k].first];
  const std::vector<bool> no_kink(qp.abs.size(), false);
  int iters = 0;
  while (true) {
    const bool last = eps <= eps_target;
    while (true) {
      if (++iters > max_iters)
        throw SolverError("semismooth did not converge within " + std::to_string(max_iters) +
                          " iterations");
      Eigen::VectorXd g = qp.A * x - qp.b;
      Triplets hess;
      for (const auto& t : qp.abs) {
        const double a = arg(t, x);
        const double rt = std::sqrt(a * a + eps * eps);
        const double d1 = t.weight * a / rt;
        const double d2 = t.weight * eps * eps / (rt * rt * rt);
        g[t.i] += d1;
        hess.emplace_back(t.i, t.i, d2);
        if (t.j >= 0) {
          g[t.j] -= d1;
          hess.emplace_back(t.j, t.j, d2);
          hess.emplace_back(t.i, t.j, -d2);
          hess.emplace_back(t.j, t.i, -d2);
        }
      }
      const Face face = build_face(n, qp.abs, no_kink, qp.cons, active);
      const Eigen::VectorXd gr = face_restrict(g, face);
      const double gscale = std::max({qp.b.norm(), (qp.A * x).norm(), 1e-300});
      const double gtol = (last ? tol : 1e-6) * gscale;

      if (gr.norm() > gtol) {
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(face_matrix(qp.A, face, hess));
        if (ldlt.info() != Eigen::Success) throw SolverError("semismooth: singular Newton system");
        const Eigen::VectorXd d = face_extend(ldlt.solve(-gr), face);
        double t_max = std::numeric_limits<double>::infinity();
        int blocking = -1;
        for (std::size_t k = 0; k < qp.cons.size(); ++k) {
          const auto [u, l] = qp.cons[k];
          const double hd = d[l] - d[u];
          if (active[k] || hd <= 0.0) continue;
          const double t = (x[u] - x[l]) / hd;
          if (t < t_max) {
            t_max = t;
            blocking = static_cast<int>(k);
          }
        }
        const bool blocked = t_max <= 1.0;
        const double f0 = f(x, eps);
        const double slope = g.dot(d);
        double t = std::min(1.0, t_max);
        while (t > 1e-14 && f(x + t * d, eps) > f0 + 1e-4 * t * slope) t *= 0.5;
        Eigen::VectorXd xn = x + t * d;
        if (blocked && t == t_max) tie(xn, qp.cons[blocking].first, qp.cons[blocking].second);
        for (std::size_t k = 0; k < qp.cons.size(); ++k) {
          const auto [u, l] = qp.cons[k];
          if (active[k] || xn[l] > xn[u]) tie(xn, u, l);
        }
        if (t > 1e-14 && f(xn, eps) < f0) {
          x = std::move(xn);
          if (blocked && t == t_max) active[blocking] = true;
          continue;
        }
        // No representable decrease on this face: treat the point as face-stationary.
      }
      int worst = -1;
      double worst_l = -gtol;
      for (std::size_t k = 0; k < qp.cons.size(); ++k) {
        if (!active[k]) continue;
        const double lambda = 0.5 * (g[qp.cons[k].first] - g[qp.cons[k].second]);
        if (lambda < worst_l) {
          worst_l = lambda;
          worst = static_cast<int>(k);
        }
      }
      if (worst < 0) break;
      active[worst] = false;
    }
    if (last) break;
    eps = std::max(eps_target, 0.01 * eps);
  }
  return iters;
}

int solve_qp(const QP& qp, Eigen::VectorXd& x, const SolverConfig& cfg, double tol,
             std::vector<double>* energies) {
  if (!feasible(qp, x)) x.setZero();
  if (cfg.inner_method == InnerMethod::Semismooth)
    return solve_qp_semismooth(qp, x, tol, cfg.inner_max_iters, cfg.regularization_eps);
  return solve_qp_tnnmg(qp, x, tol, cfg.inner_max_iters, energies);
}

Eigen::VectorXd to_free(const DofMap& dm, const Eigen::VectorXd& full) {
  Eigen::VectorXd x(dm.free_count());
  for (int i = 0; i < dm.free_count(); ++i) x[i] = full[dm.free_dofs[i]];
  return x;
}

Eigen::VectorXd to_full(const DofMap& dm, const Eigen::VectorXd& x) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(dm.dof_count);
  for (int i = 0; i < dm.free_count(); ++i) full[dm.free_dofs[i]] = x[i];
  return full;
}

}  // namespace

double inner_objective(const VIProblem& problem, const FrozenFriction& frozen,
                       const Eigen::VectorXd& u) {
  return problem.strain_energy(u) - problem.load().dot(u) + eval_frozen(frozen, u);
}

DisplacementField solve_inner_tresca(const VIProblem& problem, const DisplacementField& p,
                                     const SolverConfig& cfg, InnerStats* stats,
                                     const DisplacementField* initial) {
  cfg.validate();
  if (p.mesh.get() != problem.mesh_ptr().get()) throw InputError("p lives on a different mesh");
  const DofMap& dm = problem.dofs();
  const FrozenFriction frozen = freeze_friction(problem, p.values);
  Eigen::VectorXd x = initial ? to_free(dm, initial->values) : Eigen::VectorXd::Zero(dm.free_count());
  std::vector<double>* energies = stats ? &stats->energies : nullptr;
  int iters = 0;

  if (problem.is_linear()) {
    const QP qp = reduce(problem, problem.stiffness(), problem.load() - frozen.linear, frozen);
    iters = solve_qp(qp, x, cfg, cfg.inner_tol, energies);
  } else {
    Eigen::VectorXd u = to_full(dm, x);
    for (const auto& row : problem.constraint_rows())
      if (u[row.lower_dof] > u[row.upper_dof]) u.setZero();
    constexpr int kMaxProx = 100;
    bool ok = false;
    for (int k = 0; k < kMaxProx && !ok; ++k) {
      const SparseMatrix kt = problem.tangent(u);
      const Eigen::VectorXd gw = problem.internal_force(u);
      const Eigen::VectorXd b = problem.load() - frozen.linear + kt * u - gw;
      const QP qp = reduce(problem, kt, b, frozen);
      Eigen::VectorXd v = to_free(dm, u);
      iters += solve_qp(qp, v, cfg, 0.1 * cfg.inner_tol, nullptr);
      const Eigen::VectorXd d = to_full(dm, v) - u;
      const double dk = std::sqrt(std::max(0.0, d.dot(kt * d)));
      const double uk = std::sqrt(std::max(0.0, u.dot(kt * u)));
      const double e0 = inner_objective(problem, frozen, u);
      const double decrease = (gw - problem.load() + frozen.linear).dot(d) +
                              eval_frozen(frozen, u + d) - eval_frozen(frozen, u) -
                              frozen.linear.dot(d);
      double t = 1.0;
      while (t > 1e-12 && inner_objective(problem, frozen, u + t * d) > e0 + 1e-4 * t * decrease)
        t *= 0.5;
      if (t > 1e-12) u += t * d;
      if (energies) energies->push_back(inner_objective(problem, frozen, u));
      // a predicted decrease at round-off level of the energy means the step cannot improve u
      const double scale = problem.strain_energy(u) + std::abs(problem.load().dot(u)) +
                           std::abs(eval_frozen(frozen, u));
      ok = dk == 0.0 || dk <= cfg.inner_tol * uk || t <= 1e-12 || -decrease <= 1e-15 * scale;
    }
    if (!ok) throw SolverError("proximal Newton did not converge");
    x = to_free(dm, u);
  }
  if (stats) stats->iterations = iters;
  DisplacementField out;
  out.mesh = problem.mesh_ptr();
  out.values = to_full(dm, x);
  return out;
}

FixedPointResult fixed_point_solve(const VIProblem& problem, const SolverConfig& cfg,
                                   const DisplacementField& p0) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  if (p0.mesh.get() != problem.mesh_ptr().get()) throw InputError("p0 lives on a different mesh");
  for (const auto& row : problem.constraint_rows())
    if (p0.values[row.lower_dof] > p0.values[row.upper_dof])
      throw InputError("initial guess violates the nonpenetration constraint");

  FixedPointResult res;
  SolverReport& rep = res.report;
  DisplacementField u = p0;
  constexpr int kDivergenceWindow = 5;
  for (int k = 1; k <= cfg.outer_max_iters; ++k) {
    InnerStats stats;
    DisplacementField next = solve_inner_tresca(problem, u, cfg, &stats, &u);
    DisplacementField delta = next;
    delta.values -= u.values;
    const double diff = energy_norm(problem, delta);
    rep.inner_iterations.push_back(stats.iterations);
    if (!rep.differences.empty()) rep.contraction_ratios.push_back(diff / rep.differences.back());
    rep.differences.push_back(diff);
    rep.outer_iters = k;
    u = std::move(next);
    if (!std::isfinite(diff)) {
      rep.diverged = true;
      break;
    }
    if (diff == 0.0 || diff <= cfg.outer_tol * energy_norm(problem, u)) {
      rep.converged = true;
      break;
    }
    const auto& r = rep.contraction_ratios;
    if (static_cast<int>(r.size()) >= kDivergenceWindow &&
        std::all_of(r.end() - kDivergenceWindow, r.end(), [](double v) { return v >= 1.0; })) {
      rep.diverged = true;
      break;
    }
  }
  if (rep.converged) {
    res.solution = u;
  } else {
    rep.diagnostic = std::string(rep.diverged ? "fixed-point iteration diverged: "
                                              : "fixed-point iteration did not converge within " +
                                                    std::to_string(cfg.outer_max_iters) +
                                                    " iterations: ") +
                     kDivergenceDiagnostic;
  }
  res.last_iterate = std::move(u);
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

double estimate_contraction(const SolverReport& report) {
  const auto& r = report.contraction_ratios;
  if (report.outer_iters < 3 || r.size() < 2) throw InputError("too few iterations");
  const std::size_t tail = (r.size() + 1) / 2;
  double log_sum = 0.0;
  for (std::size_t k = r.size() - tail; k < r.size(); ++k) {
    if (r[k] <= 0.0) return 0.0;
    log_sum += std::log(r[k]);
  }
  return std::exp(log_sum / static_cast<double>(tail));
}

}  // namespace layervi
