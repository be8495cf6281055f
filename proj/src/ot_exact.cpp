#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fgi/ot.hpp"
#include "fgi/parallel.hpp"

namespace fgi {

namespace {

// Entering-arc tolerance, relative to the cost scale (design: 1e-12 pivots).
constexpr double kPivotTolRel = 1e-12;
// Consecutive degenerate pivots before switching to pure Bland's rule.
constexpr int kBlandTrigger = 64;

struct BasicCell {
  int i, j;
  double mass;
};

// Transportation simplex over a dense cost oracle on compacted index sets.
// Pricing is block search in a fixed row-major scan order with a persistent
// cursor; after kBlandTrigger degenerate pivots in a row it falls back to
// Bland's rule (lowest flattened index) until a non-degenerate pivot, which
// rules out cycling while keeping typical pivots cheap.
template <class CostFn>
class TransportSimplex {
 public:
  TransportSimplex(int m, int n, CostFn cost, std::vector<double> a, std::vector<double> b,
                   double cost_scale)
      : m_(m),
        n_(n),
        cost_(cost),
        a_(std::move(a)),
        b_(std::move(b)),
        tol_(kPivotTolRel * std::max(1.0, cost_scale)) {}

  void run() {
    northwest_init();
    compute_duals();
    const long pivot_cap = 2000L * (m_ + n_) + 1000000L;
    int degenerate_streak = 0;
    bool bland = false;
    while (true) {
      int ei, ej;
      if (!find_entering(bland, ei, ej)) break;
      const double theta = pivot(ei, ej);
      if (theta <= 0.0) {
        if (++degenerate_streak >= kBlandTrigger) bland = true;
      } else {
        degenerate_streak = 0;
        bland = false;
      }
      compute_duals();
      if (++pivots_ > pivot_cap)
        throw SolverError("transportation simplex cycling guard exhausted after " +
                          std::to_string(pivots_) + " pivots");
    }
  }

  const std::vector<BasicCell>& basis() const { return cells_; }
  const std::vector<double>& row_duals() const { return u_; }
  const std::vector<double>& col_duals() const { return v_; }
  long pivots() const { return pivots_; }

 private:
  void northwest_init() {
    cells_.reserve(m_ + n_ - 1);
    int i = 0, j = 0;
    std::vector<double> a = a_, b = b_;
    while (true) {
      const double q = std::min(a[i], b[j]);
      cells_.push_back({i, j, q});
      a[i] -= q;
      b[j] -= q;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (a[i] <= 0.0 && i < m_ - 1)
        ++i;
      else
        ++j;
    }
    adj_.assign(m_ + n_, {});
    for (int s = 0; s < static_cast<int>(cells_.size()); ++s) {
      adj_[cells_[s].i].push_back(s);
      adj_[m_ + cells_[s].j].push_back(s);
    }
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);
    parent_.assign(m_ + n_, -1);
    parent_cell_.assign(m_ + n_, -1);
    depth_.assign(m_ + n_, 0);
    order_.reserve(m_ + n_);
  }

  // BFS from the anchored root (first column node): assigns duals and the
  // parent structure used for cycle finding.
  void compute_duals() {
    const int root = m_;  // smallest-index active target
    std::fill(parent_.begin(), parent_.end(), -1);
    order_.clear();
    order_.push_back(root);
    parent_[root] = root;
    parent_cell_[root] = -1;
    depth_[root] = 0;
    v_[0] = 0.0;
    for (std::size_t head = 0; head < order_.size(); ++head) {
      const int node = order_[head];
      for (int s : adj_[node]) {
        const BasicCell& c = cells_[s];
        const int other = (node == c.i) ? m_ + c.j : c.i;
        if (parent_[other] != -1) continue;
        parent_[other] = node;
        parent_cell_[other] = s;
        depth_[other] = depth_[node] + 1;
        if (other < m_)
          u_[other] = cost_(c.i, c.j) - v_[c.j];
        else
          v_[other - m_] = cost_(c.i, c.j) - u_[c.i];
        order_.push_back(other);
      }
    }
  }

  bool find_entering(bool bland, int& ei, int& ej) {
    const std::size_t total = static_cast<std::size_t>(m_) * n_;
    if (bland) {
      for (int i = 0; i < m_; ++i) {
        const double ui = u_[i];
        for (int j = 0; j < n_; ++j) {
          if (cost_(i, j) - ui - v_[j] < -tol_) {
            ei = i;
            ej = j;
            return true;
          }
        }
      }
      return false;
    }
    const std::size_t block = std::max<std::size_t>(1024, 2 * (m_ + n_));
    std::size_t pos = cursor_;
    double best = -tol_;
    bool found = false;
    for (std::size_t scanned = 0; scanned < total; ++scanned) {
      const int i = static_cast<int>(pos / n_);
      const int j = static_cast<int>(pos % n_);
      const double r = cost_(i, j) - u_[i] - v_[j];
      if (r < best) {
        best = r;
        ei = i;
        ej = j;
        found = true;
      }
      ++pos;
      if (pos == total) pos = 0;
      if ((scanned + 1) % block == 0 && found) break;
    }
    cursor_ = pos;
    return found;
  }

  // Applies the pivot for entering arc (ei, ej); returns theta.
  double pivot(int ei, int ej) {
    // Tree path between the entering endpoints, collected as cell slots with
    // the +/- orientation of the alternating cycle (entering cell gets +).
    cycle_cells_.clear();
    cycle_sign_.clear();
    int x = m_ + ej, y = ei;
    // Walk the deeper endpoint up until both meet; record traversal direction.
    std::vector<int>& up_x = walk_x_;
    std::vector<int>& up_y = walk_y_;
    up_x.clear();
    up_y.clear();
    while (x != y) {
      if (depth_[x] >= depth_[y]) {
        up_x.push_back(parent_cell_[x]);
        x = parent_[x];
      } else {
        up_y.push_back(parent_cell_[y]);
        y = parent_[y];
      }
    }
    // Traversal m_+ej -> LCA: moving from node to parent. Cell traversed from
    // its column side to its row side decreases (-theta), row side to column
    // side increases. The y-walk is traversed in reverse (LCA -> ei), which
    // flips its directions.
    int node = m_ + ej;
    for (int s : up_x) {
      const bool from_col = node >= m_;
      cycle_cells_.push_back(s);
      cycle_sign_.push_back(from_col ? -1 : +1);
      node = parent_[node];
    }
    node = ei;
    for (int s : up_y) {
      const bool from_row = node < m_;
      // reversed traversal: arriving at `node`; direction is parent -> node
      cycle_cells_.push_back(s);
      cycle_sign_.push_back(from_row ? -1 : +1);
      node = parent_[node];
    }

    double theta = std::numeric_limits<double>::infinity();
    int leave_slot = -1;
    long leave_key_i = -1, leave_key_j = -1;
    for (std::size_t k = 0; k < cycle_cells_.size(); ++k) {
      if (cycle_sign_[k] != -1) continue;
      const BasicCell& c = cells_[cycle_cells_[k]];
      const bool better =
          c.mass < theta ||
          (c.mass == theta && (static_cast<long>(c.i) < leave_key_i ||
                               (static_cast<long>(c.i) == leave_key_i &&
                                static_cast<long>(c.j) < leave_key_j)));
      if (better) {
        theta = c.mass;
        leave_slot = cycle_cells_[k];
        leave_key_i = c.i;
        leave_key_j = c.j;
      }
    }

    for (std::size_t k = 0; k < cycle_cells_.size(); ++k) {
      BasicCell& c = cells_[cycle_cells_[k]];
      c.mass += cycle_sign_[k] * theta;
    }
    // Replace the leaving cell by the entering one in place.
    BasicCell& slot = cells_[leave_slot];
    detach(slot.i, leave_slot);
    detach(m_ + slot.j, leave_slot);
    slot = {ei, ej, theta};
    adj_[ei].push_back(leave_slot);
    adj_[m_ + ej].push_back(leave_slot);
    return theta;
  }

  void detach(int node, int slot) {
    auto& lst = adj_[node];
    for (std::size_t k = 0; k < lst.size(); ++k) {
      if (lst[k] == slot) {
        lst[k] = lst.back();
        lst.pop_back();
        return;
      }
    }
  }

  int m_, n_;
  CostFn cost_;
  std::vector<double> a_, b_;
  double tol_;
  std::vector<BasicCell> cells_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> u_, v_;
  std::vector<int> parent_, parent_cell_, depth_, order_;
  std::vector<int> cycle_cells_, walk_x_, walk_y_;
  std::vector<int> cycle_sign_;
  std::size_t cursor_ = 0;
  long pivots_ = 0;
};

struct ActiveSet {
  std::vector<int> idx;
  std::vector<double> mass;
  double total = 0.0;
};

ActiveSet active_masses(const DensityField& d) {
  ActiveSet s;
  const int n = d.M->n_vertices();
  for (int i = 0; i < n; ++i) {
    const double m = d.mass(i);
    if (m > 0.0) {
      s.idx.push_back(i);
      s.mass.push_back(m);
      s.total += m;
    }
  }
  return s;
}

}  // namespace

ExactResult solve_exact(const DensityField& mu, const DensityField& nu, const DenseMatrix& C) {
  if (mu.M != nu.M) throw ArgumentError("solve_exact: densities live on different manifolds");
  mu.validate("mu");
  nu.validate("nu");
  ActiveSet src = active_masses(mu);
  ActiveSet tgt = active_masses(nu);
  if (src.idx.empty() || tgt.idx.empty()) throw InputError("solve_exact: empty support");
  const double imbalance = src.total - tgt.total;
  if (std::abs(imbalance) > 1e-10)
    throw InputError("solve_exact: unbalanced masses, |sum mu - sum nu| = " +
                     std::to_string(std::abs(imbalance)));
  // Absorb the rounding-level imbalance into the largest target mass, which
  // cannot go negative from a <= 1e-10 adjustment.
  const std::size_t fix =
      std::max_element(tgt.mass.begin(), tgt.mass.end()) - tgt.mass.begin();
  tgt.mass[fix] += imbalance;

  const int m = static_cast<int>(src.idx.size());
  const int n = static_cast<int>(tgt.idx.size());
  const int N = C.cols;
  const double* base = C.data.data();
  const std::vector<int>& si = src.idx;
  const std::vector<int>& tj = tgt.idx;
  auto cost = [base, N, &si, &tj](int i, int j) {
    return base[static_cast<std::size_t>(si[i]) * N + tj[j]];
  };

  TransportSimplex<decltype(cost)> simplex(m, n, cost, src.mass, tgt.mass, C.max_value());
  simplex.run();

  ExactResult out;
  out.pivots = simplex.pivots();
  out.plan.n_rows = mu.M->n_vertices();
  out.plan.n_cols = nu.M->n_vertices();
  for (const BasicCell& c : simplex.basis())
    if (c.mass > 0.0) out.plan.entries.push_back({si[c.i], tj[c.j], c.mass});
  std::sort(out.plan.entries.begin(), out.plan.entries.end(),
            [](const TransportPlan::Entry& a, const TransportPlan::Entry& b) {
              return a.i != b.i ? a.i < b.i : a.j < b.j;
            });
  out.plan.rebuild_marginals();
  out.cost = out.plan.cost_against(C);

  const int nv = mu.M->n_vertices();
  out.potentials.phi.assign(nv, 0.0);
  out.potentials.psi.assign(nv, 0.0);
  std::vector<char> src_active(nv, 0), tgt_active(nv, 0);
  for (int k = 0; k < m; ++k) {
    out.potentials.phi[si[k]] = simplex.row_duals()[k];
    src_active[si[k]] = 1;
  }
  for (int k = 0; k < n; ++k) {
    out.potentials.psi[tj[k]] = simplex.col_duals()[k];
    tgt_active[tj[k]] = 1;
  }
  // Extend to zero-mass vertices by c-transform so feasibility holds on every
  // pair, not just the active ones.
  for (int i = 0; i < nv; ++i) {
    if (src_active[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    const double* row = C.row(i);
    for (int k = 0; k < n; ++k) best = std::min(best, row[tj[k]] - out.potentials.psi[tj[k]]);
    out.potentials.phi[i] = best;
  }
  for (int j = 0; j < nv; ++j) {
    if (tgt_active[j]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nv; ++i)
      best = std::min(best, C(i, j) - out.potentials.phi[i]);
    out.potentials.psi[j] = best;
  }
  out.potentials.anchor = tj[0];
  return out;
}

CappedResult solve_capped(const std::vector<double>& supply_caps,
                          const std::vector<double>& demands, const DenseMatrix& C) {
  const int nv_r = C.rows, nv_c = C.cols;
  if (static_cast<int>(supply_caps.size()) != nv_r ||
      static_cast<int>(demands.size()) != nv_c)
    throw ArgumentError("solve_capped: size mismatch with cost matrix");

  std::vector<int> si, tj;
  std::vector<double> a, b;
  double cap_total = 0.0, dem_total = 0.0;
  for (int i = 0; i < nv_r; ++i)
    if (supply_caps[i] > 0.0) {
      si.push_back(i);
      a.push_back(supply_caps[i]);
      cap_total += supply_caps[i];
    }
  for (int j = 0; j < nv_c; ++j)
    if (demands[j] > 0.0) {
      tj.push_back(j);
      b.push_back(demands[j]);
      dem_total += demands[j];
    }
  if (tj.empty()) throw InputError("solve_capped: no demand");
  if (cap_total < dem_total - 1e-12)
    throw InfeasibleError("solve_capped: total capacity " + std::to_string(cap_total) +
                          " below total demand " + std::to_string(dem_total));
  const double overflow = std::max(0.0, cap_total - dem_total);
  const int m = static_cast<int>(si.size());
  const int n_real = static_cast<int>(tj.size());
  const bool dummy = overflow > 0.0;
  const int n = n_real + (dummy ? 1 : 0);
  if (dummy) b.push_back(overflow);

  const int N = C.cols;
  const double* base = C.data.data();
  auto cost = [base, N, &si, &tj, n_real](int i, int j) {
    return j < n_real ? base[static_cast<std::size_t>(si[i]) * N + tj[j]] : 0.0;
  };

  TransportSimplex<decltype(cost)> simplex(m, n, cost, a, b, C.max_value());
  simplex.run();

  CappedResult out;
  out.plan.n_rows = nv_r;
  out.plan.n_cols = nv_c;
  for (const BasicCell& c : simplex.basis())
    if (c.mass > 0.0 && c.j < n_real) out.plan.entries.push_back({si[c.i], tj[c.j], c.mass});
  std::sort(out.plan.entries.begin(), out.plan.entries.end(),
            [](const TransportPlan::Entry& x, const TransportPlan::Entry& y) {
              return x.i != y.i ? x.i < y.i : x.j < y.j;
            });
  out.plan.rebuild_marginals();
  out.cost = out.plan.cost_against(C);

  // Duality gap of the flow LP (augmented, balanced form).
  double dual = 0.0;
  {
    const auto& u = simplex.row_duals();
    const auto& v = simplex.col_duals();
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += u[k] * a[k];
    for (int k = 0; k < n; ++k) s += v[k] * b[k];
    dual = s;
  }
  double primal_aug = out.cost;  // overflow arcs cost 0
  out.gap = primal_aug - dual;

  out.potentials.phi.assign(nv_r, 0.0);
  out.potentials.psi.assign(nv_c, 0.0);
  std::vector<char> sa(nv_r, 0), ta(nv_c, 0);
  for (int k = 0; k < m; ++k) {
    out.potentials.phi[si[k]] = simplex.row_duals()[k];
    sa[si[k]] = 1;
  }
  for (int k = 0; k < n_real; ++k) {
    out.potentials.psi[tj[k]] = simplex.col_duals()[k];
    ta[tj[k]] = 1;
  }
  const double psi_dummy = dummy ? simplex.col_duals()[n_real] : 0.0;
  for (int i = 0; i < nv_r; ++i) {
    if (sa[i]) continue;
    double best = dummy ? -psi_dummy : std::numeric_limits<double>::infinity();
    const double* row = C.row(i);
    for (int k = 0; k < n_real; ++k)
      best = std::min(best, row[tj[k]] - out.potentials.psi[tj[k]]);
    out.potentials.phi[i] = best;
  }
  for (int j = 0; j < nv_c; ++j) {
    if (ta[j]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nv_r; ++i) best = std::min(best, C(i, j) - out.potentials.phi[i]);
    out.potentials.psi[j] = best;
  }
  out.potentials.anchor = tj[0];
  return out;
}

}  // namespace fgi
