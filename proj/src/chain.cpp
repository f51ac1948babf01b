#include "hitgap/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "hitgap/error.hpp"
#include "hitgap/expression.hpp"
#include "hitgap/random.hpp"

namespace hitgap {

namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::ostringstream out;
  out << "invalid generator:";
  for (const auto& v : violations) out << "\n  " << v.message;
  return out.str();
}

std::string describe_components(const std::vector<std::vector<int>>& comps) {
  std::ostringstream out;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    out << (c ? " | " : "") << '{';
    for (std::size_t k = 0; k < comps[c].size(); ++k) out << (k ? "," : "") << comps[c][k];
    out << '}';
  }
  return out.str();
}

}  // namespace

std::vector<std::vector<int>> strongly_connected_components(const SparseMatrix& q) {
  const int n = static_cast<int>(q.rows());
  std::vector<std::vector<int>> out_edges(n), in_edges(n);
  for (int i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j != i && it.value() > 0.0) {
        out_edges[i].push_back(j);
        in_edges[j].push_back(i);
      }
    }
  }
  // Kosaraju: finishing order on the graph, then sweeps on the transpose.
  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  for (int root = 0; root < n; ++root) {
    if (seen[root]) continue;
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    seen[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < out_edges[v].size()) {
        const int w = out_edges[v][next++];
        if (!seen[w]) {
          seen[w] = 1;
          stack.emplace_back(w, 0);
        }
      } else {
        order.push_back(v);
        stack.pop_back();
      }
    }
  }
  std::vector<int> component(n, -1);
  std::vector<std::vector<int>> comps;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (component[*it] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    comps.emplace_back();
    std::vector<int> stack{*it};
    component[*it] = id;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      comps[id].push_back(v);
      for (int w : in_edges[v]) {
        if (component[w] < 0) {
          component[w] = id;
          stack.push_back(w);
        }
      }
    }
    std::sort(comps[id].begin(), comps[id].end());
  }
  std::sort(comps.begin(), comps.end());
  return comps;
}

std::vector<Violation> validate(const SparseMatrix& q, const std::vector<double>& labels) {
  std::vector<Violation> out;
  const int n = static_cast<int>(q.rows());
  if (q.rows() != q.cols() || n < 2) {
    std::ostringstream msg;
    msg << "generator must be square with at least 2 states, got " << q.rows() << "x" << q.cols();
    out.push_back({Violation::Kind::Shape, -1, -1, 0.0, msg.str()});
    return out;
  }
  if (!labels.empty() && static_cast<int>(labels.size()) != n) {
    out.push_back({Violation::Kind::Labels, -1, -1, static_cast<double>(labels.size()),
                   "labels has length " + std::to_string(labels.size()) + ", expected " +
                       std::to_string(n)});
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(labels[i])) {
      out.push_back({Violation::Kind::Labels, static_cast<int>(i), -1, labels[i],
                     "label " + std::to_string(i) + " is not finite"});
    }
  }
  bool finite = true;
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    double diag = 0.0;
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      const double v = it.value();
      if (!std::isfinite(v)) {
        finite = false;
        std::ostringstream msg;
        msg << "entry (" << i << "," << j << ") is not finite";
        out.push_back({Violation::Kind::NonFinite, i, j, v, msg.str()});
        continue;
      }
      if (j == i) {
        diag = v;
      } else {
        off += v;
        if (v < 0.0) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "off-diagonal entry (" << i << "," << j << ") is negative: " << v;
          out.push_back({Violation::Kind::NegativeOffDiagonal, i, j, v, msg.str()});
        }
      }
    }
    // Diagonal added last: builders set it to minus the off-diagonal sum in
    // the same order, which makes their row sums exactly zero.
    const double sum = off + diag;
    if (std::isfinite(sum) && std::abs(sum) > kRowSumTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "row " << i << " sums to " << sum;
      out.push_back({Violation::Kind::RowSum, i, -1, sum, msg.str()});
    }
  }
  if (finite) {
    const auto comps = strongly_connected_components(q);
    if (comps.size() > 1) {
      out.push_back({Violation::Kind::Reducible, -1, -1, static_cast<double>(comps.size()),
                     "chain is reducible; strongly connected components " +
                         describe_components(comps)});
    }
  }
  return out;
}

FiniteChain::FiniteChain(SparseMatrix q, std::vector<double> labels)
    : q_(std::move(q)), labels_(std::move(labels)) {
  q_.makeCompressed();
  auto violations = validate(q_, labels_);
  std::erase_if(violations, [](const Violation& v) { return v.kind == Violation::Kind::Reducible; });
  if (!violations.empty()) throw ValidationError(describe(violations));
}

FiniteChain FiniteChain::from_dense(const Matrix& q, std::vector<double> labels) {
  return FiniteChain(q.sparseView(0.0, 0.0), std::move(labels));
}

FiniteChain FiniteChain::from_rates(int n, const std::vector<Eigen::Triplet<double>>& rates,
                                    std::vector<double> labels) {
  if (n < 2) throw ValidationError("chain needs at least 2 states, got " + std::to_string(n));
  SparseMatrix off(n, n);
  for (const auto& t : rates) {
    if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n) {
      throw ValidationError("rate index (" + std::to_string(t.row()) + "," + std::to_string(t.col()) +
                            ") out of range");
    }
    if (t.row() == t.col()) {
      throw ValidationError("diagonal entry (" + std::to_string(t.row()) +
                            ") given as a rate; diagonals are implied");
    }
  }
  off.setFromTriplets(rates.begin(), rates.end());
  std::vector<Eigen::Triplet<double>> full;
  full.reserve(static_cast<std::size_t>(off.nonZeros() + n));
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(off, i); it; ++it) {
      sum += it.value();
      full.emplace_back(i, static_cast<int>(it.col()), it.value());
    }
    full.emplace_back(i, i, -sum);
  }
  SparseMatrix q(n, n);
  q.setFromTriplets(full.begin(), full.end());
  return FiniteChain(std::move(q), std::move(labels));
}

double InvariantMeasure::mass(const std::vector<int>& states) const {
  double m = 0.0;
  for (int s : states) m += pi(s);
  return m;
}

namespace {

double balance_residual(const SparseMatrix& q, const Vector& pi) {
  double worst = 0.0;
  for (int i = 0; i < q.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i) continue;
      worst = std::max(worst, std::abs(pi(i) * it.value() - pi(j) * q.coeff(j, i)));
    }
  }
  return worst;
}

double stationarity_residual(const SparseMatrix& q, const Vector& pi) {
  return (q.transpose() * pi).cwiseAbs().maxCoeff();
}

Vector solve_null_vector(const SparseMatrix& q) {
  const int n = static_cast<int>(q.rows());
  // pi Q = 0 as Q^T pi = 0 with the last equation replaced by sum(pi) = 1.
  if (n <= kDenseLimit) {
    Matrix a = Matrix(q).transpose();
    a.row(n - 1).setOnes();
    Vector b = Vector::Zero(n);
    b(n - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    Vector pi = lu.solve(b);
    pi += lu.solve(b - a * pi);
    return pi;
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j != n - 1) trips.emplace_back(j, i, it.value());
    }
  }
  for (int i = 0; i < n; ++i) trips.emplace_back(n - 1, i, 1.0);
  ColSparseMatrix a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<ColSparseMatrix> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw InternalError("invariant measure factorization failed");
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  Vector pi = lu.solve(b);
  pi += lu.solve(b - a * pi);
  return pi;
}

// Re-derive pi from ratios pi_j / pi_i = Q_ij / Q_ji along a spanning tree. For a
// reversible chain this has full relative accuracy even for states with tiny mass.
Vector tree_weights(const SparseMatrix& q, const Vector& guess) {
  const int n = static_cast<int>(q.rows());
  Vector log_w = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  int root = 0;
  guess.maxCoeff(&root);
  log_w(root) = 0.0;
  std::queue<int> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop();
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i || it.value() <= 0.0 || !std::isnan(log_w(j))) continue;
      const double back = q.coeff(j, i);
      if (back <= 0.0) return Vector();
      log_w(j) = log_w(i) + std::log(it.value()) - std::log(back);
      frontier.push(j);
    }
  }
  const double top = log_w.maxCoeff();
  Vector w = (log_w.array() - top).exp();
  return w / w.sum();
}

}  // namespace

InvariantMeasure invariant_measure(const FiniteChain& chain) {
  const SparseMatrix& q = chain.generator();
  const auto comps = strongly_connected_components(q);
  if (comps.size() > 1) {
    throw IrreducibilityError("chain is reducible; strongly connected components " +
                                  describe_components(comps),
                              comps);
  }
  Vector pi = solve_null_vector(q);
  const double peak = pi.cwiseAbs().maxCoeff();
  for (int i = 0; i < pi.size(); ++i) {
    if (pi(i) < 0.0) {
      if (-pi(i) > 1e-12 * peak) {
        throw InternalError("invariant measure has a negative weight at state " + std::to_string(i));
      }
      pi(i) = 0.0;
    }
  }
  pi /= pi.sum();

  InvariantMeasure m;
  m.balance_residual = balance_residual(q, pi);
  if (m.balance_residual <= kBalanceTolerance) {
    Vector refined = tree_weights(q, pi);
    if (refined.size() == pi.size()) {
      const double refined_balance = balance_residual(q, refined);
      if (refined_balance <= m.balance_residual &&
          stationarity_residual(q, refined) <= kStationarityTolerance) {
        pi = refined;
        m.balance_residual = refined_balance;
      }
    }
  }
  m.pi = pi;
  m.stationarity_residual = stationarity_residual(q, pi);
  m.reversible = m.balance_residual <= kBalanceTolerance;
  if (m.stationarity_residual > kStationarityTolerance) {
    throw InternalError("invariant measure residual " + std::to_string(m.stationarity_residual) +
                        " exceeds tolerance");
  }
  return m;
}

TargetSet::TargetSet(int n, std::vector<int> members) : n_(n), members_(std::move(members)) {
  if (n < 1) throw DomainError("target set over an empty state space");
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  if (members_.empty()) throw DomainError("target set K must be nonempty");
  if (members_.front() < 0 || members_.back() >= n) {
    throw DomainError("target set member out of range [0, " + std::to_string(n) + ")");
  }
  mask_.assign(static_cast<std::size_t>(n), false);
  for (int s : members_) mask_[static_cast<std::size_t>(s)] = true;
}

TargetSet TargetSet::full(int n) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  return TargetSet(n, std::move(all));
}

TargetSet TargetSet::from_interval(const FiniteChain& chain, double lo, double hi) {
  if (!chain.has_labels()) throw DomainError("coordinate targets require labels");
  std::vector<int> members;
  for (int i = 0; i < chain.size(); ++i) {
    const double x = chain.labels()[static_cast<std::size_t>(i)];
    if (x >= lo && x <= hi) members.push_back(i);
  }
  if (members.empty()) {
    std::ostringstream msg;
    msg << "interval [" << lo << ", " << hi << "] contains no grid state";
    throw DomainError(msg.str());
  }
  return TargetSet(chain.size(), std::move(members));
}

std::vector<int> TargetSet::complement() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n_) - members_.size());
  for (int i = 0; i < n_; ++i) {
    if (!mask_[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

bool TargetSet::subset_of(const TargetSet& other) const {
  if (other.n_ != n_) return false;
  return std::all_of(members_.begin(), members_.end(), [&](int s) { return other.contains(s); });
}

DiffusionSpec1D DiffusionSpec1D::from_expressions(const std::string& drift,
                                                  const std::string& diffusion, double lower,
                                                  double upper) {
  if (!(lower < upper)) throw ValidationError("diffusion domain must satisfy L < R");
  const Expression a = Expression::parse(drift);
  const Expression b = Expression::parse(diffusion);
  DiffusionSpec1D spec;
  spec.drift = [a](double x) { return a(x); };
  spec.diffusion = [b](double x) { return b(x); };
  spec.lower = lower;
  spec.upper = upper;
  spec.drift_text = drift;
  spec.diffusion_text = diffusion;
  return spec;
}

FiniteChain build_birth_death(int n, const std::vector<double>& up_rates,
                              const std::vector<double>& down_rates) {
  if (n < 2) throw ValidationError("birth-death chain needs n >= 2, got " + std::to_string(n));
  const auto expected = static_cast<std::size_t>(n - 1);
  if (up_rates.size() != expected || down_rates.size() != expected) {
    throw ValidationError("birth-death chain with n = " + std::to_string(n) + " needs " +
                          std::to_string(expected) + " up and down rates");
  }
  std::vector<Eigen::Triplet<double>> rates;
  for (std::size_t i = 0; i < expected; ++i) {
    if (!(up_rates[i] > 0.0) || !std::isfinite(up_rates[i])) {
      throw ValidationError("up rate at index " + std::to_string(i) + " must be positive");
    }
    if (!(down_rates[i] > 0.0) || !std::isfinite(down_rates[i])) {
      throw ValidationError("down rate at index " + std::to_string(i) + " must be positive");
    }
    const int s = static_cast<int>(i);
    rates.emplace_back(s, s + 1, up_rates[i]);
    rates.emplace_back(s + 1, s, down_rates[i]);
  }
  return FiniteChain::from_rates(n, rates);
}

FiniteChain build_complete_graph(int n, double rate) {
  if (!(rate > 0.0)) throw ValidationError("complete graph rate must be positive");
  std::vector<Eigen::Triplet<double>> rates;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) rates.emplace_back(i, j, rate);
    }
  }
  return FiniteChain::from_rates(n, rates);
}

FiniteChain build_random_reversible(int n, std::uint64_t seed, double extra_edge_probability) {
  if (n < 2) throw ValidationError("random chain needs n >= 2");
  Rng rng(seed, 0xC0FFEE);
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (auto& w : weight) w = std::exp(rng.normal());
  std::vector<Eigen::Triplet<double>> rates;
  auto connect = [&](int i, int j) {
    const double c = std::exp(rng.normal());
    rates.emplace_back(i, j, c / weight[static_cast<std::size_t>(i)]);
    rates.emplace_back(j, i, c / weight[static_cast<std::size_t>(j)]);
  };
  std::vector<std::vector<bool>> linked(static_cast<std::size_t>(n),
                                        std::vector<bool>(static_cast<std::size_t>(n), false));
  for (int j = 1; j < n; ++j) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(j)));
    connect(i, j);
    linked[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!linked[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
          rng.uniform() < extra_edge_probability) {
        connect(i, j);
      }
    }
  }
  return FiniteChain::from_rates(n, rates);
}

double ellipticity_constant(const DiffusionSpec1D& spec, int grid_points) {
  if (grid_points < 3) throw ValidationError("diffusion grid needs at least 3 points");
  if (!(spec.lower < spec.upper)) throw ValidationError("diffusion domain must satisfy L < R");
  const double dx = (spec.upper - spec.lower) / grid_points;
  double beta = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double x = spec.lower + (i + 0.5) * dx;
    const double b = spec.diffusion(x);
    if (!(b > 0.0) || !std::isfinite(b)) {
      std::ostringstream msg;
      msg << "ellipticity violated: b(" << x << ") = " << b;
      throw EllipticityError(msg.str(), x, b);
    }
    beta = std::min(beta, b);
  }
  return beta;
}

FiniteChain discretize_diffusion_1d(const DiffusionSpec1D& spec, int grid_points) {
  ellipticity_constant(spec, grid_points);
  const int n = grid_points;
  const double dx = (spec.upper - spec.lower) / n;
  std::vector<double> x(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = spec.lower + (i + 0.5) * dx;
    b[static_cast<std::size_t>(i)] = spec.diffusion(x[static_cast<std::size_t>(i)]);
  }
  // Five-point Gauss-Legendre rule for the increments of U = -int 2a/b.
  static constexpr double nodes[5] = {0.0, -0.5384693101056831, 0.5384693101056831,
                                      -0.9061798459386640, 0.9061798459386640};
  static constexpr double weights[5] = {0.5688888888888889, 0.4786286704993665,
                                        0.4786286704993665, 0.2369268850561891,
                                        0.2369268850561891};
  std::vector<Eigen::Triplet<double>> rates;
  rates.reserve(static_cast<std::size_t>(2 * (n - 1)));
  const double inv_dx2 = 1.0 / (dx * dx);
  for (int i = 0; i + 1 < n; ++i) {
    const double mid = spec.lower + (i + 1) * dx;
    double integral = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double s = mid + 0.5 * dx * nodes[k];
      integral += weights[k] * 2.0 * spec.drift(s) / spec.diffusion(s);
    }
    const double delta_u = -0.5 * dx * integral;  // U_{i+1} - U_i
    const auto si = static_cast<std::size_t>(i);
    rates.emplace_back(i, i + 1, b[si] * inv_dx2 / (1.0 + std::exp(delta_u)));
    rates.emplace_back(i + 1, i, b[si + 1] * inv_dx2 / (1.0 + std::exp(-delta_u)));
  }
  return FiniteChain::from_rates(n, rates, std::move(x));
}

FiniteChain chain_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("chain document must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "n" && key != "Q" && key != "triplets" && key != "labels") {
      throw ValidationError("unknown key '" + key + "' in chain document");
    }
  }
  std::vector<double> labels;
  if (doc.contains("labels")) labels = doc.at("labels").get<std::vector<double>>();
  if (doc.contains("Q") == doc.contains("triplets")) {
    throw ValidationError("chain document needs exactly one of 'Q' or 'triplets'");
  }
  if (doc.contains("Q")) {
    const auto rows = doc.at("Q").get<std::vector<std::vector<double>>>();
    const int n = static_cast<int>(rows.size());
    if (doc.contains("n") && doc.at("n").get<int>() != n) {
      throw ValidationError("'n' does not match the number of rows of 'Q'");
    }
    Matrix q(n, n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n) {
        throw ValidationError("row " + std::to_string(i) + " of 'Q' has the wrong length");
      }
      for (int j = 0; j < n; ++j) q(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return FiniteChain::from_dense(q, std::move(labels));
  }
  if (!doc.contains("n")) throw ValidationError("sparse chain document needs 'n'");
  const int n = doc.at("n").get<int>();
  std::vector<Eigen::Triplet<double>> rates;
  for (const auto& t : doc.at("triplets")) {
    if (!t.is_array() || t.size() != 3) throw ValidationError("triplets must be [i, j, rate]");
    rates.emplace_back(t[0].get<int>(), t[1].get<int>(), t[2].get<double>());
  }
  return FiniteChain::from_rates(n, rates, std::move(labels));
}

nlohmann::json chain_to_json(const FiniteChain& chain) {
  const Matrix q = chain.dense();
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < q.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < q.cols(); ++j) row.push_back(q(i, j));
    rows.push_back(std::move(row));
  }
  nlohmann::json doc = {{"n", chain.size()}, {"Q", std::move(rows)}};
  if (chain.has_labels()) doc["labels"] = chain.labels();
  return doc;
}

}  // namespace hitgap
