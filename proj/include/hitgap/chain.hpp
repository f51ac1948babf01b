#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "hitgap/linalg.hpp"

namespace hitgap {

/// One violated generator invariant, with its location.
struct Violation {
  enum class Kind { Shape, NonFinite, NegativeOffDiagonal, RowSum, Reducible, Labels };
  Kind kind;
  int row = -1;
  int col = -1;
  double value = 0.0;
  std::string message;
};

inline constexpr double kRowSumTolerance = 1e-12;

/// Every violated invariant of a candidate generator; empty iff well formed.
std::vector<Violation> validate(const SparseMatrix& q, const std::vector<double>& labels = {});

/// Strongly connected components of the graph {i -> j : Q_ij > 0, i != j}.
std::vector<std::vector<int>> strongly_connected_components(const SparseMatrix& q);

/// Generator of an irreducible continuous-time chain on {0, ..., n-1}.
///
/// Immutable; construction throws ValidationError listing every violation.
class FiniteChain {
 public:
  explicit FiniteChain(SparseMatrix q, std::vector<double> labels = {});

  static FiniteChain from_dense(const Matrix& q, std::vector<double> labels = {});
  /// Off-diagonal rates; the diagonal is filled so that rows sum to zero.
  static FiniteChain from_rates(int n, const std::vector<Eigen::Triplet<double>>& rates,
                                std::vector<double> labels = {});

  int size() const { return static_cast<int>(q_.rows()); }
  const SparseMatrix& generator() const { return q_; }
  double rate(int i, int j) const { return q_.coeff(i, j); }
  double exit_rate(int i) const { return -q_.coeff(i, i); }
  const std::vector<double>& labels() const { return labels_; }
  bool has_labels() const { return !labels_.empty(); }
  Matrix dense() const { return Matrix(q_); }

 private:
  SparseMatrix q_;
  std::vector<double> labels_;
};

/// Invariant probability weights together with the detailed-balance verdict.
struct InvariantMeasure {
  Vector pi;
  bool reversible = false;
  double stationarity_residual = 0.0;  ///< ||pi Q||_inf
  double balance_residual = 0.0;       ///< max_{i != j} |pi_i Q_ij - pi_j Q_ji|

  double mass(const std::vector<int>& states) const;
};

inline constexpr double kStationarityTolerance = 1e-10;
inline constexpr double kBalanceTolerance = 1e-10;

/// Unique normalized solution of pi Q = 0.
///
/// Throws IrreducibilityError carrying the strongly connected components when
/// the chain is reducible.
InvariantMeasure invariant_measure(const FiniteChain& chain);

/// Hitting set K as a sorted subset of the states.
class TargetSet {
 public:
  TargetSet(int n, std::vector<int> members);

  /// States whose label lies in [lo, hi]; requires a labelled chain.
  static TargetSet from_interval(const FiniteChain& chain, double lo, double hi);
  static TargetSet full(int n);

  int state_count() const { return n_; }
  const std::vector<int>& members() const { return members_; }
  std::vector<int> complement() const;
  bool contains(int state) const { return mask_[static_cast<std::size_t>(state)]; }
  bool is_full() const { return static_cast<int>(members_.size()) == n_; }
  int size() const { return static_cast<int>(members_.size()); }
  bool subset_of(const TargetSet& other) const;

 private:
  int n_;
  std::vector<int> members_;
  std::vector<bool> mask_;
};

/// One-dimensional elliptic diffusion A = a d/dx + (b/2) d^2/dx^2 on [lower, upper]
/// with reflecting endpoints.
struct DiffusionSpec1D {
  std::function<double(double)> drift;
  std::function<double(double)> diffusion;
  double lower = 0.0;
  double upper = 1.0;
  std::string drift_text;      ///< source expression, when parsed
  std::string diffusion_text;

  static DiffusionSpec1D from_expressions(const std::string& drift, const std::string& diffusion,
                                          double lower, double upper);
};

/// Birth-death chain: up_rates[i] is the rate i -> i+1, down_rates[i] the rate i+1 -> i.
FiniteChain build_birth_death(int n, const std::vector<double>& up_rates,
                              const std::vector<double>& down_rates);

/// Complete graph with every off-diagonal rate equal to `rate`.
FiniteChain build_complete_graph(int n, double rate);

/// Random reversible chain built from random conductances and random weights.
///
/// The conductance graph is a random spanning tree plus extra edges with
/// probability `extra_edge_probability`, so the chain is irreducible.
FiniteChain build_random_reversible(int n, std::uint64_t seed, double extra_edge_probability = 0.3);

/// Smallest value of the diffusion coefficient over the grid cell centers.
/// Throws EllipticityError when it is not strictly positive.
double ellipticity_constant(const DiffusionSpec1D& spec, int grid_points);

/// Cell-centered finite-volume discretization with `grid_points` equal cells.
///
/// Labels are the cell centers. Edge conductances are harmonic means of the
/// nodal values of exp(-U), U = -int 2a/b, so the chain satisfies detailed
/// balance with pi_i proportional to (2/b_i) exp(-U_i) for every grid size.
FiniteChain discretize_diffusion_1d(const DiffusionSpec1D& spec, int grid_points);

/// {"n", "Q", "labels"} (dense) or {"n", "triplets", "labels"} (sparse).
FiniteChain chain_from_json(const nlohmann::json& doc);
nlohmann::json chain_to_json(const FiniteChain& chain);

}  // namespace hitgap
