#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitgap/chain.hpp"
#include "hitgap/psi.hpp"

namespace hitgap {

/// Hitting times of one start point. Censored paths (time cap reached) are
/// counted but not stored in `times`.
struct HittingSample {
  enum class Scheme { ExactJump, EulerMaruyama };
  std::vector<double> times;
  std::size_t censored = 0;
  double time_cap = std::numeric_limits<double>::infinity();
  std::string start;
  std::string target;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::ExactJump;
  double dt = 0.0;
  bool bridge = true;

  std::size_t attempted() const { return times.size() + censored; }
};

struct SamplingOptions {
  double time_cap = std::numeric_limits<double>::infinity();
  int workers = 0;     ///< 0 uses the hardware concurrency
  bool bridge = true;  ///< Brownian-bridge crossing correction (diffusions only)
};

/// Samples are generated in fixed chunks, each with its own RNG stream, so the
/// output depends on (seed, n) only and not on the number of workers.
inline constexpr std::size_t kSampleChunk = 1024;

/// Exact hitting times: exponential holding times and embedded-chain jumps.
HittingSample sample_hitting_time_ctmc(const FiniteChain& chain, int x0, const TargetSet& k, std::size_t n,
                                       std::uint64_t seed, const SamplingOptions& options = {});

/// Euler-Maruyama with reflection at the domain ends. A step that ends outside
/// K = [k.lo, k.hi] still counts as a hit with the Brownian-bridge probability
/// exp(-2 d_n d_{n+1} / (b dt)); the hit is recorded at the step end.
HittingSample sample_hitting_time_diffusion(const DiffusionSpec1D& spec, double x0, const Interval& k, double dt,
                                            std::size_t n, std::uint64_t seed,
                                            const SamplingOptions& options = {});

struct MomentEstimate {
  double alpha = 0.0;
  double mean = 0.0;           ///< over uncensored paths
  double ci_half_width = 0.0;  ///< 95%, normal approximation
  double std_error = 0.0;
  std::size_t n = 0;
  std::size_t censored = 0;
  double lower_bound = 0.0;    ///< mean with censored paths counted at the cap
  bool tail_flag = false;
  bool overflow = false;
  double alpha_star_estimate = std::numeric_limits<double>::quiet_NaN();
  bool bootstrapped = false;
  double bootstrap_lo = 0.0;   ///< 2.5% percentile of resampled means
  double bootstrap_hi = 0.0;
};

struct EstimateOptions {
  double alpha_star_hint = std::numeric_limits<double>::quiet_NaN();
  int bootstrap_resamples = 1000;  ///< used only when tail_flag is set; 0 disables
  std::uint64_t seed = 0;
};

/// Empirical mean of e^{alpha tau}.
///
/// tail_flag: alpha >= 0.8 alpha_hat* or the top 1% of values carries more than
/// half of the sum. alpha_hat* is the hint when given, otherwise the inverse
/// mean excess of tau above its 90% quantile. The normal CI is unreliable when
/// the flag is set, hence the bootstrap.
MomentEstimate estimate_exp_moment(const HittingSample& sample, double alpha, const EstimateOptions& options = {});

struct ShiftedMomentEstimate {
  MomentEstimate estimate;
  double oracle = 0.0;  ///< (e^{tQ} phi)(x0), phi = exp-moment potential
};

/// E_x0 exp(alpha_tilde tau_K^t), tau_K^t the first entrance into K after time t.
ShiftedMomentEstimate estimate_shifted_moment(const FiniteChain& chain, const InvariantMeasure& pi, int x0,
                                              const TargetSet& k, double t, double alpha_tilde, std::size_t n,
                                              std::uint64_t seed, const SamplingOptions& options = {});

nlohmann::json to_json(const MomentEstimate& estimate);

/// One time per row; metadata in '#' header lines.
void write_sample_csv(const HittingSample& sample, std::ostream& out);

}  // namespace hitgap
