#include "hitgap/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

#include "hitgap/error.hpp"
#include "hitgap/linalg.hpp"
#include "hitgap/potentials.hpp"
#include "hitgap/random.hpp"

namespace hitgap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(rng, index) for every sample; chunk c uses stream c.
template <class Body>
std::vector<double> run_chunks(std::size_t n, std::uint64_t seed, int workers, Body body) {
  std::vector<double> out(n, kNaN);
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      Rng rng(seed, c);
      const std::size_t end = std::min(n, (c + 1) * kSampleChunk);
      for (std::size_t i = c * kSampleChunk; i < end; ++i) out[i] = body(rng);
    }
  };
  unsigned count = workers > 0 ? static_cast<unsigned>(workers) : std::thread::hardware_concurrency();
  count = std::max(1u, std::min<unsigned>(count, static_cast<unsigned>(std::max<std::size_t>(chunks, 1))));
  if (count == 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

// Embedded jump chain in cumulative form.
class JumpTable {
 public:
  explicit JumpTable(const FiniteChain& chain) : exit_(static_cast<std::size_t>(chain.size())) {
    const SparseMatrix& q = chain.generator();
    offsets_.push_back(0);
    for (int i = 0; i < chain.size(); ++i) {
      double acc = 0.0;
      for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
        if (it.col() == i || it.value() <= 0.0) continue;
        acc += it.value();
        cumulative_.push_back(acc);
        targets_.push_back(static_cast<int>(it.col()));
      }
      exit_[static_cast<std::size_t>(i)] = acc;
      offsets_.push_back(cumulative_.size());
    }
  }

  double exit_rate(int x) const { return exit_[static_cast<std::size_t>(x)]; }

  int jump(int x, Rng& rng) const {
    const auto b = offsets_[static_cast<std::size_t>(x)];
    const auto e = offsets_[static_cast<std::size_t>(x) + 1];
    const double u = rng.uniform() * exit_[static_cast<std::size_t>(x)];
    const auto it = std::upper_bound(cumulative_.begin() + static_cast<long>(b),
                                     cumulative_.begin() + static_cast<long>(e), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), e - 1);
    return targets_[idx];
  }

  /// Hitting time of K from x, or NaN past the cap.
  double hit(int x, const TargetSet& k, double cap, Rng& rng) const {
    double t = 0.0;
    while (!k.contains(x)) {
      t += rng.exponential(exit_rate(x));
      if (t > cap) return kNaN;
      x = jump(x, rng);
    }
    return t;
  }

  /// State at time t started from x.
  int run(int x, double t, Rng& rng) const {
    double clock = rng.exponential(exit_rate(x));
    while (clock <= t) {
      x = jump(x, rng);
      clock += rng.exponential(exit_rate(x));
    }
    return x;
  }

 private:
  std::vector<double> exit_;
  std::vector<std::size_t> offsets_;
  std::vector<double> cumulative_;
  std::vector<int> targets_;
};

HittingSample collect(const std::vector<double>& raw, HittingSample sample) {
  for (double t : raw) {
    if (std::isnan(t)) {
      ++sample.censored;
    } else {
      sample.times.push_back(t);
    }
  }
  return sample;
}

std::string describe(const TargetSet& k) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < k.members().size(); ++i) os << (i ? "," : "") << k.members()[i];
  os << '}';
  return os.str();
}

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = sum + v;
    c += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

}  // namespace

HittingSample sample_hitting_time_ctmc(const FiniteChain& chain, int x0, const TargetSet& k, std::size_t n,
                                       std::uint64_t seed, const SamplingOptions& options) {
  if (x0 < 0 || x0 >= chain.size()) throw ValidationError("start state " + std::to_string(x0) + " out of range");
  if (k.state_count() != chain.size()) throw DomainError("target set does not match the chain");
  const JumpTable table(chain);
  const auto raw = run_chunks(n, seed, options.workers,
                              [&](Rng& rng) { return table.hit(x0, k, options.time_cap, rng); });
  HittingSample s;
  s.time_cap = options.time_cap;
  s.start = std::to_string(x0);
  s.target = describe(k);
  s.seed = seed;
  s.scheme = HittingSample::Scheme::ExactJump;
  return collect(raw, s);
}

HittingSample sample_hitting_time_diffusion(const DiffusionSpec1D& spec, double x0, const Interval& k, double dt,
                                            std::size_t n, std::uint64_t seed, const SamplingOptions& options) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (!(k.lo <= k.hi)) throw DomainError("target interval is empty");
  if (x0 < spec.lower || x0 > spec.upper) throw DomainError("start point outside the domain");
  const double lower = spec.lower;
  const double upper = spec.upper;
  const double sqdt = std::sqrt(dt);
  auto distance = [&](double x) { return x < k.lo ? k.lo - x : x - k.hi; };
  auto path = [&](Rng& rng) {
    double x = x0;
    double t = 0.0;
    if (x >= k.lo && x <= k.hi) return 0.0;
    for (;;) {
      if (t >= options.time_cap) return kNaN;
      const double b = spec.diffusion(x);
      double next = x + spec.drift(x) * dt + std::sqrt(b) * sqdt * rng.normal();
      while (next < lower || next > upper) next = next < lower ? 2.0 * lower - next : 2.0 * upper - next;
      t += dt;
      if (next >= k.lo && next <= k.hi) return t;
      if ((x < k.lo) != (next < k.lo)) return t;  // jumped across K
      if (options.bridge) {
        const double p = std::exp(-2.0 * distance(x) * distance(next) / (b * dt));
        if (rng.uniform() < p) return t;
      }
      x = next;
    }
  };
  const auto raw = run_chunks(n, seed, options.workers, path);
  HittingSample s;
  s.time_cap = options.time_cap;
  s.start = std::to_string(x0);
  s.target = "[" + std::to_string(k.lo) + "," + std::to_string(k.hi) + "]";
  s.seed = seed;
  s.scheme = HittingSample::Scheme::EulerMaruyama;
  s.dt = dt;
  s.bridge = options.bridge;
  return collect(raw, s);
}

MomentEstimate estimate_exp_moment(const HittingSample& sample, double alpha, const EstimateOptions& options) {
  const std::size_t n = sample.times.size();
  if (n == 0) throw DomainError("exponential moment of an empty sample");
  MomentEstimate e;
  e.alpha = alpha;
  e.n = n;
  e.censored = sample.censored;

  std::vector<double> values(n);
  CompensatedSum sum;
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = std::exp(alpha * sample.times[i]);
    if (!std::isfinite(values[i])) e.overflow = true;
    sum.add(values[i]);
  }
  std::vector<double> sorted_times = sample.times;
  std::sort(sorted_times.begin(), sorted_times.end());
  if (std::isnan(options.alpha_star_hint)) {
    const double q90 = sorted_times[static_cast<std::size_t>(0.9 * static_cast<double>(n - 1))];
    CompensatedSum excess;
    std::size_t count = 0;
    for (double t : sorted_times) {
      if (t > q90) {
        excess.add(t - q90);
        ++count;
      }
    }
    e.alpha_star_estimate = count && excess.value() > 0.0 ? static_cast<double>(count) / excess.value()
                                                          : std::numeric_limits<double>::infinity();
  } else {
    e.alpha_star_estimate = options.alpha_star_hint;
  }

  if (e.overflow) {
    e.mean = e.lower_bound = e.ci_half_width = e.std_error = std::numeric_limits<double>::infinity();
    e.tail_flag = true;
    return e;
  }
  e.mean = sum.value() / static_cast<double>(n);
  CompensatedSum squares;
  for (double v : values) squares.add((v - e.mean) * (v - e.mean));
  const double var = n > 1 ? squares.value() / static_cast<double>(n - 1) : 0.0;
  e.std_error = std::sqrt(var / static_cast<double>(n));
  e.ci_half_width = 1.96 * e.std_error;
  const double capped = sample.censored ? std::exp(alpha * sample.time_cap) : 0.0;
  e.lower_bound = (sum.value() + static_cast<double>(sample.censored) * capped) /
                  static_cast<double>(n + sample.censored);

  bool heavy = alpha > 0.0 && alpha >= 0.8 * e.alpha_star_estimate;
  if (n >= 100 && alpha > 0.0) {
    std::vector<double> desc = values;
    const std::size_t top = n / 100;
    std::nth_element(desc.begin(), desc.begin() + static_cast<long>(top), desc.end(), std::greater<>());
    CompensatedSum top_sum;
    for (std::size_t i = 0; i < top; ++i) top_sum.add(desc[i]);
    heavy = heavy || top_sum.value() > 0.5 * sum.value();
  }
  e.tail_flag = heavy;
  if (heavy && options.bootstrap_resamples > 0) {
    Rng rng(options.seed ^ 0xB0075712AB5ULL, 0x5EED);
    std::vector<double> means(static_cast<std::size_t>(options.bootstrap_resamples));
    for (auto& m : means) {
      CompensatedSum s;
      for (std::size_t i = 0; i < n; ++i) s.add(values[rng.below(n)]);
      m = s.value() / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const auto last = means.size() - 1;
    e.bootstrapped = true;
    e.bootstrap_lo = means[static_cast<std::size_t>(0.025 * static_cast<double>(last))];
    e.bootstrap_hi = means[static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(last)))];
  }
  return e;
}

ShiftedMomentEstimate estimate_shifted_moment(const FiniteChain& chain, const InvariantMeasure& pi, int x0,
                                              const TargetSet& k, double t, double alpha_tilde, std::size_t n,
                                              std::uint64_t seed, const SamplingOptions& options) {
  if (!(t >= 0.0)) throw DomainError("shift time must be nonnegative");
  if (x0 < 0 || x0 >= chain.size()) throw ValidationError("start state " + std::to_string(x0) + " out of range");
  const Vector phi = exp_moment_potential(chain, pi, k, alpha_tilde).real();
  ShiftedMomentEstimate out;
  out.oracle = SemigroupPropagator(chain.generator()).apply(t, phi)(x0);

  const JumpTable table(chain);
  const auto raw = run_chunks(n, seed, options.workers, [&](Rng& rng) {
    const int y = t > 0.0 ? table.run(x0, t, rng) : x0;
    return table.hit(y, k, options.time_cap, rng);
  });
  HittingSample s;
  s.time_cap = options.time_cap;
  s.start = std::to_string(x0) + "@t=" + std::to_string(t);
  s.target = describe(k);
  s.seed = seed;
  s = collect(raw, s);
  EstimateOptions eo;
  eo.seed = seed;
  out.estimate = estimate_exp_moment(s, alpha_tilde, eo);
  return out;
}

nlohmann::json to_json(const MomentEstimate& e) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"); };
  nlohmann::json out = {{"alpha", e.alpha},
                        {"mean", num(e.mean)},
                        {"ci_half_width", num(e.ci_half_width)},
                        {"std_error", num(e.std_error)},
                        {"n", e.n},
                        {"censored", e.censored},
                        {"lower_bound", num(e.lower_bound)},
                        {"tail_flag", e.tail_flag},
                        {"alpha_star_estimate", num(e.alpha_star_estimate)}};
  if (e.bootstrapped) out["bootstrap_ci"] = {e.bootstrap_lo, e.bootstrap_hi};
  return out;
}

void write_sample_csv(const HittingSample& sample, std::ostream& out) {
  out << "# start: " << sample.start << "\n"
      << "# target: " << sample.target << "\n"
      << "# seed: " << sample.seed << "\n"
      << "# scheme: "
      << (sample.scheme == HittingSample::Scheme::ExactJump ? "exact_jump" : "euler_maruyama") << "\n";
  if (sample.scheme == HittingSample::Scheme::EulerMaruyama) {
    out << "# dt: " << sample.dt << "\n# bridge: " << (sample.bridge ? "on" : "off") << "\n";
  }
  out << "# censored: " << sample.censored << "\n";
  out << "time\n";
  char buf[32];
  for (double t : sample.times) {
    std::snprintf(buf, sizeof buf, "%.17g", t);
    out << buf << '\n';
  }
}

}  // namespace hitgap
