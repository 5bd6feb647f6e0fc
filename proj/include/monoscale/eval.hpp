#pragma once

// Exact and Monte-Carlo evaluation: J, V, A, the bandit surrogate and the
// expected KL divergence between two memories' policies.

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "monoscale/bandit.hpp"
#include "monoscale/errors.hpp"
#include "monoscale/rng.hpp"
#include "monoscale/router.hpp"

namespace monoscale {

/// Weights over the contexts of a space, in enumerate_contexts order.
class ContextDistribution {
 public:
  static constexpr double kTolerance = 1e-12;

  ContextDistribution() = default;

  explicit ContextDistribution(std::vector<double> weights) : weights_(std::move(weights)) {
    double total = 0.0;
    bool any = false;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("context weights must be finite and nonnegative");
      total += w;
      any = any || w > 0.0;
    }
    if (!any) throw ConfigError("context distribution has empty support");
    if (std::abs(total - 1.0) > kTolerance)
      throw ConfigError("context weights sum to " + std::to_string(total) + ", not 1");
  }

  static ContextDistribution uniform(std::size_t n) {
    if (n == 0) throw ConfigError("uniform distribution over zero contexts");
    return ContextDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static ContextDistribution uniform(const FeatureSpace& space) { return uniform(space.context_count()); }

  /// Normalizes nonnegative weights; the sum must be positive.
  static ContextDistribution normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw ConfigError("cannot normalize weights with zero total");
    for (auto& w : weights) w /= total;
    return ContextDistribution(std::move(weights));
  }

  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_.at(i); }

  std::size_t sample(Stream& stream) const { return stream.categorical(weights_); }

  bool operator==(const ContextDistribution&) const = default;

 private:
  std::vector<double> weights_;
};

/// Total variation distance between two distributions on the same contexts.
inline double total_variation(const ContextDistribution& p, const ContextDistribution& q) {
  if (p.size() != q.size()) throw ConfigError("total variation between distributions of different size");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

enum class EvalMethod { exact, monte_carlo };

struct Evaluation {
  double j = 0.0;
  std::vector<double> per_context_values;  // V(x); empty for monte_carlo
  EvalMethod method = EvalMethod::exact;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::optional<double> std_error;
};

namespace detail {

inline void check_sizes(const Bandit& bandit, const ContextDistribution& dist) {
  if (dist.size() != bandit.contexts().size())
    throw ConfigError("context distribution has " + std::to_string(dist.size()) + " weights, space has " +
                      std::to_string(bandit.contexts().size()) + " contexts");
}

inline double value(const std::vector<double>& policy, const std::vector<double>& rewards) {
  double v = 0.0;
  for (std::size_t y = 0; y < policy.size(); ++y) v += policy[y] * rewards[y];
  return v;
}

}  // namespace detail

/// Sum over y of pi(y|x) r(x,y) for a given policy table.
inline double value_at(const Bandit& bandit, const PolicyTable& policy, std::size_t context) {
  return detail::value(policy[context], bandit.rewards(context));
}

/// J = sum_x D(x) sum_y pi(y|x) r(x,y), summed in context then plan order.
inline Evaluation exact_J(const RouterConfig& config, const Bandit& bandit, const Memory& memory,
                          const ContextDistribution& dist) {
  detail::check_sizes(bandit, dist);
  Evaluation ev;
  ev.per_context_values.resize(dist.size(), 0.0);
  for (std::size_t x = 0; x < dist.size(); ++x) {
    if (dist[x] == 0.0) continue;
    ev.per_context_values[x] = detail::value(policy_distribution(config, bandit, memory, x), bandit.rewards(x));
    ev.j += dist[x] * ev.per_context_values[x];
  }
  return ev;
}

/// A(x, y) = r(x, y) - V_base(x).
inline double advantage(const RouterConfig& config, const Bandit& bandit, const Memory& base, std::size_t context,
                        std::size_t plan) {
  const auto pi = policy_distribution(config, bandit, base, context);
  return bandit.reward(context, plan) - detail::value(pi, bandit.rewards(context));
}

struct SurrogateResult {
  double l = 0.0;            // J(base) + E_x sum_y pi_cand(y|x) A_base(x,y)
  double j_base = 0.0;
  double j_candidate = 0.0;  // recomputed directly from pi_cand and r

  double residual() const { return std::abs(l - j_candidate); }
};

/**
 * The exact bandit surrogate of a candidate memory relative to a base.
 * The candidate's J is computed separately from its own policy, so the
 * identity L = J(candidate) can be checked rather than assumed.
 */
inline SurrogateResult surrogate(const RouterConfig& config, const Bandit& bandit, const Memory& base,
                                 const Memory& candidate, const ContextDistribution& dist) {
  detail::check_sizes(bandit, dist);
  SurrogateResult out;
  double correction = 0.0;
  for (std::size_t x = 0; x < dist.size(); ++x) {
    if (dist[x] == 0.0) continue;
    const auto pb = policy_distribution(config, bandit, base, x);
    const auto pc = policy_distribution(config, bandit, candidate, x);
    const auto& r = bandit.rewards(x);
    const double vb = detail::value(pb, r);
    double adv = 0.0;
    for (std::size_t y = 0; y < pc.size(); ++y) adv += pc[y] * (r[y] - vb);
    out.j_base += dist[x] * vb;
    correction += dist[x] * adv;
  }
  out.l = out.j_base + correction;
  out.j_candidate = exact_J(config, bandit, candidate, dist).j;
  return out;
}

/// Expected KL, or the explicit INFINITE sentinel.
class Divergence {
 public:
  static Divergence finite(double nats) { return Divergence(nats, false); }
  static Divergence infinite() { return Divergence(0.0, true); }

  bool is_infinite() const noexcept { return infinite_; }

  /// Only meaningful when finite.
  double nats() const {
    if (infinite_) throw Error("nats() of an infinite divergence");
    return nats_;
  }

  bool within(double delta) const noexcept { return !infinite_ && nats_ <= delta; }

  /// "INF" or 12 significant digits.
  std::string str() const {
    if (infinite_) return "INF";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", nats_);
    return buf;
  }

  bool operator==(const Divergence&) const = default;

 private:
  Divergence(double n, bool inf) : nats_(n), infinite_(inf) {}
  double nats_;
  bool infinite_;
};

/// KL(p || q) for one pair of distributions over the same plans.
inline Divergence kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] == 0.0) continue;
    if (q[y] == 0.0) return Divergence::infinite();
    s += p[y] * std::log(p[y] / q[y]);
  }
  return Divergence::finite(std::max(s, 0.0));
}

/// E_{x~D} KL(pi_p(.|x) || pi_q(.|x)); contexts of zero weight are skipped.
inline Divergence avg_kl(const RouterConfig& config, const Bandit& bandit, const Memory& memory_p,
                         const Memory& memory_q, const ContextDistribution& dist) {
  detail::check_sizes(bandit, dist);
  double s = 0.0;
  for (std::size_t x = 0; x < dist.size(); ++x) {
    if (dist[x] == 0.0) continue;
    const auto d = kl_divergence(policy_distribution(config, bandit, memory_p, x),
                                 policy_distribution(config, bandit, memory_q, x));
    if (d.is_infinite()) return d;
    s += dist[x] * d.nats();
  }
  return Divergence::finite(s);
}

/**
 * Mean of n sampled rewards under x ~ D, y ~ pi. Each sample consumes one
 * variate each for context, plan and reward. In RewardMode::expected the
 * sampled (x, y) contributes r(x, y) and no reward variate is drawn.
 */
inline Evaluation monte_carlo_J(const RouterConfig& config, const Bandit& bandit, const Memory& memory,
                                const ContextDistribution& dist, std::size_t n, Stream stream) {
  if (n < 1) throw ConfigError("monte_carlo_J needs n >= 1");
  detail::check_sizes(bandit, dist);
  Evaluation ev;
  ev.method = EvalMethod::monte_carlo;
  ev.samples = n;
  ev.seed = stream.seed();
  std::vector<std::optional<std::vector<double>>> cache(dist.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = dist.sample(stream);
    if (!cache[x]) cache[x] = policy_distribution(config, bandit, memory, x);
    const auto y = stream.categorical(*cache[x]);
    const double p = bandit.reward(x, y);
    const double r = bandit.model().mode == RewardMode::expected ? p : sample_reward(p, stream);
    sum += r;
    sum_sq += r * r;
  }
  const double nn = static_cast<double>(n);
  ev.j = sum / nn;
  const double var = n > 1 ? std::max(0.0, (sum_sq - nn * ev.j * ev.j) / (nn - 1.0)) : 0.0;
  ev.std_error = std::sqrt(var / nn);
  return ev;
}

}  // namespace monoscale
