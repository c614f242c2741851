#include "phibayes/mcmc.hpp"

#include "phibayes/rng.hpp"

#include <cmath>

namespace phibayes {

void validate(const SamplerConfig& cfg, int dim) {
  if (cfg.steps <= cfg.burn_in) throw ConfigError("mcmc steps must exceed burn_in");
  if (cfg.burn_in < 0) throw ConfigError("mcmc burn_in must be >= 0");
  if (cfg.thin < 1) throw ConfigError("mcmc thin must be >= 1");
  if (cfg.proposal_scale.size() != dim)
    throw ConfigError("proposal scale dimension mismatch");
  for (Eigen::Index j = 0; j < cfg.proposal_scale.size(); ++j)
    if (!(cfg.proposal_scale[j] > 0.0) || !std::isfinite(cfg.proposal_scale[j]))
      throw ConfigError("proposal scale must be positive and finite");
  if (!(cfg.target_acceptance > 0.0 && cfg.target_acceptance < 1.0))
    throw ConfigError("target acceptance must be in (0, 1)");
}

ChainDraws run_chain(const LogTarget& target, const Vector& init,
                     const SamplerConfig& cfg, std::uint64_t seed) {
  const auto d = init.size();
  validate(cfg, static_cast<int>(d));

  double logp = target(init);
  if (!std::isfinite(logp))
    throw InitInvalidError("log target is not finite at the chain start");

  RngStream rng(seed);
  const long retained = (cfg.steps - cfg.burn_in) / cfg.thin;

  ChainDraws out;
  out.draws = Matrix(retained, d);
  out.log_post = Vector(retained);
  out.accepted.resize(static_cast<std::size_t>(retained));
  out.scale_trace = Vector(cfg.steps);
  out.burn_in = cfg.burn_in;
  out.thin = cfg.thin;
  out.seed = seed;

  Vector x = init;
  Vector prop(d);
  double log_mult = 0.0;
  long post_accepts = 0;
  Eigen::Index kept = 0;

  for (long t = 1; t <= cfg.steps; ++t) {
    const double mult = std::exp(log_mult);
    for (Eigen::Index j = 0; j < d; ++j)
      prop[j] = x[j] + mult * cfg.proposal_scale[j] * rng.normal();
    const double logp_prop = target(prop);
    const double u = rng.uniform();  // always drawn, to keep streams aligned
    bool accept = false;
    if (logp_prop > -std::numeric_limits<double>::infinity() &&
        std::log(u) < logp_prop - logp) {
      accept = true;
      x = prop;
      logp = logp_prop;
    }
    if (cfg.adapt && t <= cfg.burn_in) {
      // Robbins-Monro on the log scale; the decaying gain makes the
      // adaptation diminishing well before the freeze.
      const double gain = std::pow(static_cast<double>(t), -0.6);
      log_mult += gain * ((accept ? 1.0 : 0.0) - cfg.target_acceptance);
    }
    out.scale_trace[t - 1] = std::exp(log_mult);
    if (t > cfg.burn_in) {
      if (accept) ++post_accepts;
      if ((t - cfg.burn_in) % cfg.thin == 0 && kept < retained) {
        out.draws.row(kept) = x.transpose();
        out.log_post[kept] = logp;
        out.accepted[static_cast<std::size_t>(kept)] = accept ? 1 : 0;
        ++kept;
      }
    }
  }
  out.acceptance_rate =
      static_cast<double>(post_accepts) / static_cast<double>(cfg.steps - cfg.burn_in);
  out.stuck_warning = out.acceptance_rate < 0.01;
  return out;
}

namespace {

// Geyer initial-positive-sequence integrated autocorrelation time.
double ess_one(const Vector& y) {
  const auto n = y.size();
  const double mean = y.mean();
  Vector c = y.array() - mean;
  const double c0 = c.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return 1.0;  // degenerate coordinate

  const auto max_lag = std::min<Eigen::Index>(n - 2, 10000);
  double tau = 1.0;  // rho_0
  for (Eigen::Index m = 0;; ++m) {
    const Eigen::Index k1 = 2 * m + 1, k2 = 2 * m + 2;
    if (k2 > max_lag) break;
    double r1 = 0.0, r2 = 0.0;
    for (Eigen::Index i = 0; i + k1 < n; ++i) r1 += c[i] * c[i + k1];
    for (Eigen::Index i = 0; i + k2 < n; ++i) r2 += c[i] * c[i + k2];
    r1 /= static_cast<double>(n) * c0;
    r2 /= static_cast<double>(n) * c0;
    const double pair = r1 + r2;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::max(1.0, static_cast<double>(n) / tau);
}

}  // namespace

Diagnostics diagnostics(const ChainDraws& chain) {
  const auto n = chain.draws.rows();
  if (n < 100) throw TooShortError("need at least 100 retained draws for diagnostics");
  Diagnostics diag;
  diag.acceptance = chain.acceptance_rate;
  diag.ess = Vector(chain.draws.cols());
  for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) {
    const Vector col = chain.draws.col(j);
    const double var = (col.array() - col.mean()).square().sum();
    // relative floor: an exactly-stuck chain still leaves summation noise
    const double scale = std::max(1.0, std::abs(col.mean()));
    if (!(var > static_cast<double>(n) * 1e-28 * scale * scale)) {
      diag.degenerate = true;
      diag.ess[j] = 1.0;
    } else {
      diag.ess[j] = ess_one(col);
    }
  }
  return diag;
}

Vector split_rhat(const std::vector<ChainDraws>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("split R-hat needs >= 2 chains");
  const auto n = chains.front().draws.rows();
  const auto d = chains.front().draws.cols();
  for (const auto& c : chains)
    if (c.draws.rows() != n || c.draws.cols() != d)
      throw std::invalid_argument("split R-hat needs equally sized chains");
  const auto half = n / 2;
  if (half < 2) throw TooShortError("chains too short for split R-hat");

  Vector rhat(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<double> means, vars;
    for (const auto& c : chains) {
      for (int piece = 0; piece < 2; ++piece) {
        const Vector seg = c.draws.col(j).segment(piece * half, half);
        const double m = seg.mean();
        means.push_back(m);
        vars.push_back((seg.array() - m).square().sum() / static_cast<double>(half - 1));
      }
    }
    const auto mcount = static_cast<double>(means.size());
    double grand = 0.0;
    for (const double m : means) grand += m;
    grand /= mcount;
    double b = 0.0;
    for (const double m : means) b += (m - grand) * (m - grand);
    b *= static_cast<double>(half) / (mcount - 1.0);
    double w = 0.0;
    for (const double v : vars) w += v;
    w /= mcount;
    if (!(w > 0.0)) {
      rhat[j] = 1.0;  // all segments constant
      continue;
    }
    const double var_plus =
        (static_cast<double>(half - 1) * w + b) / static_cast<double>(half);
    rhat[j] = std::sqrt(var_plus / w);
  }
  return rhat;
}

}  // namespace phibayes
