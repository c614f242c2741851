#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phibayes/estimators.hpp"
#include "phibayes/model.hpp"
#include "phibayes/rng.hpp"
#include "phibayes/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace phibayes;

namespace {

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

ChainDraws iid_chain(const std::vector<double>& values) {
  ChainDraws c;
  const auto n = static_cast<Eigen::Index>(values.size());
  c.draws = Matrix(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) c.draws(i, 0) = values[static_cast<std::size_t>(i)];
  c.log_post = Vector::Zero(n);
  c.accepted.assign(values.size(), 1);
  c.scale_trace = Vector::Ones(n);
  c.acceptance_rate = 0.3;
  return c;
}

PriorSpec normal_prior(double mean, double sd) {
  PriorSpec p;
  p.kind = PriorKind::Normal;
  p.mean = vec1(mean);
  p.sd = vec1(sd);
  return p;
}

}  // namespace

TEST_CASE("loss-based point estimates on an analytic draw set") {
  // draws 0, 1, ..., 10000 scaled: quantiles are exact order statistics
  std::vector<double> vals(10001);
  for (int i = 0; i <= 10000; ++i) vals[static_cast<std::size_t>(i)] = 0.001 * i;
  std::mt19937_64 shuffler(7);
  std::shuffle(vals.begin(), vals.end(), shuffler);
  ChainDraws chain = iid_chain(vals);

  EstimateReport mean_rep = estimate(chain, LossSpec{LossKind::SquaredError, 0.5});
  CHECK(mean_rep.point[0] == doctest::Approx(5.0).epsilon(1e-12));
  // sd of 0..10 uniform grid is about 2.8868; ess of a shuffled iid chain ~ n
  CHECK(mean_rep.mc_se[0] == doctest::Approx(2.8868 / std::sqrt(10001.0)).epsilon(0.2));
  CHECK(mean_rep.ess[0] > 8000);

  EstimateReport med_rep = estimate(chain, LossSpec{LossKind::AbsoluteError, 0.5});
  CHECK(med_rep.point[0] == doctest::Approx(5.0).epsilon(1e-12));

  EstimateReport q_rep = estimate(chain, LossSpec{LossKind::Quantile, 0.9});
  CHECK(q_rep.point[0] == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(q_rep.mc_se[0] > 0.0);

  // interval bounds are order statistics at integer index positions
  CHECK(mean_rep.ci(0, 0) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(mean_rep.ci(0, 1) == doctest::Approx(9.75).epsilon(1e-9));

  LossSpec bad{LossKind::Quantile, 1.5};
  CHECK_THROWS_AS(estimate(chain, bad), ConfigError);
}

TEST_CASE("credible interval equivariance under monotone maps") {
  std::vector<double> vals(1001);
  RngStream rng(17);
  for (auto& v : vals) v = 0.4 * rng.normal() + 1.2;
  ChainDraws chain = iid_chain(vals);

  // eps = 0.05 with 1001 draws: h = 1000 * 0.025 = 25, an exact index, so
  // the interval of exp(draws) is exactly exp of the interval of the draws
  CredibleInterval raw =
      credible_interval(chain, [](const Vector& a) { return a[0]; }, 0.05);
  CredibleInterval mapped =
      credible_interval(chain, [](const Vector& a) { return std::exp(a[0]); }, 0.05);
  CHECK(mapped.lo == doctest::Approx(std::exp(raw.lo)).epsilon(1e-14));
  CHECK(mapped.hi == doctest::Approx(std::exp(raw.hi)).epsilon(1e-14));
  CHECK(raw.lo < raw.hi);

  // interval brackets the truth for a well-behaved sample
  CHECK(raw.lo < 1.2);
  CHECK(raw.hi > 1.2);

  std::vector<double> few(999, 0.0);
  ChainDraws tiny = iid_chain(few);
  CHECK_THROWS_AS(credible_interval(tiny, [](const Vector& a) { return a[0]; }, 0.05),
                  TooShortError);
  CHECK_THROWS_AS(credible_interval(chain, [](const Vector& a) { return a[0]; }, 0.6),
                  ConfigError);
}

TEST_CASE("batch-means standard error is calibrated on autocorrelated draws") {
  // AR(1) with rho = 0.9: var of the mean of n draws is roughly
  // (1+rho)/(1-rho) * var / n = 19 var / n
  RngStream rng(2025);
  const int n = 40000;
  std::vector<double> vals(n);
  double state = 0.0;
  const double rho = 0.9, innov = std::sqrt(1.0 - rho * rho);
  for (auto& v : vals) {
    state = rho * state + innov * rng.normal();
    v = state;
  }
  ChainDraws chain = iid_chain(vals);
  EstimateReport rep = estimate(chain, LossSpec{LossKind::Quantile, 0.5});
  // batch-means SE of the median ~ sqrt(19 * (pi/2) / n) for a normal target;
  // accept a generous band around the iid-naive value
  const double naive = 1.0 / std::sqrt(double(n));
  CHECK(rep.mc_se[0] > 1.5 * naive);
  CHECK(rep.mc_se[0] < 15.0 * naive);
}

TEST_CASE("posterior mode: conjugate pinned values at gamma = 0") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.7), 120, 808);
  double xbar = 0.0;
  for (double x : data.x) xbar += x;
  xbar /= static_cast<double>(data.n());

  PriorSpec prior = normal_prior(0.0, 10.0);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.0}, vec1(0.6));
  PhiPosterior post = make_phi_posterior(crit, data, prior);

  // criterion scale: maximize -(a-xbar)^2/2 - a^2/200  =>  a = xbar/(1+0.01)
  ModeResult crit_mode = posterior_mode(post);
  CHECK(crit_mode.converged);
  CHECK(crit_mode.x[0] == doctest::Approx(xbar / 1.01).epsilon(1e-7));

  // density scale: maximize -n(a-xbar)^2/2 - a^2/200  =>  conjugate mean
  ModeResult dens_mode = posterior_mode_of_phi_posterior(post);
  CHECK(dens_mode.converged);
  const double conj = data.n() * xbar / (data.n() + 0.01);
  CHECK(dens_mode.x[0] == doctest::Approx(conj).epsilon(1e-8));

  // the two modes are genuinely different objects
  CHECK(std::abs(dens_mode.x[0] - crit_mode.x[0]) > 1e-4);
}

TEST_CASE("posterior mode under a tight prior lands on the prior") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(2.0), 50, 99);
  PriorSpec prior = normal_prior(-1.0, 1e-4);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.5}, vec1(2.0));
  PhiPosterior post = make_phi_posterior(crit, data, prior);
  ModeResult mode = posterior_mode(post);
  CHECK(mode.converged);
  CHECK(mode.x[0] == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("dual point estimate matches closed-form maximum likelihood at gamma 0") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.4), 200, 4711);
  double xbar = std::accumulate(data.x.begin(), data.x.end(), 0.0) /
                static_cast<double>(data.n());
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.0}, vec1(0.0));
  ModeResult mle = dual_mle(crit, data);
  CHECK(mle.converged);
  CHECK(mle.x[0] == doctest::Approx(xbar).epsilon(1e-8));

  Model ex = make_exponential();
  Dataset de = sample(ex, vec1(1.7), 200, 4712);
  double mean_e = std::accumulate(de.x.begin(), de.x.end(), 0.0) /
                  static_cast<double>(de.n());
  DualCriterion ce = make_criterion(ex, DivergenceSpec{0.0}, vec1(1.0));
  ModeResult mle_e = dual_mle(ce, de);
  CHECK(mle_e.converged);
  CHECK(mle_e.x[0] == doctest::Approx(1.0 / mean_e).epsilon(1e-6));
}

TEST_CASE("dual point estimate is consistent for gamma = 0.5") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.3), 10000, 2222);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.5}, vec1(0.3));
  ModeResult est = dual_mle(crit, data);
  CHECK(est.converged);
  CHECK(std::abs(est.x[0] - 0.3) < 3.0 / std::sqrt(10000.0));
}

TEST_CASE("no finite starting point is reported as such") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.0), 30, 1);
  // prior box entirely outside the parameter box: every start has zero prior
  PriorSpec prior;
  prior.kind = PriorKind::UniformBox;
  prior.lo = vec1(15.0);
  prior.hi = vec1(16.0);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.0}, vec1(0.0));
  PhiPosterior post = make_phi_posterior(crit, data, prior);
  CHECK_THROWS_AS(posterior_mode(post), NoFiniteStartError);
}

TEST_CASE("estimates agree with the conjugate law end to end") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.3), 50, 5150);
  PriorSpec prior = normal_prior(0.0, 10.0);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.0}, vec1(0.25));
  PhiPosterior post = make_phi_posterior(crit, data, prior);

  double sum = 0.0;
  for (double x : data.x) sum += x;
  const double prec = 0.01;
  const double m_post = sum / (data.n() + prec);
  const double sd_post = 1.0 / std::sqrt(data.n() + prec);

  SamplerConfig scfg;
  scfg.steps = 60000;
  scfg.burn_in = 10000;
  scfg.proposal_scale = Vector::Constant(1, sd_post);
  LogTarget target = [&post](const Vector& a) { return log_unnormalized(post, a); };
  ChainDraws chain = run_chain(target, vec1(0.0), scfg, 31337);

  EstimateReport rep = estimate(chain, LossSpec{LossKind::SquaredError, 0.5});
  CHECK(rep.mc_se[0] < 0.01);
  CHECK(std::abs(rep.point[0] - m_post) < 3.0 * rep.mc_se[0]);
  // central interval approximates the conjugate normal quantiles
  CHECK(rep.ci(0, 0) == doctest::Approx(m_post - 1.959963984540054 * sd_post).epsilon(0.05));
  CHECK(rep.ci(0, 1) == doctest::Approx(m_post + 1.959963984540054 * sd_post).epsilon(0.05));
}
