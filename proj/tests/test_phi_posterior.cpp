#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phibayes/model.hpp"
#include "phibayes/phi_posterior.hpp"
#include "phibayes/rng.hpp"
#include "phibayes/types.hpp"

#include <cmath>

using namespace phibayes;

namespace {

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

PriorSpec normal_prior(double mean, double sd) {
  PriorSpec p;
  p.kind = PriorKind::Normal;
  p.mean = vec1(mean);
  p.sd = vec1(sd);
  return p;
}

PriorSpec box_prior(double lo, double hi) {
  PriorSpec p;
  p.kind = PriorKind::UniformBox;
  p.lo = vec1(lo);
  p.hi = vec1(hi);
  return p;
}

// Conjugate posterior for N(alpha, 1) data with N(m0, sd0^2) prior.
void conjugate_normal(const Dataset& data, double m0, double sd0, double& m_post,
                      double& v_post) {
  const double prec = 1.0 / (sd0 * sd0);
  double sum = 0.0;
  for (double x : data.x) sum += x;
  v_post = 1.0 / (data.n() + prec);
  m_post = (sum + prec * m0) * v_post;
}

}  // namespace

TEST_CASE("prior evaluation and validation") {
  PriorSpec pn = normal_prior(1.0, 2.0);
  // N(1, 4) log-density at 0: -1/8 - log(2) - log(sqrt(2 pi))
  CHECK(log_prior(pn, vec1(0.0)) ==
        doctest::Approx(-0.125 - std::log(2.0) - 0.9189385332046727).epsilon(1e-14));
  CHECK(prior_mean(pn)[0] == 1.0);

  PriorSpec pb = box_prior(-2.0, 6.0);
  CHECK(log_prior(pb, vec1(0.0)) == doctest::Approx(-std::log(8.0)).epsilon(1e-14));
  CHECK(log_prior(pb, vec1(6.5)) == -std::numeric_limits<double>::infinity());
  CHECK(prior_mean(pb)[0] == 2.0);

  Model nl = make_normal_location();
  CHECK_NOTHROW(validate_prior(pn, nl));
  PriorSpec bad = normal_prior(0.0, -1.0);
  CHECK_THROWS_AS(validate_prior(bad, nl), ConfigError);
  PriorSpec mismatched = pn;
  mismatched.mean = Vector(2);
  mismatched.mean << 0.0, 0.0;
  CHECK_THROWS_AS(validate_prior(mismatched, nl), ConfigError);
  PriorSpec improper = box_prior(0.0, std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(validate_prior(improper, nl), ConfigError);
  PriorSpec inverted = box_prior(2.0, -2.0);
  CHECK_THROWS_AS(validate_prior(inverted, nl), ConfigError);
}

TEST_CASE("log-unnormalized density identities at gamma = 0") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.3), 40, 777);
  PriorSpec prior = normal_prior(0.0, 10.0);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.0}, vec1(0.25));
  PhiPosterior post = make_phi_posterior(crit, data, prior);

  // at gamma = 0 the difference of log posteriors is the log-likelihood
  // difference plus the log-prior difference: Bayes rule recovered exactly
  for (double a1 : {-0.5, 0.1, 0.8}) {
    for (double a2 : {-1.2, 0.4}) {
      double want = 0.0;
      for (double x : data.x)
        want += log_density(nl, vec1(a1), x) - log_density(nl, vec1(a2), x);
      want += log_prior(prior, vec1(a1)) - log_prior(prior, vec1(a2));
      const double got =
          log_unnormalized(post, vec1(a1)) - log_unnormalized(post, vec1(a2));
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }

  // escort choice shifts gamma = 0 log-posteriors by an alpha-independent
  // constant only
  DualCriterion crit2 = make_criterion(nl, DivergenceSpec{0.0}, vec1(2.0));
  PhiPosterior post2 = make_phi_posterior(crit2, data, prior);
  const double shift = log_unnormalized(post, vec1(0.0)) - log_unnormalized(post2, vec1(0.0));
  for (double a : {-1.0, -0.2, 0.6, 1.4})
    CHECK(log_unnormalized(post, vec1(a)) - log_unnormalized(post2, vec1(a)) ==
          doctest::Approx(shift).epsilon(1e-9));
}

TEST_CASE("evaluation at the escort reduces to the log prior") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.5), 25, 123);
  PriorSpec prior = normal_prior(0.0, 5.0);
  for (double g : {0.0, 0.5, 1.0, 2.0}) {
    DualCriterion crit = make_criterion(nl, DivergenceSpec{g}, vec1(0.4));
    PhiPosterior post = make_phi_posterior(crit, data, prior);
    CHECK(log_unnormalized(post, vec1(0.4)) ==
          doctest::Approx(log_prior(prior, vec1(0.4))).epsilon(1e-10));
  }
}

TEST_CASE("out-of-box and infinite-divergence points get -inf and are counted") {
  Model nls = make_normal_location_scale();
  Dataset data = sample(nls, Vector{(Vector(2) << 0.0, 1.0).finished()}, 30, 9);
  PriorSpec prior;
  prior.kind = PriorKind::Normal;
  prior.mean = (Vector(2) << 0.0, 1.0).finished();
  prior.sd = (Vector(2) << 5.0, 2.0).finished();
  DualCriterion crit =
      make_criterion(nls, DivergenceSpec{2.0}, (Vector(2) << 0.0, 1.0).finished());
  PhiPosterior post = make_phi_posterior(crit, data, prior);

  CHECK(log_unnormalized(post, (Vector(2) << 0.0, -1.0).finished()) ==
        -std::numeric_limits<double>::infinity());
  CHECK(post.divergence_rejections->load() == 0);
  // sigma small enough that p_theta^2/p_alpha is non-integrable
  CHECK(log_unnormalized(post, (Vector(2) << 0.0, 0.5).finished()) ==
        -std::numeric_limits<double>::infinity());
  CHECK(post.divergence_rejections->load() == 1);
  CHECK(std::isfinite(log_unnormalized(post, (Vector(2) << 0.2, 1.1).finished())));
}

TEST_CASE("tempering scales the criterion term linearly") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.0), 20, 55);
  PriorSpec prior = normal_prior(0.0, 3.0);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.5}, vec1(0.1));
  PhiPosterior p1 = make_phi_posterior(crit, data, prior, 1.0);
  PhiPosterior p2 = make_phi_posterior(crit, data, prior, 2.5);
  for (double a : {-0.7, 0.0, 0.9}) {
    const double c1 = log_unnormalized(p1, vec1(a)) - log_prior(prior, vec1(a));
    const double c2 = log_unnormalized(p2, vec1(a)) - log_prior(prior, vec1(a));
    CHECK(c2 == doctest::Approx(2.5 * c1).epsilon(1e-10));
  }
  CHECK_THROWS_AS(make_phi_posterior(crit, data, prior, 0.0), ConfigError);
  CHECK_THROWS_AS(make_phi_posterior(crit, Dataset{}, prior), ConfigError);
}

TEST_CASE("sequential update multiplies in new data exactly") {
  Model nl = make_normal_location();
  Dataset full = sample(nl, vec1(0.6), 100, 2024);
  Dataset first{std::vector<double>(full.x.begin(), full.x.begin() + 60)};
  Dataset second{std::vector<double>(full.x.begin() + 60, full.x.end())};
  PriorSpec prior = normal_prior(0.0, 10.0);

  for (double g : {0.0, 0.5}) {
    DualCriterion crit = make_criterion(nl, DivergenceSpec{g}, vec1(0.55));
    PhiPosterior all_at_once = make_phi_posterior(crit, full, prior);
    PhiPosterior staged = sequential_update(make_phi_posterior(crit, first, prior), second);
    REQUIRE(staged.data.n() == 100);
    // identical escort, identical combined data: the two builds must agree
    // pointwise up to a shared constant; at gamma = 0 the constant is zero too
    const double c0 = log_unnormalized(all_at_once, vec1(0.0)) -
                      log_unnormalized(staged, vec1(0.0));
    for (double a : {-1.5, -0.3, 0.2, 0.61, 1.8}) {
      const double da = log_unnormalized(all_at_once, vec1(a));
      const double db = log_unnormalized(staged, vec1(a));
      CHECK(da - db == doctest::Approx(c0).epsilon(1e-12));
      CHECK(da == doctest::Approx(db).epsilon(1e-10));
    }
  }
}

TEST_CASE("normalized one-dimensional posterior matches the conjugate law") {
  Model nl = make_normal_location();
  Dataset data = sample(nl, vec1(0.3), 50, 31);
  PriorSpec prior = normal_prior(0.0, 10.0);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.0}, vec1(0.2));
  PhiPosterior post = make_phi_posterior(crit, data, prior);
  NormalizedPosterior np = normalize_1d(post);

  double m_post, v_post;
  conjugate_normal(data, 0.0, 10.0, m_post, v_post);

  // quadrature mass is one by construction
  double mass = 0.0, mean = 0.0, second = 0.0;
  for (Eigen::Index i = 0; i < np.nodes.size(); ++i) {
    mass += np.weights[i] * np.density[i];
    mean += np.weights[i] * np.density[i] * np.nodes[i];
    second += np.weights[i] * np.density[i] * np.nodes[i] * np.nodes[i];
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean == doctest::Approx(m_post).epsilon(1e-9));
  CHECK(second - mean * mean == doctest::Approx(v_post).epsilon(1e-6));

  // pointwise agreement with the closed-form density where it has mass
  const double peak = 1.0 / std::sqrt(2.0 * M_PI * v_post);
  for (Eigen::Index i = 0; i < np.nodes.size(); ++i) {
    const double a = np.nodes[i];
    const double want =
        peak * std::exp(-0.5 * (a - m_post) * (a - m_post) / v_post);
    if (want > 1e-10 * peak)
      CHECK(np.density[i] == doctest::Approx(want).epsilon(1e-6));
  }
  CHECK_FALSE(np.underflow_warning);
}

TEST_CASE("normalization flags extreme underflow but still integrates") {
  Model nl = make_normal_location();
  // tiny prior far from the data mass: peak log-density is hugely negative
  Dataset data = sample(nl, vec1(6.0), 300, 404);
  PriorSpec prior = normal_prior(0.0, 0.01);
  DualCriterion crit = make_criterion(nl, DivergenceSpec{0.0}, vec1(6.0));
  PhiPosterior post = make_phi_posterior(crit, data, prior);
  NormalizedPosterior np = normalize_1d(post);
  CHECK(np.underflow_warning);
  double mass = 0.0;
  for (Eigen::Index i = 0; i < np.nodes.size(); ++i)
    mass += np.weights[i] * np.density[i];
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  // even after centering, the mean must match the conjugate law
  double m_post, v_post;
  conjugate_normal(data, 0.0, 0.01, m_post, v_post);
  double mean = 0.0;
  for (Eigen::Index i = 0; i < np.nodes.size(); ++i)
    mean += np.weights[i] * np.density[i] * np.nodes[i];
  CHECK(mean == doctest::Approx(m_post).epsilon(1e-6));
}
