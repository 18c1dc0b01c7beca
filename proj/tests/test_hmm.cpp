#include <doctest.h>

#include <cmath>

#include "hmmfdp/errors.hpp"
#include "hmmfdp/hmm.hpp"
#include "oracles.hpp"

using namespace hmmfdp;

namespace {

ModelParams paper_model() {
  return ModelParams(TransitionMatrix(0.95, 0.05, 0.2, 0.8),
                     EmissionDensity::gaussian(0.0, 1.0),
                     EmissionDensity::gaussian(3.0, 1.0));
}

double phi(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace

TEST_SUITE("hmm.transition") {
  TEST_CASE("stationary distribution matches closed form") {
    auto [pi0, pi1] = stationary_distribution(TransitionMatrix(0.95, 0.05, 0.2, 0.8));
    CHECK(pi0 == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(pi1 == doctest::Approx(0.2).epsilon(1e-12));

    auto [q0, q1] = stationary_distribution(TransitionMatrix(0.9, 0.1, 0.1, 0.9));
    CHECK(q0 == doctest::Approx(0.5).epsilon(1e-12));

    auto [r0, r1] = stationary_distribution(TransitionMatrix(0.7, 0.3, 0.15, 0.85));
    CHECK(r0 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(r1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("stationary distribution is a left eigenvector") {
    const TransitionMatrix A(0.83, 0.17, 0.46, 0.54);
    auto [pi0, pi1] = stationary_distribution(A);
    CHECK(pi0 + pi1 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pi0 * A.a00 + pi1 * A.a10 == doctest::Approx(pi0).epsilon(1e-12));
    CHECK(pi0 * A.a01 + pi1 * A.a11 == doctest::Approx(pi1).epsilon(1e-12));
  }

  TEST_CASE("invalid transition matrices are rejected") {
    CHECK_THROWS_AS(TransitionMatrix(0.5, 0.5, 0.5, 0.5),
                    InvalidParameterError);  // rank deficient
    CHECK_THROWS_AS(TransitionMatrix(0.5, 0.5 + 1e-13, 0.5, 0.5),
                    InvalidParameterError);  // a00 == a10 within 1e-12
    CHECK_THROWS_AS(TransitionMatrix(1.0, 0.0, 0.2, 0.8),
                    InvalidParameterError);  // boundary entries
    CHECK_THROWS_AS(TransitionMatrix(0.9, 0.2, 0.2, 0.8),
                    InvalidParameterError);  // row sum
    // near-singular but full rank is fine
    CHECK_NOTHROW(TransitionMatrix(0.95, 0.05, 0.949, 0.051));
  }

  TEST_CASE("identical emission densities are rejected") {
    CHECK_THROWS_AS(ModelParams(TransitionMatrix(0.95, 0.05, 0.2, 0.8),
                                EmissionDensity::gaussian(0.0, 1.0),
                                EmissionDensity::gaussian(0.0, 1.0)),
                    InvalidParameterError);
  }
}

TEST_SUITE("hmm.forward_backward") {
  TEST_CASE("single observation reduces to the Bayes rule") {
    const ModelParams params = paper_model();
    const std::vector<double> x{0.0};
    const PosteriorChain chain = posterior_chain(params, x);
    const double expected =
        0.8 * phi(0.0) / (0.8 * phi(0.0) + 0.2 * phi(-3.0));
    CHECK(chain.locfdr[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(chain.locfdr[0] == doctest::Approx(0.9972304426162865).epsilon(1e-10));
  }

  TEST_CASE("uninformative likelihood leaves the prior marginals") {
    // f1 is a one-center kernel mixture that coincides with f0 pointwise,
    // so the data carry no information about theta.
    const ModelParams params(TransitionMatrix(0.95, 0.05, 0.2, 0.8),
                             EmissionDensity::gaussian(0.0, 1.0),
                             EmissionDensity::kernel_mixture({0.0}, {1.0}, 1.0));
    const std::vector<double> x{-1.3, 0.4, 2.0, 0.0, -0.7};
    const PosteriorChain chain = posterior_chain(params, x);
    for (double l : chain.locfdr) CHECK(l == doctest::Approx(0.8).epsilon(1e-12));
  }

  TEST_CASE("posterior marginals match exhaustive enumeration") {
    const ModelParams params = paper_model();
    const std::vector<double> x{0.3, 2.7, 3.4};
    const auto post = oracles::posterior_by_enumeration(params, x);
    const PosteriorChain chain = posterior_chain(params, x);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(chain.locfdr[i] ==
            doctest::Approx(oracles::marginal_l(post, i, 0)).epsilon(1e-10));
  }

  TEST_CASE("degenerate likelihood reports the offending index") {
    const ModelParams params(TransitionMatrix(0.95, 0.05, 0.2, 0.8),
                             EmissionDensity::kernel_mixture({0.0}, {1.0}, 0.1),
                             EmissionDensity::kernel_mixture({3.0}, {1.0}, 0.1));
    const std::vector<double> x{0.1, 100.0, 2.9};
    try {
      posterior_chain(params, x);
      FAIL("expected DegenerateLikelihoodError");
    } catch (const DegenerateLikelihoodError& e) {
      CHECK(e.index == 1);
    }
  }

  TEST_CASE("alpha-beta products reproduce the likelihood at every position") {
    const ModelParams params = paper_model();
    const auto [theta, x] = sample_hmm(params, 400, std::uint64_t{7});
    const ForwardBackward fb = forward_backward(params, x);
    for (std::size_t i = 0; i < x.size(); i += 13) {
      const double la0 = fb.log_alpha(i, 0) + fb.log_beta(i, 0);
      const double la1 = fb.log_alpha(i, 1) + fb.log_beta(i, 1);
      const double hi = std::max(la0, la1);
      const double ll = hi + std::log(std::exp(la0 - hi) + std::exp(la1 - hi));
      CHECK(ll == doctest::Approx(fb.log_likelihood).epsilon(1e-8));
    }
  }

  TEST_CASE("no underflow on a million observations") {
    const ModelParams params = paper_model();
    const auto [theta, x] = sample_hmm(params, 1000000, std::uint64_t{11});
    const ForwardBackward fb = forward_backward(params, x);
    CHECK(std::isfinite(fb.log_likelihood));
    for (std::size_t i : {std::size_t{0}, std::size_t{499999}, std::size_t{999999}}) {
      CHECK(std::isfinite(fb.alpha[i][0]));
      CHECK(fb.alpha[i][0] + fb.alpha[i][1] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_SUITE("hmm.posterior_chain") {
  TEST_CASE("two-point transition matches the four-configuration posterior") {
    const ModelParams params = paper_model();
    const std::vector<double> x{0.3, 2.8};
    const auto post = oracles::posterior_by_enumeration(params, x);
    const PosteriorChain chain = posterior_chain(params, x);
    for (int q = 0; q < 2; ++q) {
      const double lq = oracles::marginal_l(post, 0, q);
      for (int qp = 0; qp < 2; ++qp) {
        const double expected = oracles::pairwise_l(post, 1, q, qp) / lq;
        const double got = q == 0 ? (qp == 0 ? chain.transitions[0].m00
                                             : chain.transitions[0].m01)
                                  : (qp == 0 ? chain.transitions[0].m10
                                             : chain.transitions[0].m11);
        CHECK(got == doctest::Approx(expected).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("near-singular transitions still give stochastic rows") {
    const ModelParams params(TransitionMatrix(0.4999, 0.5001, 0.5001, 0.4999),
                             EmissionDensity::gaussian(0.0, 1.0),
                             EmissionDensity::gaussian(3.0, 1.0));
    const auto [theta, x] = sample_hmm(params, 50, std::uint64_t{3});
    const PosteriorChain chain = posterior_chain(params, x);
    for (const Mat2& pi : chain.transitions) {
      CHECK(pi.m00 + pi.m01 == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(pi.m10 + pi.m11 == doctest::Approx(1.0).epsilon(1e-8));
    }
  }

  TEST_CASE("propagated marginals stay consistent along a long chain") {
    const ModelParams params = paper_model();
    const auto [theta, x] = sample_hmm(params, 3200, std::uint64_t{17});
    const PosteriorChain chain = posterior_chain(params, x);
    double p0 = 1.0 - chain.init_prob_state1;
    double p1 = chain.init_prob_state1;
    for (std::size_t i = 1; i < chain.size(); ++i) {
      std::tie(p0, p1) = chain.transitions[i - 1].apply_left(p0, p1);
      CHECK(std::abs(p0 - chain.locfdr[i]) < 1e-8);
    }
  }

  TEST_CASE("pairwise posteriors match enumeration and sum to one") {
    const ModelParams params = paper_model();
    const std::vector<double> x{0.1, 1.8, 3.3, -0.4, 2.2};
    const auto post = oracles::posterior_by_enumeration(params, x);
    const EmissionValues vals = evaluate_emissions(params, x);
    const ForwardBackward fb =
        forward_backward(params.A, stationary_distribution(params.A), vals);
    for (std::size_t i = 1; i < x.size(); ++i) {
      const auto l = pairwise_posterior(fb, params.A, vals, i);
      CHECK(l[0] + l[1] + l[2] + l[3] == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(l[0] == doctest::Approx(oracles::pairwise_l(post, i, 0, 0)).epsilon(1e-10));
      CHECK(l[1] == doctest::Approx(oracles::pairwise_l(post, i, 0, 1)).epsilon(1e-10));
      CHECK(l[2] == doctest::Approx(oracles::pairwise_l(post, i, 1, 0)).epsilon(1e-10));
      CHECK(l[3] == doctest::Approx(oracles::pairwise_l(post, i, 1, 1)).epsilon(1e-10));
    }
  }
}

TEST_SUITE("hmm.sampling") {
  TEST_CASE("fixed seed reproduces the draw bit for bit") {
    const ModelParams params = paper_model();
    const auto [t1, x1] = sample_hmm(params, 500, std::uint64_t{42});
    const auto [t2, x2] = sample_hmm(params, 500, std::uint64_t{42});
    CHECK(t1 == t2);
    CHECK(x1 == x2);
    const auto [t3, x3] = sample_hmm(params, 500, std::uint64_t{43});
    CHECK(x1 != x3);
  }

  TEST_CASE("empirical state frequency approaches the stationary mass") {
    const ModelParams params = paper_model();
    const auto [theta, x] = sample_hmm(params, 100000, std::uint64_t{5});
    double zeros = 0;
    for (int t : theta) zeros += t == 0 ? 1.0 : 0.0;
    CHECK(std::abs(zeros / 1e5 - 0.8) < 0.01);
  }

  TEST_CASE("one-center mixture sampling reduces to a single Gaussian") {
    const double c = 2.5, h = 0.7;
    const EmissionDensity mix = EmissionDensity::kernel_mixture({c}, {1.0}, h);
    Rng rng(99);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += mix.sample(rng);
    CHECK(std::abs(sum / n - c) < 4.0 * h / std::sqrt(static_cast<double>(n)));
  }
}

TEST_SUITE("hmm.viterbi") {
  TEST_CASE("single site takes the prior-weighted argmax") {
    const ModelParams params = paper_model();
    CHECK(viterbi(params, std::vector<double>{0.0})[0] == 0);
    CHECK(viterbi(params, std::vector<double>{3.5})[0] == 1);
  }

  TEST_CASE("matches the exhaustive best path on short series") {
    const ModelParams params = paper_model();
    Rng rng(123);
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t m = 2 + rng.integer(9);  // up to 10
      auto [theta, x] = sample_hmm(params, m, rng);
      CHECK(viterbi(params, x) == oracles::best_path_by_enumeration(params, x));
    }
  }

  TEST_CASE("a far-shifted alternative is never decoded near zero") {
    const ModelParams params(TransitionMatrix(0.95, 0.05, 0.2, 0.8),
                             EmissionDensity::gaussian(0.0, 1.0),
                             EmissionDensity::gaussian(100.0, 1.0));
    const std::vector<double> x{0.2, -0.5, 1.1, 0.0, -1.7};
    for (int q : viterbi(params, x)) CHECK(q == 0);
  }

  TEST_CASE("decoding and posteriors are invariant to density rescaling") {
    const ModelParams params = paper_model();
    const auto [theta, x] = sample_hmm(params, 60, std::uint64_t{8});
    EmissionValues vals = evaluate_emissions(params, x);
    EmissionValues scaled = vals;
    for (auto& v : scaled.f0) v *= 37.5;
    for (auto& v : scaled.f1) v *= 37.5;
    const auto init = stationary_distribution(params.A);
    CHECK(viterbi(params.A, init, vals) == viterbi(params.A, init, scaled));
    const ForwardBackward fb1 = forward_backward(params.A, init, vals);
    const ForwardBackward fb2 = forward_backward(params.A, init, scaled);
    const PosteriorChain c1 = posterior_chain_from(fb1, params.A, vals);
    const PosteriorChain c2 = posterior_chain_from(fb2, params.A, scaled);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(c1.locfdr[i] == doctest::Approx(c2.locfdr[i]).epsilon(1e-12));
  }
}
