#include <doctest.h>

#include "dse/errors.hpp"
#include "dse/estimator.hpp"
#include "dse/scenario.hpp"
#include "dse/simulation.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace dse;

namespace {

SystemModel scalar_model(double a, double r = 0.01)
{
	return SystemModel(Matrix::Constant(1, 1, a), Matrix::Ones(1, 1), Matrix::Constant(1, 1, 0.01),
		Matrix::Constant(1, 1, r));
}

// Four states: SCC {1,2,3} is the parent, state 4 drives state 1.
// Agents on states 1, 2 (beta) and 4 (gamma); no alpha agents. The plant is
// stable, so the tight margin is what forces a nonzero gain.
Scenario no_alpha_scenario()
{
	Scenario s;
	s.name = "no-alpha";
	s.seed = 91;
	s.horizon = 400;
	s.system.n = 4;
	s.system.edges = {{0, 1, 0.3}, {1, 2, 0.3}, {2, 0, 0.3}, {3, 0, 0.2}, {3, 3, 0.4}, {0, 0, 0.9}};
	s.system.process_noise = {"identity", 0.01, {}};
	s.system.measurement_variance = {0.01, 0.01, 0.01};
	s.agent_states = {0, 1, 3};
	s.network.weights = {WeightRule::Random, 3, 0.5, 1.5};
	s.gain.seed = 5;
	s.gain.margin = 0.6;
	s.gain.norm_target = true;
	s.detection.levels = {1.0, 2.0, 3.0};
	s.mitigation.enabled = false;
	s.monte_carlo.runs = 20;
	validate_scenario(s);
	return s;
}

double mean_post_onset_residual(const SimulationTrace& t, int agent, int onset)
{
	double sum = 0.0;
	int count = 0;
	for (const StepRecord& r : t.steps)
		if (r.k >= onset) {
			sum += r.residuals(agent);
			++count;
		}
	return sum / count;
}

} // namespace

TEST_CASE("predict step")
{
	RngStream rng(8);
	Matrix A = testutil::random_matrix(rng, 3, 3);

	SUBCASE("shared estimate is a consensus fixed point")
	{
		Matrix W = testutil::random_matrix(rng, 4, 4, 0.1, 1.0);
		for (int i = 0; i < 4; ++i)
			W.row(i) /= W.row(i).sum();
		Vector v = testutil::random_matrix(rng, 3, 1);
		for (const Vector& p : predict_step(std::vector<Vector>(4, v), W, A))
			CHECK((p - A * v).cwiseAbs().maxCoeff() <= 1e-14);
	}
	SUBCASE("single agent is the classic predictor")
	{
		Vector v = testutil::random_matrix(rng, 3, 1);
		CHECK(predict_step({v}, Matrix::Ones(1, 1), A)[0] == A * v);
	}
	SUBCASE("matches a double loop over agents")
	{
		Matrix W = testutil::random_matrix(rng, 4, 4, 0.0, 1.0);
		W(0, 2) = 0.0;
		std::vector<Vector> posts;
		for (int i = 0; i < 4; ++i)
			posts.push_back(testutil::random_matrix(rng, 3, 1));
		auto got = predict_step(posts, W, A);
		for (int i = 0; i < 4; ++i)
			for (int r = 0; r < 3; ++r) {
				double expect = 0.0;
				for (int j = 0; j < 4; ++j)
					for (int c = 0; c < 3; ++c)
						expect += W(i, j) * A(r, c) * posts[j](c);
				CHECK(std::abs(got[i](r) - expect) <= 1e-13);
			}
	}
	SUBCASE("rejects a mismatched W")
	{
		CHECK_THROWS_AS(predict_step({Vector::Zero(3)}, Matrix::Ones(2, 2), A), ValidationError);
	}
}

TEST_CASE("update step")
{
	RngStream rng(9);
	Matrix C = testutil::random_matrix(rng, 3, 4);
	Vector prior = testutil::random_matrix(rng, 4, 1);
	Vector y = testutil::random_matrix(rng, 3, 1);

	CHECK(update_step(prior, Matrix::Zero(4, 4), y, C, {0, 1, 2}) == prior);

	Vector exact = C * prior;
	Matrix K = testutil::random_matrix(rng, 4, 4);
	CHECK((update_step(prior, K, exact, C, {0, 2}) - prior).cwiseAbs().maxCoeff() <= 1e-15);

	// x_post = 2 + 0.5 (3 - 2)
	Vector post = update_step(Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 0.5), Vector::Constant(1, 3.0),
		Matrix::Ones(1, 1), {0});
	CHECK(post(0) == doctest::Approx(2.5).epsilon(1e-15));

	// only listed neighbours contribute
	Matrix I = Matrix::Identity(2, 2);
	Vector got = update_step(Vector::Zero(2), I, Vector::Constant(2, 1.0), I, {1});
	CHECK(got(0) == 0.0);
	CHECK(got(1) == 1.0);
}

TEST_CASE("residuals")
{
	Vector y = Vector::Constant(1, 5.0);
	CHECK(compute_residuals({Vector::Constant(1, 3.0)}, y, Matrix::Ones(1, 1))(0) == 2.0);
	CHECK(compute_residuals({Vector::Constant(1, 7.0)}, y, Matrix::Ones(1, 1))(0) == 2.0);
	CHECK(compute_residuals({Vector::Constant(1, 5.0)}, y, Matrix::Ones(1, 1))(0) == 0.0);
}

TEST_CASE("scalar chain over three steps with fixed noise")
{
	// x_k = 0.8 x_{k-1} + nu_k, y_k = x_k + zeta_k, K = 0.5, x_0 = 1, x_hat_0 = 0
	const double nu[3] = {0.1, -0.2, 0.05};
	const double zeta[3] = {0.02, 0.01, -0.03};
	const double want_post[3] = {0.46, 0.449, 0.3976};
	const double want_r[3] = {0.46, 0.081, 0.0384};
	Matrix A = Matrix::Constant(1, 1, 0.8);
	Matrix C = Matrix::Ones(1, 1);
	double x = 1.0;
	std::vector<Vector> posts = {Vector::Zero(1)};
	for (int k = 0; k < 3; ++k) {
		x = 0.8 * x + nu[k];
		Vector y = Vector::Constant(1, x + zeta[k]);
		auto priors = predict_step(posts, Matrix::Ones(1, 1), A);
		posts[0] = update_step(priors[0], Matrix::Constant(1, 1, 0.5), y, C, {0});
		CHECK(posts[0](0) == doctest::Approx(want_post[k]).epsilon(1e-14));
		CHECK(compute_residuals(posts, y, C)(0) == doctest::Approx(want_r[k]).epsilon(1e-12));
	}
}

TEST_CASE("detection thresholds")
{
	SystemModel m = scalar_model(0.5);
	ThresholdTable t = detection_thresholds(0.068, m, {1, 2, 3, 4});
	CHECK(t.theta2[0] == doctest::Approx(0.078).epsilon(1e-12));
	const double kappa[4] = {0.683, 0.954, 0.997, 0.9999};
	for (int l = 0; l < 4; ++l) {
		CHECK(std::abs(t.levels[l].kappa - kappa[l]) <= 0.001);
		if (l > 0)
			CHECK(t.theta(0, l) > t.theta(0, l - 1));
	}

	ThresholdTable from_rate = detection_thresholds(0.068, m, {}, {0.046});
	REQUIRE(from_rate.levels.size() == 1);
	CHECK(std::abs(from_rate.levels[0].m - 2.0) <= 0.01);

	// union of explicit levels and rates, sorted and deduplicated
	ThresholdTable both = detection_thresholds(0.068, m, {3, 1, 3}, {0.3});
	REQUIRE(both.levels.size() == 3);
	CHECK(both.levels[0].m == 1.0);
	CHECK(both.levels[2].m == 3.0);

	// Euclidean norm of a non-unit row
	SystemModel wide(Matrix::Identity(2, 2) * 0.5, Matrix{{3.0, 4.0}}, Matrix::Identity(2, 2) * 0.01,
		Matrix::Constant(1, 1, 0.02));
	CHECK(detection_thresholds(0.1, wide, {1}).theta2[0] == doctest::Approx(0.52).epsilon(1e-14));

	CHECK_THROWS_AS(detection_thresholds(0.068, m, {0.0}), ValidationError);
	CHECK_THROWS_AS(detection_thresholds(0.068, m, {-1.0}), ValidationError);
	CHECK_THROWS_AS(detection_thresholds(0.068, m, {}, {1.0}), ValidationError);
	CHECK_THROWS_AS(detection_thresholds(0.068, m, {}, {0.0}), ValidationError);
	CHECK_THROWS_AS(detection_thresholds(0.068, m, {}, {}), ValidationError);
	CHECK_THROWS_AS(detection_thresholds(-0.1, m, {1}), ValidationError);
}

TEST_CASE("detect reports the largest crossed level")
{
	SystemModel m = scalar_model(0.5);
	ThresholdTable t = detection_thresholds(0.068, m, {1, 2, 3});
	const double theta2 = t.theta2[0];

	CHECK(detect(Vector::Zero(1), t, 5).empty());
	CHECK(detect(Vector::Constant(1, 0.5 * theta2), t, 5).empty());

	auto ev = detect(Vector::Constant(1, 2.5 * theta2), t, 7);
	REQUIRE(ev.size() == 1);
	CHECK(ev[0].m == 2.0);
	CHECK(ev[0].k == 7);
	CHECK(std::abs(ev[0].kappa - 0.954) <= 0.001);
	CHECK(ev[0].false_alarm == doctest::Approx(1.0 - ev[0].kappa));
	CHECK(ev[0].residual >= ev[0].theta);

	auto top = detect(Vector::Constant(1, 10 * theta2), t, 7);
	REQUIRE(top.size() == 1);
	CHECK(top[0].m == 3.0);

	// exact threshold counts as crossed
	CHECK(crossed_level(t.theta(0, 0), t, 0) == 0);
	CHECK(crossed_level(std::nextafter(t.theta(0, 0), 0.0), t, 0) == -1);
}

TEST_CASE("doubling a fixed attack at least doubles the residual excess")
{
	Scenario s = no_alpha_scenario();
	s.horizon = 200;
	auto cache = prepare_cache(s);
	auto run = [&](double level) {
		Scenario a = s;
		if (level > 0.0)
			a.attacks = {{0, FixedAttack{level}, 50, std::nullopt}};
		return mean_post_onset_residual(run_simulation(a, 17, cache), 0, 50);
	};
	const double base = run(0.0);
	const double one = run(0.5);
	const double two = run(1.0);
	CHECK(one > base);
	CHECK(two - base >= 2.0 * (one - base));
}

TEST_CASE("without alpha agents an attack shows up only at the attacked agent")
{
	Scenario s = no_alpha_scenario();
	auto cache = prepare_cache(s);
	const Configuration& cfg = *cache->root(s.agent_states);
	REQUIRE(cfg.design.isolation.pairs.empty());
	REQUIRE(!cfg.design.K.isZero(0.0));

	// crossing rate at m = 2 per agent from k = 50 on, pooled over 20 runs
	auto rates = [&](const Scenario& sc) {
		std::vector<double> cross(3, 0.0);
		double trials = 0.0;
		for (int r = 0; r < 20; ++r) {
			SimulationTrace t = run_simulation(sc, run_seed(sc.seed, r), cache);
			for (const StepRecord& rec : t.steps) {
				if (rec.k < 50)
					continue;
				++trials;
				for (int i = 0; i < 3; ++i)
					cross[i] += rec.crossed[i] >= 1;
			}
		}
		for (double& c : cross)
			c /= trials;
		return cross;
	};
	const std::vector<double> quiet = rates(s);
	s.attacks = {{2, FixedAttack{1.0}, 50, std::nullopt}};
	const std::vector<double> attacked = rates(s);

	CHECK(attacked[2] >= 0.9);
	for (int i = 0; i < 2; ++i)
		CHECK(std::abs(attacked[i] - quiet[i]) <= 0.01);
}
