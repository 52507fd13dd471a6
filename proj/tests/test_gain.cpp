#include <doctest.h>

#include "bundled.hpp"
#include "dse/errors.hpp"
#include "dse/gain.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace dse;

namespace {

struct Setup
{
	SystemModel model;
	std::vector<AgentClass> types;
	AgentNetwork net;
	OutputOperators op;
};

Setup ten_state(std::uint64_t w_seed = 5)
{
	Setup s{testutil::ten_state_model(), {}, {}, {}};
	s.types = classify_agents(analyze_structure(testutil::ten_state_digraph()), {0, 5, 9, 6});
	s.net = build_networks(4, s.types, {}, {WeightRule::Random, w_seed});
	s.op = assemble_output_operators(s.net, s.model);
	return s;
}

bool block_diagonal(const Matrix& K, int N, int n)
{
	for (int i = 0; i < N; ++i)
		for (int j = 0; j < N; ++j)
			if (i != j && !K.block(i * n, j * n, n, n).isZero(0.0))
				return false;
	return true;
}

} // namespace

TEST_CASE("error matrix reductions")
{
	RngStream rng(4);
	Matrix W = testutil::random_matrix(rng, 3, 3, 0.0, 1.0);
	Matrix A = testutil::random_matrix(rng, 2, 2);
	Matrix D = testutil::random_matrix(rng, 6, 6);
	CHECK(assemble_error_matrix(W, A, Matrix::Zero(6, 6), D) == kron_product(W, A));

	Matrix a1 = testutil::random_matrix(rng, 3, 3);
	Matrix k1 = testutil::random_matrix(rng, 3, 3);
	Vector c = testutil::random_matrix(rng, 3, 1);
	Matrix got = assemble_error_matrix(Matrix::Ones(1, 1), a1, k1, c * c.transpose());
	Matrix expect = a1 - k1 * c * c.transpose() * a1;
	CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("error matrix equals an index-level expansion")
{
	RngStream rng(21);
	const int N = 3, n = 2;
	Matrix W = testutil::random_matrix(rng, N, N, 0.0, 1.0);
	Matrix A = testutil::random_matrix(rng, n, n);
	Matrix K = Matrix::Zero(N * n, N * n), D = Matrix::Zero(N * n, N * n);
	for (int i = 0; i < N; ++i) {
		K.block(i * n, i * n, n, n) = testutil::random_matrix(rng, n, n);
		D.block(i * n, i * n, n, n) = testutil::random_matrix(rng, n, n);
	}
	Matrix got = assemble_error_matrix(W, A, K, D);
	// (W kron A)[(i,r),(j,s)] = W[i][j] A[r][s]; the product terms are summed
	// over every intermediate (p,t) and (q,u) index pair.
	for (int i = 0; i < N; ++i)
		for (int r = 0; r < n; ++r)
			for (int j = 0; j < N; ++j)
				for (int s = 0; s < n; ++s) {
					double wa = W(i, j) * A(r, s);
					double kdwa = 0.0;
					for (int p = 0; p < N; ++p)
						for (int t = 0; t < n; ++t)
							for (int q = 0; q < N; ++q)
								for (int u = 0; u < n; ++u)
									kdwa += K(i * n + r, p * n + t) * D(p * n + t, q * n + u) * W(q, j) * A(u, s);
					CHECK(std::abs(got(i * n + r, j * n + s) - (wa - kdwa)) <= 1e-13);
				}
}

TEST_CASE("isolation ratio arithmetic")
{
	// beta agent 0 and alpha agent 1 on states 1 and 2
	auto types = std::vector<AgentClass>{{AgentType::Beta, 0, {}, false}, {AgentType::Alpha, 1, {}, false}};
	auto net = build_networks(2, types, {}, {});
	Matrix C = testutil::unit_rows(2, {1, 2});
	Matrix K = Matrix::Zero(4, 4);
	K(0, 1) = 0.008; // c_beta^T K_beta c_alpha
	K(3, 3) = 0.24;  // c_alpha^T K_alpha c_alpha
	auto rep = verify_isolation_constraint(K, C, net, {1}, 0.011);
	REQUIRE(rep.pairs.size() == 1);
	CHECK(rep.pairs[0].ratio == doctest::Approx(0.008 / 0.76).epsilon(1e-12));
	CHECK(std::abs(rep.max_ratio - 0.0105) <= 0.0001);
	CHECK(rep.pass);
	CHECK_FALSE(verify_isolation_constraint(K, C, net, {1}, 0.010).pass);

	auto zero = verify_isolation_constraint(Matrix::Zero(4, 4), C, net, {1}, 0.0);
	CHECK(zero.pass);
	CHECK(zero.max_ratio == 0.0);

	Matrix degenerate = Matrix::Zero(4, 4);
	degenerate(3, 3) = 1.0;
	CHECK(verify_isolation_constraint(degenerate, C, net, {1}, 0.5).degenerate);
}

TEST_CASE("isolation report names the violating pair")
{
	RngStream rng(13);
	const int N = 4, n = 3;
	std::vector<AgentClass> types{{AgentType::Beta, 0, {}, false}, {AgentType::Alpha, 1, {}, false},
		{AgentType::Gamma, 2, {}, false}, {AgentType::Alpha, 2, {}, false}};
	auto net = build_networks(N, types, {}, {});
	Matrix C = testutil::random_matrix(rng, N, n);
	Matrix K = Matrix::Zero(N * n, N * n);
	for (int i = 0; i < N; ++i)
		K.block(i * n, i * n, n, n) = 0.01 * testutil::random_matrix(rng, n, n);
	K.block(2 * n, 2 * n, n, n) += 2.0 * C.row(2).transpose() * C.row(3) / C.row(3).squaredNorm() / C.row(2).squaredNorm();
	auto rep = verify_isolation_constraint(K, C, net, {1, 3}, 0.05);
	CHECK_FALSE(rep.pass);
	CHECK(rep.argmax_i == 2);
	CHECK(rep.argmax_j == 3);
	for (const auto& p : rep.pairs) {
		const Vector ci = C.row(p.i).transpose(), cj = C.row(p.j).transpose();
		const double num = std::abs(ci.dot(K.block(p.i * n, p.i * n, n, n) * cj));
		const double den = std::abs(cj.dot(K.block(p.j * n, p.j * n, n, n) * cj) - 1.0);
		CHECK(p.ratio == doctest::Approx(num / den).epsilon(1e-12));
	}

	// scaling K_i along c_j by s scales ratio_ij by s
	const double s = 0.3;
	Matrix K2 = K;
	const Vector cj = C.row(3).transpose();
	auto blk = K2.block(2 * n, 2 * n, n, n);
	blk = (blk * (Matrix::Identity(n, n) - (1.0 - s) * cj * cj.transpose() / cj.squaredNorm())).eval();
	auto rep2 = verify_isolation_constraint(K2, C, net, {1, 3}, 0.05);
	for (size_t p = 0; p < rep.pairs.size(); ++p)
		if (rep.pairs[p].i == 2 && rep.pairs[p].j == 3)
			CHECK(rep2.pairs[p].ratio == doctest::Approx(s * rep.pairs[p].ratio).epsilon(1e-12));
}

TEST_CASE("stability certificate")
{
	auto c0 = stability_certificate(Matrix::Zero(4, 4));
	CHECK(c0.valid);
	CHECK((c0.X - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);

	RngStream rng(70);
	Matrix big = testutil::random_matrix(rng, 5, 5);
	big *= 1.1 / spectral_radius(big);
	CHECK_THROWS_AS(stability_certificate(big), UnstableError);

	for (int t = 0; t < 50; ++t) {
		Matrix m = testutil::random_matrix(rng, 5, 5);
		m *= rng.uniform(0.3, 1.4) / spectral_radius(m);
		const double rho = spectral_radius(m);
		if (std::abs(rho - 1.0) < 0.01)
			continue;
		bool valid = false;
		try {
			valid = stability_certificate(m).valid;
		} catch (const UnstableError&) {
		}
		CHECK(valid == (rho < 1.0));
	}
}

TEST_CASE("threshold parameters")
{
	auto s = ten_state();
	const int nn = 40;
	SystemModel small(s.model.A() * 0.05, s.model.C(), s.model.E(), s.model.R());
	Matrix ahat = assemble_error_matrix(s.net.W, small.A(), Matrix::Zero(nn, nn), s.op.D_C);
	auto t = compute_threshold_params(Matrix::Zero(nn, nn), ahat, small, s.op, 4);
	CHECK(t.a1 == doctest::Approx(1.0).epsilon(1e-12));
	CHECK(t.a2 == 0.0);
	CHECK(t.Theta1 == doctest::Approx(spectral_norm(s.model.E()) / (1.0 - t.b * t.b)).epsilon(1e-12));

	Matrix unstable = assemble_error_matrix(s.net.W, s.model.A(), Matrix::Zero(nn, nn), s.op.D_C);
	CHECK_THROWS_AS(compute_threshold_params(Matrix::Zero(nn, nn), unstable, s.model, s.op, 4), ThresholdUndefinedError);

	// formula arithmetic on a fixed parameter set
	const double a1 = 2.937, a2 = 0.183, b = 0.682, E = 0.01, R = 0.01;
	const double theta1 = (a1 * 4 * E + a2 * R) / (4 * (1 - b * b));
	CHECK(theta1 == doctest::Approx((0.11748 + 0.00183) / (4 * 0.534876)).epsilon(1e-12));
}

TEST_CASE("stable plant accepts the zero gain")
{
	auto s = ten_state();
	SystemModel stable(s.model.A() * (0.9 / 1.1), s.model.C(), s.model.E(), s.model.R());
	auto op = assemble_output_operators(s.net, stable);
	auto d = design_gain(stable, s.net, op, s.types, GainConfig{});
	CHECK(d.K.isZero(0.0));
	CHECK(d.rho == doctest::Approx(0.9).epsilon(1e-9));
	CHECK(d.evaluations == 1);
}

TEST_CASE("scalar plant gain lies in the analytic interval")
{
	SystemModel m(Matrix::Constant(1, 1, 2.0), Matrix::Ones(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1));
	auto types = classify_agents(SystemDigraph::from_matrix(m.A()), {0});
	auto net = build_networks(1, types, {}, {});
	auto op = assemble_output_operators(net, m);
	auto d = design_gain(m, net, op, types, GainConfig{});
	CHECK(d.K(0, 0) > 0.5);
	CHECK(d.K(0, 0) < 1.5);
	CHECK(d.Ahat(0, 0) == doctest::Approx(2.0 - 2.0 * d.K(0, 0)).epsilon(1e-12));
	CHECK(d.rho <= 0.95);
}

TEST_CASE("ten-state design is certified")
{
	auto s = ten_state();
	GainConfig cfg;
	cfg.seed = 1;
	cfg.norm_target = true;
	auto d = design_gain(s.model, s.net, s.op, s.types, cfg);
	CHECK(spectral_radius(d.Ahat) <= 0.95);
	CHECK(d.rho < 1.0);
	CHECK(d.b < 1.0);
	CHECK(d.certificate.valid);
	CHECK(d.certificate.min_eigenvalue > 0.0);
	CHECK(d.isolation.pass);
	CHECK(d.epsilon_achieved <= 0.05);
	CHECK(d.detection_enabled);
	CHECK(block_diagonal(d.K, 4, 10));
	CHECK((d.Ahat - assemble_error_matrix(s.net.W, s.model.A(), d.K, s.op.D_C)).cwiseAbs().maxCoeff() <= 1e-14);

	// Theta1 identity and independent recomputation of the four norms
	const double E = oracle::norm2_by_jacobi(testutil::to_dense(s.model.E()));
	const double Rb = oracle::norm2_by_jacobi(testutil::to_dense(s.op.Rbar));
	const double b = oracle::norm2_by_jacobi(testutil::to_dense(d.Ahat));
	const double a1 = std::pow(oracle::norm2_by_jacobi(testutil::to_dense(Matrix::Identity(40, 40) - d.K * s.op.D_C)), 2);
	const double a2 = std::pow(oracle::norm2_by_jacobi(testutil::to_dense(d.K)), 2);
	CHECK(std::abs(4 * (1 - d.b * d.b) * d.Theta1 - d.a1 * 4 * d.thresholds->E_norm - d.a2 * d.thresholds->Rbar_norm) <= 1e-10);
	CHECK(std::abs((a1 * 4 * E + a2 * Rb) / (4 * (1 - b * b)) - d.Theta1) <= 1e-9);

	// certify the same K as an imported gain
	auto again = certify_gain(d.K, s.model, s.net, s.op, s.types, cfg);
	CHECK(again.rho == d.rho);
	CHECK(again.Theta1 == d.Theta1);
}

TEST_CASE("restarts exhaust and report the best radius")
{
	auto s = ten_state();
	GainConfig cfg;
	cfg.margin = 0.99;
	cfg.norm_target = true;
	cfg.max_restarts = 2;
	cfg.max_iterations = 1;
	try {
		design_gain(s.model, s.net, s.op, s.types, cfg);
		FAIL("expected infeasible");
	} catch (const IsolationInfeasibleError&) {
		FAIL("wrong error");
	} catch (const InfeasibleError& e) {
		CHECK(e.best_rho() > 0.01);
		CHECK(e.best_rho() < 1.0);
	}
}

TEST_CASE("shrink step repairs cross-agent gains")
{
	// Non-orthogonal measurement rows create cross terms the shrink must remove.
	auto s = ten_state();
	Matrix C = s.model.C();
	C(0, 9) = 0.1; // beta row now leans on the alpha state 10
	SystemModel m(s.model.A(), C, s.model.E(), s.model.R());
	auto op = assemble_output_operators(s.net, m);
	GainConfig cfg;
	cfg.epsilon = 0.01;
	cfg.norm_target = true;
	auto d = design_gain(m, s.net, op, s.types, cfg);
	CHECK(d.isolation.pass);
	CHECK(d.epsilon_achieved <= 0.01);
	CHECK(d.rho <= 0.95);
	CHECK(block_diagonal(d.K, 4, 10));
}
