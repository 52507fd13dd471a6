#include "dse/gain.hpp"

#include "dse/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dse {

Matrix assemble_error_matrix(const Matrix& W, const Matrix& A, const Matrix& K, const Matrix& D_C)
{
	const Matrix wa = kron_product(W, A);
	if (K.rows() != wa.rows() || K.cols() != wa.rows() || D_C.rows() != wa.rows() || D_C.cols() != wa.rows())
		throw ValidationError("assemble_error_matrix: shape mismatch");
	return wa - K * (D_C * wa);
}

void GainConfig::validate() const
{
	if (!(epsilon >= 0.0 && epsilon < 1.0))
		throw ValidationError("gain: epsilon must lie in [0, 1)");
	if (!(margin > 0.0 && margin < 1.0))
		throw ValidationError("gain: margin must lie in (0, 1)");
	if (max_restarts < 0 || max_iterations < 0)
		throw ValidationError("gain: restart and iteration limits must be nonnegative");
	if (grid.empty())
		throw ValidationError("gain: step-size grid is empty");
	for (size_t i = 1; i < grid.size(); ++i)
		if (!(grid[i] > grid[i - 1]))
			throw ValidationError("gain: step-size grid must be strictly increasing");
	if (!(refine_step > 0.0))
		throw ValidationError("gain: refine_step must be positive");
	if (!(delta > 0.0 && delta < 1.0))
		throw ValidationError("gain: delta must lie in (0, 1)");
	if (!(perturbation >= 0.0))
		throw ValidationError("gain: perturbation must be nonnegative");
}

IsolationReport verify_isolation_constraint(const Matrix& K, const Matrix& C, const AgentNetwork& network,
	const std::vector<int>& alpha_agents, double epsilon)
{
	const int n = int(C.cols());
	IsolationReport rep;
	auto block = [&](int i) { return K.block(i * n, i * n, n, n); };
	for (int j : alpha_agents) {
		const Vector cj = C.row(j).transpose();
		const double den = std::abs(cj.dot(block(j) * cj) - 1.0);
		for (int i = 0; i < network.N; ++i) {
			if (i == j || network.U(i, j) == 0.0)
				continue;
			IsolationPair p;
			p.i = i;
			p.j = j;
			p.numerator = std::abs(C.row(i).dot(block(i) * cj));
			p.denominator = den;
			p.degenerate = den < 1e-12;
			p.ratio = p.degenerate ? std::numeric_limits<double>::infinity() : p.numerator / den;
			if (p.degenerate)
				rep.degenerate = true;
			if (rep.argmax_i < 0 || p.ratio > rep.max_ratio) {
				rep.max_ratio = p.ratio;
				rep.argmax_i = i;
				rep.argmax_j = j;
			}
			rep.pairs.push_back(p);
		}
	}
	rep.pass = !rep.degenerate && rep.max_ratio <= epsilon;
	return rep;
}

StabilityCertificate stability_certificate(const Matrix& ahat)
{
	StabilityCertificate c;
	c.X = solve_discrete_lyapunov(ahat);
	const Eigen::Index n = ahat.rows();
	c.residual = (ahat.transpose() * c.X * ahat - c.X + Matrix::Identity(n, n)).norm();
	Eigen::SelfAdjointEigenSolver<Matrix> es(c.X, Eigen::EigenvaluesOnly);
	c.min_eigenvalue = es.eigenvalues().minCoeff();
	c.valid = c.min_eigenvalue > 0.0 && c.residual <= 1e-8;
	return c;
}

ThresholdParams compute_threshold_params(const Matrix& K, const Matrix& ahat, const SystemModel& model,
	const OutputOperators& operators, int N)
{
	ThresholdParams t;
	t.N = N;
	t.b = spectral_norm(ahat);
	if (!(t.b < 1.0)) {
		std::ostringstream os;
		os << "threshold undefined: ||A_hat||_2 = " << t.b << " >= 1";
		throw ThresholdUndefinedError(os.str());
	}
	const Eigen::Index nn = K.rows();
	const double s1 = spectral_norm(Matrix::Identity(nn, nn) - K * operators.D_C);
	const double s2 = spectral_norm(K);
	t.a1 = s1 * s1;
	t.a2 = s2 * s2;
	t.E_norm = spectral_norm(model.E());
	t.Rbar_norm = spectral_norm(operators.Rbar);
	t.Theta1 = (t.a1 * N * t.E_norm + t.a2 * t.Rbar_norm) / (N * (1.0 - t.b * t.b));
	return t;
}

namespace {

struct Context
{
	int N = 0;
	int n = 0;
	Matrix WA;
	Matrix D_C;
	Matrix C;
	Vector R_diag;
	double E_norm = 0.0;
	double Rbar_norm = 0.0;
	std::vector<std::vector<int>> neighbours;
	std::vector<Matrix> pinv;      // D_i^+
	std::vector<Matrix> projector; // D_i D_i^+
	std::vector<Matrix> direction; // c_j c_j^T / |c_j|^2
	std::vector<int> alpha;        // fused alpha agents
	std::vector<bool> active;      // agent's own measurement is fused
	const AgentNetwork* network = nullptr;
	double epsilon = 0.0;
};

struct Evaluation
{
	double rho = std::numeric_limits<double>::infinity();
	double b = std::numeric_limits<double>::infinity();
	double theta1 = std::numeric_limits<double>::infinity();
	double score = std::numeric_limits<double>::infinity();
	double gain_sum = 0.0;
	bool degenerate = false;
	int tier = 3; // 0 feasible with b < 1, 1 feasible with b >= 1, 2 infeasible

	double primary() const { return tier == 0 ? score : rho; }
};

bool better(const Evaluation& a, const Evaluation& b)
{
	if (a.tier != b.tier)
		return a.tier < b.tier;
	const double pa = a.primary(), pb = b.primary();
	if (pa < pb - 1e-12)
		return true;
	if (pa > pb + 1e-12)
		return false;
	return a.gain_sum < b.gain_sum - 1e-12;
}

Context make_context(const SystemModel& model, const AgentNetwork& network, const OutputOperators& operators,
	const std::vector<AgentClass>& types, double delta)
{
	Context ctx;
	ctx.network = &network;
	ctx.N = network.N;
	ctx.n = model.n();
	ctx.WA = kron_product(network.W, model.A());
	ctx.D_C = operators.D_C;
	ctx.C = model.C();
	ctx.R_diag = model.R().diagonal();
	ctx.E_norm = spectral_norm(model.E());
	ctx.Rbar_norm = spectral_norm(operators.Rbar);
	for (int j = 0; j < ctx.N; ++j) {
		const Vector c = ctx.C.row(j).transpose();
		const double c2 = c.squaredNorm();
		ctx.direction.push_back(c2 > 0.0 ? Matrix(c * c.transpose() / c2) : Matrix::Zero(ctx.n, ctx.n));
		const bool fused = network.U(j, j) != 0.0;
		ctx.active.push_back(fused);
		if (fused && types[j].type == AgentType::Alpha)
			ctx.alpha.push_back(j);
	}
	for (int i = 0; i < ctx.N; ++i) {
		ctx.neighbours.push_back(network.alpha_neighbours(i));
		const Matrix d = operators.D_C.block(i * ctx.n, i * ctx.n, ctx.n, ctx.n);
		Eigen::SelfAdjointEigenSolver<Matrix> es(d);
		const Vector& lam = es.eigenvalues();
		const double cut = delta * std::max(lam.cwiseAbs().maxCoeff(), 0.0);
		Vector inv = Vector::Zero(ctx.n), proj = Vector::Zero(ctx.n);
		for (int k = 0; k < ctx.n; ++k)
			if (lam(k) > cut && lam(k) > 0.0) {
				inv(k) = 1.0 / lam(k);
				proj(k) = 1.0;
			}
		ctx.pinv.push_back(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
		ctx.projector.push_back(es.eigenvectors() * proj.asDiagonal() * es.eigenvectors().transpose());
	}
	return ctx;
}

void shrink_cross_gains(Matrix& K, const Context& ctx, double epsilon);

Matrix build_gain(const Context& ctx, const std::vector<double>& s, const std::vector<Matrix>* perturb)
{
	const int n = ctx.n;
	Matrix K = Matrix::Zero(ctx.N * n, ctx.N * n);
	for (int i = 0; i < ctx.N; ++i) {
		Matrix m = Matrix::Zero(n, n);
		for (int j : ctx.neighbours[i])
			m += s[j] * ctx.direction[j];
		Matrix ki = m * ctx.pinv[i];
		if (perturb)
			ki += (*perturb)[i] * ctx.projector[i];
		K.block(i * n, i * n, n, n) = ki;
	}
	if (!ctx.alpha.empty())
		shrink_cross_gains(K, ctx, ctx.epsilon);
	return K;
}

Evaluation evaluate(const Context& ctx, const GainConfig& cfg, const Matrix& K, const std::vector<double>& s)
{
	Evaluation ev;
	for (double v : s)
		ev.gain_sum += v;
	const int n = ctx.n;
	const Matrix ahat = ctx.WA - K * (ctx.D_C * ctx.WA);
	ev.rho = spectral_radius(ahat);
	for (int j : ctx.alpha) {
		const Vector cj = ctx.C.row(j).transpose();
		if (std::abs(cj.dot(K.block(j * n, j * n, n, n) * cj) - 1.0) < 1e-6)
			ev.degenerate = true;
	}
	const bool stable = ev.rho <= 1.0 - cfg.margin && !ev.degenerate;
	if (!stable) {
		ev.tier = 2;
		return ev;
	}
	ev.b = spectral_norm(ahat);
	if (!(ev.b < 1.0)) {
		ev.tier = cfg.norm_target ? 2 : 1;
		return ev;
	}
	const Eigen::Index nn = K.rows();
	double a1 = spectral_norm(Matrix::Identity(nn, nn) - K * ctx.D_C);
	double a2 = 0.0;
	for (int i = 0; i < ctx.N; ++i)
		a2 = std::max(a2, spectral_norm(K.block(i * n, i * n, n, n)));
	a1 *= a1;
	a2 *= a2;
	ev.theta1 = (a1 * ctx.N * ctx.E_norm + a2 * ctx.Rbar_norm) / (ctx.N * (1.0 - ev.b * ev.b));
	ev.score = 0.0;
	for (int i = 0; i < ctx.N; ++i) {
		if (!ctx.active[i])
			continue;
		const Vector ci = ctx.C.row(i).transpose();
		const double self = std::abs(1.0 - ci.dot(K.block(i * n, i * n, n, n) * ci));
		const double theta2 = ci.norm() * ev.theta1 + ctx.R_diag(i);
		ev.score -= std::log(std::max(self, 1e-300)) - std::log(std::max(theta2, 1e-300));
	}
	ev.tier = 0;
	return ev;
}

struct Candidate
{
	std::vector<double> s;
	Evaluation ev;
};

// Coordinate refinement over the agents' measurement gains.
Candidate refine(const Context& ctx, const GainConfig& cfg, Candidate start, const std::vector<Matrix>* perturb,
	int& evaluations)
{
	const double lo = cfg.grid.front(), hi = cfg.grid.back();
	const int steps = int(std::floor((hi - lo) / cfg.refine_step + 1e-9));
	Candidate best = std::move(start);
	for (int sweep = 0; sweep < cfg.max_iterations; ++sweep) {
		bool improved = false;
		for (int j = 0; j < ctx.N; ++j) {
			if (!ctx.active[j])
				continue;
			for (int t = 0; t <= steps; ++t) {
				const double v = lo + t * cfg.refine_step;
				if (v == best.s[j])
					continue;
				std::vector<double> s = best.s;
				s[j] = v;
				Evaluation ev = evaluate(ctx, cfg, build_gain(ctx, s, perturb), s);
				++evaluations;
				if (better(ev, best.ev)) {
					best = {std::move(s), ev};
					improved = true;
				}
			}
		}
		if (!improved)
			break;
	}
	return best;
}

// Scales the component of K_i along c_j so that ratio_ij drops to epsilon.
void shrink_cross_gains(Matrix& K, const Context& ctx, double epsilon)
{
	const int n = ctx.n;
	for (int pass = 0; pass < 20; ++pass) {
		auto rep = verify_isolation_constraint(K, ctx.C, *ctx.network, ctx.alpha, epsilon);
		if (rep.pass || rep.degenerate)
			return;
		for (const auto& p : rep.pairs) {
			if (p.ratio <= epsilon)
				continue;
			const double scale = epsilon / p.ratio * (1.0 - 1e-9);
			auto blk = K.block(p.i * n, p.i * n, n, n);
			blk = (blk * (Matrix::Identity(n, n) - (1.0 - scale) * ctx.direction[p.j])).eval();
		}
	}
}

void finish(GainDesign& d, const Context& ctx, const SystemModel& model, const AgentNetwork& network,
	const OutputOperators& operators, const GainConfig& cfg)
{
	d.Ahat = ctx.WA - d.K * (ctx.D_C * ctx.WA);
	d.rho = spectral_radius(d.Ahat);
	d.b = spectral_norm(d.Ahat);
	d.isolation = verify_isolation_constraint(d.K, ctx.C, network, ctx.alpha, cfg.epsilon);
	d.epsilon_achieved = d.isolation.max_ratio;
	d.certificate = stability_certificate(d.Ahat);
	if (d.b < 1.0) {
		d.thresholds = compute_threshold_params(d.K, d.Ahat, model, operators, network.N);
		d.a1 = d.thresholds->a1;
		d.a2 = d.thresholds->a2;
		d.Theta1 = d.thresholds->Theta1;
		d.detection_enabled = true;
	} else {
		const Eigen::Index nn = d.K.rows();
		const double s1 = spectral_norm(Matrix::Identity(nn, nn) - d.K * ctx.D_C);
		const double s2 = spectral_norm(d.K);
		d.a1 = s1 * s1;
		d.a2 = s2 * s2;
		d.Theta1 = std::numeric_limits<double>::quiet_NaN();
		d.detection_enabled = false;
		d.warnings.push_back("detection disabled: ||A_hat||_2 >= 1, thresholds undefined");
	}
}

void check_preconditions(const SystemModel& model, const AgentNetwork& network, const OutputOperators& operators,
	const std::vector<AgentClass>& types, const Context& ctx)
{
	auto rep = validate_connectivity(network, types);
	if (!rep.ok())
		throw ValidationError("gain design: " + rep.violations.front().message);
	if (!numeric_observability_check(ctx.WA, operators.D_C))
		throw InfeasibleError("gain design: (W kron A, D_C) is not observable", spectral_radius(ctx.WA));
	(void)model;
}

} // namespace

GainDesign design_gain(const SystemModel& model, const AgentNetwork& network, const OutputOperators& operators,
	const std::vector<AgentClass>& types, const GainConfig& config,
	const std::optional<std::vector<double>>& initial_injection)
{
	config.validate();
	Context ctx = make_context(model, network, operators, types, config.delta);
	ctx.epsilon = config.epsilon;
	check_preconditions(model, network, operators, types, ctx);
	GainDesign design;

	const std::vector<double> zero(ctx.N, 0.0);
	Candidate best{zero, evaluate(ctx, config, Matrix::Zero(ctx.N * ctx.n, ctx.N * ctx.n), zero)};
	++design.evaluations;
	if (best.ev.tier <= (config.norm_target ? 0 : 1)) {
		design.K = Matrix::Zero(ctx.N * ctx.n, ctx.N * ctx.n);
		design.injection = zero;
		finish(design, ctx, model, network, operators, config);
		return design;
	}

	auto consider = [&](std::vector<double> s) {
		for (int j = 0; j < ctx.N; ++j)
			if (!ctx.active[j])
				s[j] = 0.0;
		Evaluation ev = evaluate(ctx, config, build_gain(ctx, s, nullptr), s);
		++design.evaluations;
		if (better(ev, best.ev))
			best = {std::move(s), ev};
	};
	if (initial_injection && int(initial_injection->size()) == ctx.N)
		consider(*initial_injection);
	for (double g : config.grid)
		consider(std::vector<double>(ctx.N, g));
	best = refine(ctx, config, best, nullptr, design.evaluations);

	std::vector<Matrix> perturb;
	bool perturbed = false;
	double best_rho = best.ev.rho;
	for (int r = 0; r < config.max_restarts && best.ev.tier == 2; ++r) {
		design.restarts_used = r + 1;
		RngStream rng(derive_seed(config.seed, "restart", std::uint64_t(r)));
		const double lo = config.grid.front(), hi = config.grid.back();
		const int steps = int(std::floor((hi - lo) / config.refine_step + 1e-9));
		std::vector<double> s(ctx.N, 0.0);
		for (int j = 0; j < ctx.N; ++j)
			if (ctx.active[j])
				s[j] = lo + std::min(steps, int(rng.uniform01() * (steps + 1))) * config.refine_step;
		std::vector<Matrix> delta(ctx.N);
		for (int i = 0; i < ctx.N; ++i) {
			delta[i] = Matrix(ctx.n, ctx.n);
			for (int a = 0; a < ctx.n; ++a)
				for (int b = 0; b < ctx.n; ++b)
					delta[i](a, b) = config.perturbation * rng.normal();
		}
		Candidate start{s, evaluate(ctx, config, build_gain(ctx, s, &delta), s)};
		++design.evaluations;
		Candidate got = refine(ctx, config, start, &delta, design.evaluations);
		best_rho = std::min(best_rho, got.ev.rho);
		if (better(got.ev, best.ev)) {
			best = got;
			perturb = delta;
			perturbed = true;
		}
	}
	if (best.ev.tier == 2) {
		std::ostringstream os;
		os << "gain design infeasible after " << design.restarts_used << " restarts: best rho(A_hat) = " << best_rho
		   << ", required <= " << 1.0 - config.margin;
		if (config.norm_target)
			os << " with ||A_hat||_2 < 1";
		throw InfeasibleError(os.str(), best_rho);
	}

	design.injection = best.s;
	design.K = build_gain(ctx, best.s, perturbed ? &perturb : nullptr);

	auto iso = verify_isolation_constraint(design.K, ctx.C, network, ctx.alpha, config.epsilon);
	if (!iso.pass) {
		std::ostringstream os;
		os << "isolation-infeasible: max ratio " << iso.max_ratio << " exceeds epsilon " << config.epsilon
		   << " at a stable design with rho(A_hat) = " << best.ev.rho;
		throw IsolationInfeasibleError(os.str(), best.ev.rho);
	}
	finish(design, ctx, model, network, operators, config);
	return design;
}

GainDesign certify_gain(const Matrix& K, const SystemModel& model, const AgentNetwork& network,
	const OutputOperators& operators, const std::vector<AgentClass>& types, const GainConfig& config)
{
	const Context ctx = make_context(model, network, operators, types, config.delta);
	const int nn = ctx.N * ctx.n;
	if (K.rows() != nn || K.cols() != nn)
		throw ValidationError("imported gain has wrong shape");
	for (int i = 0; i < ctx.N; ++i)
		for (int j = 0; j < ctx.N; ++j)
			if (i != j && !K.block(i * ctx.n, j * ctx.n, ctx.n, ctx.n).isZero(0.0))
				throw ValidationError("imported gain is not block diagonal");
	GainDesign d;
	d.K = K;
	finish(d, ctx, model, network, operators, config);
	if (d.rho > 1.0 - config.margin)
		d.warnings.push_back("imported gain misses the stability margin");
	if (!d.isolation.pass)
		d.warnings.push_back("imported gain violates the isolation bound");
	return d;
}

} // namespace dse
