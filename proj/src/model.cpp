#include "dse/model.hpp"

#include "dse/errors.hpp"

#include <string>

namespace dse {

SystemModel::SystemModel(Matrix a, Matrix c, Matrix e, Matrix r)
	: a_(std::move(a)), c_(std::move(c)), e_(std::move(e)), r_(std::move(r))
{
	const Eigen::Index n = a_.rows();
	if (a_.cols() != n)
		throw ValidationError("system: A must be square");
	if (c_.cols() != n)
		throw ValidationError("system: C must have " + std::to_string(n) + " columns");
	if (e_.rows() != n || e_.cols() != n)
		throw ValidationError("system: E must be n x n");
	if (r_.rows() != c_.rows() || r_.cols() != c_.rows())
		throw ValidationError("system: R must be N x N");
	if (!a_.allFinite() || !c_.allFinite())
		throw ValidationError("system: A and C must be finite");
	if (!r_.isDiagonal(0.0))
		throw ValidationError("system: R must be diagonal");
	process_ = GaussianSampler(e_);
	measurement_ = GaussianSampler(r_);
}

SystemModel SystemModel::with_measured_state(int agent, int state) const
{
	if (agent < 0 || agent >= agents() || state < 0 || state >= n())
		throw ValidationError("system: substitution index out of range");
	SystemModel out = *this;
	out.c_.row(agent).setZero();
	out.c_(agent, state) = 1.0;
	return out;
}

Matrix realize_system_matrix(const SystemDigraph& g, RngStream& rng, double lo, double hi,
	std::optional<double> target_rho)
{
	Matrix a = Matrix::Zero(g.n, g.n);
	for (auto [s, d] : g.edges)
		a(d, s) = rng.uniform(lo, hi);
	if (target_rho) {
		const double rho = spectral_radius(a);
		if (rho <= 0.0)
			throw ValidationError("system: cannot rescale a nilpotent realization to a target radius");
		a *= *target_rho / rho;
	}
	return a;
}

bool attack_active(const AttackSpec& spec, int k)
{
	return k >= spec.k_start && (!spec.k_end || k <= *spec.k_end);
}

double attack_signal(const AttackSpec& spec, int k, RngStream& rng, AttackMemory& memory)
{
	if (!attack_active(spec, k))
		return 0.0;
	double v = 0.0;
	if (auto f = std::get_if<FixedAttack>(&spec.kind)) {
		v = f->level;
	} else if (auto u = std::get_if<UniformAttack>(&spec.kind)) {
		v = rng.uniform(-u->bound, u->bound);
	} else {
		const auto& ar = std::get<AutoRegressiveAttack>(spec.kind);
		const int offset = k - spec.k_start;
		if (offset == 0)
			v = ar.tau0;
		else if (offset == 1)
			v = ar.tau1;
		else
			v = 2.0 * memory.prev - memory.prev2 + rng.uniform(0.0, ar.theta_max);
	}
	memory.prev2 = memory.prev;
	memory.prev = v;
	return v;
}

TruthState step_truth(const TruthState& state, const SystemModel& model, RngStream& rng)
{
	TruthState next;
	next.k = state.k + 1;
	next.x = model.A() * state.x + model.process_noise().sample(rng);
	return next;
}

Measurement measure_outputs(const TruthState& state, const SystemModel& model, const std::vector<AttackSpec>& attacks,
	std::vector<AttackMemory>& memories, RngStream& measurement_rng, RngStream& attack_rng)
{
	if (memories.size() != attacks.size())
		throw ValidationError("measure_outputs: one memory per attack required");
	Measurement m;
	m.tau = Vector::Zero(model.agents());
	for (size_t a = 0; a < attacks.size(); ++a) {
		if (memories[a].retired)
			continue;
		m.tau(attacks[a].agent) += attack_signal(attacks[a], state.k, attack_rng, memories[a]);
	}
	m.y = model.C() * state.x + model.measurement_noise().sample(measurement_rng) + m.tau;
	return m;
}

} // namespace dse
