#pragma once

#include "dse/numerics.hpp"
#include "dse/structural.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace dse {

// Plant x_{k+1} = A x_k + nu_k, outputs y_k = C x_k + zeta_k + tau_k with
// nu ~ N(0, E), zeta ~ N(0, R). Row i of C belongs to agent i.
class SystemModel
{
public:
	SystemModel() = default;
	// Throws ValidationError on inconsistent shapes, non-PSD E or R, or
	// non-diagonal R.
	SystemModel(Matrix a, Matrix c, Matrix e, Matrix r);

	int n() const { return int(a_.rows()); }
	int agents() const { return int(c_.rows()); }
	const Matrix& A() const { return a_; }
	const Matrix& C() const { return c_; }
	const Matrix& E() const { return e_; }
	const Matrix& R() const { return r_; }
	const GaussianSampler& process_noise() const { return process_; }
	const GaussianSampler& measurement_noise() const { return measurement_; }

	// Copy with agent's measurement row replaced by the unit row of state.
	SystemModel with_measured_state(int agent, int state) const;

private:
	Matrix a_, c_, e_, r_;
	GaussianSampler process_, measurement_;
};

// Weights drawn uniformly from [lo, hi] on every edge of g, then optionally
// rescaled so that the spectral radius equals target_rho.
Matrix realize_system_matrix(const SystemDigraph& g, RngStream& rng, double lo, double hi,
	std::optional<double> target_rho);

struct FixedAttack
{
	double level = 0.0;
	bool operator==(const FixedAttack&) const = default;
};

struct UniformAttack
{
	double bound = 0.0; // draws from [-bound, bound]
	bool operator==(const UniformAttack&) const = default;
};

// tau at k_start and k_start + 1 are tau0 and tau1; afterwards
// tau_k = 2 tau_{k-1} - tau_{k-2} + theta with theta ~ U[0, theta_max].
struct AutoRegressiveAttack
{
	double tau0 = 0.0;
	double tau1 = 0.0;
	double theta_max = 0.0;
	bool operator==(const AutoRegressiveAttack&) const = default;
};

using AttackKind = std::variant<FixedAttack, UniformAttack, AutoRegressiveAttack>;

struct AttackSpec
{
	int agent = 0;
	AttackKind kind;
	int k_start = 0;
	std::optional<int> k_end; // inclusive; open-ended when empty
	bool operator==(const AttackSpec&) const = default;
};

// Per-attack runtime state.
struct AttackMemory
{
	double prev = 0.0;
	double prev2 = 0.0;
	// Set when mitigation replaced the measurement this attack targeted.
	bool retired = false;
};

bool attack_active(const AttackSpec& spec, int k);

// Draws from rng only for UniformAttack and AutoRegressiveAttack inside the
// window. Must be called at consecutive k for the recurrence to hold.
double attack_signal(const AttackSpec& spec, int k, RngStream& rng, AttackMemory& memory);

struct TruthState
{
	int k = 0;
	Vector x;
};

TruthState step_truth(const TruthState& state, const SystemModel& model, RngStream& rng);

struct Measurement
{
	Vector y;
	Vector tau;
};

// Attacks on the same agent sum. Retired attacks contribute exactly zero and
// consume no draws.
Measurement measure_outputs(const TruthState& state, const SystemModel& model, const std::vector<AttackSpec>& attacks,
	std::vector<AttackMemory>& memories, RngStream& measurement_rng, RngStream& attack_rng);

} // namespace dse
