#pragma once

#include "dse/model.hpp"
#include "dse/network.hpp"
#include "dse/numerics.hpp"
#include "dse/structural.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dse {

// A_hat = (W kron A) - K D_C (W kron A)
Matrix assemble_error_matrix(const Matrix& W, const Matrix& A, const Matrix& K, const Matrix& D_C);

struct GainConfig
{
	double epsilon = 0.05;       // isolation ratio bound, in [0, 1)
	double margin = 0.05;        // require rho(A_hat) <= 1 - margin
	bool norm_target = false;    // also require ||A_hat||_2 < 1 (otherwise only preferred)
	int max_restarts = 50;
	int max_iterations = 20;     // coordinate sweeps per refinement
	double delta = 1e-6;         // relative eigenvalue cutoff of the fused-measurement pseudo-inverse
	std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5};
	double refine_step = 0.05;   // coordinate grid spacing between grid.front() and grid.back()
	double perturbation = 0.05;  // scale of restart block perturbations
	std::uint64_t seed = 0;

	void validate() const; // throws ValidationError
	bool operator==(const GainConfig&) const = default;
};

struct IsolationPair
{
	int i = 0; // receiving agent
	int j = 0; // alpha agent
	double numerator = 0.0;   // |c_i^T K_i c_j|
	double denominator = 0.0; // |c_j^T K_j c_j - 1|
	double ratio = 0.0;
	bool degenerate = false;  // denominator < 1e-12
};

struct IsolationReport
{
	std::vector<IsolationPair> pairs;
	double max_ratio = 0.0;
	int argmax_i = -1;
	int argmax_j = -1;
	bool pass = true;
	bool degenerate = false;
};

// For every alpha agent j and every agent i != j that fuses j's measurement.
IsolationReport verify_isolation_constraint(const Matrix& K, const Matrix& C, const AgentNetwork& network,
	const std::vector<int>& alpha_agents, double epsilon);

struct StabilityCertificate
{
	Matrix X;
	double min_eigenvalue = 0.0;
	double residual = 0.0; // ||A^T X A - X + I||_F
	bool valid = false;
};

// Throws UnstableError when rho(A_hat) >= 1.
StabilityCertificate stability_certificate(const Matrix& ahat);

struct ThresholdParams
{
	double a1 = 0.0;
	double a2 = 0.0;
	double b = 0.0;
	double E_norm = 0.0;
	double Rbar_norm = 0.0;
	int N = 0;
	double Theta1 = 0.0;
};

// a1 = ||I - K D_C||^2, a2 = ||K||^2, b = ||A_hat||,
// Theta1 = (a1 N ||E|| + a2 ||Rbar||) / (N (1 - b^2)).
// Throws ThresholdUndefinedError when b >= 1.
ThresholdParams compute_threshold_params(const Matrix& K, const Matrix& ahat, const SystemModel& model,
	const OutputOperators& operators, int N);

struct GainDesign
{
	Matrix K;
	Matrix Ahat;
	double rho = 0.0;
	double b = 0.0;
	double epsilon_achieved = 0.0;
	double a1 = 0.0;
	double a2 = 0.0;
	double Theta1 = 0.0;
	bool detection_enabled = false;
	std::vector<double> injection; // per-agent measurement gain s_j
	IsolationReport isolation;
	StabilityCertificate certificate;
	std::optional<ThresholdParams> thresholds;
	std::vector<std::string> warnings;
	int restarts_used = 0;
	int evaluations = 0;
};

// Candidate gains K_i = (sum_{j in N_alpha(i)} s_j c_j c_j^T / |c_j|^2) D_i^+
// with D_i = sum_{j in N_alpha(i)} c_j c_j^T. K = 0 is tried first, then a
// uniform s over the grid, then a per-measurement coordinate refinement on a
// finer grid, then seeded restarts with random s and block perturbations.
// Among candidates meeting the margin (and b < 1 when required), the design
// maximizing sum_i log(|1 - c_i^T K_i c_i| / Theta2_i) is kept. A final
// shrink of cross-agent components enforces the isolation bound.
// Throws InfeasibleError or IsolationInfeasibleError.
GainDesign design_gain(const SystemModel& model, const AgentNetwork& network, const OutputOperators& operators,
	const std::vector<AgentClass>& types, const GainConfig& config,
	const std::optional<std::vector<double>>& initial_injection = std::nullopt);

// Certificates and thresholds for an externally supplied K.
GainDesign certify_gain(const Matrix& K, const SystemModel& model, const AgentNetwork& network,
	const OutputOperators& operators, const std::vector<AgentClass>& types, const GainConfig& config);

} // namespace dse
