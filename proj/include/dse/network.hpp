#pragma once

#include "dse/model.hpp"
#include "dse/numerics.hpp"
#include "dse/structural.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dse {

// Two graphs over agents. An edge (j, i) means agent i receives from agent j:
// estimates over G_beta (weights W), measurements over G_alpha (U).
struct AgentNetwork
{
	int N = 0;
	std::vector<std::pair<int, int>> beta_edges;  // includes self-links
	std::vector<std::pair<int, int>> alpha_edges; // includes self-links of fused agents
	Matrix W;
	Matrix U;
	// Agents whose measurement was withdrawn from fusion (attacked gamma).
	std::vector<bool> removed;
	// G_alpha edges beyond hubs and self-links.
	std::vector<std::pair<int, int>> extra_alpha_edges;

	std::vector<int> alpha_neighbours(int i) const; // j with U(i, j) = 1, ascending
};

enum class TopologyKind
{
	Ring,
	Custom
};

struct BetaTopology
{
	TopologyKind kind = TopologyKind::Ring;
	std::vector<std::pair<int, int>> edges; // custom only, 0-based, self-links optional
	bool operator==(const BetaTopology&) const = default;
};

enum class WeightRule
{
	Uniform,
	Random
};

struct WeightConfig
{
	WeightRule rule = WeightRule::Uniform;
	std::uint64_t seed = 0;
	// raw weights drawn from [lo, hi] before row normalization
	double lo = 0.5;
	double hi = 1.5;
	bool operator==(const WeightConfig&) const = default;
};

// G_alpha = hub edges from every alpha agent to every agent, self-links,
// plus extra_alpha. Removed agents contribute no G_alpha edges at all.
// Throws ValidationError if G_beta is not strongly connected.
AgentNetwork build_networks(int N, const std::vector<AgentClass>& types, const BetaTopology& beta,
	const WeightConfig& weights, const std::vector<std::pair<int, int>>& extra_alpha = {},
	const std::vector<bool>& removed = {});

struct OutputOperators
{
	Matrix D_C;    // blockdiag_i sum_{j in N_alpha(i)} c_j c_j^T
	Matrix Dbar_C; // (U kron 1_n) o (1_N kron C^T)
	Matrix Rbar;   // blockdiag_i sum_{j in N_alpha(i)} c_j R_jj c_j^T
};

OutputOperators assemble_output_operators(const AgentNetwork& network, const SystemModel& model);

struct Violation
{
	enum class Kind
	{
		BetaNotStronglyConnected,
		MissingBetaSelfLink,
		MissingHubEdge,
		MissingAlphaSelfLink
	};
	Kind kind;
	int agent = -1;
	int target = -1;
	std::string message;
};

struct ConnectivityReport
{
	std::vector<Violation> violations;
	std::vector<std::string> notes; // e.g. extra G_alpha edges
	bool ok() const { return violations.empty(); }
};

ConnectivityReport validate_connectivity(const AgentNetwork& network, const std::vector<AgentClass>& types);

} // namespace dse
