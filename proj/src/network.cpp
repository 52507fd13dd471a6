#include "dse/network.hpp"

#include "dse/errors.hpp"

#include <algorithm>
#include <set>

namespace dse {

std::vector<int> AgentNetwork::alpha_neighbours(int i) const
{
	std::vector<int> out;
	for (int j = 0; j < N; ++j)
		if (U(i, j) != 0.0)
			out.push_back(j);
	return out;
}

namespace {

bool strongly_connected(int n, const std::vector<std::pair<int, int>>& edges)
{
	std::set<std::pair<int, int>> unique(edges.begin(), edges.end());
	auto g = SystemDigraph::from_edges(n, {unique.begin(), unique.end()});
	return strongly_connected_components(g).components.size() == 1;
}

std::string agent_name(int i)
{
	return "agent " + std::to_string(i + 1);
}

} // namespace

AgentNetwork build_networks(int N, const std::vector<AgentClass>& types, const BetaTopology& beta,
	const WeightConfig& weights, const std::vector<std::pair<int, int>>& extra_alpha, const std::vector<bool>& removed)
{
	if (N < 1)
		throw ValidationError("network: at least one agent required");
	if (int(types.size()) != N)
		throw ValidationError("network: one agent type per agent required");

	AgentNetwork net;
	net.N = N;
	net.removed = removed.empty() ? std::vector<bool>(N, false) : removed;
	if (int(net.removed.size()) != N)
		throw ValidationError("network: removed mask has wrong length");

	std::set<std::pair<int, int>> be;
	for (int i = 0; i < N; ++i)
		be.emplace(i, i);
	if (beta.kind == TopologyKind::Ring) {
		for (int i = 0; i < N && N > 1; ++i)
			be.emplace(i, (i + 1) % N);
	} else {
		for (auto [s, d] : beta.edges) {
			if (s < 0 || s >= N || d < 0 || d >= N)
				throw ValidationError("network: beta edge outside agent range");
			be.emplace(s, d);
		}
	}
	net.beta_edges.assign(be.begin(), be.end());
	if (!strongly_connected(N, net.beta_edges))
		throw ValidationError("network: beta topology is not strongly connected");

	net.W = Matrix::Zero(N, N);
	RngStream rng(weights.seed);
	for (int i = 0; i < N; ++i) {
		// edges are sorted by source, so in-neighbours come out ascending
		for (auto [s, d] : net.beta_edges)
			if (d == i)
				net.W(i, s) = weights.rule == WeightRule::Uniform ? 1.0 : rng.uniform(weights.lo, weights.hi);
		net.W.row(i) /= net.W.row(i).sum();
	}

	std::set<std::pair<int, int>> ae;
	for (int j = 0; j < N; ++j) {
		if (net.removed[j])
			continue;
		ae.emplace(j, j);
		if (types[j].type == AgentType::Alpha)
			for (int i = 0; i < N; ++i)
				ae.emplace(j, i);
	}
	for (auto [s, d] : extra_alpha) {
		if (s < 0 || s >= N || d < 0 || d >= N)
			throw ValidationError("network: alpha edge outside agent range");
		if (net.removed[s])
			continue;
		if (ae.emplace(s, d).second)
			net.extra_alpha_edges.emplace_back(s, d);
	}
	net.alpha_edges.assign(ae.begin(), ae.end());
	net.U = Matrix::Zero(N, N);
	for (auto [s, d] : net.alpha_edges)
		net.U(d, s) = 1.0;
	return net;
}

OutputOperators assemble_output_operators(const AgentNetwork& network, const SystemModel& model)
{
	const int N = network.N, n = model.n();
	if (model.agents() != N)
		throw ValidationError("output operators: model and network disagree on agent count");
	OutputOperators op;
	op.D_C = Matrix::Zero(N * n, N * n);
	op.Rbar = Matrix::Zero(N * n, N * n);
	for (int i = 0; i < N; ++i)
		for (int j : network.alpha_neighbours(i)) {
			const Vector c = model.C().row(j).transpose();
			op.D_C.block(i * n, i * n, n, n) += c * c.transpose();
			op.Rbar.block(i * n, i * n, n, n) += model.R()(j, j) * c * c.transpose();
		}
	op.Dbar_C = hadamard_product(kron_product(network.U, Matrix::Ones(n, 1)),
		kron_product(Matrix::Ones(N, 1), model.C().transpose()));
	return op;
}

ConnectivityReport validate_connectivity(const AgentNetwork& network, const std::vector<AgentClass>& types)
{
	ConnectivityReport rep;
	const int N = network.N;
	std::set<std::pair<int, int>> be(network.beta_edges.begin(), network.beta_edges.end());
	std::set<std::pair<int, int>> ae(network.alpha_edges.begin(), network.alpha_edges.end());

	for (int i = 0; i < N; ++i)
		if (!be.count({i, i}))
			rep.violations.push_back({Violation::Kind::MissingBetaSelfLink, i, i, agent_name(i) + " lacks a self-link in G_beta"});
	if (!strongly_connected(N, network.beta_edges))
		rep.violations.push_back({Violation::Kind::BetaNotStronglyConnected, -1, -1, "G_beta is not strongly connected"});

	for (int j = 0; j < N; ++j) {
		if (!network.removed.empty() && network.removed[j])
			continue;
		if (!ae.count({j, j}))
			rep.violations.push_back({Violation::Kind::MissingAlphaSelfLink, j, j, agent_name(j) + " does not fuse its own measurement"});
		if (types[j].type != AgentType::Alpha)
			continue;
		for (int i = 0; i < N; ++i)
			if (i != j && !ae.count({j, i}))
				rep.violations.push_back({Violation::Kind::MissingHubEdge, j, i,
					"alpha " + agent_name(j) + " is not a hub: no G_alpha edge to " + agent_name(i)});
	}
	for (auto [s, d] : network.extra_alpha_edges)
		rep.notes.push_back("extra G_alpha edge " + std::to_string(s + 1) + "->" + std::to_string(d + 1));
	return rep;
}

} // namespace dse
