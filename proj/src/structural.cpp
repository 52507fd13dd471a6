#include "dse/structural.hpp"

#include "dse/errors.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

namespace dse {

SystemDigraph SystemDigraph::from_edges(int n, std::vector<std::pair<int, int>> edges)
{
	if (n < 0)
		throw ValidationError("digraph: negative node count");
	for (auto [s, d] : edges)
		if (s < 0 || s >= n || d < 0 || d >= n)
			throw ValidationError("digraph: edge " + std::to_string(s + 1) + "->" + std::to_string(d + 1) +
				" outside [1, " + std::to_string(n) + "]");
	std::sort(edges.begin(), edges.end());
	auto dup = std::adjacent_find(edges.begin(), edges.end());
	if (dup != edges.end())
		throw ValidationError("digraph: duplicate edge " + std::to_string(dup->first + 1) + "->" +
			std::to_string(dup->second + 1));
	SystemDigraph g;
	g.n = n;
	g.edges = std::move(edges);
	return g;
}

SystemDigraph SystemDigraph::from_matrix(const Matrix& a)
{
	if (a.rows() != a.cols())
		throw ValidationError("digraph: matrix must be square");
	std::vector<std::pair<int, int>> edges;
	for (int i = 0; i < a.rows(); ++i)
		for (int j = 0; j < a.cols(); ++j)
			if (a(i, j) != 0.0)
				edges.emplace_back(j, i);
	return from_edges(int(a.rows()), std::move(edges));
}

std::vector<std::vector<int>> SystemDigraph::out_adjacency() const
{
	std::vector<std::vector<int>> adj(n);
	for (auto [s, d] : edges)
		adj[s].push_back(d);
	for (auto& v : adj)
		std::sort(v.begin(), v.end());
	return adj;
}

std::vector<WeightedEdge> parse_edge_list(std::istream& in, int n)
{
	std::vector<WeightedEdge> out;
	std::string line;
	int lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		auto first = line.find_first_not_of(" \t\r");
		if (first == std::string::npos || line[first] == '#')
			continue;
		std::istringstream ss(line);
		long j = 0, i = 0;
		if (!(ss >> j >> i))
			throw ValidationError("edge list line " + std::to_string(lineno) + ": expected 'j i [weight]'");
		WeightedEdge e;
		double w;
		if (ss >> w)
			e.weight = w;
		std::string rest;
		if (ss >> rest)
			throw ValidationError("edge list line " + std::to_string(lineno) + ": trailing text '" + rest + "'");
		if (j < 1 || j > n || i < 1 || i > n)
			throw ValidationError("edge list line " + std::to_string(lineno) + ": node index outside [1, " +
				std::to_string(n) + "]");
		e.src = int(j - 1);
		e.dst = int(i - 1);
		out.push_back(e);
	}
	return out;
}

SccResult strongly_connected_components(const SystemDigraph& g)
{
	const int n = g.n;
	auto adj = g.out_adjacency();

	// Iterative Tarjan.
	std::vector<int> index(n, -1), low(n, 0), comp(n, -1), stack;
	std::vector<bool> on_stack(n, false);
	std::vector<std::vector<int>> raw;
	int counter = 0;
	for (int root = 0; root < n; ++root) {
		if (index[root] >= 0)
			continue;
		std::vector<std::pair<int, size_t>> call{{root, 0}};
		index[root] = low[root] = counter++;
		stack.push_back(root);
		on_stack[root] = true;
		while (!call.empty()) {
			auto& [v, next] = call.back();
			if (next < adj[v].size()) {
				const int w = adj[v][next++];
				if (index[w] < 0) {
					index[w] = low[w] = counter++;
					stack.push_back(w);
					on_stack[w] = true;
					call.emplace_back(w, 0);
				} else if (on_stack[w]) {
					low[v] = std::min(low[v], index[w]);
				}
				continue;
			}
			if (low[v] == index[v]) {
				std::vector<int> c;
				int w;
				do {
					w = stack.back();
					stack.pop_back();
					on_stack[w] = false;
					c.push_back(w);
				} while (w != v);
				std::sort(c.begin(), c.end());
				raw.push_back(std::move(c));
			}
			const int done = v;
			call.pop_back();
			if (!call.empty())
				low[call.back().first] = std::min(low[call.back().first], low[done]);
		}
	}

	std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
	SccResult r;
	r.components = std::move(raw);
	r.component_of.assign(n, -1);
	for (size_t c = 0; c < r.components.size(); ++c)
		for (int v : r.components[c])
			r.component_of[v] = int(c);
	std::set<std::pair<int, int>> cond;
	for (auto [s, d] : g.edges)
		if (r.component_of[s] != r.component_of[d])
			cond.emplace(r.component_of[s], r.component_of[d]);
	r.condensation.assign(cond.begin(), cond.end());
	return r;
}

std::vector<std::vector<int>> parent_sccs(const SccResult& scc)
{
	std::vector<bool> has_out(scc.components.size(), false);
	for (auto [s, d] : scc.condensation)
		has_out[s] = true;
	std::vector<std::vector<int>> out;
	for (size_t c = 0; c < scc.components.size(); ++c)
		if (!has_out[c])
			out.push_back(scc.components[c]);
	return out;
}

Matching maximum_matching(const SystemDigraph& g)
{
	const int n = g.n;
	const auto adj = g.out_adjacency();
	constexpr int inf = std::numeric_limits<int>::max();
	Matching m;
	m.target_of.assign(n, -1);
	m.source_of.assign(n, -1);
	std::vector<int> dist(n);

	auto bfs = [&]() {
		std::queue<int> q;
		for (int u = 0; u < n; ++u) {
			if (m.target_of[u] < 0) {
				dist[u] = 0;
				q.push(u);
			} else {
				dist[u] = inf;
			}
		}
		bool found = false;
		while (!q.empty()) {
			const int u = q.front();
			q.pop();
			for (int v : adj[u]) {
				const int w = m.source_of[v];
				if (w < 0)
					found = true;
				else if (dist[w] == inf) {
					dist[w] = dist[u] + 1;
					q.push(w);
				}
			}
		}
		return found;
	};

	auto dfs = [&](auto&& self, int u) -> bool {
		for (int v : adj[u]) {
			const int w = m.source_of[v];
			if (w < 0 || (dist[w] == dist[u] + 1 && self(self, w))) {
				m.target_of[u] = v;
				m.source_of[v] = u;
				return true;
			}
		}
		dist[u] = inf;
		return false;
	};

	while (bfs())
		for (int u = 0; u < n; ++u)
			if (m.target_of[u] < 0 && dfs(dfs, u))
				++m.size;
	return m;
}

RankResult structural_rank_and_contractions(const SystemDigraph& g)
{
	RankResult r;
	r.matching = maximum_matching(g);
	r.rank = r.matching.size;
	const auto adj = g.out_adjacency();

	std::set<std::vector<int>> seen;
	for (int u = 0; u < g.n; ++u) {
		if (r.matching.target_of[u] >= 0)
			continue;
		std::vector<bool> in_set(g.n, false), target_seen(g.n, false);
		std::queue<int> q;
		in_set[u] = true;
		q.push(u);
		while (!q.empty()) {
			const int v = q.front();
			q.pop();
			for (int t : adj[v]) {
				if (target_seen[t])
					continue;
				target_seen[t] = true;
				const int w = r.matching.source_of[t];
				// A free target here would be an augmenting path; the matching is maximum.
				if (w >= 0 && !in_set[w]) {
					in_set[w] = true;
					q.push(w);
				}
			}
		}
		std::vector<int> c;
		for (int v = 0; v < g.n; ++v)
			if (in_set[v])
				c.push_back(v);
		if (seen.insert(c).second)
			r.contractions.push_back(std::move(c));
	}
	std::sort(r.contractions.begin(), r.contractions.end());
	return r;
}

std::string to_string(AgentType t)
{
	switch (t) {
	case AgentType::Alpha:
		return "alpha";
	case AgentType::Beta:
		return "beta";
	default:
		return "gamma";
	}
}

StructuralProfile analyze_structure(const SystemDigraph& g)
{
	StructuralProfile p;
	p.graph = g;
	p.scc = strongly_connected_components(g);
	p.parents = parent_sccs(p.scc);
	p.rank = structural_rank_and_contractions(g);
	p.contraction_of.assign(g.n, -1);
	p.parent_of.assign(g.n, -1);
	for (size_t c = 0; c < p.rank.contractions.size(); ++c)
		for (int v : p.rank.contractions[c])
			if (p.contraction_of[v] < 0)
				p.contraction_of[v] = int(c);
	for (size_t c = 0; c < p.parents.size(); ++c)
		for (int v : p.parents[c])
			p.parent_of[v] = int(c);
	return p;
}

std::vector<AgentClass> classify_agents(const StructuralProfile& profile, const std::vector<int>& measured_states,
	const std::vector<std::optional<double>>& costs)
{
	std::vector<AgentClass> out;
	for (size_t a = 0; a < measured_states.size(); ++a) {
		const int s = measured_states[a];
		if (s < 0 || s >= profile.graph.n)
			throw ValidationError("agent " + std::to_string(a + 1) + " measures state " + std::to_string(s + 1) +
				" outside [1, " + std::to_string(profile.graph.n) + "]");
		AgentClass c;
		c.state = s;
		if (a < costs.size())
			c.cost = costs[a];
		const bool in_contraction = profile.contraction_of[s] >= 0;
		const bool in_parent = profile.parent_of[s] >= 0;
		if (in_contraction)
			c.type = AgentType::Alpha;
		else if (in_parent)
			c.type = AgentType::Beta;
		else
			c.type = AgentType::Gamma;
		c.alpha_over_beta = in_contraction && in_parent;
		out.push_back(c);
	}
	return out;
}

std::vector<AgentClass> classify_agents(const SystemDigraph& g, const std::vector<int>& measured_states)
{
	return classify_agents(analyze_structure(g), measured_states);
}

std::vector<int> equivalence_class(const StructuralProfile& profile, int state)
{
	if (state < 0 || state >= profile.graph.n)
		return {};
	if (profile.contraction_of[state] >= 0)
		return profile.rank.contractions[profile.contraction_of[state]];
	if (profile.parent_of[state] >= 0)
		return profile.parents[profile.parent_of[state]];
	return {};
}

bool numeric_observability_check(const Matrix& a, const Matrix& c)
{
	if (a.rows() != a.cols())
		throw ValidationError("observability: A must be square");
	if (c.cols() != a.rows())
		throw ValidationError("observability: C rows must have length n");
	const Eigen::Index n = a.rows();
	if (n == 0)
		return true;

	// Orthonormal basis of the row space of [C; CA; ...], grown one power at
	// a time. Each step keeps singular directions above 1e-8 of the largest.
	auto orth = [](const Matrix& m) -> Matrix {
		Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
		if (!svd.singularValues().allFinite())
			throw Error("observability: SVD produced non-finite values");
		const Vector& sv = svd.singularValues();
		Eigen::Index r = 0;
		while (r < sv.size() && sv(0) > 0.0 && sv(r) > 1e-8 * sv(0))
			++r;
		return svd.matrixU().leftCols(r);
	};
	const double scale = std::max(spectral_norm(a), 1e-300);
	const Matrix at = a.transpose() / scale;
	Matrix v = orth(c.transpose());
	for (Eigen::Index k = 1; k < n && v.cols() < n; ++k) {
		Matrix grown(n, 2 * v.cols());
		grown << v, at * v;
		Matrix next = orth(grown);
		if (next.cols() == v.cols())
			break;
		v = std::move(next);
	}
	return v.cols() == n;
}

} // namespace dse
