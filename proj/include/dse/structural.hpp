#pragma once

#include "dse/numerics.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dse {

// Directed graph over n states. An edge (src, dst) means A(dst, src) != 0.
// Node indices are 0-based internally; files and reports use 1-based.
struct SystemDigraph
{
	int n = 0;
	std::vector<std::pair<int, int>> edges; // sorted, unique

	// Validates indices and rejects duplicate edges.
	static SystemDigraph from_edges(int n, std::vector<std::pair<int, int>> edges);
	// Edges from the nonzero pattern of a square matrix.
	static SystemDigraph from_matrix(const Matrix& a);

	std::vector<std::vector<int>> out_adjacency() const;
};

struct WeightedEdge
{
	int src = 0; // 0-based
	int dst = 0;
	std::optional<double> weight;
	bool operator==(const WeightedEdge&) const = default;
};

// Parses "j i [weight]" lines with 1-based indices; blank lines and lines
// starting with '#' are skipped. Throws ValidationError naming the line.
std::vector<WeightedEdge> parse_edge_list(std::istream& in, int n);

struct SccResult
{
	// Each component sorted ascending; components ordered by lowest member.
	std::vector<std::vector<int>> components;
	std::vector<int> component_of;
	// Edges between distinct components, sorted and unique.
	std::vector<std::pair<int, int>> condensation;
};

SccResult strongly_connected_components(const SystemDigraph& g);

// Components with no edge leaving them in the condensation.
std::vector<std::vector<int>> parent_sccs(const SccResult& scc);

struct Matching
{
	std::vector<int> target_of; // per source node, -1 if unmatched
	std::vector<int> source_of; // per target node, -1 if unmatched
	int size = 0;
};

// Hopcroft-Karp. Targets are tried in ascending index order so the result
// is deterministic.
Matching maximum_matching(const SystemDigraph& g);

struct RankResult
{
	int rank = 0;
	// One set per unmatched source node: the nodes reachable from it along
	// alternating paths. Deduplicated, each sorted, ordered by lowest member.
	std::vector<std::vector<int>> contractions;
	Matching matching;
};

RankResult structural_rank_and_contractions(const SystemDigraph& g);

enum class AgentType
{
	Alpha,
	Beta,
	Gamma
};

std::string to_string(AgentType t);

struct AgentClass
{
	AgentType type = AgentType::Gamma;
	int state = 0;
	std::optional<double> cost;
	// State lies in both a contraction and a parent SCC; classified Alpha.
	bool alpha_over_beta = false;
};

struct StructuralProfile
{
	SystemDigraph graph;
	SccResult scc;
	std::vector<std::vector<int>> parents;
	RankResult rank;
	std::vector<int> contraction_of; // first contraction containing the node, -1 if none
	std::vector<int> parent_of;      // parent SCC index, -1 if none
};

StructuralProfile analyze_structure(const SystemDigraph& g);

std::vector<AgentClass> classify_agents(const StructuralProfile& profile, const std::vector<int>& measured_states,
	const std::vector<std::optional<double>>& costs = {});

std::vector<AgentClass> classify_agents(const SystemDigraph& g, const std::vector<int>& measured_states);

// Alpha: first contraction containing the state. Beta: its parent SCC.
// Otherwise empty.
std::vector<int> equivalence_class(const StructuralProfile& profile, int state);

// True when [C; CA; ...; CA^{n-1}] has rank n. The row space is built
// incrementally with orthonormalization; singular values below 1e-8 of the
// largest count as zero.
bool numeric_observability_check(const Matrix& a, const Matrix& c);

} // namespace dse
