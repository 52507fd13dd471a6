#pragma once

#include "dse/estimator.hpp"
#include "dse/gain.hpp"
#include "dse/model.hpp"
#include "dse/network.hpp"
#include "dse/structural.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dse {

struct MitigationPolicy
{
	bool enabled = false;
	double confirm_m = 2.0; // must be one of the configured detection levels
	int consecutive = 3;
	bool operator==(const MitigationPolicy&) const = default;
};

// Everything that does not depend on where the sensors sit.
struct DesignInputs
{
	Matrix A;
	Matrix E;
	Matrix R;
	StructuralProfile profile;
	BetaTopology beta;
	WeightConfig weights;
	std::vector<std::pair<int, int>> extra_alpha;
	GainConfig gain;
	std::vector<double> levels;
	std::vector<double> false_alarm_rates;
	std::vector<double> state_costs; // per state, default 1
	std::optional<Matrix> imported_K;
};

// Model, network, gain and thresholds for one sensor placement.
struct Configuration
{
	std::vector<int> measured_states;
	std::vector<bool> removed;
	SystemModel model;
	std::vector<AgentClass> types;
	AgentNetwork network;
	OutputOperators operators;
	ConnectivityReport connectivity;
	bool observable = false;
	GainDesign design;
	std::optional<ThresholdTable> thresholds; // empty when detection is disabled
};

// Builds and certifies a configuration. The imported gain, if any, is used
// only when use_import is set. Throws InfeasibleError when no gain meets
// the stability requirements.
std::shared_ptr<const Configuration> build_configuration(const DesignInputs& inputs,
	const std::vector<int>& measured_states, const std::vector<bool>& removed, bool use_import,
	const std::optional<std::vector<double>>& initial_injection = std::nullopt);

// Configurations keyed by sensor placement. Safe to share between threads.
// Redesigns start from the root placement's gains, so a placement's design
// does not depend on which substitution sequence reached it first.
class ConfigurationCache
{
public:
	explicit ConfigurationCache(DesignInputs inputs) : inputs_(std::move(inputs)) {}

	const DesignInputs& inputs() const { return inputs_; }

	// Builds (or returns) the root placement, whose gains seed later redesigns.
	std::shared_ptr<const Configuration> root(const std::vector<int>& measured_states);

	// Rethrows the stored error for placements that failed before.
	std::shared_ptr<const Configuration> get(const std::vector<int>& measured_states, const std::vector<bool>& removed);

	size_t size() const;

private:
	struct Entry
	{
		std::shared_ptr<const Configuration> config;
		std::string error;
		double best_rho = 0.0;
		bool infeasible = false;
	};
	std::shared_ptr<const Configuration> lookup(const std::string& key, const std::vector<int>& measured_states,
		const std::vector<bool>& removed, bool use_import);

	DesignInputs inputs_;
	std::optional<std::vector<double>> root_injection_;
	mutable std::mutex mutex_;
	std::map<std::string, Entry> entries_;
};

// States that can take over the attacked state's role: the intersection of
// every contraction or parent SCC containing it that no other sensor covers.
// Falls back to equivalence_class when the others cover all of them.
std::vector<int> substitution_class(const StructuralProfile& profile, int attacked_state,
	const std::vector<int>& other_states);

// Minimum-cost member of the attacked state's class other than the attacked
// state and the excluded states; ties go to the lowest index. The class is
// equivalence_class, or substitution_class when other_states is given.
// Throws NoSubstituteError when none is eligible, ValidationError for gamma.
int select_substitute(const StructuralProfile& profile, int attacked_state, AgentType type,
	const std::set<int>& excluded, const std::vector<double>& costs = {},
	const std::optional<std::vector<int>>& other_states = std::nullopt);

struct MitigationEvent
{
	int k = 0;
	int agent = 0;
	AgentType type = AgentType::Gamma;
	int attacked_state = 0;
	std::optional<int> substitute; // empty for a removed gamma agent or a failure
	bool removed = false;
	bool rebuild_failed = false;
	std::string failure;
	// post-rebuild certificates
	bool observable = false;
	double rho = 0.0;
	double b = 0.0;
	double Theta1 = 0.0;
	bool type_preserved = true;
	IsolationReport isolation;
};

// Mutable per-run state touched by mitigation.
struct MitigationState
{
	std::shared_ptr<const Configuration> config;
	std::set<int> mitigated_states; // states ever replaced after an attack
	std::vector<bool> blocked;      // agents whose mitigation failed
	std::vector<int> streak;        // consecutive confirmation crossings
};

// Substitutes (alpha/beta) or removes (gamma) the agent's measurement,
// rebuilds through the cache and retires attacks already begun on the agent.
// On failure the previous configuration stays in force and the event is
// marked rebuild_failed.
MitigationEvent apply_mitigation(MitigationState& state, ConfigurationCache& cache, int agent, int k,
	const std::vector<AttackSpec>& attacks, std::vector<AttackMemory>& memories);

} // namespace dse
