#include "dse/mitigation.hpp"

#include "dse/errors.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>

namespace dse {

std::shared_ptr<const Configuration> build_configuration(const DesignInputs& inputs,
	const std::vector<int>& measured_states, const std::vector<bool>& removed, bool use_import,
	const std::optional<std::vector<double>>& initial_injection)
{
	auto cfg = std::make_shared<Configuration>();
	const int n = int(inputs.A.rows());
	const int N = int(measured_states.size());
	cfg->measured_states = measured_states;
	cfg->removed = removed.empty() ? std::vector<bool>(N, false) : removed;

	Matrix C = Matrix::Zero(N, n);
	for (int i = 0; i < N; ++i) {
		if (measured_states[i] < 0 || measured_states[i] >= n)
			throw ValidationError("agent " + std::to_string(i + 1) + " measures a state outside [1, " + std::to_string(n) + "]");
		C(i, measured_states[i]) = 1.0;
	}
	cfg->model = SystemModel(inputs.A, C, inputs.E, inputs.R);
	std::vector<std::optional<double>> costs;
	for (int s : measured_states)
		costs.push_back(s < int(inputs.state_costs.size()) ? std::optional<double>(inputs.state_costs[s]) : std::nullopt);
	cfg->types = classify_agents(inputs.profile, measured_states, costs);
	cfg->network = build_networks(N, cfg->types, inputs.beta, inputs.weights, inputs.extra_alpha, cfg->removed);
	cfg->operators = assemble_output_operators(cfg->network, cfg->model);
	cfg->connectivity = validate_connectivity(cfg->network, cfg->types);
	cfg->observable = numeric_observability_check(kron_product(cfg->network.W, inputs.A), cfg->operators.D_C);

	if (use_import && inputs.imported_K)
		cfg->design = certify_gain(*inputs.imported_K, cfg->model, cfg->network, cfg->operators, cfg->types, inputs.gain);
	else
		cfg->design = design_gain(cfg->model, cfg->network, cfg->operators, cfg->types, inputs.gain, initial_injection);

	if (cfg->design.detection_enabled)
		cfg->thresholds = detection_thresholds(cfg->design.Theta1, cfg->model, inputs.levels, inputs.false_alarm_rates);
	return cfg;
}

namespace {

std::string placement_key(const std::vector<int>& states, const std::vector<bool>& removed, bool use_import)
{
	std::ostringstream os;
	for (size_t i = 0; i < states.size(); ++i)
		os << states[i] << (i < removed.size() && removed[i] ? "r" : "") << ',';
	os << (use_import ? "import" : "design");
	return os.str();
}

} // namespace

std::shared_ptr<const Configuration> ConfigurationCache::root(const std::vector<int>& measured_states)
{
	const std::vector<bool> removed(measured_states.size(), false);
	std::lock_guard<std::mutex> lock(mutex_);
	auto cfg = lookup(placement_key(measured_states, removed, true), measured_states, removed, true);
	if (!root_injection_)
		root_injection_ = cfg->design.injection;
	return cfg;
}

std::shared_ptr<const Configuration> ConfigurationCache::get(const std::vector<int>& measured_states,
	const std::vector<bool>& removed)
{
	std::lock_guard<std::mutex> lock(mutex_);
	return lookup(placement_key(measured_states, removed, false), measured_states, removed, false);
}

std::shared_ptr<const Configuration> ConfigurationCache::lookup(const std::string& key,
	const std::vector<int>& measured_states, const std::vector<bool>& removed, bool use_import)
{
	auto it = entries_.find(key);
	if (it == entries_.end()) {
		Entry e;
		try {
			e.config = build_configuration(inputs_, measured_states, removed, use_import,
				use_import ? std::nullopt : root_injection_);
		} catch (const InfeasibleError& ex) {
			e.error = ex.what();
			e.best_rho = ex.best_rho();
			e.infeasible = true;
		} catch (const Error& ex) {
			e.error = ex.what();
		}
		it = entries_.emplace(key, std::move(e)).first;
	}
	const Entry& e = it->second;
	if (e.config)
		return e.config;
	if (e.infeasible)
		throw InfeasibleError(e.error, e.best_rho);
	throw Error(e.error);
}

size_t ConfigurationCache::size() const
{
	std::lock_guard<std::mutex> lock(mutex_);
	return entries_.size();
}

std::vector<int> substitution_class(const StructuralProfile& profile, int attacked_state,
	const std::vector<int>& other_states)
{
	std::vector<std::vector<int>> roles;
	auto add_if_uncovered = [&](const std::vector<int>& set) {
		if (!std::count(set.begin(), set.end(), attacked_state))
			return;
		for (int o : other_states)
			if (std::count(set.begin(), set.end(), o))
				return;
		roles.push_back(set);
	};
	for (const auto& c : profile.rank.contractions)
		add_if_uncovered(c);
	for (const auto& p : profile.parents)
		add_if_uncovered(p);
	if (roles.empty())
		return equivalence_class(profile, attacked_state);
	std::vector<int> cls = roles.front();
	for (size_t r = 1; r < roles.size(); ++r) {
		std::vector<int> keep;
		std::set_intersection(cls.begin(), cls.end(), roles[r].begin(), roles[r].end(), std::back_inserter(keep));
		cls = std::move(keep);
	}
	return cls;
}

int select_substitute(const StructuralProfile& profile, int attacked_state, AgentType type,
	const std::set<int>& excluded, const std::vector<double>& costs, const std::optional<std::vector<int>>& other_states)
{
	if (type == AgentType::Gamma)
		throw ValidationError("select_substitute: gamma agents are removed, not substituted");
	const std::vector<int> cls = other_states ? substitution_class(profile, attacked_state, *other_states)
											  : equivalence_class(profile, attacked_state);
	int best = -1;
	double best_cost = 0.0;
	for (int s : cls) {
		if (s == attacked_state || excluded.count(s))
			continue;
		const double c = s < int(costs.size()) ? costs[s] : 1.0;
		if (best < 0 || c < best_cost) {
			best = s;
			best_cost = c;
		}
	}
	if (best < 0)
		throw NoSubstituteError("no-substitute: equivalence class of state " + std::to_string(attacked_state + 1) +
			" has no eligible member");
	return best;
}

MitigationEvent apply_mitigation(MitigationState& state, ConfigurationCache& cache, int agent, int k,
	const std::vector<AttackSpec>& attacks, std::vector<AttackMemory>& memories)
{
	const Configuration& cur = *state.config;
	MitigationEvent ev;
	ev.k = k;
	ev.agent = agent;
	ev.type = cur.types[agent].type;
	ev.attacked_state = cur.measured_states[agent];

	std::vector<int> states = cur.measured_states;
	std::vector<bool> removed = cur.removed;
	if (ev.type == AgentType::Gamma) {
		removed[agent] = true;
		ev.removed = true;
	} else {
		std::set<int> excluded = state.mitigated_states;
		std::vector<int> others;
		for (int i = 0; i < int(states.size()); ++i)
			if (i != agent) {
				excluded.insert(states[i]);
				if (!removed[i])
					others.push_back(states[i]);
			}
		try {
			ev.substitute = select_substitute(cache.inputs().profile, ev.attacked_state, ev.type, excluded,
				cache.inputs().state_costs, others);
		} catch (const NoSubstituteError& e) {
			ev.rebuild_failed = true;
			ev.failure = e.what();
			state.blocked[agent] = true;
			return ev;
		}
		states[agent] = *ev.substitute;
	}

	std::shared_ptr<const Configuration> next;
	try {
		next = cache.get(states, removed);
	} catch (const Error& e) {
		ev.rebuild_failed = true;
		ev.failure = std::string("rebuild-failed: ") + e.what();
		state.blocked[agent] = true;
		return ev;
	}
	ev.observable = next->observable;
	ev.rho = next->design.rho;
	ev.b = next->design.b;
	ev.Theta1 = next->design.Theta1;
	ev.isolation = next->design.isolation;
	ev.type_preserved = ev.removed || next->types[agent].type == ev.type;
	if (!next->observable || !(next->design.rho < 1.0)) {
		ev.rebuild_failed = true;
		ev.failure = "rebuild-failed: post-rebuild observability or stability check failed";
		state.blocked[agent] = true;
		return ev;
	}

	state.mitigated_states.insert(ev.attacked_state);
	for (size_t a = 0; a < attacks.size(); ++a)
		if (attacks[a].agent == agent && attacks[a].k_start <= k && !ev.removed)
			memories[a].retired = true;
	state.config = std::move(next);
	state.streak[agent] = 0;
	if (ev.removed)
		state.blocked[agent] = true;
	return ev;
}

} // namespace dse
