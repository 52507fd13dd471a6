#pragma once

#include "dse/gain.hpp"
#include "dse/mitigation.hpp"
#include "dse/model.hpp"
#include "dse/network.hpp"
#include "dse/structural.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dse {

inline constexpr int kSchemaVersion = 1;

struct NoiseSpec
{
	std::string kind = "identity"; // "identity", "all_ones" or "matrix"
	double scale = 0.0;
	std::vector<std::vector<double>> matrix;
	bool operator==(const NoiseSpec&) const = default;
};

struct SystemSection
{
	int n = 0;
	std::vector<WeightedEdge> edges; // 0-based
	std::string weight_rule = "explicit"; // "explicit" or "random"
	double weight_lo = 0.5;
	double weight_hi = 1.5;
	std::uint64_t weight_seed = 0;
	std::optional<double> target_rho;
	NoiseSpec process_noise;
	std::vector<double> measurement_variance; // per agent
	bool operator==(const SystemSection&) const = default;
};

struct NetworkSection
{
	BetaTopology beta;
	WeightConfig weights;
	std::vector<std::pair<int, int>> extra_alpha; // 0-based
	bool operator==(const NetworkSection&) const = default;
};

struct DetectionSection
{
	std::vector<double> levels = {1.0, 2.0, 3.0, 4.0};
	std::vector<double> false_alarm_rates;
	int burn_in = 10;
	bool operator==(const DetectionSection&) const = default;
};

struct MonteCarloSection
{
	int runs = 100;
	int threads = 0; // 0 = hardware concurrency
	bool operator==(const MonteCarloSection&) const = default;
};

struct Scenario
{
	int schema_version = kSchemaVersion;
	std::string name;
	std::uint64_t seed = 0;
	int horizon = 0;
	SystemSection system;
	std::vector<int> agent_states; // 0-based measured state per agent
	std::map<int, double> state_costs; // 0-based state -> cost, default 1
	NetworkSection network;
	GainConfig gain;
	std::optional<std::string> import_k; // resolved path of a CSV gain matrix
	DetectionSection detection;
	std::vector<AttackSpec> attacks;
	MitigationPolicy mitigation;
	MonteCarloSection monte_carlo;
	double initial_estimate_std = 1.0;

	int agents() const { return int(agent_states.size()); }
	bool operator==(const Scenario&) const = default;
};

// Reads, parses and validates. Relative paths inside the file resolve
// against the file's directory. Throws IoError, or ValidationError with the
// offending field.
Scenario load_scenario(const std::string& path);

// base_dir resolves relative edges_file / import_k paths.
Scenario scenario_from_json_text(const std::string& text, const std::string& base_dir = ".");

// Canonical form: every field explicit, edges inline, 1-based indices.
std::string scenario_to_json_text(const Scenario& s);

void validate_scenario(const Scenario& s);

Matrix process_covariance(const Scenario& s);
Matrix measurement_covariance(const Scenario& s);
Matrix system_matrix(const Scenario& s);

DesignInputs make_design_inputs(const Scenario& s);

Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Matrix& m);

} // namespace dse
