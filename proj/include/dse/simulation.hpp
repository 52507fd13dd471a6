#pragma once

#include "dse/estimator.hpp"
#include "dse/mitigation.hpp"
#include "dse/scenario.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace dse {

struct StepRecord
{
	int k = 0;
	Vector x;                  // truth x_k
	std::vector<Vector> posts; // x_hat^i_{k|k}
	Vector y;
	Vector tau;
	Vector residuals;
	std::vector<int> crossed;      // largest crossed level index per agent, -1 if none or during burn-in
	std::vector<bool> attacked;    // a live (unretired) attack biases the agent's output
	std::vector<int> measured;     // measured state per agent at this step
	std::vector<double> theta2;    // thresholds in force
	int config = 0;                // index into SimulationTrace::configs
};

struct FalseAlarmCount
{
	double m = 0.0;
	double kappa = 0.0;
	long long crossings = 0;
	long long trials = 0;
};

// First step at or after onset where the attacked agent crossed each level.
struct AttackLatency
{
	int attack = 0;
	int agent = 0;
	int k_start = 0;
	std::vector<std::optional<int>> first_crossing; // per level, absolute k
};

struct SimulationTrace
{
	std::uint64_t seed = 0;
	int horizon = 0;
	int burn_in = 0;
	std::vector<std::shared_ptr<const Configuration>> configs; // [0] is the initial design
	std::vector<StepRecord> steps;                             // k = 1..horizon
	std::vector<DetectionEvent> detections;
	std::vector<MitigationEvent> mitigations;
	std::vector<FalseAlarmCount> false_alarms;
	std::vector<AttackLatency> latencies;

	double msee(int step, int agent) const; // |x_k - x_hat^i_{k|k}|^2
};

// Builds the shared cache for a scenario and designs the root placement.
// Throws InfeasibleError with the best spectral radius found.
std::shared_ptr<ConfigurationCache> prepare_cache(const Scenario& s);

// Seed defaults to the scenario's. A cache from prepare_cache may be shared
// across runs and threads.
SimulationTrace run_simulation(const Scenario& s, std::optional<std::uint64_t> seed = std::nullopt,
	std::shared_ptr<ConfigurationCache> cache = nullptr);

// Everything the aggregate depends on, extracted from one trace.
struct RunSummary
{
	std::uint64_t seed = 0;
	std::vector<std::vector<double>> msee;     // [step][agent]
	std::vector<std::vector<Vector>> error;    // [step][agent], x_k - x_hat^i_{k|k}
	std::vector<std::vector<double>> residual; // [step][agent]
	std::vector<std::vector<int>> crossed;     // [step][agent]
	std::vector<std::vector<bool>> attacked;   // [step][agent]
	std::vector<FalseAlarmCount> false_alarms;
	std::vector<AttackLatency> latencies;
	std::vector<MitigationEvent> mitigations;
	std::vector<double> theta2_final; // thresholds in force at the horizon
	double Theta1_final = 0.0;

	bool operator==(const RunSummary& o) const;
};

RunSummary summarize(const SimulationTrace& t);

struct RateEstimate
{
	double m = 0.0;
	double nominal = 0.0; // 1 - kappa
	long long crossings = 0;
	long long trials = 0;
	double rate = 0.0;
	double ci_low = 0.0; // Wilson interval
	double ci_high = 0.0;
};

struct LatencyStats
{
	int attack = 0;
	int agent = 0;
	double m = 0.0;                // level the latency refers to
	std::vector<int> latencies;    // detected runs only, k - k_start
	int undetected = 0;
	double mean = 0.0;
	double median = 0.0;
};

struct AggregateReport
{
	int runs = 0;
	int horizon = 0;
	int agents = 0;
	std::vector<std::vector<double>> mean_msee; // [step][agent]
	std::vector<std::vector<Vector>> mean_error; // [step][agent]
	std::vector<RateEstimate> false_alarm;
	std::vector<LatencyStats> latency;
	int runs_with_mitigation = 0;
	int mitigation_events = 0;

	bool operator==(const AggregateReport& o) const;
};

// Wilson score interval at two-sided confidence `confidence`.
std::pair<double, double> wilson_interval(long long successes, long long trials, double confidence);

// Pure function of the ordered summaries; summaries[r] belongs to run r.
// latency_level selects the level whose latencies are reported.
AggregateReport aggregate(const std::vector<RunSummary>& summaries, double latency_level = 2.0);

struct MonteCarloResult
{
	std::vector<RunSummary> runs;
	AggregateReport report;
	std::shared_ptr<ConfigurationCache> cache;
};

// Run 0 uses the master seed, run r > 0 derive_seed(master, "run", r).
// threads = 0 uses the scenario setting, and 0 there means hardware concurrency.
MonteCarloResult monte_carlo(const Scenario& s, int runs, std::optional<std::uint64_t> seed = std::nullopt,
	int threads = 0, std::shared_ptr<ConfigurationCache> cache = nullptr);

std::uint64_t run_seed(std::uint64_t master, int run);

} // namespace dse
