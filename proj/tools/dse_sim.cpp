#include "dse/errors.hpp"
#include "dse/report.hpp"
#include "dse/scenario.hpp"
#include "dse/simulation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

namespace {

struct Common
{
	std::string scenario;
	std::optional<std::uint64_t> seed;
	std::string out;
};

void add_common(CLI::App* cmd, Common& c)
{
	cmd->add_option("--scenario", c.scenario, "Scenario JSON file")->required();
	cmd->add_option("--seed", c.seed, "Master seed override");
	cmd->add_option("--out", c.out, "Output directory (default $DSE_OUT_DIR or ./out)");
}

std::string out_dir(const Common& c)
{
	if (!c.out.empty())
		return c.out;
	if (const char* env = std::getenv("DSE_OUT_DIR"); env && *env)
		return env;
	return "out";
}

void print_design(const dse::Configuration& c)
{
	std::printf("rho(A_hat) = %.6g  ||A_hat|| = %.6g  Theta1 = %.6g  isolation max ratio = %.6g\n", c.design.rho,
		c.design.b, c.design.Theta1, c.design.isolation.max_ratio);
	for (const auto& w : c.design.warnings)
		std::printf("warning: %s\n", w.c_str());
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"Distributed state estimation with attack detection and mitigation"};
	app.require_subcommand(1);

	Common analyze_opts, design_opts, simulate_opts, mc_opts;
	int runs = 0;
	int threads = 0;
	auto* analyze = app.add_subcommand("analyze", "Structural profile and agent classification");
	add_common(analyze, analyze_opts);
	auto* design = app.add_subcommand("design", "Network, gain and certificates without simulation");
	add_common(design, design_opts);
	auto* simulate = app.add_subcommand("simulate", "Single run with reports");
	add_common(simulate, simulate_opts);
	auto* mc = app.add_subcommand("montecarlo", "Monte Carlo aggregate");
	add_common(mc, mc_opts);
	mc->add_option("--runs", runs, "Number of runs (default from scenario)")->check(CLI::PositiveNumber);
	mc->add_option("--threads", threads, "Worker threads (default from scenario, 0 = all cores)")
		->check(CLI::NonNegativeNumber);

	try {
		app.parse(argc, argv);
	}
	catch (const CLI::ParseError& e) {
		int code = app.exit(e);
		return code == 0 ? 0 : 1;
	}

	try {
		if (*analyze) {
			auto s = dse::load_scenario(analyze_opts.scenario);
			if (analyze_opts.seed)
				s.seed = *analyze_opts.seed;
			const std::string dir = out_dir(analyze_opts);
			dse::write_analysis_report(s, dir);
			std::printf("wrote %s/analysis.json\n", dir.c_str());
		}
		else if (*design) {
			auto s = dse::load_scenario(design_opts.scenario);
			const std::string dir = out_dir(design_opts);
			auto cache = std::make_shared<dse::ConfigurationCache>(dse::make_design_inputs(s));
			auto cfg = cache->root(s.agent_states);
			print_design(*cfg);
			dse::write_design_report(*cfg, s, dir);
			std::printf("wrote %s/design.json and %s/gain_K.csv\n", dir.c_str(), dir.c_str());
		}
		else if (*simulate) {
			auto s = dse::load_scenario(simulate_opts.scenario);
			const std::string dir = out_dir(simulate_opts);
			auto trace = dse::run_simulation(s, simulate_opts.seed);
			print_design(*trace.configs.front());
			for (const auto& m : trace.mitigations)
				std::printf("k=%d agent %d (%s): %s\n", m.k, m.agent + 1, dse::to_string(m.type).c_str(),
					m.rebuild_failed ? m.failure.c_str()
					: m.removed     ? "measurement removed"
									: ("substituted state " + std::to_string(*m.substitute + 1)).c_str());
			dse::write_trace_reports(trace, s, dir);
			std::printf("wrote reports to %s\n", dir.c_str());
		}
		else if (*mc) {
			auto s = dse::load_scenario(mc_opts.scenario);
			const std::string dir = out_dir(mc_opts);
			auto result = dse::monte_carlo(s, runs > 0 ? runs : s.monte_carlo.runs, mc_opts.seed, threads);
			for (const auto& e : result.report.false_alarm)
				std::printf("m=%g crossing rate %.5f (99%% CI %.5f..%.5f, nominal %.5f)\n", e.m, e.rate, e.ci_low,
					e.ci_high, e.nominal);
			dse::write_aggregate_reports(result, s, dir);
			std::printf("wrote aggregate reports to %s\n", dir.c_str());
		}
	}
	catch (const dse::InfeasibleError& e) {
		std::fprintf(stderr, "infeasible: %s\n", e.what());
		return 2;
	}
	catch (const std::exception& e) {
		std::fprintf(stderr, "error: %s\n", e.what());
		return 1;
	}
	return 0;
}
