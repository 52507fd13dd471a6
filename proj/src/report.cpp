#include "dse/report.hpp"

#include "dse/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace dse {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string ensure_dir(const std::string& dir)
{
	std::error_code ec;
	fs::create_directories(dir, ec);
	if (ec)
		throw IoError(dir, "cannot create directory: " + ec.message());
	return dir;
}

class OutFile
{
public:
	OutFile(const std::string& dir, const std::string& name) : path_((fs::path(dir) / name).string()), out_(path_)
	{
		if (!out_)
			throw IoError(path_, "cannot open for writing");
	}
	std::ofstream& stream() { return out_; }
	void close()
	{
		out_.close();
		if (!out_)
			throw IoError(path_, "write failed");
	}

private:
	std::string path_;
	std::ofstream out_;
};

std::string m_label(double m)
{
	return "theta_m" + format_number(m);
}

Json isolation_json(const IsolationReport& r)
{
	Json pairs = Json::array();
	for (const IsolationPair& p : r.pairs)
		pairs.push_back(Json{{"receiver", p.i + 1}, {"alpha_agent", p.j + 1}, {"numerator", p.numerator},
			{"denominator", p.denominator}, {"ratio", p.ratio}, {"degenerate", p.degenerate}});
	Json j{{"max_ratio", r.max_ratio}, {"pass", r.pass}, {"degenerate", r.degenerate}, {"pairs", pairs}};
	if (r.argmax_i >= 0)
		j["argmax"] = Json::array({r.argmax_i + 1, r.argmax_j + 1});
	return j;
}

Json configuration_json(const Configuration& c)
{
	const GainDesign& d = c.design;
	Json states = Json::array(), types = Json::array(), removed = Json::array();
	for (size_t i = 0; i < c.measured_states.size(); ++i) {
		states.push_back(c.measured_states[i] + 1);
		types.push_back(to_string(c.types[i].type));
		removed.push_back(bool(c.removed[i]));
	}
	Json j;
	j["measured_states"] = states;
	j["agent_types"] = types;
	j["removed"] = removed;
	j["observable"] = c.observable;
	j["connectivity_ok"] = c.connectivity.ok();
	j["rho"] = d.rho;
	j["b"] = d.b;
	j["a1"] = d.a1;
	j["a2"] = d.a2;
	j["Theta1"] = d.Theta1;
	j["epsilon_achieved"] = d.epsilon_achieved;
	j["detection_enabled"] = d.detection_enabled;
	Json inj = Json::array();
	for (double v : d.injection)
		inj.push_back(v);
	j["injection"] = inj;
	j["lyapunov"] = Json{{"valid", d.certificate.valid}, {"min_eigenvalue", d.certificate.min_eigenvalue},
		{"residual", d.certificate.residual}};
	if (d.thresholds)
		j["threshold_terms"] = Json{{"E_norm", d.thresholds->E_norm}, {"Rbar_norm", d.thresholds->Rbar_norm},
			{"N", d.thresholds->N}};
	Json theta2 = Json::array();
	if (c.thresholds)
		for (double v : c.thresholds->theta2)
			theta2.push_back(v);
	j["Theta2"] = theta2;
	Json levels = Json::array();
	if (c.thresholds)
		for (const DetectionLevel& l : c.thresholds->levels)
			levels.push_back(Json{{"m", l.m}, {"kappa", l.kappa}});
	j["levels"] = levels;
	j["isolation"] = isolation_json(d.isolation);
	Json warnings = Json::array();
	for (const auto& w : d.warnings)
		warnings.push_back(w);
	j["warnings"] = warnings;
	j["restarts_used"] = d.restarts_used;
	j["evaluations"] = d.evaluations;
	return j;
}

Json mitigation_json(const MitigationEvent& e)
{
	Json j;
	j["type"] = "mitigation";
	j["k"] = e.k;
	j["agent"] = e.agent + 1;
	j["agent_type"] = to_string(e.type);
	j["attacked_state"] = e.attacked_state + 1;
	j["substitute_state"] = e.substitute ? Json(*e.substitute + 1) : Json(nullptr);
	j["removed"] = e.removed;
	j["rebuild_failed"] = e.rebuild_failed;
	if (!e.failure.empty())
		j["failure"] = e.failure;
	j["observable"] = e.observable;
	j["rho"] = e.rho;
	j["b"] = e.b;
	j["Theta1"] = e.Theta1;
	j["type_preserved"] = e.type_preserved;
	j["isolation_max_ratio"] = e.isolation.max_ratio;
	return j;
}

Json detection_json(const DetectionEvent& e)
{
	return Json{{"type", "detection"}, {"k", e.k}, {"agent", e.agent + 1}, {"residual", e.residual}, {"m", e.m},
		{"kappa", e.kappa}, {"false_alarm", e.false_alarm}, {"theta", e.theta}};
}

Json false_alarm_json(const std::vector<FalseAlarmCount>& counts)
{
	Json arr = Json::array();
	for (const FalseAlarmCount& f : counts)
		arr.push_back(Json{{"m", f.m}, {"kappa", f.kappa}, {"crossings", f.crossings}, {"trials", f.trials},
			{"rate", f.trials ? double(f.crossings) / double(f.trials) : 0.0}});
	return arr;
}

void write_json(const std::string& dir, const std::string& name, const Json& j)
{
	OutFile f(dir, name);
	f.stream() << j.dump(2) << '\n';
	f.close();
}

} // namespace

std::string format_number(double v)
{
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.12g", v);
	return buf;
}

void write_trace_reports(const SimulationTrace& trace, const Scenario& s, const std::string& out_dir)
{
	ensure_dir(out_dir);
	const auto& root = *trace.configs.front();
	std::vector<double> ms;
	if (root.thresholds)
		for (const DetectionLevel& l : root.thresholds->levels)
			ms.push_back(l.m);

	{
		OutFile f(out_dir, "residuals.csv");
		auto& o = f.stream();
		o << "k,agent,measured_state,residual";
		for (double m : ms)
			o << ',' << m_label(m);
		o << ",crossed_m\n";
		for (const StepRecord& r : trace.steps)
			for (int i = 0; i < int(r.posts.size()); ++i) {
				o << r.k << ',' << i + 1 << ',' << r.measured[i] + 1 << ',' << format_number(r.residuals(i));
				for (double m : ms)
					o << ',' << (r.theta2.empty() ? std::string() : format_number(m * r.theta2[i]));
				o << ',' << (r.crossed[i] >= 0 ? format_number(ms[r.crossed[i]]) : std::string("0")) << '\n';
			}
		f.close();
	}
	{
		OutFile f(out_dir, "msee.csv");
		auto& o = f.stream();
		o << "k,agent,msee\n";
		for (size_t k = 0; k < trace.steps.size(); ++k)
			for (int i = 0; i < int(trace.steps[k].posts.size()); ++i)
				o << trace.steps[k].k << ',' << i + 1 << ',' << format_number(trace.msee(int(k), i)) << '\n';
		f.close();
	}
	{
		OutFile f(out_dir, "events.jsonl");
		auto& o = f.stream();
		size_t d = 0, m = 0;
		while (d < trace.detections.size() || m < trace.mitigations.size()) {
			bool take_detection = m >= trace.mitigations.size() ||
				(d < trace.detections.size() && trace.detections[d].k <= trace.mitigations[m].k);
			if (take_detection)
				o << detection_json(trace.detections[d++]).dump() << '\n';
			else
				o << mitigation_json(trace.mitigations[m++]).dump() << '\n';
		}
		f.close();
	}
	{
		Json j;
		j["scenario"] = s.name;
		j["seed"] = trace.seed;
		j["horizon"] = trace.horizon;
		j["burn_in"] = trace.burn_in;
		Json configs = Json::array();
		for (const auto& c : trace.configs)
			configs.push_back(configuration_json(*c));
		j["configurations"] = configs;
		j["false_alarms"] = false_alarm_json(trace.false_alarms);
		Json lat = Json::array();
		for (const AttackLatency& a : trace.latencies) {
			Json first = Json::array();
			for (size_t l = 0; l < a.first_crossing.size(); ++l)
				first.push_back(Json{{"m", ms[l]},
					{"k", a.first_crossing[l] ? Json(*a.first_crossing[l]) : Json(nullptr)},
					{"latency", a.first_crossing[l] ? Json(*a.first_crossing[l] - a.k_start) : Json(nullptr)}});
			lat.push_back(Json{{"attack", a.attack + 1}, {"agent", a.agent + 1}, {"start", a.k_start},
				{"first_crossing", first}});
		}
		j["attack_latency"] = lat;
		j["detection_events"] = trace.detections.size();
		j["mitigation_events"] = trace.mitigations.size();
		write_json(out_dir, "summary.json", j);
	}
}

void write_aggregate_reports(const MonteCarloResult& mc, const Scenario& s, const std::string& out_dir)
{
	ensure_dir(out_dir);
	const AggregateReport& a = mc.report;
	{
		OutFile f(out_dir, "mc_msee.csv");
		auto& o = f.stream();
		o << "k,agent,mean_msee\n";
		for (int k = 0; k < a.horizon; ++k)
			for (int i = 0; i < a.agents; ++i)
				o << k + 1 << ',' << i + 1 << ',' << format_number(a.mean_msee[k][i]) << '\n';
		f.close();
	}
	{
		OutFile f(out_dir, "mc_error.csv");
		auto& o = f.stream();
		o << "k,agent,state,mean_error\n";
		for (int k = 0; k < a.horizon; ++k)
			for (int i = 0; i < a.agents; ++i)
				for (int st = 0; st < a.mean_error[k][i].size(); ++st)
					o << k + 1 << ',' << i + 1 << ',' << st + 1 << ',' << format_number(a.mean_error[k][i](st)) << '\n';
		f.close();
	}
	{
		OutFile f(out_dir, "mc_false_alarm.csv");
		auto& o = f.stream();
		o << "m,kappa,nominal_rate,crossings,trials,rate,ci99_low,ci99_high\n";
		for (const RateEstimate& e : a.false_alarm)
			o << format_number(e.m) << ',' << format_number(1.0 - e.nominal) << ',' << format_number(e.nominal) << ','
			  << e.crossings << ',' << e.trials << ',' << format_number(e.rate) << ',' << format_number(e.ci_low)
			  << ',' << format_number(e.ci_high) << '\n';
		f.close();
	}
	{
		OutFile f(out_dir, "mc_latency.csv");
		auto& o = f.stream();
		o << "attack,agent,m,run,latency\n";
		int level = -1;
		if (!mc.runs.empty())
			for (size_t l = 0; l < mc.runs.front().false_alarms.size(); ++l)
				if (mc.runs.front().false_alarms[l].m == s.mitigation.confirm_m)
					level = int(l);
		for (size_t r = 0; r < mc.runs.size(); ++r)
			for (const AttackLatency& lat : mc.runs[r].latencies) {
				o << lat.attack + 1 << ',' << lat.agent + 1 << ',' << format_number(s.mitigation.confirm_m) << ','
				  << r << ',';
				if (level >= 0 && lat.first_crossing[level])
					o << *lat.first_crossing[level] - lat.k_start;
				o << '\n';
			}
		f.close();
	}
	{
		Json j;
		j["scenario"] = s.name;
		j["runs"] = a.runs;
		j["horizon"] = a.horizon;
		Json seeds = Json::array();
		for (const RunSummary& r : mc.runs)
			seeds.push_back(r.seed);
		j["run_seeds"] = seeds;
		Json fa = Json::array();
		for (const RateEstimate& e : a.false_alarm)
			fa.push_back(Json{{"m", e.m}, {"nominal_rate", e.nominal}, {"crossings", e.crossings}, {"trials", e.trials},
				{"rate", e.rate}, {"ci99", Json::array({e.ci_low, e.ci_high})}});
		j["false_alarm"] = fa;
		Json lat = Json::array();
		for (const LatencyStats& l : a.latency)
			lat.push_back(Json{{"attack", l.attack + 1}, {"agent", l.agent + 1}, {"m", l.m},
				{"detected", l.latencies.size()}, {"undetected", l.undetected}, {"mean", l.mean}, {"median", l.median}});
		j["latency"] = lat;
		j["runs_with_mitigation"] = a.runs_with_mitigation;
		j["mitigation_events"] = a.mitigation_events;
		write_json(out_dir, "mc_summary.json", j);
	}
}

void write_analysis_report(const Scenario& s, const std::string& out_dir)
{
	ensure_dir(out_dir);
	const DesignInputs in = make_design_inputs(s);
	const StructuralProfile& p = in.profile;
	auto sets = [](const std::vector<std::vector<int>>& v) {
		Json arr = Json::array();
		for (const auto& set : v) {
			Json one = Json::array();
			for (int x : set)
				one.push_back(x + 1);
			arr.push_back(one);
		}
		return arr;
	};
	Json j;
	j["n"] = s.system.n;
	j["edges"] = s.system.edges.size();
	j["spectral_radius"] = spectral_radius(in.A);
	j["sccs"] = sets(p.scc.components);
	j["parent_sccs"] = sets(p.parents);
	j["structural_rank"] = p.rank.rank;
	j["contractions"] = sets(p.rank.contractions);
	Json agents = Json::array();
	std::vector<std::optional<double>> costs;
	for (int st : s.agent_states)
		costs.push_back(in.state_costs[st]);
	const std::vector<AgentClass> types = classify_agents(p, s.agent_states, costs);
	for (size_t i = 0; i < types.size(); ++i)
		agents.push_back(Json{{"agent", int(i) + 1}, {"state", types[i].state + 1}, {"type", to_string(types[i].type)},
			{"alpha_over_beta", types[i].alpha_over_beta}});
	j["agents"] = agents;
	Matrix c = Matrix::Zero(s.agents(), s.system.n);
	for (int i = 0; i < s.agents(); ++i)
		c(i, s.agent_states[i]) = 1.0;
	j["observable"] = numeric_observability_check(in.A, c);
	write_json(out_dir, "analysis.json", j);
}

void write_design_report(const Configuration& config, const Scenario& s, const std::string& out_dir)
{
	ensure_dir(out_dir);
	Json j;
	j["scenario"] = s.name;
	j["design"] = configuration_json(config);
	write_json(out_dir, "design.json", j);
	write_matrix_csv((fs::path(out_dir) / "gain_K.csv").string(), config.design.K);
}

} // namespace dse
