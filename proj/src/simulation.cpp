#include "dse/simulation.hpp"

#include "dse/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace dse {

namespace {

int level_index(const ThresholdTable& t, double m)
{
	for (int l = 0; l < int(t.levels.size()); ++l)
		if (t.levels[l].m == m)
			return l;
	return -1;
}

bool vectors_equal(const std::vector<std::vector<Vector>>& a, const std::vector<std::vector<Vector>>& b)
{
	if (a.size() != b.size())
		return false;
	for (size_t i = 0; i < a.size(); ++i) {
		if (a[i].size() != b[i].size())
			return false;
		for (size_t j = 0; j < a[i].size(); ++j)
			if (a[i][j].size() != b[i][j].size() || a[i][j] != b[i][j])
				return false;
	}
	return true;
}

bool same_counts(const std::vector<FalseAlarmCount>& a, const std::vector<FalseAlarmCount>& b)
{
	if (a.size() != b.size())
		return false;
	for (size_t i = 0; i < a.size(); ++i)
		if (a[i].m != b[i].m || a[i].kappa != b[i].kappa || a[i].crossings != b[i].crossings ||
			a[i].trials != b[i].trials)
			return false;
	return true;
}

bool same_latencies(const std::vector<AttackLatency>& a, const std::vector<AttackLatency>& b)
{
	if (a.size() != b.size())
		return false;
	for (size_t i = 0; i < a.size(); ++i)
		if (a[i].attack != b[i].attack || a[i].agent != b[i].agent || a[i].k_start != b[i].k_start ||
			a[i].first_crossing != b[i].first_crossing)
			return false;
	return true;
}

bool same_mitigations(const std::vector<MitigationEvent>& a, const std::vector<MitigationEvent>& b)
{
	if (a.size() != b.size())
		return false;
	for (size_t i = 0; i < a.size(); ++i)
		if (a[i].k != b[i].k || a[i].agent != b[i].agent || a[i].substitute != b[i].substitute ||
			a[i].removed != b[i].removed || a[i].rebuild_failed != b[i].rebuild_failed || a[i].rho != b[i].rho ||
			a[i].b != b[i].b || a[i].Theta1 != b[i].Theta1)
			return false;
	return true;
}

} // namespace

double SimulationTrace::msee(int step, int agent) const
{
	const StepRecord& s = steps[step];
	return (s.x - s.posts[agent]).squaredNorm();
}

std::uint64_t run_seed(std::uint64_t master, int run)
{
	return run == 0 ? master : derive_seed(master, "run", std::uint64_t(run));
}

std::shared_ptr<ConfigurationCache> prepare_cache(const Scenario& s)
{
	auto cache = std::make_shared<ConfigurationCache>(make_design_inputs(s));
	cache->root(s.agent_states);
	return cache;
}

SimulationTrace run_simulation(const Scenario& s, std::optional<std::uint64_t> seed,
	std::shared_ptr<ConfigurationCache> cache)
{
	if (!cache)
		cache = prepare_cache(s);
	const int N = s.agents();
	const int n = s.system.n;

	SimulationTrace t;
	t.seed = seed.value_or(s.seed);
	t.horizon = s.horizon;
	t.burn_in = s.detection.burn_in;

	MitigationState ms;
	ms.config = cache->root(s.agent_states);
	ms.blocked.assign(N, false);
	ms.streak.assign(N, 0);
	t.configs.push_back(ms.config);

	RngStream truth_rng(derive_seed(t.seed, "truth-noise"));
	RngStream meas_rng(derive_seed(t.seed, "measurement-noise"));
	RngStream attack_rng(derive_seed(t.seed, "attack"));
	RngStream init_rng(derive_seed(t.seed, "init"));

	TruthState truth;
	truth.x = Vector(n);
	for (int i = 0; i < n; ++i)
		truth.x(i) = init_rng.normal();
	std::vector<Vector> posts(N, Vector(n));
	for (int a = 0; a < N; ++a)
		for (int i = 0; i < n; ++i)
			posts[a](i) = s.initial_estimate_std * init_rng.normal();

	std::vector<AttackMemory> memories(s.attacks.size());
	const std::optional<ThresholdTable>& first = ms.config->thresholds;
	if (first) {
		for (const DetectionLevel& l : first->levels)
			t.false_alarms.push_back({l.m, l.kappa, 0, 0});
	}
	for (size_t a = 0; a < s.attacks.size(); ++a)
		t.latencies.push_back({int(a), s.attacks[a].agent, s.attacks[a].k_start,
			std::vector<std::optional<int>>(t.false_alarms.size())});

	t.steps.reserve(s.horizon);
	for (int k = 1; k <= s.horizon; ++k) {
		const Configuration& cfg = *ms.config;
		truth = step_truth(truth, cfg.model, truth_rng);

		StepRecord rec;
		rec.k = k;
		rec.attacked.assign(N, false);
		for (size_t a = 0; a < s.attacks.size(); ++a)
			if (!memories[a].retired && attack_active(s.attacks[a], k))
				rec.attacked[s.attacks[a].agent] = true;

		Measurement meas = measure_outputs(truth, cfg.model, s.attacks, memories, meas_rng, attack_rng);
		std::vector<Vector> priors = predict_step(posts, cfg.network.W, cfg.model.A());
		for (int i = 0; i < N; ++i)
			posts[i] = update_step(priors[i], cfg.design.K.block(i * n, i * n, n, n), meas.y, cfg.model.C(),
				cfg.network.alpha_neighbours(i));
		rec.residuals = compute_residuals(posts, meas.y, cfg.model.C());
		rec.x = truth.x;
		rec.posts = posts;
		rec.y = meas.y;
		rec.tau = meas.tau;
		rec.measured = cfg.measured_states;
		rec.crossed.assign(N, -1);
		rec.config = int(t.configs.size()) - 1;

		if (cfg.thresholds) {
			const ThresholdTable& table = *cfg.thresholds;
			rec.theta2 = table.theta2;
			if (k > s.detection.burn_in) {
				for (int i = 0; i < N; ++i)
					rec.crossed[i] = crossed_level(rec.residuals(i), table, i);
				for (const DetectionEvent& ev : detect(rec.residuals, table, k))
					t.detections.push_back(ev);
				for (int i = 0; i < N; ++i) {
					if (rec.attacked[i])
						continue;
					for (size_t l = 0; l < t.false_alarms.size() && l < table.levels.size(); ++l) {
						++t.false_alarms[l].trials;
						if (rec.crossed[i] >= int(l))
							++t.false_alarms[l].crossings;
					}
				}
			}
			for (AttackLatency& lat : t.latencies) {
				if (k < lat.k_start || k <= s.detection.burn_in)
					continue;
				for (size_t l = 0; l < lat.first_crossing.size(); ++l)
					if (!lat.first_crossing[l] && rec.crossed[lat.agent] >= int(l))
						lat.first_crossing[l] = k;
			}
		}

		t.steps.push_back(std::move(rec));

		if (!s.mitigation.enabled || !cfg.thresholds || k <= s.detection.burn_in)
			continue;
		const int confirm = level_index(*cfg.thresholds, s.mitigation.confirm_m);
		if (confirm < 0)
			continue;
		const std::vector<int> crossed = t.steps.back().crossed;
		for (int i = 0; i < N; ++i) {
			if (ms.blocked[i])
				continue;
			ms.streak[i] = crossed[i] >= confirm ? ms.streak[i] + 1 : 0;
			if (ms.streak[i] < s.mitigation.consecutive)
				continue;
			auto before = ms.config;
			MitigationEvent ev = apply_mitigation(ms, *cache, i, k, s.attacks, memories);
			if (ms.config != before)
				t.configs.push_back(ms.config);
			t.mitigations.push_back(std::move(ev));
		}
	}
	return t;
}

RunSummary summarize(const SimulationTrace& t)
{
	RunSummary r;
	r.seed = t.seed;
	for (size_t k = 0; k < t.steps.size(); ++k) {
		const StepRecord& s = t.steps[k];
		const int N = int(s.posts.size());
		std::vector<double> msee(N);
		std::vector<Vector> err(N);
		std::vector<double> res(N);
		for (int i = 0; i < N; ++i) {
			err[i] = s.x - s.posts[i];
			msee[i] = err[i].squaredNorm();
			res[i] = s.residuals(i);
		}
		r.msee.push_back(std::move(msee));
		r.error.push_back(std::move(err));
		r.residual.push_back(std::move(res));
		r.crossed.push_back(s.crossed);
		r.attacked.push_back(s.attacked);
	}
	r.false_alarms = t.false_alarms;
	r.latencies = t.latencies;
	r.mitigations = t.mitigations;
	// Configuration in force after the final step.
	const Configuration& last = *t.configs.back();
	r.Theta1_final = last.design.Theta1;
	if (last.thresholds)
		r.theta2_final = last.thresholds->theta2;
	return r;
}

bool RunSummary::operator==(const RunSummary& o) const
{
	return seed == o.seed && msee == o.msee && vectors_equal(error, o.error) && residual == o.residual &&
		crossed == o.crossed && attacked == o.attacked && same_counts(false_alarms, o.false_alarms) &&
		same_latencies(latencies, o.latencies) && same_mitigations(mitigations, o.mitigations) &&
		theta2_final == o.theta2_final && Theta1_final == o.Theta1_final;
}

bool AggregateReport::operator==(const AggregateReport& o) const
{
	if (runs != o.runs || horizon != o.horizon || agents != o.agents || mean_msee != o.mean_msee ||
		!vectors_equal(mean_error, o.mean_error) || runs_with_mitigation != o.runs_with_mitigation ||
		mitigation_events != o.mitigation_events || false_alarm.size() != o.false_alarm.size() ||
		latency.size() != o.latency.size())
		return false;
	for (size_t i = 0; i < false_alarm.size(); ++i) {
		const RateEstimate &a = false_alarm[i], &b = o.false_alarm[i];
		if (a.m != b.m || a.nominal != b.nominal || a.crossings != b.crossings || a.trials != b.trials ||
			a.rate != b.rate || a.ci_low != b.ci_low || a.ci_high != b.ci_high)
			return false;
	}
	for (size_t i = 0; i < latency.size(); ++i) {
		const LatencyStats &a = latency[i], &b = o.latency[i];
		if (a.attack != b.attack || a.agent != b.agent || a.m != b.m || a.latencies != b.latencies ||
			a.undetected != b.undetected || a.mean != b.mean || a.median != b.median)
			return false;
	}
	return true;
}

std::pair<double, double> wilson_interval(long long successes, long long trials, double confidence)
{
	if (trials <= 0)
		return {0.0, 1.0};
	const double z = level_from_false_alarm(1.0 - confidence);
	const double nn = double(trials);
	const double p = double(successes) / nn;
	const double z2 = z * z;
	const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
	const double half = z / (1 + z2 / nn) * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
	return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

AggregateReport aggregate(const std::vector<RunSummary>& summaries, double latency_level)
{
	AggregateReport a;
	a.runs = int(summaries.size());
	if (summaries.empty())
		return a;
	const RunSummary& f = summaries.front();
	a.horizon = int(f.msee.size());
	a.agents = a.horizon ? int(f.msee.front().size()) : 0;
	const int n = a.horizon && a.agents ? int(f.error.front().front().size()) : 0;

	a.mean_msee.assign(a.horizon, std::vector<double>(a.agents, 0.0));
	a.mean_error.assign(a.horizon, std::vector<Vector>(a.agents, Vector::Zero(n)));
	for (const RunSummary& r : summaries)
		for (int k = 0; k < a.horizon; ++k)
			for (int i = 0; i < a.agents; ++i) {
				a.mean_msee[k][i] += r.msee[k][i];
				a.mean_error[k][i] += r.error[k][i];
			}
	for (int k = 0; k < a.horizon; ++k)
		for (int i = 0; i < a.agents; ++i) {
			a.mean_msee[k][i] /= a.runs;
			a.mean_error[k][i] /= a.runs;
		}

	for (size_t l = 0; l < f.false_alarms.size(); ++l) {
		RateEstimate e;
		e.m = f.false_alarms[l].m;
		e.nominal = 1.0 - f.false_alarms[l].kappa;
		for (const RunSummary& r : summaries) {
			e.crossings += r.false_alarms[l].crossings;
			e.trials += r.false_alarms[l].trials;
		}
		e.rate = e.trials ? double(e.crossings) / double(e.trials) : 0.0;
		std::tie(e.ci_low, e.ci_high) = wilson_interval(e.crossings, e.trials, 0.99);
		a.false_alarm.push_back(e);
	}

	int level = -1;
	for (size_t l = 0; l < f.false_alarms.size(); ++l)
		if (f.false_alarms[l].m == latency_level)
			level = int(l);
	for (size_t at = 0; at < f.latencies.size(); ++at) {
		LatencyStats st;
		st.attack = f.latencies[at].attack;
		st.agent = f.latencies[at].agent;
		st.m = latency_level;
		for (const RunSummary& r : summaries) {
			const AttackLatency& lat = r.latencies[at];
			if (level >= 0 && lat.first_crossing[level])
				st.latencies.push_back(*lat.first_crossing[level] - lat.k_start);
			else
				++st.undetected;
		}
		if (!st.latencies.empty()) {
			double sum = 0.0;
			for (int v : st.latencies)
				sum += v;
			st.mean = sum / double(st.latencies.size());
			std::vector<int> sorted = st.latencies;
			std::sort(sorted.begin(), sorted.end());
			const size_t m = sorted.size();
			st.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
		}
		a.latency.push_back(std::move(st));
	}

	for (const RunSummary& r : summaries) {
		a.mitigation_events += int(r.mitigations.size());
		a.runs_with_mitigation += r.mitigations.empty() ? 0 : 1;
	}
	return a;
}

MonteCarloResult monte_carlo(const Scenario& s, int runs, std::optional<std::uint64_t> seed, int threads,
	std::shared_ptr<ConfigurationCache> cache)
{
	if (runs < 1)
		throw ValidationError("monte_carlo: runs must be at least 1");
	if (!cache)
		cache = prepare_cache(s);
	const std::uint64_t master = seed.value_or(s.seed);
	int workers = threads > 0 ? threads : s.monte_carlo.threads;
	if (workers <= 0)
		workers = std::max(1u, std::thread::hardware_concurrency());
	workers = std::min(workers, runs);

	MonteCarloResult out;
	out.cache = cache;
	out.runs.resize(runs);
	std::vector<std::exception_ptr> errors(runs);
	std::atomic<int> next{0};
	auto work = [&]() {
		for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1)) {
			try {
				out.runs[r] = summarize(run_simulation(s, run_seed(master, r), cache));
			}
			catch (...) {
				errors[r] = std::current_exception();
			}
		}
	};
	if (workers == 1) {
		work();
	}
	else {
		std::vector<std::thread> pool;
		for (int w = 0; w < workers; ++w)
			pool.emplace_back(work);
		for (auto& th : pool)
			th.join();
	}
	for (auto& e : errors)
		if (e)
			std::rethrow_exception(e);
	out.report = aggregate(out.runs, s.mitigation.confirm_m);
	return out;
}

} // namespace dse
