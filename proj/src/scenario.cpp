#include "dse/scenario.hpp"

#include "dse/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace dse {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& path, const std::string& what)
{
	throw ValidationError(path + ": " + what);
}

// Reads one JSON object and rejects keys that were never consumed.
class ObjectReader
{
public:
	ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path))
	{
		if (!j_.is_object())
			fail(path_, "expected an object");
	}

	~ObjectReader() noexcept(false)
	{
		if (std::uncaught_exceptions() > 0)
			return;
		for (auto it = j_.begin(); it != j_.end(); ++it)
			if (!used_.count(it.key()))
				fail(field(it.key()), "unknown field");
	}

	std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

	bool has(const std::string& key) const { return j_.contains(key); }

	const Json& at(const std::string& key)
	{
		if (!j_.contains(key))
			fail(field(key), "missing required field");
		used_.insert(key);
		return j_.at(key);
	}

	const Json* find(const std::string& key)
	{
		if (!j_.contains(key))
			return nullptr;
		used_.insert(key);
		return &j_.at(key);
	}

	double number(const std::string& key) { return as_number(at(key), field(key)); }
	double number(const std::string& key, double fallback)
	{
		const Json* v = find(key);
		return v ? as_number(*v, field(key)) : fallback;
	}
	long long integer(const std::string& key) { return as_integer(at(key), field(key)); }
	long long integer(const std::string& key, long long fallback)
	{
		const Json* v = find(key);
		return v ? as_integer(*v, field(key)) : fallback;
	}
	std::uint64_t seed(const std::string& key, std::uint64_t fallback)
	{
		const Json* v = find(key);
		return v ? as_seed(*v, field(key)) : fallback;
	}
	bool boolean(const std::string& key, bool fallback)
	{
		const Json* v = find(key);
		if (!v)
			return fallback;
		if (!v->is_boolean())
			fail(field(key), "expected true or false");
		return v->get<bool>();
	}
	std::string string(const std::string& key) { return as_string(at(key), field(key)); }
	std::string string(const std::string& key, const std::string& fallback)
	{
		const Json* v = find(key);
		return v ? as_string(*v, field(key)) : fallback;
	}

	static double as_number(const Json& v, const std::string& path)
	{
		if (!v.is_number())
			fail(path, "expected a number");
		double x = v.get<double>();
		if (!std::isfinite(x))
			fail(path, "must be finite");
		return x;
	}
	static long long as_integer(const Json& v, const std::string& path)
	{
		if (!v.is_number_integer())
			fail(path, "expected an integer");
		return v.get<long long>();
	}
	static std::uint64_t as_seed(const Json& v, const std::string& path)
	{
		if (v.is_number_unsigned())
			return v.get<std::uint64_t>();
		if (v.is_number_integer() && v.get<long long>() >= 0)
			return std::uint64_t(v.get<long long>());
		fail(path, "expected a non-negative integer");
	}
	static std::string as_string(const Json& v, const std::string& path)
	{
		if (!v.is_string())
			fail(path, "expected a string");
		return v.get<std::string>();
	}

private:
	const Json& j_;
	std::string path_;
	std::set<std::string> used_;
};

std::string index_path(const std::string& base, size_t i)
{
	return base + "[" + std::to_string(i) + "]";
}

const Json& expect_array(const Json& v, const std::string& path)
{
	if (!v.is_array())
		fail(path, "expected an array");
	return v;
}

std::vector<double> number_list(const Json& v, const std::string& path)
{
	std::vector<double> out;
	expect_array(v, path);
	for (size_t i = 0; i < v.size(); ++i)
		out.push_back(ObjectReader::as_number(v[i], index_path(path, i)));
	return out;
}

std::vector<std::vector<double>> number_matrix(const Json& v, const std::string& path)
{
	std::vector<std::vector<double>> out;
	expect_array(v, path);
	for (size_t i = 0; i < v.size(); ++i)
		out.push_back(number_list(v[i], index_path(path, i)));
	return out;
}

// 1-based pair [a, b] to 0-based.
std::pair<int, int> index_pair(const Json& v, const std::string& path)
{
	if (!v.is_array() || v.size() != 2)
		fail(path, "expected [from, to]");
	return {int(ObjectReader::as_integer(v[0], path + "[0]")) - 1, int(ObjectReader::as_integer(v[1], path + "[1]")) - 1};
}

std::string resolve(const std::string& base_dir, const std::string& p)
{
	fs::path path(p);
	if (path.is_relative())
		path = fs::path(base_dir) / path;
	return path.lexically_normal().string();
}

std::vector<WeightedEdge> read_edges(const Json& v, const std::string& path)
{
	std::vector<WeightedEdge> edges;
	expect_array(v, path);
	for (size_t i = 0; i < v.size(); ++i) {
		const Json& e = v[i];
		std::string p = index_path(path, i);
		if (!e.is_array() || (e.size() != 2 && e.size() != 3))
			fail(p, "expected [from, to] or [from, to, weight]");
		WeightedEdge we;
		we.src = int(ObjectReader::as_integer(e[0], p + "[0]")) - 1;
		we.dst = int(ObjectReader::as_integer(e[1], p + "[1]")) - 1;
		if (e.size() == 3)
			we.weight = ObjectReader::as_number(e[2], p + "[2]");
		edges.push_back(we);
	}
	return edges;
}

void read_system(ObjectReader& top, Scenario& s, const std::string& base_dir)
{
	ObjectReader r(top.at("system"), "system");
	s.system.n = int(r.integer("n"));
	if (s.system.n < 1)
		fail("system.n", "must be at least 1");
	const Json* edges = r.find("edges");
	const Json* file = r.find("edges_file");
	if (edges && file)
		fail("system", "give either edges or edges_file, not both");
	if (edges) {
		s.system.edges = read_edges(*edges, "system.edges");
	}
	else if (file) {
		std::string path = resolve(base_dir, ObjectReader::as_string(*file, "system.edges_file"));
		std::ifstream in(path);
		if (!in)
			throw IoError(path, "cannot open edge list");
		try {
			s.system.edges = parse_edge_list(in, s.system.n);
		}
		catch (const ValidationError& e) {
			fail("system.edges_file", path + ": " + e.what());
		}
	}
	else {
		fail("system.edges", "missing required field");
	}

	ObjectReader w(r.at("weights"), "system.weights");
	s.system.weight_rule = w.string("rule");
	if (s.system.weight_rule == "random") {
		s.system.weight_lo = w.number("low", 0.5);
		s.system.weight_hi = w.number("high", 1.5);
		s.system.weight_seed = w.seed("seed", derive_seed(s.seed, "system-weights"));
		if (const Json* t = w.find("target_rho"))
			s.system.target_rho = ObjectReader::as_number(*t, "system.weights.target_rho");
	}
	else if (s.system.weight_rule != "explicit") {
		fail("system.weights.rule", "expected \"explicit\" or \"random\"");
	}

	ObjectReader pn(r.at("process_noise"), "system.process_noise");
	s.system.process_noise.kind = pn.string("kind");
	if (s.system.process_noise.kind == "matrix")
		s.system.process_noise.matrix = number_matrix(pn.at("matrix"), "system.process_noise.matrix");
	else if (s.system.process_noise.kind == "identity" || s.system.process_noise.kind == "all_ones")
		s.system.process_noise.scale = pn.number("scale");
	else
		fail("system.process_noise.kind", "expected \"identity\", \"all_ones\" or \"matrix\"");

	ObjectReader mn(r.at("measurement_noise"), "system.measurement_noise");
	const Json* one = mn.find("variance");
	const Json* many = mn.find("variances");
	if (one && many)
		fail("system.measurement_noise", "give either variance or variances, not both");
	if (many)
		s.system.measurement_variance = number_list(*many, "system.measurement_noise.variances");
	else if (one)
		s.system.measurement_variance.assign(
			s.agent_states.size(), ObjectReader::as_number(*one, "system.measurement_noise.variance"));
	else
		fail("system.measurement_noise.variance", "missing required field");
}

void read_agents(ObjectReader& top, Scenario& s)
{
	const Json& agents = expect_array(top.at("agents"), "agents");
	for (size_t i = 0; i < agents.size(); ++i) {
		ObjectReader a(agents[i], index_path("agents", i));
		s.agent_states.push_back(int(a.integer("state")) - 1);
	}
	if (const Json* costs = top.find("state_costs")) {
		if (!costs->is_object())
			fail("state_costs", "expected an object mapping state to cost");
		for (auto it = costs->begin(); it != costs->end(); ++it) {
			std::string p = "state_costs." + it.key();
			int state = 0;
			try {
				size_t used = 0;
				state = std::stoi(it.key(), &used);
				if (used != it.key().size())
					throw std::invalid_argument("trailing");
			}
			catch (const std::exception&) {
				fail(p, "key must be a 1-based state index");
			}
			s.state_costs[state - 1] = ObjectReader::as_number(it.value(), p);
		}
	}
}

WeightConfig read_weight_config(const Json& v, const std::string& path, std::uint64_t default_seed)
{
	ObjectReader r(v, path);
	WeightConfig w;
	std::string rule = r.string("rule");
	if (rule == "uniform")
		w.rule = WeightRule::Uniform;
	else if (rule == "random")
		w.rule = WeightRule::Random;
	else
		fail(r.field("rule"), "expected \"uniform\" or \"random\"");
	if (w.rule == WeightRule::Random) {
		w.lo = r.number("low", 0.5);
		w.hi = r.number("high", 1.5);
		w.seed = r.seed("seed", default_seed);
	}
	return w;
}

void read_network(ObjectReader& top, Scenario& s)
{
	const Json* v = top.find("network");
	if (!v) {
		s.network.weights.rule = WeightRule::Uniform;
		return;
	}
	ObjectReader r(*v, "network");
	const Json& beta = r.at("beta");
	if (beta.is_string()) {
		if (beta.get<std::string>() != "ring")
			fail("network.beta", "expected \"ring\" or an edge list");
		s.network.beta.kind = TopologyKind::Ring;
	}
	else {
		expect_array(beta, "network.beta");
		s.network.beta.kind = TopologyKind::Custom;
		for (size_t i = 0; i < beta.size(); ++i)
			s.network.beta.edges.push_back(index_pair(beta[i], index_path("network.beta", i)));
	}
	if (const Json* w = r.find("weights"))
		s.network.weights = read_weight_config(*w, "network.weights", derive_seed(s.seed, "network-weights"));
	if (const Json* extra = r.find("extra_alpha")) {
		expect_array(*extra, "network.extra_alpha");
		for (size_t i = 0; i < extra->size(); ++i)
			s.network.extra_alpha.push_back(index_pair((*extra)[i], index_path("network.extra_alpha", i)));
	}
}

void read_gain(ObjectReader& top, Scenario& s, const std::string& base_dir)
{
	GainConfig& g = s.gain;
	g.seed = derive_seed(s.seed, "gain-design");
	const Json* v = top.find("gain");
	if (!v)
		return;
	ObjectReader r(*v, "gain");
	g.epsilon = r.number("epsilon", g.epsilon);
	g.margin = r.number("margin", g.margin);
	g.norm_target = r.boolean("norm_target", g.norm_target);
	g.max_restarts = int(r.integer("max_restarts", g.max_restarts));
	g.max_iterations = int(r.integer("max_iterations", g.max_iterations));
	g.delta = r.number("delta", g.delta);
	if (const Json* grid = r.find("grid"))
		g.grid = number_list(*grid, "gain.grid");
	g.refine_step = r.number("refine_step", g.refine_step);
	g.perturbation = r.number("perturbation", g.perturbation);
	g.seed = r.seed("seed", g.seed);
	if (const Json* k = r.find("import_k"))
		s.import_k = resolve(base_dir, ObjectReader::as_string(*k, "gain.import_k"));
}

void read_detection(ObjectReader& top, Scenario& s)
{
	const Json* v = top.find("detection");
	if (!v)
		return;
	ObjectReader r(*v, "detection");
	if (const Json* levels = r.find("levels"))
		s.detection.levels = number_list(*levels, "detection.levels");
	if (const Json* rates = r.find("false_alarm_rates"))
		s.detection.false_alarm_rates = number_list(*rates, "detection.false_alarm_rates");
	s.detection.burn_in = int(r.integer("burn_in", s.detection.burn_in));
}

void read_attacks(ObjectReader& top, Scenario& s)
{
	const Json* v = top.find("attacks");
	if (!v)
		return;
	expect_array(*v, "attacks");
	for (size_t i = 0; i < v->size(); ++i) {
		std::string p = index_path("attacks", i);
		ObjectReader r((*v)[i], p);
		AttackSpec a;
		a.agent = int(r.integer("agent")) - 1;
		a.k_start = int(r.integer("start"));
		if (const Json* end = r.find("end"))
			a.k_end = int(ObjectReader::as_integer(*end, r.field("end")));
		std::string kind = r.string("kind");
		if (kind == "fixed")
			a.kind = FixedAttack{r.number("level")};
		else if (kind == "uniform")
			a.kind = UniformAttack{r.number("bound")};
		else if (kind == "autoregressive")
			a.kind = AutoRegressiveAttack{r.number("tau0"), r.number("tau1"), r.number("theta_max")};
		else
			fail(r.field("kind"), "expected \"fixed\", \"uniform\" or \"autoregressive\"");
		s.attacks.push_back(a);
	}
}

void read_mitigation(ObjectReader& top, Scenario& s)
{
	const Json* v = top.find("mitigation");
	if (!v)
		return;
	ObjectReader r(*v, "mitigation");
	s.mitigation.enabled = r.boolean("enabled", s.mitigation.enabled);
	s.mitigation.confirm_m = r.number("confirm_level", s.mitigation.confirm_m);
	s.mitigation.consecutive = int(r.integer("consecutive", s.mitigation.consecutive));
}

void read_monte_carlo(ObjectReader& top, Scenario& s)
{
	const Json* v = top.find("monte_carlo");
	if (!v)
		return;
	ObjectReader r(*v, "monte_carlo");
	s.monte_carlo.runs = int(r.integer("runs", s.monte_carlo.runs));
	s.monte_carlo.threads = int(r.integer("threads", s.monte_carlo.threads));
}

std::string state_name(int s)
{
	return "state " + std::to_string(s + 1);
}

std::string agent_name(int a)
{
	return "agent " + std::to_string(a + 1);
}

Json number_array(const std::vector<double>& v)
{
	Json out = Json::array();
	for (double x : v)
		out.push_back(x);
	return out;
}

Json pair_array(const std::vector<std::pair<int, int>>& v)
{
	Json out = Json::array();
	for (auto [a, b] : v)
		out.push_back(Json::array({a + 1, b + 1}));
	return out;
}

} // namespace

void validate_scenario(const Scenario& s)
{
	if (s.schema_version != kSchemaVersion)
		fail("schema_version", "unsupported version " + std::to_string(s.schema_version) + ", expected " +
				std::to_string(kSchemaVersion));
	if (s.horizon < 1)
		fail("horizon", "must be at least 1");
	const int n = s.system.n;
	if (n < 1)
		fail("system.n", "must be at least 1");

	std::set<std::pair<int, int>> seen;
	for (size_t i = 0; i < s.system.edges.size(); ++i) {
		const WeightedEdge& e = s.system.edges[i];
		std::string p = index_path("system.edges", i);
		if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
			fail(p, "edge " + std::to_string(e.src + 1) + " -> " + std::to_string(e.dst + 1) + " leaves [1, " +
					std::to_string(n) + "]");
		if (!seen.insert({e.src, e.dst}).second)
			fail(p, "duplicate edge " + std::to_string(e.src + 1) + " -> " + std::to_string(e.dst + 1));
		if (s.system.weight_rule == "explicit") {
			if (!e.weight)
				fail(p, "explicit weight rule requires a weight on every edge");
			if (*e.weight == 0.0)
				fail(p, "edge weight must be nonzero");
		}
	}
	if (s.system.weight_rule == "random") {
		if (!(s.system.weight_lo > 0.0) || !(s.system.weight_hi >= s.system.weight_lo))
			fail("system.weights", "need 0 < low <= high");
		if (s.system.target_rho && !(*s.system.target_rho > 0.0))
			fail("system.weights.target_rho", "must be positive");
	}
	else if (s.system.weight_rule != "explicit") {
		fail("system.weights.rule", "expected \"explicit\" or \"random\"");
	}

	const NoiseSpec& pn = s.system.process_noise;
	if (pn.kind == "matrix") {
		if (int(pn.matrix.size()) != n)
			fail("system.process_noise.matrix", "expected " + std::to_string(n) + " rows");
		for (size_t i = 0; i < pn.matrix.size(); ++i)
			if (int(pn.matrix[i].size()) != n)
				fail(index_path("system.process_noise.matrix", i), "expected " + std::to_string(n) + " columns");
	}
	else if (pn.kind == "identity" || pn.kind == "all_ones") {
		if (!(pn.scale >= 0.0))
			fail("system.process_noise.scale", "must be non-negative");
	}
	else {
		fail("system.process_noise.kind", "expected \"identity\", \"all_ones\" or \"matrix\"");
	}

	const int N = s.agents();
	if (N < 1)
		fail("agents", "at least one agent is required");
	for (int i = 0; i < N; ++i)
		if (s.agent_states[i] < 0 || s.agent_states[i] >= n)
			fail(index_path("agents", i) + ".state", agent_name(i) + " measures " + state_name(s.agent_states[i]) +
					" outside [1, " + std::to_string(n) + "]");

	if (int(s.system.measurement_variance.size()) != N)
		fail("system.measurement_noise.variances", "expected one variance per agent (" + std::to_string(N) + ")");
	for (int i = 0; i < N; ++i)
		if (!(s.system.measurement_variance[i] >= 0.0))
			fail(index_path("system.measurement_noise.variances", i), "must be non-negative");

	for (auto [state, cost] : s.state_costs) {
		if (state < 0 || state >= n)
			fail("state_costs", state_name(state) + " outside [1, " + std::to_string(n) + "]");
		if (!(cost >= 0.0))
			fail("state_costs." + std::to_string(state + 1), "cost must be non-negative");
	}

	for (size_t i = 0; i < s.network.beta.edges.size(); ++i) {
		auto [a, b] = s.network.beta.edges[i];
		if (a < 0 || a >= N || b < 0 || b >= N)
			fail(index_path("network.beta", i), "agent index outside [1, " + std::to_string(N) + "]");
	}
	for (size_t i = 0; i < s.network.extra_alpha.size(); ++i) {
		auto [a, b] = s.network.extra_alpha[i];
		if (a < 0 || a >= N || b < 0 || b >= N)
			fail(index_path("network.extra_alpha", i), "agent index outside [1, " + std::to_string(N) + "]");
	}
	if (s.network.weights.rule == WeightRule::Random &&
		(!(s.network.weights.lo > 0.0) || !(s.network.weights.hi >= s.network.weights.lo)))
		fail("network.weights", "need 0 < low <= high");

	try {
		s.gain.validate();
	}
	catch (const ValidationError& e) {
		fail("gain", e.what());
	}

	if (s.detection.levels.empty() && s.detection.false_alarm_rates.empty())
		fail("detection.levels", "at least one detection level is required");
	for (size_t i = 0; i < s.detection.levels.size(); ++i)
		if (!(s.detection.levels[i] > 0.0))
			fail(index_path("detection.levels", i), "must be positive");
	for (size_t i = 0; i < s.detection.false_alarm_rates.size(); ++i) {
		double r = s.detection.false_alarm_rates[i];
		if (!(r > 0.0 && r < 1.0))
			fail(index_path("detection.false_alarm_rates", i), "must lie in (0, 1)");
	}
	if (s.detection.burn_in < 0)
		fail("detection.burn_in", "must be non-negative");

	for (size_t i = 0; i < s.attacks.size(); ++i) {
		const AttackSpec& a = s.attacks[i];
		std::string p = index_path("attacks", i);
		if (a.agent < 0 || a.agent >= N)
			fail(p + ".agent", "targets " + agent_name(a.agent) + " but only " + std::to_string(N) + " agents exist");
		if (a.k_start < 0)
			fail(p + ".start", "must be non-negative");
		if (a.k_end && *a.k_end < a.k_start)
			fail(p + ".end", "must not precede start");
		if (const auto* u = std::get_if<UniformAttack>(&a.kind); u && !(u->bound >= 0.0))
			fail(p + ".bound", "must be non-negative");
		if (const auto* ar = std::get_if<AutoRegressiveAttack>(&a.kind); ar && !(ar->theta_max >= 0.0))
			fail(p + ".theta_max", "must be non-negative");
	}

	if (s.mitigation.consecutive < 1)
		fail("mitigation.consecutive", "must be at least 1");
	if (s.mitigation.enabled) {
		bool found = false;
		for (double m : s.detection.levels)
			found = found || m == s.mitigation.confirm_m;
		if (!found)
			fail("mitigation.confirm_level", "must be one of detection.levels");
	}

	if (s.monte_carlo.runs < 1)
		fail("monte_carlo.runs", "must be at least 1");
	if (s.monte_carlo.threads < 0)
		fail("monte_carlo.threads", "must be non-negative");
	if (!(s.initial_estimate_std >= 0.0))
		fail("initial_estimate_std", "must be non-negative");
}

Scenario scenario_from_json_text(const std::string& text, const std::string& base_dir)
{
	Json root;
	try {
		root = Json::parse(text);
	}
	catch (const Json::parse_error& e) {
		throw ValidationError(std::string("parse error: ") + e.what());
	}
	Scenario s;
	{
		ObjectReader top(root, "");
		s.schema_version = int(top.integer("schema_version"));
		if (s.schema_version != kSchemaVersion)
			fail("schema_version", "unsupported version " + std::to_string(s.schema_version));
		s.name = top.string("name", "");
		s.seed = top.seed("seed", 0);
		s.horizon = int(top.integer("horizon"));
		read_agents(top, s);
		read_system(top, s, base_dir);
		read_network(top, s);
		read_gain(top, s, base_dir);
		read_detection(top, s);
		read_attacks(top, s);
		read_mitigation(top, s);
		read_monte_carlo(top, s);
		s.initial_estimate_std = top.number("initial_estimate_std", s.initial_estimate_std);
	}
	validate_scenario(s);
	return s;
}

Scenario load_scenario(const std::string& path)
{
	std::ifstream in(path);
	if (!in)
		throw IoError(path, "cannot open scenario");
	std::stringstream buffer;
	buffer << in.rdbuf();
	if (in.bad())
		throw IoError(path, "read failed");
	std::string base = fs::path(path).parent_path().string();
	try {
		return scenario_from_json_text(buffer.str(), base.empty() ? "." : base);
	}
	catch (const ValidationError& e) {
		throw ValidationError(path + ": " + e.what());
	}
}

std::string scenario_to_json_text(const Scenario& s)
{
	Json root;
	root["schema_version"] = s.schema_version;
	root["name"] = s.name;
	root["seed"] = s.seed;
	root["horizon"] = s.horizon;

	Json sys;
	sys["n"] = s.system.n;
	Json edges = Json::array();
	for (const WeightedEdge& e : s.system.edges) {
		Json item = Json::array({e.src + 1, e.dst + 1});
		if (e.weight)
			item.push_back(*e.weight);
		edges.push_back(item);
	}
	sys["edges"] = edges;
	Json weights;
	weights["rule"] = s.system.weight_rule;
	if (s.system.weight_rule == "random") {
		weights["low"] = s.system.weight_lo;
		weights["high"] = s.system.weight_hi;
		weights["seed"] = s.system.weight_seed;
		if (s.system.target_rho)
			weights["target_rho"] = *s.system.target_rho;
	}
	sys["weights"] = weights;
	Json pn;
	pn["kind"] = s.system.process_noise.kind;
	if (s.system.process_noise.kind == "matrix") {
		Json rows = Json::array();
		for (const auto& row : s.system.process_noise.matrix)
			rows.push_back(number_array(row));
		pn["matrix"] = rows;
	}
	else {
		pn["scale"] = s.system.process_noise.scale;
	}
	sys["process_noise"] = pn;
	sys["measurement_noise"] = Json{{"variances", number_array(s.system.measurement_variance)}};
	root["system"] = sys;

	Json agents = Json::array();
	for (int st : s.agent_states)
		agents.push_back(Json{{"state", st + 1}});
	root["agents"] = agents;
	Json costs = Json::object();
	for (auto [state, cost] : s.state_costs)
		costs[std::to_string(state + 1)] = cost;
	root["state_costs"] = costs;

	Json net;
	if (s.network.beta.kind == TopologyKind::Ring)
		net["beta"] = "ring";
	else
		net["beta"] = pair_array(s.network.beta.edges);
	Json nw;
	nw["rule"] = s.network.weights.rule == WeightRule::Uniform ? "uniform" : "random";
	if (s.network.weights.rule == WeightRule::Random) {
		nw["low"] = s.network.weights.lo;
		nw["high"] = s.network.weights.hi;
		nw["seed"] = s.network.weights.seed;
	}
	net["weights"] = nw;
	net["extra_alpha"] = pair_array(s.network.extra_alpha);
	root["network"] = net;

	const GainConfig& g = s.gain;
	Json gain;
	gain["epsilon"] = g.epsilon;
	gain["margin"] = g.margin;
	gain["norm_target"] = g.norm_target;
	gain["max_restarts"] = g.max_restarts;
	gain["max_iterations"] = g.max_iterations;
	gain["delta"] = g.delta;
	gain["grid"] = number_array(g.grid);
	gain["refine_step"] = g.refine_step;
	gain["perturbation"] = g.perturbation;
	gain["seed"] = g.seed;
	if (s.import_k)
		gain["import_k"] = *s.import_k;
	root["gain"] = gain;

	root["detection"] = Json{{"levels", number_array(s.detection.levels)},
		{"false_alarm_rates", number_array(s.detection.false_alarm_rates)}, {"burn_in", s.detection.burn_in}};

	Json attacks = Json::array();
	for (const AttackSpec& a : s.attacks) {
		Json item;
		item["agent"] = a.agent + 1;
		if (const auto* f = std::get_if<FixedAttack>(&a.kind)) {
			item["kind"] = "fixed";
			item["level"] = f->level;
		}
		else if (const auto* u = std::get_if<UniformAttack>(&a.kind)) {
			item["kind"] = "uniform";
			item["bound"] = u->bound;
		}
		else {
			const auto& ar = std::get<AutoRegressiveAttack>(a.kind);
			item["kind"] = "autoregressive";
			item["tau0"] = ar.tau0;
			item["tau1"] = ar.tau1;
			item["theta_max"] = ar.theta_max;
		}
		item["start"] = a.k_start;
		if (a.k_end)
			item["end"] = *a.k_end;
		attacks.push_back(item);
	}
	root["attacks"] = attacks;

	root["mitigation"] = Json{{"enabled", s.mitigation.enabled}, {"confirm_level", s.mitigation.confirm_m},
		{"consecutive", s.mitigation.consecutive}};
	root["monte_carlo"] = Json{{"runs", s.monte_carlo.runs}, {"threads", s.monte_carlo.threads}};
	root["initial_estimate_std"] = s.initial_estimate_std;
	return root.dump(2) + "\n";
}

Matrix process_covariance(const Scenario& s)
{
	const int n = s.system.n;
	const NoiseSpec& pn = s.system.process_noise;
	if (pn.kind == "identity")
		return pn.scale * Matrix::Identity(n, n);
	if (pn.kind == "all_ones")
		return pn.scale * Matrix::Ones(n, n);
	Matrix e(n, n);
	for (int i = 0; i < n; ++i)
		for (int j = 0; j < n; ++j)
			e(i, j) = pn.matrix[i][j];
	return e;
}

Matrix measurement_covariance(const Scenario& s)
{
	const int N = s.agents();
	Matrix r = Matrix::Zero(N, N);
	for (int i = 0; i < N; ++i)
		r(i, i) = s.system.measurement_variance[i];
	return r;
}

Matrix system_matrix(const Scenario& s)
{
	const int n = s.system.n;
	if (s.system.weight_rule == "explicit") {
		Matrix a = Matrix::Zero(n, n);
		for (const WeightedEdge& e : s.system.edges)
			a(e.dst, e.src) = *e.weight;
		return a;
	}
	std::vector<std::pair<int, int>> edges;
	for (const WeightedEdge& e : s.system.edges)
		edges.emplace_back(e.src, e.dst);
	RngStream rng(s.system.weight_seed);
	return realize_system_matrix(SystemDigraph::from_edges(n, edges), rng, s.system.weight_lo, s.system.weight_hi,
		s.system.target_rho);
}

DesignInputs make_design_inputs(const Scenario& s)
{
	DesignInputs in;
	in.A = system_matrix(s);
	in.E = process_covariance(s);
	in.R = measurement_covariance(s);
	in.profile = analyze_structure(SystemDigraph::from_matrix(in.A));
	in.beta = s.network.beta;
	in.weights = s.network.weights;
	in.extra_alpha = s.network.extra_alpha;
	in.gain = s.gain;
	in.levels = s.detection.levels;
	in.false_alarm_rates = s.detection.false_alarm_rates;
	in.state_costs.assign(s.system.n, 1.0);
	for (auto [state, cost] : s.state_costs)
		in.state_costs[state] = cost;
	if (s.import_k) {
		Matrix k = read_matrix_csv(*s.import_k);
		const int N = s.agents(), n = s.system.n;
		if (k.rows() != N * n || k.cols() != N * n)
			throw ValidationError(*s.import_k + ": imported gain must be " + std::to_string(N * n) + " x " +
				std::to_string(N * n));
		in.imported_K = k;
	}
	return in;
}

Matrix read_matrix_csv(const std::string& path)
{
	std::ifstream in(path);
	if (!in)
		throw IoError(path, "cannot open matrix file");
	std::vector<std::vector<double>> rows;
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty() || line[0] == '#')
			continue;
		std::vector<double> row;
		std::stringstream ss(line);
		std::string cell;
		while (std::getline(ss, cell, ',')) {
			try {
				size_t used = 0;
				row.push_back(std::stod(cell, &used));
				while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
					++used;
				if (used != cell.size())
					throw std::invalid_argument("trailing");
			}
			catch (const std::exception&) {
				throw ValidationError(path + ": line " + std::to_string(line_no) + ": bad number '" + cell + "'");
			}
		}
		if (!rows.empty() && row.size() != rows.front().size())
			throw ValidationError(path + ": line " + std::to_string(line_no) + ": ragged row");
		rows.push_back(std::move(row));
	}
	if (rows.empty())
		throw ValidationError(path + ": empty matrix");
	Matrix m(rows.size(), rows.front().size());
	for (size_t i = 0; i < rows.size(); ++i)
		for (size_t j = 0; j < rows[i].size(); ++j)
			m(i, j) = rows[i][j];
	return m;
}

void write_matrix_csv(const std::string& path, const Matrix& m)
{
	std::ofstream out(path);
	if (!out)
		throw IoError(path, "cannot open for writing");
	char buf[64];
	for (int i = 0; i < m.rows(); ++i) {
		for (int j = 0; j < m.cols(); ++j) {
			std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
			out << (j ? "," : "") << buf;
		}
		out << '\n';
	}
	if (!out)
		throw IoError(path, "write failed");
}

} // namespace dse
