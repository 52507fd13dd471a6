#include "dse/estimator.hpp"

#include "dse/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dse {

std::vector<Vector> predict_step(const std::vector<Vector>& posts, const Matrix& W, const Matrix& A)
{
	const int N = int(posts.size());
	if (W.rows() != N || W.cols() != N)
		throw ValidationError("predict_step: W does not match agent count");
	std::vector<Vector> propagated;
	propagated.reserve(N);
	for (const auto& p : posts)
		propagated.push_back(A * p);
	std::vector<Vector> priors(N, Vector::Zero(A.rows()));
	for (int i = 0; i < N; ++i)
		for (int j = 0; j < N; ++j)
			if (W(i, j) != 0.0)
				priors[i] += W(i, j) * propagated[j];
	return priors;
}

Vector update_step(const Vector& x_prior, const Matrix& K_i, const Vector& y, const Matrix& C,
	const std::vector<int>& neighbours)
{
	Vector innovation = Vector::Zero(x_prior.size());
	for (int j : neighbours)
		innovation += C.row(j).transpose() * (y(j) - C.row(j).dot(x_prior));
	return x_prior + K_i * innovation;
}

Vector compute_residuals(const std::vector<Vector>& posts, const Vector& y, const Matrix& C)
{
	Vector r(posts.size());
	for (size_t i = 0; i < posts.size(); ++i)
		r(i) = std::abs(y(i) - C.row(i).dot(posts[i]));
	return r;
}

ThresholdTable detection_thresholds(double theta1, const SystemModel& model, const std::vector<double>& levels,
	const std::vector<double>& false_alarm_rates)
{
	if (!(theta1 >= 0.0))
		throw ValidationError("thresholds: Theta1 must be nonnegative");
	std::vector<double> ms;
	for (double m : levels) {
		if (!(m > 0.0))
			throw ValidationError("thresholds: detection level m must be positive");
		ms.push_back(m);
	}
	for (double rate : false_alarm_rates)
		ms.push_back(level_from_false_alarm(rate));
	if (ms.empty())
		throw ValidationError("thresholds: no detection levels requested");
	std::sort(ms.begin(), ms.end());
	ms.erase(std::unique(ms.begin(), ms.end()), ms.end());

	ThresholdTable t;
	for (double m : ms)
		t.levels.push_back({m, kappa_from_level(m)});
	for (int i = 0; i < model.agents(); ++i)
		t.theta2.push_back(model.C().row(i).norm() * theta1 + model.R()(i, i));
	return t;
}

int crossed_level(double residual, const ThresholdTable& table, int agent)
{
	int best = -1;
	for (int l = 0; l < int(table.levels.size()); ++l)
		if (residual > 0.0 && residual >= table.theta(agent, l))
			best = l;
	return best;
}

std::vector<DetectionEvent> detect(const Vector& residuals, const ThresholdTable& table, int k)
{
	std::vector<DetectionEvent> out;
	for (int i = 0; i < residuals.size(); ++i) {
		const int l = crossed_level(residuals(i), table, i);
		if (l < 0)
			continue;
		DetectionEvent e;
		e.agent = i;
		e.k = k;
		e.residual = residuals(i);
		e.level = l;
		e.m = table.levels[l].m;
		e.kappa = table.levels[l].kappa;
		e.false_alarm = 1.0 - e.kappa;
		e.theta = table.theta(i, l);
		out.push_back(e);
	}
	return out;
}

} // namespace dse
