#pragma once

#include "dse/model.hpp"
#include "dse/numerics.hpp"

#include <vector>

namespace dse {

struct AgentEstimate
{
	int agent = 0;
	Vector x_prior; // x_hat^i_{k|k-1}
	Vector x_post;  // x_hat^i_{k|k}
};

// x_prior^i = sum_j W_ij A x_post^j
std::vector<Vector> predict_step(const std::vector<Vector>& posts, const Matrix& W, const Matrix& A);

// x_post = x_prior + K_i sum_{j in neighbours} c_j (y_j - c_j^T x_prior)
Vector update_step(const Vector& x_prior, const Matrix& K_i, const Vector& y, const Matrix& C,
	const std::vector<int>& neighbours);

// r^i = |y_i - c_i^T x_post^i|
Vector compute_residuals(const std::vector<Vector>& posts, const Vector& y, const Matrix& C);

struct DetectionLevel
{
	double m = 0.0;
	double kappa = 0.0; // erf(m / sqrt 2)
};

struct ThresholdTable
{
	std::vector<double> theta2;         // per agent: |c_i| Theta1 + R_ii
	std::vector<DetectionLevel> levels; // strictly increasing m

	double theta(int agent, int level) const { return levels[level].m * theta2[agent]; }
};

// Levels come from explicit multipliers m and from false-alarm rates via
// m = sqrt 2 erfinv(1 - rate); the union is sorted and deduplicated.
// Throws ValidationError for m <= 0, rates outside (0, 1), or an empty request.
ThresholdTable detection_thresholds(double theta1, const SystemModel& model, const std::vector<double>& levels,
	const std::vector<double>& false_alarm_rates = {});

struct DetectionEvent
{
	int agent = 0;
	int k = 0;
	double residual = 0.0;
	int level = 0; // index into ThresholdTable::levels
	double m = 0.0;
	double kappa = 0.0;
	double false_alarm = 0.0; // 1 - kappa
	double theta = 0.0;
};

// One event per agent at its largest crossed level, none below the smallest.
std::vector<DetectionEvent> detect(const Vector& residuals, const ThresholdTable& table, int k);

// Index of the largest level crossed, or -1.
int crossed_level(double residual, const ThresholdTable& table, int agent);

} // namespace dse
