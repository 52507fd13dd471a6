#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string_view>

namespace dse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Matrix kron_product(const Matrix& a, const Matrix& b);

// Entrywise product. Throws ValidationError on shape mismatch.
Matrix hadamard_product(const Matrix& a, const Matrix& b);

// Largest singular value, sqrt(rho(M^T M)).
double spectral_norm(const Matrix& m);

// Largest eigenvalue magnitude. Throws ValidationError for non-square input.
double spectral_radius(const Matrix& m);

// Solves A^T X A - X = -I through the vectorized system
// (A^T kron A^T - I) vec(X) = -vec(I). Throws UnstableError when the system
// is singular or X is not positive definite.
Matrix solve_discrete_lyapunov(const Matrix& ahat);

bool all_finite(const Matrix& m);

double erf(double x);

// Inverse error function on (-1, 1). Throws ValidationError outside.
double erf_inv(double y);

// Probability that a standard normal lies within m standard deviations.
double kappa_from_level(double m);

// Level m whose two-sided false-alarm probability equals rate.
double level_from_false_alarm(double rate);

// 64-bit stream built on std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Uniform and normal transforms are implemented here rather
// than through <random> distributions, whose algorithms vary by vendor.
class RngStream
{
public:
	explicit RngStream(std::uint64_t seed);

	std::uint64_t next_u64();
	// 53 random bits scaled into [0, 1).
	double uniform01();
	double uniform(double lo, double hi);
	// Marsaglia polar method; the second variate of each pair is cached.
	double normal();

	std::uint64_t seed() const { return seed_; }
	std::uint64_t cursor() const { return cursor_; }

private:
	std::uint64_t seed_;
	std::uint64_t cursor_ = 0;
	std::mt19937_64 engine_;
	bool has_spare_ = false;
	double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed for a named substream: splitmix64(splitmix64(master ^ fnv1a(label)) + index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

// Zero-mean Gaussian sampler with a precomputed symmetric square-root factor.
class GaussianSampler
{
public:
	GaussianSampler() = default;
	// Throws ValidationError unless covariance is symmetric PSD.
	explicit GaussianSampler(const Matrix& covariance);

	Vector sample(RngStream& stream) const;
	const Matrix& factor() const { return factor_; }
	Eigen::Index dim() const { return factor_.rows(); }

private:
	Matrix factor_;
};

Vector sample_gaussian_vector(RngStream& stream, const Matrix& covariance);

} // namespace dse
