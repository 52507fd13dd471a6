#include "dse/numerics.hpp"

#include "dse/errors.hpp"

#include <cmath>
#include <limits>

namespace dse {

Matrix kron_product(const Matrix& a, const Matrix& b)
{
	Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
	for (Eigen::Index i = 0; i < a.rows(); ++i)
		for (Eigen::Index j = 0; j < a.cols(); ++j)
			out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
	return out;
}

Matrix hadamard_product(const Matrix& a, const Matrix& b)
{
	if (a.rows() != b.rows() || a.cols() != b.cols())
		throw ValidationError("hadamard_product: shape mismatch");
	return a.cwiseProduct(b);
}

double spectral_norm(const Matrix& m)
{
	if (m.size() == 0)
		return 0.0;
	// The Gram matrix is the smaller of M^T M and M M^T.
	Matrix gram = m.rows() >= m.cols() ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
	Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
	if (es.info() != Eigen::Success)
		throw Error("spectral_norm: eigensolver did not converge");
	const double top = es.eigenvalues().maxCoeff();
	if (!std::isfinite(top))
		throw Error("spectral_norm: non-finite result");
	return std::sqrt(std::max(0.0, top));
}

double spectral_radius(const Matrix& m)
{
	if (m.rows() != m.cols())
		throw ValidationError("spectral_radius: matrix must be square");
	if (m.size() == 0)
		return 0.0;
	Eigen::EigenSolver<Matrix> es(m, false);
	if (es.info() != Eigen::Success)
		throw Error("spectral_radius: eigensolver did not converge");
	const double r = es.eigenvalues().cwiseAbs().maxCoeff();
	if (!std::isfinite(r))
		throw Error("spectral_radius: non-finite result");
	return r;
}

Matrix solve_discrete_lyapunov(const Matrix& ahat)
{
	if (ahat.rows() != ahat.cols())
		throw ValidationError("solve_discrete_lyapunov: matrix must be square");
	const Eigen::Index n = ahat.rows();
	const Matrix at = ahat.transpose();
	Matrix sys = kron_product(at, at);
	sys -= Matrix::Identity(n * n, n * n);
	Vector rhs = -Eigen::Map<const Vector>(Matrix::Identity(n, n).eval().data(), n * n);

	Eigen::PartialPivLU<Matrix> lu(sys);
	if (!(lu.rcond() > 1e-13))
		throw UnstableError("solve_discrete_lyapunov: singular system (unstable)");
	Vector v = lu.solve(rhs);
	Matrix x = Eigen::Map<Matrix>(v.data(), n, n);
	if (!all_finite(x))
		throw UnstableError("solve_discrete_lyapunov: non-finite solution (unstable)");
	x = 0.5 * (x + x.transpose()).eval();

	Eigen::LLT<Matrix> llt(x);
	if (llt.info() != Eigen::Success)
		throw UnstableError("solve_discrete_lyapunov: solution not positive definite (unstable)");
	return x;
}

bool all_finite(const Matrix& m)
{
	return m.allFinite();
}

double erf(double x)
{
	return std::erf(x);
}

double erf_inv(double y)
{
	if (!(y > -1.0 && y < 1.0))
		throw ValidationError("erf_inv: argument must lie in (-1, 1)");
	if (y == 0.0)
		return 0.0;

	// Initial estimate: Giles, single-precision polynomial in w = -log(1 - y^2).
	const double w = -std::log((1.0 - y) * (1.0 + y));
	double p;
	if (w < 5.0) {
		const double t = w - 2.5;
		p = 2.81022636e-08;
		p = 3.43273939e-07 + p * t;
		p = -3.5233877e-06 + p * t;
		p = -4.39150654e-06 + p * t;
		p = 0.00021858087 + p * t;
		p = -0.00125372503 + p * t;
		p = -0.00417768164 + p * t;
		p = 0.246640727 + p * t;
		p = 1.50140941 + p * t;
	} else {
		const double t = std::sqrt(w) - 3.0;
		p = -0.000200214257;
		p = 0.000100950558 + p * t;
		p = 0.00134934322 + p * t;
		p = -0.00367342844 + p * t;
		p = 0.00573950773 + p * t;
		p = -0.0076224613 + p * t;
		p = 0.00943887047 + p * t;
		p = 1.00167406 + p * t;
		p = 2.83297682 + p * t;
	}
	double x = p * y;

	// Halley refinement on f(x) = erf(x) - y.
	const double two_over_sqrt_pi = 1.1283791670955126;
	for (int it = 0; it < 3; ++it) {
		const double f = std::erf(x) - y;
		const double df = two_over_sqrt_pi * std::exp(-x * x);
		if (df == 0.0)
			break;
		const double step = f / df;
		x -= step / (1.0 + x * step);
	}
	return x;
}

double kappa_from_level(double m)
{
	return erf(m / std::sqrt(2.0));
}

double level_from_false_alarm(double rate)
{
	if (!(rate > 0.0 && rate < 1.0))
		throw ValidationError("false-alarm rate must lie in (0, 1)");
	return std::sqrt(2.0) * erf_inv(1.0 - rate);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t RngStream::next_u64()
{
	++cursor_;
	return engine_();
}

double RngStream::uniform01()
{
	return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi)
{
	return lo + (hi - lo) * uniform01();
}

double RngStream::normal()
{
	if (has_spare_) {
		has_spare_ = false;
		return spare_;
	}
	double u, v, s;
	do {
		u = 2.0 * uniform01() - 1.0;
		v = 2.0 * uniform01() - 1.0;
		s = u * u + v * v;
	} while (s >= 1.0 || s == 0.0);
	const double scale = std::sqrt(-2.0 * std::log(s) / s);
	spare_ = v * scale;
	has_spare_ = true;
	return u * scale;
}

std::uint64_t splitmix64(std::uint64_t x)
{
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index)
{
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char c : label) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	return splitmix64(splitmix64(master ^ h) + index);
}

GaussianSampler::GaussianSampler(const Matrix& covariance)
{
	if (covariance.rows() != covariance.cols())
		throw ValidationError("covariance must be square");
	if (!covariance.allFinite())
		throw ValidationError("covariance has non-finite entries");
	const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
	if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
		throw ValidationError("covariance must be symmetric");
	const Eigen::Index n = covariance.rows();
	if (n == 0) {
		factor_ = Matrix(0, 0);
		return;
	}
	if (covariance.isZero(0.0)) {
		factor_ = Matrix::Zero(n, n);
		return;
	}
	// Diagonal covariances get an exact elementwise square root.
	if (covariance.isDiagonal(0.0)) {
		factor_ = Matrix::Zero(n, n);
		for (Eigen::Index i = 0; i < n; ++i) {
			if (covariance(i, i) < 0.0)
				throw ValidationError("covariance must be positive semidefinite");
			factor_(i, i) = std::sqrt(covariance(i, i));
		}
		return;
	}
	Eigen::SelfAdjointEigenSolver<Matrix> es(covariance);
	if (es.info() != Eigen::Success)
		throw Error("covariance factorization did not converge");
	Vector lam = es.eigenvalues();
	if (lam.minCoeff() < -1e-10 * scale)
		throw ValidationError("covariance must be positive semidefinite");
	lam = lam.cwiseMax(0.0).cwiseSqrt();
	factor_ = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Vector GaussianSampler::sample(RngStream& stream) const
{
	Vector z(factor_.cols());
	for (Eigen::Index i = 0; i < z.size(); ++i)
		z(i) = stream.normal();
	return factor_ * z;
}

Vector sample_gaussian_vector(RngStream& stream, const Matrix& covariance)
{
	return GaussianSampler(covariance).sample(stream);
}

} // namespace dse
