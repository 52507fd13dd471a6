#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's linear algebra.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(int r, int c)
{
	return Dense(r, std::vector<double>(c, 0.0));
}

inline Dense multiply(const Dense& a, const Dense& b)
{
	const int r = int(a.size()), k = int(b.size()), c = int(b[0].size());
	Dense out = zeros(r, c);
	for (int i = 0; i < r; ++i)
		for (int t = 0; t < k; ++t)
			for (int j = 0; j < c; ++j)
				out[i][j] += a[i][t] * b[t][j];
	return out;
}

inline Dense transpose(const Dense& a)
{
	Dense out = zeros(int(a[0].size()), int(a.size()));
	for (size_t i = 0; i < a.size(); ++i)
		for (size_t j = 0; j < a[0].size(); ++j)
			out[j][i] = a[i][j];
	return out;
}

// Kronecker product straight from (A kron B)[p*i + r][q*j + s] = A[i][j] B[r][s].
inline Dense kron(const Dense& a, const Dense& b)
{
	const int p = int(b.size()), q = int(b[0].size());
	Dense out = zeros(int(a.size()) * p, int(a[0].size()) * q);
	for (size_t i = 0; i < a.size(); ++i)
		for (size_t j = 0; j < a[0].size(); ++j)
			for (int r = 0; r < p; ++r)
				for (int s = 0; s < q; ++s)
					out[i * p + r][j * q + s] = a[i][j] * b[r][s];
	return out;
}

// Characteristic polynomial coefficients by Faddeev-LeVerrier:
// det(lambda I - A) = lambda^n + c[1] lambda^{n-1} + ... + c[n].
inline std::vector<double> char_poly(const Dense& a)
{
	const int n = int(a.size());
	std::vector<double> c(n + 1, 0.0);
	c[0] = 1.0;
	Dense m = zeros(n, n);
	for (int k = 1; k <= n; ++k) {
		// M_k = A M_{k-1} + c_{k-1} I
		Dense am = multiply(a, m);
		for (int i = 0; i < n; ++i)
			am[i][i] += c[k - 1];
		m = am;
		Dense amk = multiply(a, m);
		double tr = 0.0;
		for (int i = 0; i < n; ++i)
			tr += amk[i][i];
		c[k] = -tr / k;
	}
	return c;
}

// Durand-Kerner simultaneous root iteration on a monic polynomial.
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& c)
{
	const int n = int(c.size()) - 1;
	std::vector<std::complex<double>> z(n);
	const std::complex<double> seed(0.4, 0.9);
	double bound = 0.0;
	for (int k = 1; k <= n; ++k)
		bound = std::max(bound, std::abs(c[k]));
	bound += 1.0;
	for (int i = 0; i < n; ++i)
		z[i] = bound * std::pow(seed, i);
	auto eval = [&](std::complex<double> x) {
		std::complex<double> v = 1.0;
		for (int k = 1; k <= n; ++k)
			v = v * x + c[k];
		return v;
	};
	for (int it = 0; it < 5000; ++it) {
		double change = 0.0;
		for (int i = 0; i < n; ++i) {
			std::complex<double> den = 1.0;
			for (int j = 0; j < n; ++j)
				if (j != i)
					den *= (z[i] - z[j]);
			std::complex<double> d = eval(z[i]) / den;
			z[i] -= d;
			change = std::max(change, std::abs(d));
		}
		if (change < 1e-15)
			break;
	}
	// Newton polish on the original polynomial.
	for (auto& x : z) {
		for (int it = 0; it < 5; ++it) {
			std::complex<double> v = 1.0, dv = 0.0;
			for (int k = 1; k <= n; ++k) {
				dv = dv * x + v;
				v = v * x + c[k];
			}
			if (std::abs(dv) == 0.0)
				break;
			x -= v / dv;
		}
	}
	return z;
}

inline double radius_by_char_poly(const Dense& a)
{
	double r = 0.0;
	for (auto z : poly_roots(char_poly(a)))
		r = std::max(r, std::abs(z));
	return r;
}

// Cyclic Jacobi rotations for a symmetric matrix; returns eigenvalues.
inline std::vector<double> jacobi_eigenvalues(Dense a)
{
	const int n = int(a.size());
	for (int sweep = 0; sweep < 100; ++sweep) {
		double off = 0.0;
		for (int p = 0; p < n; ++p)
			for (int q = p + 1; q < n; ++q)
				off += a[p][q] * a[p][q];
		if (off < 1e-30)
			break;
		for (int p = 0; p < n; ++p)
			for (int q = p + 1; q < n; ++q) {
				if (std::abs(a[p][q]) < 1e-300)
					continue;
				const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
				const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
				const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
				for (int k = 0; k < n; ++k) {
					const double akp = a[k][p], akq = a[k][q];
					a[k][p] = c * akp - s * akq;
					a[k][q] = s * akp + c * akq;
				}
				for (int k = 0; k < n; ++k) {
					const double apk = a[p][k], aqk = a[q][k];
					a[p][k] = c * apk - s * aqk;
					a[q][k] = s * apk + c * aqk;
				}
			}
	}
	std::vector<double> ev(n);
	for (int i = 0; i < n; ++i)
		ev[i] = a[i][i];
	return ev;
}

inline double norm2_by_jacobi(const Dense& m)
{
	auto ev = jacobi_eigenvalues(multiply(transpose(m), m));
	return std::sqrt(*std::max_element(ev.begin(), ev.end()));
}

// ---- graph oracles; edges are (src, dst) pairs with 0-based nodes ----

using Edges = std::vector<std::pair<int, int>>;

inline std::vector<std::vector<bool>> reachability(int n, const Edges& edges)
{
	std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
	for (int i = 0; i < n; ++i)
		r[i][i] = true;
	for (auto [s, d] : edges)
		r[s][d] = true;
	for (int k = 0; k < n; ++k)
		for (int i = 0; i < n; ++i)
			for (int j = 0; j < n; ++j)
				if (r[i][k] && r[k][j])
					r[i][j] = true;
	return r;
}

// SCC partition as sorted sets, ordered by lowest member.
inline std::vector<std::vector<int>> sccs_by_reachability(int n, const Edges& edges)
{
	auto r = reachability(n, edges);
	std::vector<bool> done(n, false);
	std::vector<std::vector<int>> out;
	for (int i = 0; i < n; ++i) {
		if (done[i])
			continue;
		std::vector<int> comp;
		for (int j = 0; j < n; ++j)
			if (r[i][j] && r[j][i]) {
				comp.push_back(j);
				done[j] = true;
			}
		out.push_back(comp);
	}
	return out;
}

// Maximum matching size by exhaustive search over assignments of sources to
// distinct targets (each source may also stay unmatched).
inline int matching_by_enumeration(int n, const Edges& edges)
{
	std::vector<std::vector<int>> out(n);
	for (auto [s, d] : edges)
		out[s].push_back(d);
	int best = 0;
	std::vector<bool> used(n, false);
	auto rec = [&](auto&& self, int left, int size) -> void {
		if (size + (n - left) <= best)
			return;
		if (left == n) {
			best = std::max(best, size);
			return;
		}
		for (int d : out[left])
			if (!used[d]) {
				used[d] = true;
				self(self, left + 1, size + 1);
				used[d] = false;
			}
		self(self, left + 1, size);
	};
	rec(rec, 0, 0);
	return best;
}

inline int out_neighbourhood_size(std::uint32_t subset, int n, const Edges& edges)
{
	std::set<int> nb;
	for (auto [s, d] : edges)
		if (subset & (1u << s))
			nb.insert(d);
	(void)n;
	return int(nb.size());
}

// All node subsets whose out-neighbourhood is strictly smaller than the set.
inline std::vector<std::uint32_t> deficient_subsets(int n, const Edges& edges)
{
	std::vector<std::uint32_t> out;
	for (std::uint32_t s = 1; s < (1u << n); ++s)
		if (out_neighbourhood_size(s, n, edges) < __builtin_popcount(s))
			out.push_back(s);
	return out;
}

} // namespace oracle
