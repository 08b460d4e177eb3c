#ifndef GMSWAVE_LANCZOS_HPP
#define GMSWAVE_LANCZOS_HPP

#include "gmswave/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace gmswave {

/// Largest eigenvalue of M^{-1} S for an SPD mass pairing (deterministic
/// start). Lanczos in the mass inner product; clustered extreme spectra
/// converge far faster here than under plain power iteration.
///
/// System needs: dim(), apply_stiffness(x), apply_mass(x),
/// solve_mass_inplace(x).
template <class System>
std::pair<Real, bool> spectral_lambda_max(const System& sys, int max_iters = 240,
                                          Real tol = 1e-9) {
  const Eigen::Index n = sys.dim();
  std::mt19937_64 rng(987654321);
  std::normal_distribution<Real> normal(0.0, 1.0);
  Vec q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = normal(rng);
  q /= std::sqrt(q.dot(sys.apply_mass(q)));
  Vec q_prev = Vec::Zero(n);

  const int k_max = static_cast<int>(std::min<Eigen::Index>(max_iters, n));
  std::vector<Real> alpha, beta;  // tridiagonal reduction of M^{-1} S
  Real lambda = 0, lambda_prev = -1;
  bool converged = false;

  auto top_of_tridiag = [&] {
    const int k = static_cast<int>(alpha.size());
    Mat t = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      t(i, i) = alpha[static_cast<size_t>(i)];
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[static_cast<size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(t, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };

  for (int j = 0; j < k_max; ++j) {
    Vec w = sys.apply_stiffness(q);
    sys.solve_mass_inplace(w);
    alpha.push_back(w.dot(sys.apply_mass(q)));
    w -= alpha.back() * q;
    if (!beta.empty()) w -= beta.back() * q_prev;
    const Real b = std::sqrt(std::max(w.dot(sys.apply_mass(w)), Real(0)));
    if (b <= 1e-14 * std::abs(alpha.back())) {
      lambda = top_of_tridiag();
      converged = true;  // invariant subspace reached
      break;
    }
    beta.push_back(b);
    q_prev = q;
    q = w / b;

    if ((j + 1) % 24 == 0 || j + 1 == k_max) {
      lambda = top_of_tridiag();
      if (lambda_prev > 0 && std::abs(lambda - lambda_prev) <= tol * lambda) {
        converged = true;
        break;
      }
      lambda_prev = lambda;
    }
  }
  if (lambda == 0 && !alpha.empty()) lambda = top_of_tridiag();
  return {lambda, converged};
}

}  // namespace gmswave

#endif
