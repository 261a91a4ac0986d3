#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twave/profile.hpp"

namespace twave {

class HillError : public std::runtime_error {
 public:
  explicit HillError(const std::string& what) : std::runtime_error(what) {}
};

// Galerkin truncation of the Bloch operator L_xi in the Fourier basis of
// L^2_per([0, X]): modes -N..N, dense (2N+1)^2.
struct HillMatrix {
  int N = 0;
  double xi = 0.0;
  Eigen::MatrixXcd entries;
  std::string provenance;
  std::string warning;  // aliasing guard
};

HillMatrix hill_assemble(const WaveProfile& profile, double xi, int N);

std::vector<Complex> hill_eigenvalues(const WaveProfile& profile, double xi,
                                      int N);

struct HillSweep {
  std::vector<double> xi;
  std::vector<std::vector<Complex>> eigs;  // per xi
  double convergence = 0.0;  // max |lambda(N) - lambda(2N)| over tracked eigs
  int N = 0;
  std::string warning;
};

// Eigenvalues for every xi on the grid; the convergence monitor compares a
// few stations against the doubled truncation and bumps N when it exceeds
// 1e-6.
HillSweep hill_sweep(const WaveProfile& profile,
                     const std::vector<double>& xi_grid, int N = 32);

double hill_max_real(const HillSweep& sweep);

// The `count` eigenvalues nearest `sigma`, by shift-invert: the dense solver
// alone cannot resolve the defective origin pair below sqrt(eps ||M||).
std::vector<Complex> hill_nearest(const WaveProfile& profile, double xi, int N,
                                  Complex sigma, int count);

}  // namespace twave
