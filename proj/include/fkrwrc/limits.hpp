#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fkrwrc/rng.hpp"

namespace fkrwrc {

/// Positive stable sample with E[e^{-sX}] = e^{-s^gamma} (Kanter's representation).
double sample_one_sided_stable(double gamma, Rng& rng);

/// P(X <= x) for gamma = 1/2: erfc(1/(2 sqrt x)).
double half_stable_cdf(double x);

/// Subordinator values on a sorted time grid; starts from S(0) = 0.
std::vector<double> subordinator_path(double gamma, const std::vector<double>& t_grid, Rng& rng);

/// Right-continuous inverse E(s) = inf{t_j : S(t_j) > s} on the grid; +inf when S never exceeds s.
std::vector<double> inverse_subordinator(const std::vector<double>& t_grid, const std::vector<double>& path,
                                         const std::vector<double>& s_grid);

struct ClockGrid {
    double step = 1e-3;
    std::size_t max_steps = 100'000'000;
};

/// Inverse subordinator at each s in a sorted grid, from a subordinator sampled on a uniform clock grid.
std::vector<double> inverse_subordinator_at(double gamma, const std::vector<double>& s_grid, Rng& rng,
                                            ClockGrid clock = {});

/// sqrt(Sigma) B(E(t)) on the grid; rows are grid points. Clock and Brownian motion use separate streams.
Eigen::MatrixXd fractional_kinetics_path(double gamma, const Eigen::MatrixXd& sigma_root,
                                         const std::vector<double>& t_grid, Rng& clock_rng, Rng& bm_rng,
                                         ClockGrid clock = {});

/// E[E(1)^k] for the inverse of the subordinator, Gamma(k+1)/Gamma(1+k gamma).
double inverse_subordinator_moment(double gamma, int k);

struct LimitModel {
    double gamma = 0.5;
    Eigen::VectorXd v;
    Eigen::VectorXd v0;
    Eigen::MatrixXd Sigma;
    double C_inf = 1.0;
    Eigen::MatrixXd P_v0;
    Eigen::MatrixXd M_d;
};

/// Symmetric positive semidefinite square root (negative eigenvalues from rounding are clamped).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

/// v, Sigma from regeneration increments (one per row); needs at least `min_records` rows.
LimitModel estimate_limit_model(const Eigen::MatrixXd& increments, double gamma, double C_inf = 1.0,
                                std::size_t min_records = 100);

/// Numerical rank by singular values relative to the largest.
int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-6);

}  // namespace fkrwrc
