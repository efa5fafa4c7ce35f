#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "fkrwrc/lattice.hpp"
#include "fkrwrc/regen.hpp"
#include "fkrwrc/rng.hpp"

namespace fkrwrc {

enum class Interpolation { step, polygonal };

/// Y_n, Z_n, S_n on a grid (rows of Y and Z are grid points) and the shifted W*_n = (Z*, S*).
struct ScaledProcessSample {
    double n = 0.0;
    std::vector<double> grid;
    Eigen::MatrixXd Y;
    Eigen::MatrixXd Z;
    std::vector<double> S;
    Eigen::MatrixXd Zstar;
    std::vector<double> Sstar;
    Interpolation mode = Interpolation::step;
};

/// Regeneration epochs in order, with τ_0 = 0 and X_{τ_0} = x0 prepended.
struct EpochPath {
    Point x0;
    int d = 1;
    std::vector<std::uint64_t> tau;
    std::vector<Point> x;

    static EpochPath from_records(const std::vector<RegenerationRecord>& records, const Point& x0, int d);
    std::size_t count() const { return tau.size(); }
};

/// ⌊t n⌋ with grid points within 1e-9 of a knot snapped onto it.
std::size_t knot_index(double t, double n);

ScaledProcessSample scaled_processes(const EpochPath& path, double n, const std::vector<double>& grid,
                                     const Eigen::VectorXd& v, double inv_n, Interpolation mode = Interpolation::step);

/// S*_n(t) = (τ_{⌊tn⌋+1} − τ_1)/Inv(n).
double clock_star(const EpochPath& path, double n, double t, double inv_n);

struct HillResult {
    double index = 0.0;
    double stderr_ = 0.0;
    double mean_log_excess = 0.0;
    std::size_t k_top = 0;
    bool degenerate = false;
};

HillResult hill_estimator(std::vector<double> samples, std::size_t k_top);

struct VarianceEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    double outer = 0.0;
    double within = 0.0;
    std::size_t n_env = 0;
    std::size_t n_walk = 0;
    bool clamped = false;
};

/// values[e][w] = F for walk w in environment e. Var_outer − mean within-env variance / n_walk, jackknifed.
VarianceEstimate quenched_variance(const std::vector<std::vector<double>>& values);

/// The same quantity as E[F(W^1)F(W^2)] − E[F]^2, from disjoint same-environment pairs of walks.
VarianceEstimate paired_walk_covariance(const std::vector<std::vector<double>>& values);

/// Fills values[e][w] = F(e, w) with a deterministic parallel map over environments, then estimates.
VarianceEstimate quenched_variance(const std::function<double(std::size_t, std::size_t)>& F, std::size_t n_env,
                                   std::size_t n_walk, unsigned threads = 1);

struct PowerLawFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r2 = 1.0;
    double max_abs_residual = 0.0;
    std::vector<double> residuals;
};

PowerLawFit power_law_fit(const std::vector<double>& xs, const std::vector<double>& ys);

struct PointMass {
    double sup = 0.0;
    double stderr_ = 0.0;
    std::size_t walks = 0;
    Point mode;
};

/// points[j] = X_{τ_n} of walk j for one n.
PointMass point_mass(const std::vector<Point>& points);
std::vector<PointMass> point_mass_profile(const std::vector<std::vector<Point>>& points_by_n);

struct BigJumpRow {
    double x = 0.0;
    double p_sum = 0.0;
    double p_single = 0.0;
    double ratio = 0.0;
    double stderr_ratio = 0.0;
    bool large_deviation = false;
};

/// Monte Carlo P(sum of n Pareto(γ) > x) against n·P(X_1 > x), both from the same trials.
std::vector<BigJumpRow> one_big_jump_check(double gamma, std::size_t n, const std::vector<double>& x_list,
                                           std::size_t trials, Rng& rng);

struct SmallTimeResult {
    double probability = 0.0;
    double stderr_ = 0.0;
    std::size_t walks = 0;
    std::size_t truncated = 0;
    std::size_t increments_used = 0;
    bool degenerate = false;
};

/// Empirical P(S*_n(n^{−η}) > n^{−ρ}) from the first ⌊n^{1−η}⌋ increments of each walk.
SmallTimeResult small_time_clock_check(const std::vector<std::vector<std::uint64_t>>& increments, double n,
                                       double eta, double rho, double gamma, double inv_n);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
double kolmogorov_survival(double lambda);

KsResult ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

double median(std::vector<double> xs);
double mean(const std::vector<double>& xs);

}  // namespace fkrwrc
