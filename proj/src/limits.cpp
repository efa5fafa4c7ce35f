#include "fkrwrc/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fkrwrc {

double sample_one_sided_stable(double gamma, Rng& rng)
{
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("stable index must lie in (0,1)");
    double u;
    do {
        u = rng.uniform();
    } while (u >= 1.0);
    const double w = rng.exponential();
    const double a = std::pow(std::sin(gamma * M_PI * u) / std::sin(M_PI * u), 1.0 / (1.0 - gamma)) *
                     std::sin((1.0 - gamma) * M_PI * u) / std::sin(gamma * M_PI * u);
    return std::pow(a / w, (1.0 - gamma) / gamma);
}

double half_stable_cdf(double x)
{
    if (x <= 0.0) return 0.0;
    return std::erfc(1.0 / (2.0 * std::sqrt(x)));
}

std::vector<double> subordinator_path(double gamma, const std::vector<double>& t_grid, Rng& rng)
{
    if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw std::invalid_argument("time grid must be sorted");
    std::vector<double> out;
    out.reserve(t_grid.size());
    double s = 0.0, prev = 0.0;
    for (double t : t_grid) {
        if (t < 0.0) throw std::invalid_argument("time grid must be nonnegative");
        const double dt = t - prev;
        if (dt > 0.0) s += std::pow(dt, 1.0 / gamma) * sample_one_sided_stable(gamma, rng);
        out.push_back(s);
        prev = t;
    }
    return out;
}

std::vector<double> inverse_subordinator(const std::vector<double>& t_grid, const std::vector<double>& path,
                                         const std::vector<double>& s_grid)
{
    if (t_grid.size() != path.size()) throw std::invalid_argument("grid and path sizes differ");
    if (!std::is_sorted(s_grid.begin(), s_grid.end())) throw std::invalid_argument("level grid must be sorted");
    std::vector<double> out;
    out.reserve(s_grid.size());
    for (double s : s_grid) {
        const auto it = std::upper_bound(path.begin(), path.end(), s);
        out.push_back(it == path.end() ? std::numeric_limits<double>::infinity()
                                       : t_grid[std::size_t(it - path.begin())]);
    }
    return out;
}

std::vector<double> inverse_subordinator_at(double gamma, const std::vector<double>& s_grid, Rng& rng,
                                            ClockGrid clock)
{
    if (!std::is_sorted(s_grid.begin(), s_grid.end())) throw std::invalid_argument("level grid must be sorted");
    const double scale = std::pow(clock.step, 1.0 / gamma);
    std::vector<double> out;
    out.reserve(s_grid.size());
    double S = 0.0;
    std::size_t j = 0;
    for (double s : s_grid) {
        while (!(S > s)) {
            if (j >= clock.max_steps) throw std::runtime_error("inverse subordinator: clock budget exhausted");
            S += scale * sample_one_sided_stable(gamma, rng);
            ++j;
        }
        out.push_back(double(j) * clock.step);
    }
    return out;
}

Eigen::MatrixXd fractional_kinetics_path(double gamma, const Eigen::MatrixXd& sigma_root,
                                         const std::vector<double>& t_grid, Rng& clock_rng, Rng& bm_rng,
                                         ClockGrid clock)
{
    const auto d = sigma_root.rows();
    const std::vector<double> E = inverse_subordinator_at(gamma, t_grid, clock_rng, clock);
    Eigen::MatrixXd out(Eigen::Index(t_grid.size()), d);
    Eigen::VectorXd B = Eigen::VectorXd::Zero(sigma_root.cols());
    double prev = 0.0;
    for (std::size_t i = 0; i < E.size(); ++i) {
        const double dt = E[i] - prev;
        if (dt > 0.0)
            for (Eigen::Index k = 0; k < B.size(); ++k) B[k] += std::sqrt(dt) * bm_rng.normal();
        prev = E[i];
        out.row(Eigen::Index(i)) = (sigma_root * B).transpose();
    }
    return out;
}

double inverse_subordinator_moment(double gamma, int k)
{
    return std::tgamma(double(k) + 1.0) / std::tgamma(1.0 + double(k) * gamma);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

LimitModel estimate_limit_model(const Eigen::MatrixXd& increments, double gamma, double C_inf,
                                std::size_t min_records)
{
    const auto n = increments.rows();
    if (std::size_t(n) < min_records)
        throw std::runtime_error("estimate_limit_model: insufficient data (" + std::to_string(n) + " increments, need " +
                                 std::to_string(min_records) + ")");
    if (!(C_inf > 0.0)) throw std::invalid_argument("C_inf must be positive");
    LimitModel m;
    m.gamma = gamma;
    m.C_inf = C_inf;
    m.v = increments.colwise().mean().transpose();
    const double norm = m.v.norm();
    if (!(norm > 0.0)) throw std::runtime_error("estimate_limit_model: zero mean increment");
    m.v0 = m.v / norm;
    const Eigen::MatrixXd centred = increments.rowwise() - m.v.transpose();
    m.Sigma = centred.transpose() * centred / double(n);
    m.P_v0 = m.v0 * m.v0.transpose();
    const auto d = m.v.size();
    m.M_d = std::pow(C_inf, -gamma / 2.0) * (Eigen::MatrixXd::Identity(d, d) - m.P_v0) * psd_sqrt(m.Sigma);
    return m;
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > rel_tol * s[0]) ++r;
    return r;
}

}  // namespace fkrwrc
