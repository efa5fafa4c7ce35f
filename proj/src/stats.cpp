#include "fkrwrc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "fkrwrc/parallel.hpp"

namespace fkrwrc {

EpochPath EpochPath::from_records(const std::vector<RegenerationRecord>& records, const Point& x0, int d)
{
    EpochPath p;
    p.x0 = x0;
    p.d = d;
    p.tau.push_back(0);
    p.x.push_back(x0);
    for (const auto& r : records) {
        if (!r.confirmed) break;
        p.tau.push_back(r.tau);
        p.x.push_back(r.point);
    }
    return p;
}

std::size_t knot_index(double t, double n)
{
    if (t < 0.0) throw std::invalid_argument("negative time");
    return std::size_t(std::floor(t * n + 1e-9));
}

namespace {

Eigen::VectorXd displacement(const EpochPath& p, std::size_t k)
{
    Eigen::VectorXd out(p.d);
    for (int i = 0; i < p.d; ++i) out[i] = double(p.x[k][i] - p.x0[i]);
    return out;
}

void require_epochs(const EpochPath& p, std::size_t k)
{
    if (k >= p.count())
        throw std::runtime_error("scaled processes: insufficient records (need epoch " + std::to_string(k) + ", have " +
                                 std::to_string(p.count() - 1) + ")");
}

}  // namespace

ScaledProcessSample scaled_processes(const EpochPath& path, double n, const std::vector<double>& grid,
                                     const Eigen::VectorXd& v, double inv_n, Interpolation mode)
{
    if (!(n > 0.0) || !(inv_n > 0.0)) throw std::invalid_argument("scale must be positive");
    if (v.size() != path.d) throw std::invalid_argument("drift vector dimension mismatch");
    const auto m = Eigen::Index(grid.size());
    ScaledProcessSample s;
    s.n = n;
    s.grid = grid;
    s.mode = mode;
    s.Y.resize(m, path.d);
    s.Z.resize(m, path.d);
    s.Zstar.resize(m, path.d);
    const double rn = std::sqrt(n);
    auto Z_at_knot = [&](std::size_t k) -> Eigen::VectorXd { return (displacement(path, k) - v * double(k)) / rn; };
    auto Z_at = [&](double t) -> Eigen::VectorXd {
        const std::size_t k = knot_index(t, n);
        if (mode == Interpolation::step) return (displacement(path, k) - v * (n * t)) / rn;
        const double theta = std::max(0.0, t * n - double(k));
        if (theta == 0.0) return Z_at_knot(k);
        require_epochs(path, k + 1);
        return (1.0 - theta) * Z_at_knot(k) + theta * Z_at_knot(k + 1);
    };
    auto S_at = [&](double t) { return double(path.tau[knot_index(t, n)]) / inv_n; };
    for (Eigen::Index i = 0; i < m; ++i) {
        const double t = grid[std::size_t(i)];
        const std::size_t k = knot_index(t, n);
        require_epochs(path, k + 1);
        s.Y.row(i) = (displacement(path, k) / n).transpose();
        s.Z.row(i) = Z_at(t).transpose();
        s.S.push_back(S_at(t));
        const double shifted = t + 1.0 / n;
        s.Zstar.row(i) = (Z_at(shifted) - Z_at(1.0 / n)).transpose();
        s.Sstar.push_back(S_at(shifted) - S_at(1.0 / n));
    }
    return s;
}

double clock_star(const EpochPath& path, double n, double t, double inv_n)
{
    const std::size_t k = knot_index(t, n) + 1;
    require_epochs(path, k);
    return double(path.tau[k] - path.tau[1]) / inv_n;
}

HillResult hill_estimator(std::vector<double> samples, std::size_t k_top)
{
    if (k_top < 1 || k_top >= samples.size()) throw std::invalid_argument("Hill estimator needs 1 <= k_top < n");
    for (double x : samples)
        if (!(x > 0.0)) throw std::invalid_argument("Hill estimator needs positive samples");
    std::nth_element(samples.begin(), samples.begin() + std::ptrdiff_t(k_top), samples.end(), std::greater<>());
    const double threshold = samples[k_top];
    double sum = 0.0;
    for (std::size_t i = 0; i < k_top; ++i) sum += std::log(samples[i] / threshold);
    HillResult r;
    r.k_top = k_top;
    r.mean_log_excess = sum / double(k_top);
    if (!(r.mean_log_excess > 0.0)) {
        r.degenerate = true;
        r.index = std::numeric_limits<double>::quiet_NaN();
        r.stderr_ = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.index = 1.0 / r.mean_log_excess;
    r.stderr_ = r.index / std::sqrt(double(k_top));
    return r;
}

namespace {

struct EnvSummary {
    double mean = 0.0;
    double var = 0.0;
};

std::vector<EnvSummary> summarise(const std::vector<std::vector<double>>& values, std::size_t& n_walk)
{
    if (values.size() < 2) throw std::invalid_argument("quenched variance needs at least 2 environments");
    n_walk = values.front().size();
    if (n_walk < 2) throw std::invalid_argument("quenched variance needs at least 2 walks per environment");
    std::vector<EnvSummary> out;
    for (const auto& row : values) {
        if (row.size() != n_walk) throw std::invalid_argument("ragged walk counts");
        EnvSummary s;
        s.mean = mean(row);
        double ss = 0.0;
        for (double x : row) ss += (x - s.mean) * (x - s.mean);
        s.var = ss / double(n_walk - 1);
        out.push_back(s);
    }
    return out;
}

double jackknife_se(const std::vector<double>& loo)
{
    const double N = double(loo.size());
    const double m = mean(loo);
    double ss = 0.0;
    for (double x : loo) ss += (x - m) * (x - m);
    return std::sqrt((N - 1.0) / N * ss);
}

}  // namespace

VarianceEstimate quenched_variance(const std::vector<std::vector<double>>& values)
{
    std::size_t n_walk = 0;
    const auto env = summarise(values, n_walk);
    const std::size_t N = env.size();
    // Shifted sums keep the outer variance exact for constant means.
    const double shift = N ? env.front().mean : 0.0;
    double sm = 0.0, sm2 = 0.0, sv = 0.0;
    for (const auto& e : env) {
        sm += e.mean - shift;
        sm2 += (e.mean - shift) * (e.mean - shift);
        sv += e.var;
    }
    auto estimate = [&](double a, double a2, double v, double n) {
        const double outer = (a2 - a * a / n) / (n - 1.0);
        return std::pair{outer, outer - v / n / double(n_walk)};
    };
    VarianceEstimate r;
    r.n_env = N;
    r.n_walk = n_walk;
    const auto [outer, est] = estimate(sm, sm2, sv, double(N));
    r.outer = outer;
    r.within = sv / double(N) / double(n_walk);
    r.estimate = est;
    if (N >= 3) {
        std::vector<double> loo;
        for (const auto& e : env)
            loo.push_back(estimate(sm - (e.mean - shift), sm2 - (e.mean - shift) * (e.mean - shift), sv - e.var,
                                   double(N - 1))
                              .second);
        r.stderr_ = jackknife_se(loo);
    }
    if (r.estimate < 0.0) {
        r.estimate = 0.0;
        r.clamped = true;
    }
    return r;
}

VarianceEstimate paired_walk_covariance(const std::vector<std::vector<double>>& values)
{
    std::size_t n_walk = 0;
    summarise(values, n_walk);
    const std::size_t N = values.size();
    const std::size_t pairs = n_walk / 2;
    std::vector<double> prod(N), a(N), b(N);
    for (std::size_t e = 0; e < N; ++e) {
        double p = 0.0, sa = 0.0, sb = 0.0;
        for (std::size_t j = 0; j < pairs; ++j) {
            const double f1 = values[e][2 * j], f2 = values[e][2 * j + 1];
            p += f1 * f2;
            sa += f1;
            sb += f2;
        }
        prod[e] = p / double(pairs);
        a[e] = sa / double(pairs);
        b[e] = sb / double(pairs);
    }
    double sp = 0.0, sa = 0.0, sb = 0.0, sab = 0.0;
    for (std::size_t e = 0; e < N; ++e) {
        sp += prod[e];
        sa += a[e];
        sb += b[e];
        sab += a[e] * b[e];
    }
    // E[F]^2 from distinct environments keeps the product term unbiased.
    auto estimate = [](double p, double x, double y, double xy, double n) {
        return p / n - (x * y - xy) / (n * (n - 1.0));
    };
    VarianceEstimate r;
    r.n_env = N;
    r.n_walk = n_walk;
    r.estimate = estimate(sp, sa, sb, sab, double(N));
    r.outer = sp / double(N);
    r.within = (sa * sb - sab) / (double(N) * double(N - 1));
    if (N >= 3) {
        std::vector<double> loo;
        for (std::size_t e = 0; e < N; ++e)
            loo.push_back(estimate(sp - prod[e], sa - a[e], sb - b[e], sab - a[e] * b[e], double(N - 1)));
        r.stderr_ = jackknife_se(loo);
    }
    if (r.estimate < 0.0) {
        r.estimate = 0.0;
        r.clamped = true;
    }
    return r;
}

VarianceEstimate quenched_variance(const std::function<double(std::size_t, std::size_t)>& F, std::size_t n_env,
                                   std::size_t n_walk, unsigned threads)
{
    auto values = parallel_map(n_env, threads, [&](std::size_t e) {
        std::vector<double> row(n_walk);
        for (std::size_t w = 0; w < n_walk; ++w) row[w] = F(e, w);
        return row;
    });
    return quenched_variance(values);
}

PowerLawFit power_law_fit(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("power-law fit needs >= 2 paired points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw std::invalid_argument("power-law fit needs positive data");
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
    }
    const double n = double(lx.size());
    const double mx = mean(lx), my = mean(ly);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("power-law fit needs distinct x values");
    PowerLawFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        f.residuals.push_back(r);
        f.max_abs_residual = std::max(f.max_abs_residual, std::abs(r));
        sse += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    f.slope_stderr = n > 2.0 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
    return f;
}

PointMass point_mass(const std::vector<Point>& points)
{
    if (points.empty()) throw std::invalid_argument("point mass needs at least one walk");
    std::unordered_map<Point, std::size_t, PointHash> counts;
    PointMass pm;
    std::size_t best = 0;
    for (const Point& p : points) {
        const std::size_t c = ++counts[p];
        if (c > best || (c == best && p < pm.mode)) {
            best = c;
            pm.mode = p;
        }
    }
    pm.walks = points.size();
    pm.sup = double(best) / double(points.size());
    pm.stderr_ = std::sqrt(pm.sup * (1.0 - pm.sup) / double(points.size()));
    return pm;
}

std::vector<PointMass> point_mass_profile(const std::vector<std::vector<Point>>& points_by_n)
{
    std::vector<PointMass> out;
    for (const auto& pts : points_by_n) out.push_back(point_mass(pts));
    return out;
}

std::vector<BigJumpRow> one_big_jump_check(double gamma, std::size_t n, const std::vector<double>& x_list,
                                           std::size_t trials, Rng& rng)
{
    if (n < 1 || trials < 1) throw std::invalid_argument("one_big_jump_check needs n >= 1 and trials >= 1");
    const ConductanceLaw law(gamma, LawFamily::pareto);
    std::vector<std::size_t> sum_hits(x_list.size(), 0), single_hits(x_list.size(), 0);
    std::vector<double> draws(n);
    for (std::size_t t = 0; t < trials; ++t) {
        double s = 0.0;
        for (auto& x : draws) {
            x = law.quantile_upper(rng.uniform());
            s += x;
        }
        for (std::size_t j = 0; j < x_list.size(); ++j) {
            if (s > x_list[j]) ++sum_hits[j];
            for (double x : draws)
                if (x > x_list[j]) ++single_hits[j];
        }
    }
    std::vector<BigJumpRow> rows;
    const double scale = std::pow(double(n), 1.0 / gamma);
    for (std::size_t j = 0; j < x_list.size(); ++j) {
        BigJumpRow r;
        r.x = x_list[j];
        r.p_sum = double(sum_hits[j]) / double(trials);
        r.p_single = double(single_hits[j]) / double(trials);
        r.ratio = r.p_single > 0.0 ? r.p_sum / r.p_single : std::numeric_limits<double>::quiet_NaN();
        if (sum_hits[j] > 0 && single_hits[j] > 0)
            r.stderr_ratio = r.ratio * std::sqrt(1.0 / double(sum_hits[j]) + 1.0 / double(single_hits[j]));
        r.large_deviation = r.x >= 10.0 * scale;
        rows.push_back(r);
    }
    return rows;
}

SmallTimeResult small_time_clock_check(const std::vector<std::vector<std::uint64_t>>& increments, double n,
                                       double eta, double rho, double gamma, double inv_n)
{
    if (!(rho < eta / gamma))
        throw std::invalid_argument("small_time_clock_check: requires rho < eta/gamma (got rho = " +
                                    std::to_string(rho) + ", eta/gamma = " + std::to_string(eta / gamma) + ")");
    SmallTimeResult r;
    const auto m = std::size_t(std::floor(std::pow(n, 1.0 - eta) + 1e-9));
    r.increments_used = m;
    if (m < 1) {
        r.degenerate = true;
        r.walks = increments.size();
        return r;
    }
    const double threshold = std::pow(n, -rho);
    std::size_t hits = 0;
    for (const auto& inc : increments) {
        if (inc.size() < m) {
            ++r.truncated;
            continue;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += double(inc[i]);
        if (s / inv_n > threshold) ++hits;
        ++r.walks;
    }
    if (r.walks > 0) {
        r.probability = double(hits) / double(r.walks);
        r.stderr_ = std::sqrt(r.probability * (1.0 - r.probability) / double(r.walks));
    }
    return r;
}

double kolmogorov_survival(double lambda)
{
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * double(k) * double(k) * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf)
{
    if (samples.size() < 50) throw std::invalid_argument("ks_distance needs at least 50 samples");
    std::sort(samples.begin(), samples.end());
    const double lo = cdf(samples.front()), hi = cdf(samples.back());
    if (lo == hi && cdf(samples.front() - 1.0) == cdf(samples.back() + 1.0))
        throw std::invalid_argument("ks_distance: reference CDF is constant over the sample range");
    const double n = double(samples.size());
    double D = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double F = cdf(samples[i]);
        D = std::max({D, double(i + 1) / n - F, F - double(i) / n});
    }
    return {D, kolmogorov_survival(std::sqrt(n) * D), samples.size()};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        D = std::max(D, std::abs(double(i) / double(a.size()) - double(j) / double(b.size())));
    }
    const double ne = double(a.size()) * double(b.size()) / double(a.size() + b.size());
    return {D, kolmogorov_survival(std::sqrt(ne) * D), a.size() + b.size()};
}

double median(std::vector<double> xs)
{
    if (xs.empty()) throw std::invalid_argument("median of empty sample");
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + std::ptrdiff_t(mid), xs.end());
    const double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    const double lo = *std::max_element(xs.begin(), xs.begin() + std::ptrdiff_t(mid));
    return 0.5 * (lo + hi);
}

double mean(const std::vector<double>& xs)
{
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    // Pairwise summation keeps long reductions order-stable and accurate.
    std::function<double(std::size_t, std::size_t)> sum = [&](std::size_t a, std::size_t b) -> double {
        if (b - a <= 8) {
            double s = 0.0;
            for (std::size_t i = a; i < b; ++i) s += xs[i];
            return s;
        }
        const std::size_t m = a + (b - a) / 2;
        return sum(a, m) + sum(m, b);
    };
    return sum(0, xs.size()) / double(xs.size());
}

}  // namespace fkrwrc
