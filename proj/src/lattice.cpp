#include "fkrwrc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "fkrwrc/rng.hpp"

namespace fkrwrc {

Point operator+(Point a, const Point& b)
{
    for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
    return a;
}

Point operator-(Point a, const Point& b)
{
    for (int i = 0; i < kMaxDim; ++i) a[i] -= b[i];
    return a;
}

Point unit_point(int axis, int sign)
{
    Point p;
    p[axis] = Coord(sign);
    return p;
}

Point make_point(std::initializer_list<Coord> coords)
{
    if (coords.size() > std::size_t(kMaxDim)) throw std::invalid_argument("too many coordinates");
    Point p;
    std::copy(coords.begin(), coords.end(), p.c.begin());
    return p;
}

int l1_distance(const Point& a, const Point& b, int d)
{
    int s = 0;
    for (int i = 0; i < d; ++i) s += std::abs(a[i] - b[i]);
    return s;
}

std::string to_string(const Point& x, int d)
{
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < d; ++i) os << (i ? "," : "") << x[i];
    os << ')';
    return os.str();
}

std::size_t PointHash::operator()(const Point& x) const noexcept
{
    std::uint64_t h = 0x8A5CD789635D2DFFull;
    for (int i = 0; i < kMaxDim; i += 2) {
        const std::uint64_t w = std::uint64_t(std::uint32_t(x[i])) | (std::uint64_t(std::uint32_t(x[i + 1])) << 32);
        h = splitmix64(h ^ w);
    }
    return std::size_t(h);
}

// ---------------------------------------------------------------- config

LatticeConfig LatticeConfig::make(int d, double lambda, const std::vector<double>& ell, double alpha, double K)
{
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("d must lie in [1, " + std::to_string(kMaxDim) + "]");
    if (int(ell.size()) != d) throw std::invalid_argument("ell must have d components");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be a finite nonnegative real");
    if (!(K >= 1.0) || !std::isfinite(K)) throw std::invalid_argument("K must satisfy K >= 1");
    if (!(alpha > d + 3.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must satisfy alpha > d + 3");
    double norm2 = 0.0;
    for (double v : ell) norm2 += v * v;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-12) throw std::invalid_argument("ell must be a unit vector");

    LatticeConfig c;
    c.d_ = d;
    c.lambda_ = lambda;
    c.alpha_ = alpha;
    c.K_ = K;
    std::copy(ell.begin(), ell.end(), c.ell_.begin());
    c.ell_is_e1_ = ell[0] == 1.0;
    for (int i = 1; i < d; ++i) c.ell_is_e1_ = c.ell_is_e1_ && ell[std::size_t(i)] == 0.0;

    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(ell[std::size_t(a)]) > std::abs(ell[std::size_t(b)]); });
    for (int k = 0; k < d; ++k) {
        const int a = order[std::size_t(k)];
        c.basis_[std::size_t(k)] = {a, ell[std::size_t(a)] < 0.0 ? -1 : 1};
    }
    for (int dir = 0; dir < 2 * d; ++dir) {
        const SignedAxis b = c.basis_[std::size_t(dir / 2)];
        const int s = (dir % 2 == 0) ? b.sign : -b.sign;
        c.dir_level_[std::size_t(dir)] = s * ell[std::size_t(b.axis)];
    }

    // Gram-Schmidt on ℓ followed by e_2, ..., e_d.
    c.frame_[0] = c.ell_;
    for (int k = 1; k < d; ++k) {
        std::array<double, kMaxDim> v{};
        v[std::size_t(c.basis_[std::size_t(k)].axis)] = 1.0;
        for (int j = 0; j < k; ++j) {
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += v[std::size_t(i)] * c.frame_[std::size_t(j)][std::size_t(i)];
            for (int i = 0; i < d; ++i) v[std::size_t(i)] -= dot * c.frame_[std::size_t(j)][std::size_t(i)];
        }
        double n2 = 0.0;
        for (int i = 0; i < d; ++i) n2 += v[std::size_t(i)] * v[std::size_t(i)];
        const double n = std::sqrt(n2);
        for (int i = 0; i < d; ++i) v[std::size_t(i)] /= n;
        c.frame_[std::size_t(k)] = v;
    }
    return c;
}

LatticeConfig LatticeConfig::defaults(int d)
{
    std::vector<double> ell(std::size_t(d), 0.0);
    ell[0] = 1.0;
    return make(d, 1.0, ell, d + 4.0, 20.0);
}

double LatticeConfig::level(const Point& x) const
{
    if (ell_is_e1_) return double(x[0]);
    double s = 0.0;
    for (int i = 0; i < d_; ++i) s += ell_[std::size_t(i)] * x[i];
    return s;
}

double LatticeConfig::project(const Point& x, int k) const
{
    const auto& f = frame_[std::size_t(k)];
    double s = 0.0;
    for (int i = 0; i < d_; ++i) s += f[std::size_t(i)] * x[i];
    return s;
}

Point LatticeConfig::direction(int dir) const
{
    const SignedAxis b = basis_[std::size_t(dir / 2)];
    return unit_point(b.axis, (dir % 2 == 0) ? b.sign : -b.sign);
}

Point LatticeConfig::step(Point x, int dir) const
{
    const SignedAxis b = basis_[std::size_t(dir / 2)];
    x[b.axis] += Coord((dir % 2 == 0) ? b.sign : -b.sign);
    return x;
}

int LatticeConfig::direction_to(const Point& x, const Point& y) const
{
    for (int dir = 0; dir < 2 * d_; ++dir)
        if (step(x, dir) == y) return dir;
    return -1;
}

// ---------------------------------------------------------------- edges

Edge canonical_edge(const Point& x, const Point& y)
{
    int axis = -1;
    int diff = 0;
    for (int i = 0; i < kMaxDim; ++i) {
        const int dx = y[i] - x[i];
        if (dx == 0) continue;
        if (axis >= 0 || std::abs(dx) != 1) throw std::invalid_argument("edge endpoints are not nearest neighbours");
        axis = i;
        diff = dx;
    }
    if (axis < 0) throw std::invalid_argument("edge endpoints coincide");
    Edge e;
    e.axis = axis;
    e.x = diff > 0 ? x : y;
    e.y = diff > 0 ? y : x;
    return e;
}

std::size_t EdgeHash::operator()(const Edge& e) const noexcept
{
    return std::size_t(splitmix64(PointHash{}(e.x) ^ std::uint64_t(e.axis)));
}

// ---------------------------------------------------------------- law

std::string to_string(LawFamily f) { return f == LawFamily::pareto ? "pareto" : "pareto_log"; }

LawFamily parse_law_family(const std::string& s)
{
    if (s == "pareto") return LawFamily::pareto;
    if (s == "pareto_log") return LawFamily::pareto_log;
    throw std::invalid_argument("unknown law family '" + s + "' (expected pareto or pareto_log)");
}

ConductanceLaw::ConductanceLaw(double gamma, LawFamily family) : gamma_(gamma), family_(family)
{
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
    if (family_ == LawFamily::pareto_log) {
        // (1 + log u)u^{-γ} exceeds 1 just above u = 1; the law starts where it comes back to 1.
        double lo = std::exp(1.0 / gamma_ - 1.0);
        double hi = lo;
        while ((1.0 + std::log(hi)) * std::pow(hi, -gamma_) >= 1.0) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((1.0 + std::log(mid)) * std::pow(mid, -gamma_) >= 1.0)
                lo = mid;
            else
                hi = mid;
        }
        support_min_ = hi;
    }
}

double ConductanceLaw::slowly_varying(double u) const
{
    return family_ == LawFamily::pareto ? 1.0 : 1.0 + std::log(std::max(u, 1.0));
}

double ConductanceLaw::survival(double u) const
{
    if (u <= support_min_) return 1.0;
    return std::min(1.0, slowly_varying(u) * std::pow(u, -gamma_));
}

double ConductanceLaw::solve_survival(double target) const
{
    // Solve log(1 + t) − γt = log(target) for t = log u ≥ log(support_min).
    const double goal = std::log(target);
    auto g = [&](double t) { return std::log1p(t) - gamma_ * t - goal; };
    double lo = std::log(support_min_);
    if (g(lo) <= 0.0) return support_min_;
    double hi = lo + 1.0;
    while (g(hi) > 0.0) hi = lo + 2.0 * (hi - lo);
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double v = g(t);
        if (v > 0.0)
            lo = t;
        else
            hi = t;
        const double slope = 1.0 / (1.0 + t) - gamma_;
        double next = t - v / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t))) {
            t = next;
            break;
        }
        t = next;
    }
    return std::exp(t);
}

double ConductanceLaw::quantile_upper(double U) const
{
    if (family_ == LawFamily::pareto) {
        if (gamma_ == 0.5) return 1.0 / (U * U);
        return std::pow(U, -1.0 / gamma_);
    }
    return solve_survival(U);
}

double ConductanceLaw::inv_tail(double n) const
{
    if (!(n >= 1.0)) throw std::domain_error("inv_tail requires n >= 1");
    if (family_ == LawFamily::pareto) return std::pow(n, 1.0 / gamma_);
    return solve_survival(1.0 / n);
}

double ConductanceLaw::normal_probability(double K) const
{
    // The support lies in [1, ∞), so only the upper clamp matters.
    return 1.0 - survival(std::nextafter(K, INFINITY));
}

// ---------------------------------------------------------------- environment

Environment::Environment(LatticeConfig config, ConductanceLaw law, std::uint64_t seed)
    : config_(std::move(config)), law_(law), seed_(seed), edge_key_(stream_key(seed, "edge"))
{
}

double Environment::sampled_conductance(const Edge& e) const
{
    std::uint64_t h1 = 0x243F6A8885A308D3ull ^ std::uint64_t(e.axis);
    std::uint64_t h2 = 0x13198A2E03707344ull + std::uint64_t(e.axis);
    for (int i = 0; i < kMaxDim; ++i) {
        const auto v = std::uint64_t(std::uint32_t(e.x[i]));
        h1 = splitmix64(h1 ^ v);
        h2 = splitmix64(h2 + (v << 1) + 0x9E37ull);
    }
    const auto out = philox4x32({std::uint32_t(h1), std::uint32_t(h1 >> 32), std::uint32_t(h2), std::uint32_t(h2 >> 32)},
                                {std::uint32_t(edge_key_), std::uint32_t(edge_key_ >> 32)});
    const double U = bits_to_unit(std::uint64_t(out[1]) << 32 | out[0]);
    return law_.quantile_upper(U);
}

double Environment::base_conductance(const Edge& e) const
{
    if (!overrides_.empty()) {
        const auto it = overrides_.find(e);
        if (it != overrides_.end()) return it->second;
    }
    if (uniform_) return *uniform_;
    return sampled_conductance(e);
}

double Environment::tilted_conductance(const Edge& e) const { return tilted_conductance(e, Point{}); }

double Environment::tilted_conductance(const Edge& e, const Point& origin) const
{
    const double exponent = config_.lambda() * (config_.level(e.x - origin) + config_.level(e.y - origin));
    if (std::abs(exponent) > max_tilt_exponent_)
        throw std::range_error("tilt exponent " + std::to_string(exponent) + " exceeds the configured bound; recenter");
    return base_conductance(e) * std::exp(exponent);
}

void Environment::set_override(const Edge& e, double value)
{
    if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument("override conductance must be positive");
    overrides_[e] = value;
}

void Environment::set_uniform(double value)
{
    if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument("uniform conductance must be positive");
    uniform_ = value;
}

std::uint64_t environment_seed(std::uint64_t master_seed, std::uint64_t env_index)
{
    return stream_key(master_seed, "env", env_index);
}

// ---------------------------------------------------------------- K-open structure

bool is_k_normal(const Environment& env, const Edge& e)
{
    const double c = env.base_conductance(e);
    const double K = env.config().K();
    return c >= 1.0 / K && c <= K;
}

bool is_k_open(const Environment& env, const Point& x)
{
    const auto& cfg = env.config();
    for (int i = 0; i < cfg.d(); ++i) {
        if (!is_k_normal(env, canonical_edge(x, x + unit_point(i)))) return false;
        if (!is_k_normal(env, canonical_edge(x, x - unit_point(i)))) return false;
    }
    return true;
}

bool is_k_good(const Environment& env, const Point& x, int depth)
{
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    const auto& cfg = env.config();
    if (!is_k_open(env, x)) return false;
    std::unordered_map<Point, bool, PointHash> open_cache;
    auto open = [&](const Point& p) {
        const auto it = open_cache.find(p);
        if (it != open_cache.end()) return it->second;
        const bool v = is_k_open(env, p);
        open_cache.emplace(p, v);
        return v;
    };
    std::unordered_set<Point, PointHash> frontier{x};
    for (int s = 0; s < depth && !frontier.empty(); ++s) {
        std::unordered_set<Point, PointHash> next;
        for (const Point& p : frontier) {
            if (s % 2 == 0) {
                const Point q = cfg.step(p, 0);
                if (open(q)) next.insert(q);
            } else {
                for (int k = 0; k < cfg.d(); ++k) {
                    const Point q = cfg.step(p, 2 * k);
                    if (open(q)) next.insert(q);
                }
            }
        }
        frontier.swap(next);
    }
    return !frontier.empty();
}

Environment omega_k_view(const Environment& env, const Point& x1, const Point& x2)
{
    Environment view = env;
    const double K = env.config().K();
    for (const Edge& e : incident_edges(env.config(), x1)) view.set_override(e, K);
    for (const Edge& e : incident_edges(env.config(), x2)) view.set_override(e, K);
    return view;
}

// ---------------------------------------------------------------- geometry

double level(const LatticeConfig& config, const Point& x) { return config.level(x); }

std::vector<Point> neighborhood(const LatticeConfig& config, const Point& x)
{
    std::vector<Point> out{x};
    for (int i = 0; i < config.d(); ++i) {
        out.push_back(x + unit_point(i));
        out.push_back(x - unit_point(i));
    }
    return out;
}

std::vector<Edge> incident_edges(const LatticeConfig& config, const Point& x)
{
    std::vector<Edge> out;
    for (int i = 0; i < config.d(); ++i) {
        out.push_back(canonical_edge(x, x + unit_point(i)));
        out.push_back(canonical_edge(x, x - unit_point(i)));
    }
    return out;
}

bool in_box(const LatticeConfig& config, const Point& y, double L, double Lp, const Point& x)
{
    const Point diff = x - y;
    if (std::abs(config.project(diff, 0)) > L) return false;
    for (int k = 1; k < config.d(); ++k)
        if (std::abs(config.project(diff, k)) > Lp) return false;
    return true;
}

}  // namespace fkrwrc
