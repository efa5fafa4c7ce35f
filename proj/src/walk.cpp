#include "fkrwrc/walk.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fkrwrc {

SiteKernel site_kernel(const Environment& env, const Point& x)
{
    const auto& cfg = env.config();
    const double K = cfg.K();
    SiteKernel k;
    k.x = x;
    k.n = cfg.directions();
    k.k_open = true;
    std::array<double, 2 * kMaxDim> w{}, wk{};
    double sum = 0.0, sum_k = 0.0;
    for (int dir = 0; dir < k.n; ++dir) {
        const double c = env.base_conductance(canonical_edge(x, cfg.step(x, dir)));
        const double tilt = std::exp(cfg.lambda() * cfg.direction_level(dir));
        w[std::size_t(dir)] = c * tilt;
        wk[std::size_t(dir)] = std::min(c, 1.0 / K) * tilt;
        sum += c * tilt;
        sum_k += std::max(c, K) * tilt;
        k.k_open = k.k_open && c >= 1.0 / K && c <= K;
    }
    for (int dir = 0; dir < k.n; ++dir) {
        k.p[std::size_t(dir)] = w[std::size_t(dir)] / sum;
        k.pk[std::size_t(dir)] = std::min(wk[std::size_t(dir)] / sum_k, k.p[std::size_t(dir)]);
    }
    return k;
}

std::vector<double> transition_distribution(const Environment& env, const Point& x)
{
    const SiteKernel k = site_kernel(env, x);
    return {k.p.begin(), k.p.begin() + k.n};
}

std::vector<double> transition_distribution_absolute(const Environment& env, const Point& x, const Point& origin)
{
    const auto& cfg = env.config();
    std::vector<double> w;
    double sum = 0.0;
    for (int dir = 0; dir < cfg.directions(); ++dir) {
        w.push_back(env.tilted_conductance(canonical_edge(x, cfg.step(x, dir)), origin));
        sum += w.back();
    }
    for (double& v : w) v /= sum;
    return w;
}

std::vector<double> enhanced_transition_distribution(const Environment& env, const EnhancedState& s)
{
    const SiteKernel k = site_kernel(env, s.x);
    std::vector<double> out;
    for (int dir = 0; dir < k.n; ++dir) {
        out.push_back(k.pk[std::size_t(dir)]);
        out.push_back(std::max(0.0, k.p[std::size_t(dir)] - k.pk[std::size_t(dir)]));
    }
    return out;
}

double ForcedUniforms::uniform(std::uint64_t counter, std::uint32_t) const
{
    if (counter >= values_.size()) throw std::out_of_range("forced uniform stream exhausted");
    return values_[counter];
}

CounterStream walk_stream(std::uint64_t master_seed, std::uint64_t env_index, std::uint64_t walk_index)
{
    return CounterStream(stream_key(master_seed, "walk", env_index, walk_index));
}

// ---------------------------------------------------------------- trajectory

Trajectory::Trajectory(const LatticeConfig& config, EnhancedState start, Point origin)
    : config_(std::make_shared<const LatticeConfig>(config)), states_{start}, origin_(origin),
      max_level_(config.level(start.x))
{
}

void Trajectory::push(const EnhancedState& s)
{
    if (l1_distance(states_.back().x, s.x, config_->d()) != 1)
        throw std::invalid_argument("trajectory states must be nearest neighbours");
    if (s.z != 0 && s.z != 1) throw std::invalid_argument("enhanced bit must be 0 or 1");
    states_.push_back(s);
    max_level_ = std::max(max_level_, config_->level(s.x));
}

double Trajectory::recomputed_max_level() const
{
    double m = -INFINITY;
    for (const auto& s : states_) m = std::max(m, config_->level(s.x));
    return m;
}

int sample_enhanced_index(const SiteKernel& k, double U)
{
    double cum = 0.0;
    int last = 0;
    for (int dir = 0; dir < k.n; ++dir) {
        const double m1 = k.pk[std::size_t(dir)];
        const double m0 = k.p[std::size_t(dir)] - m1;
        if (m1 > 0.0) {
            cum += m1;
            last = 2 * dir;
            if (U <= cum) return 2 * dir;
        }
        if (m0 > 0.0) {
            cum += m0;
            last = 2 * dir + 1;
            if (U <= cum) return 2 * dir + 1;
        }
    }
    return last;
}

void step(const Environment& env, Trajectory& traj, const UniformSource& source)
{
    const SiteKernel k = site_kernel(env, traj.back().x);
    const int idx = sample_enhanced_index(k, source.uniform(traj.step_count(), 0));
    traj.push({env.config().step(traj.back().x, idx / 2), idx % 2 == 0 ? 1 : 0});
}

RunOutcome run_until(Trajectory& traj, const StopPredicate& stop, std::uint64_t max_steps, const StepFunction& advance)
{
    if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
    for (std::uint64_t taken = 0;; ++taken) {
        if (stop(traj)) return {RunStatus::hit, traj.step_count()};
        if (taken == max_steps) return {RunStatus::truncated, traj.step_count()};
        advance(traj);
    }
}

RunOutcome run_until(const Environment& env, Trajectory& traj, const StopPredicate& stop, std::uint64_t max_steps,
                     const UniformSource& source)
{
    return run_until(traj, stop, max_steps, [&](Trajectory& t) { step(env, t, source); });
}

StopPredicate level_at_least(double R)
{
    return [R](const Trajectory& t) { return t.config().level(t.back().x) >= R; };
}

void write_trajectory(std::ostream& os, const Trajectory& traj)
{
    const int d = traj.config().d();
    os << "d " << d << " origin";
    for (int i = 0; i < d; ++i) os << ' ' << traj.origin()[i];
    os << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        os << k;
        for (int i = 0; i < d; ++i) os << ' ' << traj[k].x[i];
        os << ' ' << traj[k].z << '\n';
    }
}

Trajectory read_trajectory(std::istream& is, const LatticeConfig& config)
{
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("trajectory: missing header");
    std::istringstream hs(line);
    std::string tag;
    int d = 0;
    hs >> tag >> d;
    if (tag != "d" || d != config.d()) throw std::runtime_error("trajectory: header dimension does not match config");
    hs >> tag;
    if (tag != "origin") throw std::runtime_error("trajectory: header lacks origin");
    Point origin;
    for (int i = 0; i < d; ++i)
        if (!(hs >> origin[i])) throw std::runtime_error("trajectory: bad origin");

    Trajectory traj;
    std::size_t expected = 0;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t k = 0;
        EnhancedState s;
        if (!(ls >> k)) throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": bad index");
        for (int i = 0; i < d; ++i)
            if (!(ls >> s.x[i])) throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": bad coordinate");
        if (!(ls >> s.z)) throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": bad bit");
        if (k != expected) throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": index out of order");
        if (expected == 0)
            traj = Trajectory(config, s, origin);
        else
            traj.push(s);
        ++expected;
    }
    if (expected == 0) throw std::runtime_error("trajectory: no states");
    return traj;
}

// ---------------------------------------------------------------- walker

Walker::Walker(const Environment& env, CounterStream stream, Point start, WalkerOptions options)
    : env_(&env), stream_(stream), options_(options), pos_(start), prev_(start)
{
    std::size_t n = 1;
    while (n < std::max<std::size_t>(env.cache_policy().site_cache_entries, 16)) n <<= 1;
    cache_.resize(n);
    cache_valid_.assign(n, 0);
    cache_mask_ = n - 1;
}

const SiteKernel& Walker::kernel(const Point& x)
{
    const std::size_t slot = PointHash{}(x)&cache_mask_;
    SiteKernel& k = cache_[slot];
    if (!cache_valid_[slot] || k.x != x) {
        k = site_kernel(*env_, x);
        cache_valid_[slot] = 1;
    }
    return k;
}

namespace {

// Number of trials up to and including the first failure when each trial fails with probability q.
std::uint64_t geometric_trials(double U, double log_success)
{
    if (log_success == -INFINITY) return 1;
    if (!(log_success < 0.0)) return kNever / 2;
    const double m = std::floor(std::log(U) / log_success);
    if (!(m < 9.0e18)) return kNever / 2;
    return std::uint64_t(m) + 1;
}

}  // namespace

Move Walker::next(std::uint64_t time_cap)
{
    if (time_ >= time_cap) throw std::logic_error("walker time cap already reached");
    ++moves_;
    const auto& cfg = env_->config();
    const std::uint64_t counter = time_;
    Move mv;

    if (!pending_exit_ && prev_dir_ >= 0 && options_.compress_threshold <= 1.0) {
        const int back = LatticeConfig::opposite(prev_dir_);
        const SiteKernel kb = kernel(pos_);
        const SiteKernel& ka = kernel(prev_);
        const double q1 = kb.p[std::size_t(back)];
        const double q2 = ka.p[std::size_t(prev_dir_)];
        if (q1 * q2 >= options_.compress_threshold) {
            double leave_b = 0.0, leave_a = 0.0;
            for (int dir = 0; dir < kb.n; ++dir)
                if (dir != back) leave_b += kb.p[std::size_t(dir)];
            for (int dir = 0; dir < ka.n; ++dir)
                if (dir != prev_dir_) leave_a += ka.p[std::size_t(dir)];
            const double leave = leave_b + q1 * leave_a;
            const double log_stay = std::log1p(-leave);
            const std::uint64_t rounds = geometric_trials(stream_.uniform(counter, 1), log_stay) - 1;
            const bool exit_from_b = stream_.uniform(counter, 2) * leave <= leave_b;
            std::uint64_t count = 2 * rounds + (exit_from_b ? 0 : 1);
            bool truncated = false;
            if (time_cap - time_ <= count) {
                count = time_cap - time_;
                truncated = true;
            }
            mv.kind = Move::Kind::bounce;
            mv.from = pos_;
            mv.to = prev_;
            mv.time = time_;
            mv.count = count;
            const std::uint64_t from_b = (count + 1) / 2;
            const std::uint64_t from_a = count / 2;
            const double rb = kb.pk[std::size_t(back)] / q1;
            const double ra = ka.pk[std::size_t(prev_dir_)] / q2;
            if (from_b > 0) {
                const std::uint64_t g = geometric_trials(stream_.uniform(counter, 3), std::log(rb));
                if (g <= from_b) mv.zero_from_b = time_ + 1 + 2 * (g - 1);
            }
            if (from_a > 0) {
                const std::uint64_t g = geometric_trials(stream_.uniform(counter, 4), std::log(ra));
                if (g <= from_a) mv.zero_from_a = time_ + 2 + 2 * (g - 1);
            }
            if (count % 2 == 1) {
                std::swap(pos_, prev_);
                prev_dir_ = back;
            }
            time_ += count;
            if (!truncated) {
                pending_exit_ = true;
                exclude_dir_ = LatticeConfig::opposite(prev_dir_);
            }
            return mv;
        }
    }

    const SiteKernel& k = kernel(pos_);
    double U = stream_.uniform(counter, 0);
    int idx;
    if (pending_exit_) {
        const double excluded = k.p[std::size_t(exclude_dir_)];
        double target = U * (1.0 - excluded);
        double cum = 0.0;
        idx = -1;
        int last = 0;
        for (int dir = 0; dir < k.n && idx < 0; ++dir) {
            if (dir == exclude_dir_) continue;
            const double m1 = k.pk[std::size_t(dir)];
            const double m0 = k.p[std::size_t(dir)] - m1;
            if (m1 > 0.0) {
                cum += m1;
                last = 2 * dir;
                if (target <= cum) idx = 2 * dir;
            }
            if (idx < 0 && m0 > 0.0) {
                cum += m0;
                last = 2 * dir + 1;
                if (target <= cum) idx = 2 * dir + 1;
            }
        }
        if (idx < 0) idx = last;
        pending_exit_ = false;
    } else {
        idx = sample_enhanced_index(k, U);
    }
    mv.kind = Move::Kind::step;
    mv.from = pos_;
    mv.dir = idx / 2;
    mv.to = cfg.step(pos_, mv.dir);
    mv.z = idx % 2 == 0 ? 1 : 0;
    mv.time = time_ + 1;
    prev_ = pos_;
    prev_dir_ = mv.dir;
    pos_ = mv.to;
    ++time_;
    return mv;
}

}  // namespace fkrwrc
