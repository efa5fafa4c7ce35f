#include "fkrwrc/joint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "fkrwrc/parallel.hpp"

namespace fkrwrc {

namespace {

void require_e1(const LatticeConfig& config)
{
    if (!config.ell_is_e1()) throw std::invalid_argument("joint quantities require ell = e_1");
}

long int_level(const LatticeConfig& config, const Point& x) { return long(config.level(x)); }

// First-entry times of every level reached by a stored trajectory, from the start level up.
std::vector<std::size_t> first_entries(const Trajectory& traj, long& start_level)
{
    const auto& cfg = traj.config();
    start_level = int_level(cfg, traj.start().x);
    std::vector<std::size_t> T{0};
    for (std::size_t n = 1; n < traj.size(); ++n) {
        const long lev = int_level(cfg, traj[n].x);
        if (lev > start_level + long(T.size()) - 1) T.push_back(n);
    }
    return T;
}

}  // namespace

void require_start_in_U(const LatticeConfig& config, const Point& U)
{
    if (!(std::abs(config.level(U)) < config.direction_level(0)))
        throw std::invalid_argument("joint start " + to_string(U, config.d()) + " lies outside U = {|U.l| < e_1.l}");
}

std::vector<long> ladder_entry_levels(const Trajectory& traj, const std::function<bool(const Point&)>& k_open)
{
    require_e1(traj.config());
    long s = 0;
    const auto T = first_entries(traj, s);
    std::vector<long> out;
    for (std::size_t j = 2; j < T.size(); ++j)
        if (T[j] == T[j - 1] + 1 && T[j - 1] == T[j - 2] + 1 && k_open(traj[T[j]].x)) out.push_back(s + long(j));
    return out;
}

LadderLevel joint_ladder_level(const JointTrajectory& joint, long start_level)
{
    std::array<std::vector<long>, 2> G;
    for (int i = 0; i < 2; ++i) {
        const Environment& env = joint.env(i);
        G[std::size_t(i)] = ladder_entry_levels(joint.traj(i), [&](const Point& x) { return is_k_open(env, x); });
    }
    for (long R : G[0])
        if (R > start_level && std::binary_search(G[1].begin(), G[1].end(), R)) return {R, false};
    return {std::nullopt, true};
}

JointDefect joint_defect(const JointTrajectory& joint, std::array<std::size_t, 2> from, double horizon_R)
{
    const auto& cfg = joint.traj1.config();
    require_e1(cfg);
    const int d = cfg.d();
    const Point e1 = cfg.direction(0);
    const std::array<Point, 2> x0{joint.traj1[from[0]].x, joint.traj2[from[1]].x};
    JointDefect out;
    for (int i = 0; i < 2; ++i) {
        const Trajectory& t = joint.traj(i);
        const std::size_t base = from[std::size_t(i)];
        const double l0 = cfg.level(t[base].x);
        WalkDefect& w = out.walk[std::size_t(i)];
        double running = l0;
        for (std::size_t n = 1; base + n < t.size(); ++n) {
            const Point& x = t[base + n].x;
            if (cfg.level(x) > horizon_R) break;
            running = std::max(running, cfg.level(x));
            if (!w.back && cfg.level(x) <= l0) w.back = n;
            if (!w.ori) {
                const Point& prev = t[base + n - 1].x;
                const bool near_start = l1_distance(prev, x0[0], d) <= 1 || l1_distance(prev, x0[1], d) <= 1;
                const bool below = l1_distance(x, x0[0] - e1, d) <= 1 || l1_distance(x, x0[1] - e1, d) <= 1;
                if ((near_start && t[base + n].z == 0) || below) w.ori = n;
            }
            if (w.back || w.ori) {
                w.D = n;
                w.M = running;
                break;
            }
        }
        if (w.M && (!out.M || *w.M < *out.M)) out.M = w.M;
    }
    return out;
}

std::vector<JointRegenRecord> joint_regeneration_levels_bruteforce(const JointTrajectory& joint,
                                                                   std::size_t target_count, double delta)
{
    const auto& cfg = joint.traj1.config();
    require_e1(cfg);
    const long dl = long(std::ceil(delta));
    std::array<std::vector<long>, 2> G;
    std::array<std::vector<std::size_t>, 2> T;
    std::array<long, 2> s{};
    for (int i = 0; i < 2; ++i) {
        const Environment& env = joint.env(i);
        G[std::size_t(i)] = ladder_entry_levels(joint.traj(i), [&](const Point& x) { return is_k_open(env, x); });
        T[std::size_t(i)] = first_entries(joint.traj(i), s[std::size_t(i)]);
    }
    auto reached = [&](int i, long R) { return R - s[std::size_t(i)] < long(T[std::size_t(i)].size()); };
    auto hit = [&](int i, long R) { return T[std::size_t(i)][std::size_t(R - s[std::size_t(i)])]; };

    std::vector<JointRegenRecord> out;
    long threshold = std::max(s[0], s[1]) + 1;
    while (out.size() < target_count) {
        std::optional<long> L;
        for (long R : G[0])
            if (R >= threshold && std::binary_search(G[1].begin(), G[1].end(), R)) {
                L = R;
                break;
            }
        if (!L) break;
        if (!reached(0, *L + dl) || !reached(1, *L + dl)) break;
        const JointDefect D = joint_defect(joint, {hit(0, *L), hit(1, *L)}, double(*L + dl - 1));
        if (!D.M) {
            JointRegenRecord r;
            r.k = out.size() + 1;
            r.level = *L;
            r.confirmed = true;
            for (int i = 0; i < 2; ++i) {
                r.hit_time[std::size_t(i)] = hit(i, *L);
                r.point[std::size_t(i)] = joint.traj(i)[hit(i, *L)].x;
            }
            out.push_back(r);
            threshold = *L + 2;
        } else {
            threshold = long(*D.M) + 3;
        }
    }
    return out;
}

// ---------------------------------------------------------------- streaming iteration

namespace {

struct LevelInfo {
    std::uint64_t T = 0;
    Point P;
    bool ladder = false;
    std::uint64_t back = kNever;
};

class WalkLevels {
  public:
    WalkLevels(const LatticeConfig& config, std::function<bool(const Point&)> k_open)
        : cfg_(&config), k_open_(std::move(k_open))
    {
    }

    void start(const Point& x0)
    {
        start_level_ = base_ = rmax_ = int_level(*cfg_, x0);
        levels_.clear();
        levels_.push_back({0, x0, false, kNever});
        unbacked_ = {rmax_};
        z0_.clear();
        time_ = 0;
    }

    void on_move(const Move& mv)
    {
        if (mv.kind == Move::Kind::step) {
            if (mv.z == 0) z0_.try_emplace(mv.from, mv.time);
            const long lev = int_level(*cfg_, mv.to);
            descend(lev, mv.time);
            if (lev > rmax_) {
                bool ladder = false;
                if (lev - 2 >= start_level_ && lev - 2 >= base_) {
                    const LevelInfo& l1 = at(lev - 1);
                    const LevelInfo& l2 = at(lev - 2);
                    ladder = l1.T + 1 == mv.time && l2.T + 2 == mv.time && k_open_(mv.to);
                }
                levels_.push_back({mv.time, mv.to, ladder, kNever});
                unbacked_.push_back(lev);
                rmax_ = lev;
            }
            time_ = mv.time;
        } else {
            if (mv.count >= 1) {
                if (mv.zero_from_b != kNever) z0_.try_emplace(mv.from, mv.zero_from_b);
                if (mv.zero_from_a != kNever) z0_.try_emplace(mv.to, mv.zero_from_a);
                descend(int_level(*cfg_, mv.to), mv.time + 1);
                if (mv.count >= 2) descend(int_level(*cfg_, mv.from), mv.time + 2);
            }
            time_ = mv.time + mv.count;
        }
    }

    bool reached(long L) const { return L <= rmax_; }
    const LevelInfo& at(long L) const { return levels_[std::size_t(L - base_)]; }
    long rmax() const { return rmax_; }
    std::uint64_t time() const { return time_; }

    std::uint64_t first_zero(const Point& x) const
    {
        const auto it = z0_.find(x);
        return it == z0_.end() ? kNever : it->second;
    }

    long rmax_at(std::uint64_t t) const
    {
        auto it = std::upper_bound(levels_.begin(), levels_.end(), t,
                                   [](std::uint64_t v, const LevelInfo& l) { return v < l.T; });
        return base_ + long(it - levels_.begin()) - 1;
    }

    void trim(long keep_from)
    {
        while (base_ < keep_from - 3 && levels_.size() > 1) {
            levels_.pop_front();
            ++base_;
        }
        if (z0_.size() > 4096 + 4 * z0_trim_mark_) {
            for (auto it = z0_.begin(); it != z0_.end();)
                it = int_level(*cfg_, it->first) < base_ ? z0_.erase(it) : std::next(it);
            z0_trim_mark_ = z0_.size();
        }
    }

  private:
    void descend(long lev, std::uint64_t n)
    {
        while (!unbacked_.empty() && unbacked_.back() >= lev) {
            const long L = unbacked_.back();
            if (L >= base_) levels_[std::size_t(L - base_)].back = n;
            unbacked_.pop_back();
        }
    }

    const LatticeConfig* cfg_;
    std::function<bool(const Point&)> k_open_;
    long start_level_ = 0;
    long base_ = 0;
    long rmax_ = 0;
    std::deque<LevelInfo> levels_;
    std::vector<long> unbacked_;
    std::unordered_map<Point, std::uint64_t, PointHash> z0_;
    std::size_t z0_trim_mark_ = 0;
    std::uint64_t time_ = 0;
};

enum class WalkStatus { triggered, open, undetermined };

struct WalkEval {
    WalkStatus status = WalkStatus::undetermined;
    long M = 0;
};

WalkEval evaluate(const std::array<WalkLevels*, 2>& w, int i, long L, long dl, const Point& e1)
{
    const WalkLevels& me = *w[std::size_t(i)];
    const WalkLevels& other = *w[std::size_t(1 - i)];
    const LevelInfo& info = me.at(L);
    const Point& Pj = other.at(L).P;
    std::uint64_t t = info.back;
    t = std::min(t, me.first_zero(info.P));
    t = std::min(t, me.first_zero(info.P + e1));
    t = std::min(t, me.first_zero(Pj + e1));
    const std::uint64_t reach = me.reached(L + dl) ? me.at(L + dl).T : kNever;
    if (t != kNever && t < reach) return {WalkStatus::triggered, me.rmax_at(t)};
    if (reach != kNever) return {WalkStatus::open, 0};
    return {WalkStatus::undetermined, 0};
}

}  // namespace

JointRegenResult joint_regeneration_levels(const LatticeConfig& config,
                                           std::array<std::function<bool(const Point&)>, 2> k_open,
                                           std::array<MoveSource, 2> sources, std::array<Point, 2> starts,
                                           JointStop stop, double delta, JointBudget budget)
{
    require_e1(config);
    if (stop.target_count < 1) throw std::invalid_argument("target_count must be >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("confirmation margin must be positive");
    for (const Point& U : starts) require_start_in_U(config, U);
    const long dl = long(std::ceil(delta));
    const Point e1 = config.direction(0);

    WalkLevels w0(config, k_open[0]), w1(config, k_open[1]);
    std::array<WalkLevels*, 2> w{&w0, &w1};
    w0.start(starts[0]);
    w1.start(starts[1]);

    JointRegenResult res;
    long threshold = std::max(w0.rmax(), w1.rmax()) + 1;
    long search = threshold;
    long current = 0;
    bool has_current = false;
    struct Watched {
        long L;
        std::array<Point, 2> P;
    };
    std::deque<Watched> watch;

    auto check_watch = [&](const Watched& c) {
        for (int i = 0; i < 2; ++i) {
            const WalkLevels& me = *w[std::size_t(i)];
            const LevelInfo& info = me.at(c.L);
            if (info.back != kNever || me.first_zero(info.P) != kNever || me.first_zero(info.P + e1) != kNever ||
                me.first_zero(c.P[std::size_t(1 - i)] + e1) != kNever)
                return true;
        }
        return false;
    };

    auto advance = [&](int i) {
        if (res.moves[std::size_t(i)] >= budget.max_moves || w[std::size_t(i)]->time() >= budget.max_steps) return false;
        const auto mv = sources[std::size_t(i)]();
        if (!mv) return false;
        ++res.moves[std::size_t(i)];
        w[std::size_t(i)]->on_move(*mv);
        return true;
    };

    auto lower = [&] { return w1.rmax() < w0.rmax() ? 1 : 0; };

    while (res.records.size() < stop.target_count) {
        if (!has_current && stop.decide_below > 0 && res.records.empty() && search >= stop.decide_below) break;
        if (!has_current) {
            const long top = std::min(w0.rmax(), w1.rmax());
            while (search <= top && !(w0.at(search).ladder && w1.at(search).ladder)) ++search;
            if (search <= top) {
                current = search;
                has_current = true;
                ++res.candidates;
                continue;
            }
            if (!advance(lower())) {
                res.truncated = true;
                break;
            }
            continue;
        }
        const long L = current;
        const WalkEval a = evaluate(w, 0, L, dl, e1);
        const WalkEval b = evaluate(w, 1, L, dl, e1);
        if (a.status == WalkStatus::open && b.status == WalkStatus::open) {
            JointRegenRecord r;
            r.k = res.records.size() + 1;
            r.level = L;
            r.confirmed = true;
            for (int i = 0; i < 2; ++i) {
                r.hit_time[std::size_t(i)] = w[std::size_t(i)]->at(L).T;
                r.point[std::size_t(i)] = w[std::size_t(i)]->at(L).P;
            }
            res.records.push_back(r);
            watch.push_back({L, r.point});
            threshold = search = L + 2;
            has_current = false;
        } else {
            long M = std::numeric_limits<long>::max();
            if (a.status == WalkStatus::triggered) M = std::min(M, a.M);
            if (b.status == WalkStatus::triggered) M = std::min(M, b.M);
            bool decided = M != std::numeric_limits<long>::max();
            int need = -1;
            const std::array<WalkEval, 2> ev{a, b};
            for (int i = 0; i < 2; ++i) {
                if (ev[std::size_t(i)].status != WalkStatus::undetermined) continue;
                if (!decided || w[std::size_t(i)]->rmax() < M) {
                    decided = false;
                    if (need < 0 || w[std::size_t(i)]->rmax() < w[std::size_t(need)]->rmax()) need = i;
                }
            }
            if (decided) {
                ++res.failures;
                threshold = search = M + 3;
                has_current = false;
            } else if (!advance(need)) {
                res.truncated = true;
                break;
            }
        }
        while (!watch.empty() && std::min(w0.rmax(), w1.rmax()) > watch.front().L + 4 * dl) {
            if (check_watch(watch.front())) ++res.violations;
            watch.pop_front();
        }
        long keep = has_current ? current : threshold;
        if (!watch.empty()) keep = std::min(keep, watch.front().L);
        w0.trim(keep);
        w1.trim(keep);
    }
    for (const auto& c : watch)
        if (check_watch(c)) ++res.violations;
    res.next_threshold = has_current ? current : search;
    res.max_level = std::min(w0.rmax(), w1.rmax());
    return res;
}

JointRegenResult joint_regeneration_levels(const Environment& env, std::array<CounterStream, 2> streams,
                                           std::array<Point, 2> starts, JointStop stop, double delta,
                                           JointBudget budget, WalkerOptions options)
{
    Walker a(env, streams[0], starts[0], options);
    Walker b(env, streams[1], starts[1], options);
    const std::uint64_t cap = budget.max_steps;
    std::array<MoveSource, 2> sources{
        [&]() -> std::optional<Move> {
            if (a.time() >= cap) return std::nullopt;
            return a.next(cap);
        },
        [&]() -> std::optional<Move> {
            if (b.time() >= cap) return std::nullopt;
            return b.next(cap);
        }};
    std::array<std::function<bool(const Point&)>, 2> k_open{[&](const Point& x) { return a.kernel(x).k_open; },
                                                           [&](const Point& x) { return b.kernel(x).k_open; }};
    return joint_regeneration_levels(env.config(), k_open, sources, starts, stop, delta, budget);
}

// ---------------------------------------------------------------- separation

namespace {

void ball_offsets(int d, int radius, int axis, Point cur, int used, std::vector<std::pair<Point, int>>& out)
{
    if (axis == d) {
        out.emplace_back(cur, used);
        return;
    }
    for (int v = -(radius - used); v <= radius - used; ++v) {
        Point next = cur;
        next[axis] = v;
        ball_offsets(d, radius, axis + 1, next, used + std::abs(v), out);
    }
}

}  // namespace

Trace trace_of(const Trajectory& traj)
{
    std::unordered_set<Point, PointHash> seen;
    Trace out;
    for (const auto& s : traj.states())
        if (seen.insert(s.x).second) out.push_back(s.x);
    return out;
}

SeparationReport separation_event(const LatticeConfig& config, const Trace& trace1, const Trace& trace2,
                                  const std::vector<long>& R_grid, int distance_cap)
{
    if (distance_cap < 2) throw std::invalid_argument("distance cap must be at least 2");
    std::unordered_set<Point, PointHash> set1(trace1.begin(), trace1.end());
    std::vector<std::pair<Point, int>> offsets;
    ball_offsets(config.d(), distance_cap, 0, Point{}, 0, offsets);
    // best[r]: largest min-level over pairs at distance exactly r.
    std::vector<double> best(std::size_t(distance_cap) + 1, -INFINITY);
    for (const Point& y : trace2) {
        const double ly = config.level(y);
        for (const auto& [off, r] : offsets) {
            const Point x = y + off;
            if (!set1.count(x)) continue;
            const double v = std::min(ly, config.level(x));
            best[std::size_t(r)] = std::max(best[std::size_t(r)], v);
        }
    }
    SeparationReport rep;
    rep.R_grid = R_grid;
    rep.distance_cap = distance_cap;
    for (long R : R_grid) {
        int md = -1;
        for (int r = 0; r <= distance_cap; ++r)
            if (best[std::size_t(r)] > double(R)) {
                md = r;
                break;
            }
        rep.min_distance.push_back(md);
        rep.event.push_back(md >= 0 && md <= 2);
    }
    return rep;
}

PairTraces run_pair_traces(const Environment& env1, const Environment& env2, std::array<CounterStream, 2> streams,
                           std::array<Point, 2> starts, double horizon, std::uint64_t max_steps,
                           std::uint64_t max_moves, WalkerOptions options)
{
    PairTraces out;
    for (int i = 0; i < 2; ++i) {
        const Environment& env = i == 0 ? env1 : env2;
        Walker w(env, streams[std::size_t(i)], starts[std::size_t(i)], options);
        std::unordered_set<Point, PointHash> seen{starts[std::size_t(i)]};
        Trace trace{starts[std::size_t(i)]};
        while (env.config().level(w.position()) < horizon) {
            if (w.time() >= max_steps || w.moves() >= max_moves) {
                out.truncated = true;
                break;
            }
            const Move mv = w.next(max_steps);
            if (mv.kind == Move::Kind::step && seen.insert(mv.to).second) trace.push_back(mv.to);
        }
        out.moves[std::size_t(i)] = w.moves();
        (i == 0 ? out.trace1 : out.trace2) = std::move(trace);
    }
    return out;
}

Environment independent_environment(const Environment& env)
{
    Environment other(env.config(), env.law(), stream_key(env.seed(), "independent"));
    other.set_cache_policy(env.cache_policy());
    other.set_max_tilt_exponent(env.max_tilt_exponent());
    if (env.uniform_value()) other.set_uniform(*env.uniform_value());
    return other;
}

JointTrajectory run_pair(EnvMode mode, const Environment& env, Environment* second, const Point& U1, const Point& U2,
                         std::uint64_t steps, std::array<CounterStream, 2> streams)
{
    if (mode == EnvMode::independent && second == nullptr)
        throw std::invalid_argument("independent mode needs a second environment");
    JointTrajectory j;
    j.mode = mode;
    j.env1 = &env;
    j.env2 = mode == EnvMode::same ? &env : second;
    j.traj1 = Trajectory(env.config(), {U1, 0});
    j.traj2 = Trajectory(env.config(), {U2, 0});
    const StreamSource s1(streams[0]), s2(streams[1]);
    for (std::uint64_t n = 0; n < steps; ++n) {
        step(*j.env1, j.traj1, s1);
        step(*j.env2, j.traj2, s2);
    }
    return j;
}

// ---------------------------------------------------------------- ω_K invariance

double omega_k_pair_weight(const Environment& env, std::array<CounterStream, 2> streams, std::array<Point, 2> starts,
                           long horizon_R, OmegaFunctional f, int exit_radius, std::uint64_t max_steps,
                           WalkerOptions options, bool* truncated)
{
    const auto& cfg = env.config();
    require_e1(cfg);
    const int d = cfg.d();
    const Point e1 = cfg.direction(0);
    auto watched = [&](const Point& x) {
        return l1_distance(x, starts[0], d) <= 1 || l1_distance(x, starts[1], d) <= 1;
    };
    auto forbidden = [&](const Point& x) {
        return l1_distance(x, starts[0] - e1, d) <= 1 || l1_distance(x, starts[1] - e1, d) <= 1;
    };
    if (truncated) *truncated = false;
    double weight = 1.0;
    for (int i = 0; i < 2; ++i) {
        const Point x0 = starts[std::size_t(i)];
        const double l0 = cfg.level(x0);
        Walker w(env, streams[std::size_t(i)], x0, options);
        int exit_state = (f == OmegaFunctional::positive_exit && i == 0) ? 0 : 2;  // 0 inside, 1 positive exit
        auto check_exit = [&](const Point& x) {
            if (exit_state != 0) return;
            for (int k = 0; k < d; ++k) {
                const int off = x[k] - x0[k];
                if (std::abs(off) > exit_radius) {
                    exit_state = (k == cfg.basis(0).axis && off * cfg.basis(0).sign > 0) ? 1 : -1;
                    return;
                }
            }
        };
        while (cfg.level(w.position()) <= double(horizon_R)) {
            if (w.time() >= max_steps) {
                if (truncated) *truncated = true;
                return 0.0;
            }
            const Move mv = w.next(max_steps);
            if (mv.kind == Move::Kind::step) {
                if (watched(mv.from)) {
                    const SiteKernel& k = w.kernel(mv.from);
                    weight *= k.pk[std::size_t(mv.dir)] / k.p[std::size_t(mv.dir)];
                }
                if (cfg.level(mv.to) <= l0 || forbidden(mv.to)) return 0.0;
                check_exit(mv.to);
            } else if (mv.count >= 1) {
                const int back = cfg.direction_to(mv.from, mv.to);
                const std::uint64_t from_b = (mv.count + 1) / 2, from_a = mv.count / 2;
                if (watched(mv.from)) {
                    const SiteKernel& k = w.kernel(mv.from);
                    weight *= std::pow(k.pk[std::size_t(back)] / k.p[std::size_t(back)], double(from_b));
                }
                if (from_a > 0 && watched(mv.to)) {
                    const SiteKernel& k = w.kernel(mv.to);
                    const int fwd = LatticeConfig::opposite(back);
                    weight *= std::pow(k.pk[std::size_t(fwd)] / k.p[std::size_t(fwd)], double(from_a));
                }
                if (cfg.level(mv.to) <= l0 || forbidden(mv.to)) return 0.0;
                if (mv.count >= 2 && (cfg.level(mv.from) <= l0 || forbidden(mv.from))) return 0.0;
                check_exit(mv.to);
            }
            if (weight == 0.0) return 0.0;
        }
        if (exit_state == -1) return 0.0;
    }
    return weight;
}

OmegaKResult omega_k_invariance_test(const std::function<Environment(std::uint64_t)>& env_sampler, const Point& x1,
                                     const Point& x2, const OmegaKOptions& options)
{
    struct Sample {
        bool accepted = false;
        bool truncated = false;
        double w = 0.0;
        double wk = 0.0;
    };
    OmegaKResult res;
    std::vector<double> w, wk;
    std::uint64_t draw = 0;
    const std::size_t block = 4096;
    while (w.size() < options.n_samples) {
        if (draw >= options.max_env_draws)
            throw std::runtime_error("omega_k_invariance_test: insufficient accepted environments (" +
                                     std::to_string(w.size()) + " after " + std::to_string(draw) + " draws)");
        const std::uint64_t first = draw;
        auto samples = parallel_map(block, options.threads, [&](std::size_t j) {
            Sample s;
            const std::uint64_t idx = first + j;
            const Environment env = env_sampler(idx);
            if (!is_k_open(env, x1) || !is_k_open(env, x2)) return s;
            s.accepted = true;
            const std::array<CounterStream, 2> streams{walk_stream(options.seed, idx, 0), walk_stream(options.seed, idx, 1)};
            bool t1 = false, t2 = false;
            s.w = omega_k_pair_weight(env, streams, {x1, x2}, options.horizon_R, options.functional,
                                      options.exit_radius, options.max_steps, options.walker, &t1);
            s.wk = omega_k_pair_weight(omega_k_view(env, x1, x2), streams, {x1, x2}, options.horizon_R,
                                       options.functional, options.exit_radius, options.max_steps, options.walker, &t2);
            s.truncated = t1 || t2;
            return s;
        });
        for (const Sample& s : samples) {
            ++draw;
            if (w.size() >= options.n_samples) continue;
            if (!s.accepted) {
                ++res.rejections;
                continue;
            }
            w.push_back(s.w);
            wk.push_back(s.wk);
            if (s.truncated) ++res.truncated;
            if (s.w != 0.0 || s.wk != 0.0) ++res.nonzero;
        }
    }
    const double n = double(w.size());
    double mw = 0.0, mk = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        mw += w[i];
        mk += wk[i];
    }
    mw /= n;
    mk /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double dlt = (w[i] - wk[i]) - (mw - mk);
        var += dlt * dlt;
    }
    var /= std::max(1.0, n - 1.0);
    res.mean_omega = mw;
    res.mean_omega_k = mk;
    res.difference = mw - mk;
    res.stderr_ = std::sqrt(var / n);
    res.samples = w.size();
    return res;
}

}  // namespace fkrwrc
