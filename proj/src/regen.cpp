#include "fkrwrc/regen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fkrwrc {

std::optional<std::size_t> ladder_time(const Trajectory& traj, const std::function<bool(const Point&)>& k_open)
{
    const auto& cfg = traj.config();
    double prefix_max = -INFINITY;  // max level over j < i − 2
    for (std::size_t i = 2; i < traj.size(); ++i) {
        const Point& base = traj[i - 2].x;
        const bool strict = cfg.level(base) > prefix_max;
        prefix_max = std::max(prefix_max, cfg.level(base));
        if (!strict) continue;
        if (traj[i - 1].x != cfg.step(base, 0) || traj[i].x != cfg.step(traj[i - 1].x, 0)) continue;
        if (k_open(traj[i].x)) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> ladder_time(const Environment& env, const Trajectory& traj)
{
    return ladder_time(traj, [&](const Point& x) { return is_k_open(env, x); });
}

DefectResult detect_D(const LatticeConfig& config, const Trajectory& from_candidate)
{
    const auto& t = from_candidate;
    const Point x0 = t.start().x;
    const double l0 = config.level(x0);
    DefectResult r;
    for (std::size_t n = 1; n < t.size(); ++n) {
        if (!r.back && config.level(t[n].x) <= l0) r.back = n;
        if (!r.ori && t[n].z == 0 && l1_distance(t[n - 1].x, x0, config.d()) <= 1) r.ori = n;
        if (r.back || r.ori) break;
    }
    if (r.back && (!r.ori || *r.back <= *r.ori)) {
        r.kind = DefectKind::back;
        r.n = *r.back;
    } else if (r.ori) {
        r.kind = DefectKind::ori;
        r.n = *r.ori;
    } else {
        r.kind = DefectKind::open;
        r.n = t.step_count();
    }
    return r;
}

// ---------------------------------------------------------------- χ

void Extents::reset(const LatticeConfig& config, const Point& x)
{
    for (int k = 0; k < config.d(); ++k) lo[std::size_t(k)] = hi[std::size_t(k)] = config.project(x, k);
}

void Extents::add(const LatticeConfig& config, const Point& x)
{
    for (int k = 0; k < config.d(); ++k) {
        const double v = config.project(x, k);
        lo[std::size_t(k)] = std::min(lo[std::size_t(k)], v);
        hi[std::size_t(k)] = std::max(hi[std::size_t(k)], v);
    }
}

double chi_from_extents(const LatticeConfig& config, const Extents& ext, const Point& base)
{
    constexpr double tol = 1e-9;
    auto reach = [&](int k) {
        const double b = config.project(base, k);
        return std::max(ext.hi[std::size_t(k)] - b, b - ext.lo[std::size_t(k)]);
    };
    const double A = reach(0);
    double B = 0.0;
    for (int k = 1; k < config.d(); ++k) B = std::max(B, reach(k));
    double m = std::max(0.0, std::ceil(A - tol));
    if (B > tol) {
        double mb = std::max(1.0, std::floor(std::pow(B, 1.0 / config.alpha())));
        while (std::pow(mb, config.alpha()) < B - tol) mb += 1.0;
        while (mb > 1.0 && std::pow(mb - 1.0, config.alpha()) >= B - tol) mb -= 1.0;
        m = std::max(m, mb);
    }
    return m;
}

std::vector<double> chi(const LatticeConfig& config, const std::vector<RegenerationRecord>& records,
                        const Trajectory& traj)
{
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < records.size(); ++k) {
        const std::uint64_t a = records[k].tau, b = records[k + 1].tau;
        if (b >= traj.size()) throw std::out_of_range("chi: record beyond trajectory");
        if (b <= a) {
            out.push_back(0.0);
            continue;
        }
        Extents ext;
        ext.reset(config, traj[a].x);
        for (std::uint64_t j = a; j <= b; ++j) ext.add(config, traj[j].x);
        out.push_back(chi_from_extents(config, ext, traj[a].x));
    }
    return out;
}

// ---------------------------------------------------------------- tracker

RegenTracker::RegenTracker(const LatticeConfig& config, double delta, std::function<bool(const Point&)> k_open)
    : config_(config), delta_(delta), k_open_(std::move(k_open)), e1_level_(config.direction_level(0))
{
    if (!(delta > 0.0)) throw std::invalid_argument("confirmation margin must be positive");
}

void RegenTracker::start(const Point& x0, std::uint64_t t0)
{
    t0_ = time_ = t0;
    rmax_ = config_.level(x0);
    floor_ = -INFINITY;
    chain_ = 0;
    fresh_ = true;
    pending_.clear();
    watch_.clear();
    last_.reset();
    records_.clear();
    candidates_ = failures_ = violations_ = 0;
}

void RegenTracker::trigger(Candidate& c, std::uint64_t n)
{
    if (!c.triggered || n < c.trigger_time) {
        c.triggered = true;
        c.trigger_time = n;
        c.M = rmax_;
    }
}

void RegenTracker::visit(const Point& x, std::uint64_t n)
{
    const double lev = config_.level(x);
    for (auto& c : pending_)
        if (lev <= c.level) trigger(c, n);
    for (auto& c : watch_)
        if (lev <= c.level) trigger(c, n);
}

void RegenTracker::zero_step(const Point& from, std::uint64_t n)
{
    const int d = config_.d();
    for (auto& c : pending_)
        if (n - 1 >= c.time && l1_distance(from, c.point, d) <= 1) trigger(c, n);
    for (auto& c : watch_)
        if (n - 1 >= c.time && l1_distance(from, c.point, d) <= 1) trigger(c, n);
}

void RegenTracker::on_move(const Move& mv)
{
    if (mv.kind == Move::Kind::step) {
        const std::uint64_t n = mv.time;
        const double lev = config_.level(mv.to);
        const double old_max = rmax_;
        rmax_ = std::max(rmax_, lev);
        if (mv.z == 0) zero_step(mv.from, n);
        visit(mv.to, n);
        for (auto& c : pending_) c.ext.add(config_, mv.to);
        if (last_) last_->ext.add(config_, mv.to);

        const bool prev_fresh = fresh_;
        fresh_ = lev > old_max;
        chain_ = (mv.dir == 0 && prev_fresh) ? chain_ + 1 : 0;
        time_ = n;
        if (chain_ >= 2 && k_open_(mv.to)) {
            const double base_level = lev - 2.0 * e1_level_;
            if (base_level > floor_) {
                Candidate c;
                c.time = n;
                c.point = mv.to;
                c.level = lev;
                c.base_level = base_level;
                c.ext.reset(config_, mv.to);
                if (last_) c.snapshots.emplace_back(last_->time, last_->ext);
                for (const auto& p : pending_) c.snapshots.emplace_back(p.time, p.ext);
                pending_.push_back(std::move(c));
                ++candidates_;
            }
        }
    } else {
        const std::uint64_t n0 = mv.time;
        if (mv.count >= 1) {
            if (mv.zero_from_b != kNever) zero_step(mv.from, mv.zero_from_b);
            if (mv.zero_from_a != kNever) zero_step(mv.to, mv.zero_from_a);
            visit(mv.to, n0 + 1);
            if (mv.count >= 2) visit(mv.from, n0 + 2);
            for (auto& c : pending_) {
                c.ext.add(config_, mv.to);
                c.ext.add(config_, mv.from);
            }
            if (last_) last_->ext.add(config_, mv.to);
            chain_ = 0;
            fresh_ = false;
        }
        time_ = n0 + mv.count;
    }

    for (auto it = watch_.begin(); it != watch_.end();) {
        if (it->triggered) {
            ++violations_;
            it = watch_.erase(it);
        } else if (rmax_ > it->level + 4.0 * delta_) {
            it = watch_.erase(it);
        } else {
            ++it;
        }
    }
    resolve();
}

void RegenTracker::resolve()
{
    while (!pending_.empty()) {
        Candidate& head = pending_.front();
        if (head.triggered) {
            ++failures_;
            floor_ = std::max(floor_, head.M);
            pending_.pop_front();
            while (!pending_.empty() && pending_.front().base_level <= floor_) pending_.pop_front();
            continue;
        }
        if (rmax_ < head.level + delta_) break;

        RegenerationRecord r;
        r.k = records_.size() + 1;
        r.tau = head.time;
        r.point = head.point;
        r.chi = NAN;
        r.confirmed = true;
        if (!records_.empty()) {
            RegenerationRecord& prev = records_.back();
            for (const auto& [t, ext] : head.snapshots) {
                if (t == prev.tau) {
                    prev.chi = chi_from_extents(config_, ext, prev.point);
                    break;
                }
            }
            prev.has_increment = true;
            prev.dtau = head.time - prev.tau;
            prev.dx = head.point - prev.point;
        }
        records_.push_back(r);
        Candidate done = std::move(head);
        pending_.pop_front();
        done.snapshots.clear();
        watch_.push_back(done);
        last_ = std::move(done);
    }
}

// ---------------------------------------------------------------- drivers

RegenResult regeneration_sequence(const LatticeConfig& config, const std::function<bool(const Point&)>& k_open,
                                  const std::function<std::optional<Move>()>& next, Point start,
                                  std::size_t target_count, double delta, RegenBudget budget)
{
    if (target_count < 1) throw std::invalid_argument("target_count must be >= 1");
    RegenTracker tracker(config, delta, k_open);
    tracker.start(start);
    RegenResult res;
    while (tracker.records().size() < target_count) {
        if (res.moves >= budget.max_moves || tracker.time() - tracker.segment_start() >= budget.max_segment_steps) {
            res.truncated = true;
            break;
        }
        const auto mv = next();
        if (!mv) {
            res.truncated = true;
            break;
        }
        ++res.moves;
        tracker.on_move(*mv);
    }
    res.records = tracker.records();
    if (res.records.size() > target_count) res.records.resize(target_count);
    res.candidates = tracker.candidates();
    res.failures = tracker.failures();
    res.time = tracker.time();
    res.max_level = tracker.max_level();
    res.violations = tracker.violations();
    return res;
}

RegenResult regeneration_sequence(const Environment& env, CounterStream stream, std::size_t target_count, double delta,
                                  RegenBudget budget, Point start, WalkerOptions options)
{
    if (target_count < 1) throw std::invalid_argument("target_count must be >= 1");
    Walker walker(env, stream, start, options);
    RegenTracker tracker(env.config(), delta, [&](const Point& x) { return walker.kernel(x).k_open; });
    tracker.start(start);
    RegenResult res;
    while (tracker.records().size() < target_count) {
        const std::uint64_t seg = tracker.segment_start();
        const std::uint64_t cap =
            seg > kNever - budget.max_segment_steps ? kNever : seg + budget.max_segment_steps;
        if (walker.moves() >= budget.max_moves || walker.time() >= cap) {
            res.truncated = true;
            break;
        }
        tracker.on_move(walker.next(cap));
    }
    res.records = tracker.records();
    if (res.records.size() > target_count) res.records.resize(target_count);
    res.candidates = tracker.candidates();
    res.failures = tracker.failures();
    res.moves = walker.moves();
    res.time = walker.time();
    res.max_level = tracker.max_level();
    res.violations = tracker.violations();
    return res;
}

std::function<std::optional<Move>()> replay_moves(const Trajectory& traj)
{
    auto index = std::make_shared<std::size_t>(1);
    return [&traj, index]() -> std::optional<Move> {
        if (*index >= traj.size()) return std::nullopt;
        const std::size_t i = (*index)++;
        Move mv;
        mv.kind = Move::Kind::step;
        mv.from = traj[i - 1].x;
        mv.to = traj[i].x;
        mv.dir = traj.config().direction_to(mv.from, mv.to);
        mv.z = traj[i].z;
        mv.time = i;
        return mv;
    };
}

}  // namespace fkrwrc
