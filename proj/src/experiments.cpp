#include "fkrwrc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

#include "fkrwrc/joint.hpp"
#include "fkrwrc/limits.hpp"
#include "fkrwrc/parallel.hpp"
#include "fkrwrc/regen.hpp"
#include "fkrwrc/stats.hpp"
#include "fkrwrc/walk.hpp"

namespace fkrwrc {

namespace {

using Config = ExperimentConfig;

std::string num(double v) { return csv_number(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string num(long v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

std::string point_string(const Point& x, int d)
{
    std::string s;
    for (int i = 0; i < d; ++i) s += (i ? " " : "") + std::to_string(x[i]);
    return s;
}

Environment make_env(const Config& c, std::uint64_t e)
{
    Environment env(c.lattice(), c.law(), environment_seed(c.seed, e));
    if (c.uniform_conductance) env.set_uniform(*c.uniform_conductance);
    return env;
}

double mean_se(const std::vector<double>& v)
{
    if (v.size() < 2) return NAN;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1) / double(v.size()));
}

double binomial_se(double p, std::uint64_t n) { return n ? std::sqrt(p * (1.0 - p) / double(n)) : NAN; }

/// Agresti-Coull standard error, nonzero at empirical proportions 0 and 1.
double adjusted_se(std::uint64_t hits, std::uint64_t n)
{
    const double p = (double(hits) + 2.0) / (double(n) + 4.0);
    return std::sqrt(p * (1.0 - p) / (double(n) + 4.0));
}

/// Least-squares slope of y on x and its standard error.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double b = sxy / sxx;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sse += std::pow(y[i] - my - b * (x[i] - mx), 2);
    const double se = x.size() > 2 ? std::sqrt(sse / double(x.size() - 2) / sxx) : NAN;
    return {b, se};
}

double bootstrap_median_se(const std::vector<double>& v, std::uint64_t seed, std::uint64_t tag)
{
    if (v.size() < 2) return NAN;
    Rng rng(seed, "bootstrap", tag);
    std::vector<double> meds;
    std::vector<double> draw(v.size());
    for (int b = 0; b < 200; ++b) {
        for (double& x : draw) x = v[rng.below(v.size())];
        meds.push_back(median(draw));
    }
    return mean_se(meds) * std::sqrt(double(meds.size()));
}

/// Runs fn(env, e, w) for every walk, parallel over environments.
template <class Fn>
auto over_walks(const Config& c, Fn fn)
{
    using T = decltype(fn(std::declval<const Environment&>(), std::uint64_t{}, std::uint64_t{}));
    return parallel_map(c.n_env, c.threads, [&](std::size_t e) {
        const Environment env = make_env(c, e);
        std::vector<T> out;
        for (std::uint64_t w = 0; w < c.n_walk; ++w) out.push_back(fn(env, e, w));
        return out;
    });
}

struct RegenWalk {
    EpochPath path;
    bool truncated = false;
    std::uint64_t candidates = 0;
    std::uint64_t failures = 0;
    std::uint64_t violations = 0;
    std::uint64_t moves = 0;
    std::vector<double> chi;
};

RegenWalk regen_walk(const Config& c, const Environment& env, std::uint64_t e, std::uint64_t w)
{
    RegenBudget budget;
    budget.max_segment_steps = c.max_steps;
    budget.max_moves = c.max_moves;
    const auto r = regeneration_sequence(env, walk_stream(c.seed, e, w), c.records, c.delta, budget);
    RegenWalk out;
    out.path = EpochPath::from_records(r.records, Point{}, c.d);
    out.truncated = r.truncated;
    out.candidates = r.candidates;
    out.failures = r.failures;
    out.violations = r.violations;
    out.moves = r.moves;
    for (const auto& rec : r.records)
        if (rec.confirmed) out.chi.push_back(rec.chi);
    return out;
}

void check_truncation(ExperimentReport& rep, std::uint64_t truncated, std::uint64_t total, const std::string& what)
{
    rep.counters.emplace_back("truncated_" + what, truncated);
    rep.counters.emplace_back("total_" + what, total);
    const double frac = total ? double(truncated) / double(total) : 0.0;
    rep.summary.push_back({"truncation_fraction", what, frac, binomial_se(frac, total), total, ""});
    if (frac > rep.config.truncation_tolerance) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "budget exhausted: %llu of %llu %s truncated (fraction %.4g > tolerance %.4g)",
                      (unsigned long long)truncated, (unsigned long long)total, what.c_str(), frac,
                      rep.config.truncation_tolerance);
        rep.failures.emplace_back(buf);
    }
}

void add_fit(ExperimentReport& rep, const std::string& quantity, const std::vector<double>& x,
             const std::vector<double>& y, std::uint64_t n)
{
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (y[i] > 0.0 && std::isfinite(y[i])) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    if (xs.size() < 2 || xs.size() != x.size()) {
        rep.summary.push_back({quantity, "loglog_slope", NAN, NAN, n, "nonpositive_values"});
        return;
    }
    const auto f = power_law_fit(xs, ys);
    rep.summary.push_back({quantity, "loglog_slope", f.slope, f.slope_stderr, n, "r2=" + num(f.r2)});
}

bool strictly_decreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

bool nonincreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1]) return false;
    return true;
}

// ---------------------------------------------------------------- drift

void run_drift(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const LatticeConfig cfg = c.lattice();
    struct Out {
        std::vector<double> level;
        bool truncated = false;
        std::uint64_t moves = 0;
    };
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        Walker walker(env, walk_stream(c.seed, e, w), Point{});
        Out o;
        for (std::uint64_t n : c.n_list) {
            while (walker.time() < n && walker.moves() < c.max_moves) walker.next(n);
            if (walker.time() < n) {
                o.truncated = true;
                break;
            }
            o.level.push_back(cfg.level(walker.position()));
        }
        o.moves = walker.moves();
        return o;
    });
    CsvTable t{"drift_levels", {"env", "walk", "n", "level"}, {}};
    std::vector<std::vector<double>> by_n(c.n_list.size());
    std::uint64_t truncated = 0, total = 0, moves = 0;
    for (std::size_t e = 0; e < res.size(); ++e)
        for (std::size_t w = 0; w < res[e].size(); ++w) {
            const Out& o = res[e][w];
            ++total;
            truncated += o.truncated;
            moves += o.moves;
            for (std::size_t i = 0; i < c.n_list.size(); ++i) {
                const double lv = i < o.level.size() ? o.level[i] : NAN;
                t.add({num(std::uint64_t(e)), num(std::uint64_t(w)), num(c.n_list[i]), num(lv)});
                if (!o.truncated) by_n[i].push_back(lv);
            }
        }
    rep.tables.push_back(std::move(t));
    std::vector<double> xs, meds;
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
        const std::string p = "n=" + num(c.n_list[i]);
        const double med = by_n[i].empty() ? NAN : median(by_n[i]);
        rep.summary.push_back({"median_level", p, med, bootstrap_median_se(by_n[i], c.seed, i), by_n[i].size(), ""});
        rep.summary.push_back(
            {"mean_level", p, by_n[i].empty() ? NAN : mean(by_n[i]), mean_se(by_n[i]), by_n[i].size(), ""});
        xs.push_back(double(c.n_list[i]));
        meds.push_back(med);
    }
    if (c.n_list.size() >= 2) add_fit(rep, "median_level", xs, meds, total - truncated);
    rep.counters.emplace_back("moves", moves);
    rep.work_units = moves;
    check_truncation(rep, truncated, total, "walks");
}

// ---------------------------------------------------------------- tail

void run_tail(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const Environment env = make_env(c, 0);
    const ConductanceLaw law = c.law();
    const std::size_t block = 4096;
    const std::size_t blocks = (c.samples + block - 1) / block;
    const auto parts = parallel_map(blocks, c.threads, [&](std::size_t b) {
        std::vector<double> v;
        for (std::size_t i = b * block; i < std::min<std::size_t>(c.samples, (b + 1) * block); ++i) {
            Point x;
            x[0] = Coord(i);
            v.push_back(env.base_conductance(canonical_edge(x, x + unit_point(0))));
        }
        return v;
    });
    std::vector<double> xs;
    for (const auto& p : parts) xs.insert(xs.end(), p.begin(), p.end());
    const std::uint64_t n = xs.size();
    rep.work_units = n;
    if (n < 2) {
        rep.failures.emplace_back("tail needs at least 2 samples");
        return;
    }
    const auto h = hill_estimator(xs, std::min<std::size_t>(c.hill_k, n - 1));
    rep.summary.push_back({"hill_index", "k=" + num(std::uint64_t(h.k_top)), h.index, h.stderr_, n,
                           h.degenerate ? "degenerate" : "gamma=" + num(c.gamma)});
    CsvTable t{"tail_survival", {"u", "empirical", "exact", "stderr", "z"}, {}};
    for (double u : c.u_list) {
        const double p = double(std::count_if(xs.begin(), xs.end(), [&](double x) { return x >= u; })) / double(n);
        const double exact = law.survival(u);
        const double se = std::sqrt(exact * (1.0 - exact) / double(n));
        const double z = se > 0.0 ? (p - exact) / se : (p == exact ? 0.0 : INFINITY);
        t.add({num(u), num(p), num(exact), num(se), num(z)});
        rep.summary.push_back({"survival", "u=" + num(u), p, binomial_se(p, n), n, "exact=" + num(exact)});
    }
    rep.tables.push_back(std::move(t));
}

// ---------------------------------------------------------------- regen

void run_regen(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const LatticeConfig cfg = c.lattice();
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        return regen_walk(c, env, e, w);
    });
    CsvTable t{"regen_records", {"env", "walk", "k", "tau", "dtau", "level", "chi"}, {}};
    std::vector<double> incs;
    std::uint64_t truncated = 0, total = 0, cand = 0, fail = 0, viol = 0, moves = 0, recs = 0;
    for (std::size_t e = 0; e < res.size(); ++e)
        for (std::size_t w = 0; w < res[e].size(); ++w) {
            const RegenWalk& r = res[e][w];
            ++total;
            truncated += r.truncated;
            cand += r.candidates;
            fail += r.failures;
            viol += r.violations;
            moves += r.moves;
            for (std::size_t k = 1; k < r.path.count(); ++k) {
                ++recs;
                const std::uint64_t dt = r.path.tau[k] - r.path.tau[k - 1];
                if (k >= 2) incs.push_back(double(dt));
                t.add({num(std::uint64_t(e)), num(std::uint64_t(w)), num(std::uint64_t(k)), num(r.path.tau[k]),
                       num(dt), num(cfg.level(r.path.x[k])), num(k - 1 < r.chi.size() ? r.chi[k - 1] : NAN)});
            }
        }
    rep.tables.push_back(std::move(t));
    rep.counters.emplace_back("records", recs);
    rep.counters.emplace_back("candidates", cand);
    rep.counters.emplace_back("failures", fail);
    rep.counters.emplace_back("violations", viol);
    rep.counters.emplace_back("moves", moves);
    rep.work_units = moves;
    if (incs.size() >= 2) {
        const auto h = hill_estimator(incs, std::min<std::size_t>(c.hill_k, incs.size() - 1));
        rep.summary.push_back({"increment_hill_index", "k=" + num(std::uint64_t(h.k_top)), h.index, h.stderr_,
                               incs.size(), h.degenerate ? "degenerate" : ""});
    } else {
        rep.summary.push_back({"increment_hill_index", "k=0", NAN, NAN, incs.size(), "insufficient_records"});
    }
    rep.summary.push_back({"records_per_walk", "", total ? double(recs) / double(total) : 0.0, NAN, total, ""});
    check_truncation(rep, truncated, total, "walks");
}

// ---------------------------------------------------------------- joint

void run_joint(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const LatticeConfig cfg = c.lattice();
    const Point U2 = cfg.direction(2);
    const long n_max = long(c.n_list.back());
    struct Out {
        std::optional<long> L1;
        long lower = 0;
        bool truncated = false;
        std::vector<JointRegenRecord> records;
        std::uint64_t violations = 0;
        std::uint64_t moves = 0;
        std::vector<std::string> errors;
    };
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        JointBudget budget;
        budget.max_steps = c.max_steps;
        budget.max_moves = c.max_moves;
        JointStop stop;
        stop.target_count = c.records;
        stop.decide_below = n_max;
        const auto r = joint_regeneration_levels(env, {walk_stream(c.seed, e, 2 * w), walk_stream(c.seed, e, 2 * w + 1)},
                                                 {Point{}, U2}, stop, c.delta, budget);
        Out o;
        o.truncated = r.truncated;
        o.records = r.records;
        o.violations = r.violations;
        o.moves = r.moves[0] + r.moves[1];
        if (!r.records.empty())
            o.L1 = r.records.front().level;
        else
            o.lower = r.next_threshold;
        const std::string where = "env " + num(e) + " pair " + num(w);
        long prev = 0;
        for (const auto& rec : r.records) {
            for (int i = 0; i < 2; ++i) {
                if (!is_k_open(env, rec.point[std::size_t(i)]))
                    o.errors.push_back(where + ": joint regeneration point is not K-open");
                if (cfg.level(rec.point[std::size_t(i)]) != double(rec.level))
                    o.errors.push_back(where + ": joint regeneration point off its level");
            }
            if (rec.k > 1 && rec.level - prev < 2) o.errors.push_back(where + ": joint levels closer than 2");
            if (rec.k == 1 && rec.level < 1) o.errors.push_back(where + ": first joint level below start + 1");
            prev = rec.level;
        }
        return o;
    });
    CsvTable t{"joint_levels", {"env", "pair", "k", "level", "hit_time_1", "hit_time_2", "lower_bound", "truncated"}, {}};
    std::uint64_t truncated = 0, total = 0, viol = 0, moves = 0, recs = 0;
    std::vector<Out> done;
    for (std::size_t e = 0; e < res.size(); ++e)
        for (std::size_t w = 0; w < res[e].size(); ++w) {
            const Out& o = res[e][w];
            ++total;
            truncated += o.truncated;
            viol += o.violations;
            moves += o.moves;
            recs += o.records.size();
            for (const auto& err : o.errors) rep.failures.push_back(err);
            for (const auto& r : o.records)
                t.add({num(std::uint64_t(e)), num(std::uint64_t(w)), num(std::uint64_t(r.k)), num(r.level),
                       num(r.hit_time[0]), num(r.hit_time[1]), "", num(int(o.truncated))});
            if (o.records.empty())
                t.add({num(std::uint64_t(e)), num(std::uint64_t(w)), "0", "", "", "", num(o.lower),
                       num(int(o.truncated))});
            // 𝓛_1 ≥ n is decided for every n ≤ n_max unless the pair ran out of budget first.
            if (o.L1 || !o.truncated) done.push_back(o);
        }
    rep.tables.push_back(std::move(t));
    std::vector<double> xs, ps;
    for (std::uint64_t n : c.n_list) {
        const auto hits = std::count_if(done.begin(), done.end(), [&](const Out& o) { return !o.L1 || *o.L1 >= long(n); });
        const double p = done.empty() ? NAN : double(hits) / double(done.size());
        rep.summary.push_back({"P(L1>=n)", "n=" + num(n), p, binomial_se(p, done.size()), done.size(), ""});
        xs.push_back(double(n));
        ps.push_back(p);
    }
    if (xs.size() >= 2) add_fit(rep, "P(L1>=n)", xs, ps, done.size());
    rep.counters.emplace_back("records", recs);
    rep.counters.emplace_back("violations", viol);
    rep.counters.emplace_back("moves", moves);
    rep.work_units = moves;
    check_truncation(rep, truncated, total, "pairs");

    if (c.samples == 0) return;
    std::vector<OmegaFunctional> fs;
    if (c.functional != "positive_exit") fs.push_back(OmegaFunctional::one);
    if (c.functional != "one") fs.push_back(OmegaFunctional::positive_exit);
    for (OmegaFunctional f : fs) {
        OmegaKOptions o;
        o.seed = stream_key(c.seed, "omega-k");
        o.horizon_R = c.horizon;
        o.n_samples = c.samples;
        o.functional = f;
        o.max_steps = c.max_steps;
        o.threads = c.threads;
        const auto r = omega_k_invariance_test([&](std::uint64_t i) { return make_env(c, i); }, Point{}, U2, o);
        const std::string name = f == OmegaFunctional::one ? "one" : "positive_exit";
        const bool within = std::abs(r.difference) <= 3.0 * r.stderr_;
        rep.summary.push_back({"omega_k_difference", "f=" + name + ";R=" + num(c.horizon), r.difference, r.stderr_,
                               r.samples, within ? "within_3se" : "outside_3se"});
        rep.summary.push_back({"omega_k_mean_omega", "f=" + name, r.mean_omega, NAN, r.samples, ""});
        rep.summary.push_back({"omega_k_mean_omega_k", "f=" + name, r.mean_omega_k, NAN, r.samples, ""});
        rep.counters.emplace_back("omega_k_rejections_" + name, r.rejections);
        rep.counters.emplace_back("omega_k_nonzero_" + name, r.nonzero);
        if (c.K == 1.0 && r.difference != 0.0)
            rep.failures.push_back("omega_k: K = 1 must give an exact zero difference, got " + num(r.difference));
        check_truncation(rep, r.truncated, r.samples, "omega_k_samples_" + name);
        rep.work_units += r.samples;
    }
}

// ---------------------------------------------------------------- separation

void run_separation(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const LatticeConfig cfg = c.lattice();
    const Point U2 = cfg.direction(2);
    std::vector<EnvMode> modes;
    if (c.env_mode != "independent") modes.push_back(EnvMode::same);
    if (c.env_mode != "same") modes.push_back(EnvMode::independent);
    struct Out {
        std::vector<SeparationReport> reports;
        std::vector<bool> truncated;
        std::uint64_t moves = 0;
    };
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        Out o;
        for (EnvMode m : modes) {
            const Environment other = m == EnvMode::same ? env : independent_environment(env);
            const auto tr =
                run_pair_traces(env, other, {walk_stream(c.seed, e, 2 * w), walk_stream(c.seed, e, 2 * w + 1)},
                                {Point{}, U2}, double(c.horizon), c.max_steps, c.max_moves);
            o.reports.push_back(separation_event(cfg, tr.trace1, tr.trace2, c.R_grid));
            o.truncated.push_back(tr.truncated);
            o.moves += tr.moves[0] + tr.moves[1];
        }
        return o;
    });
    CsvTable t{"separation_events", {"env", "pair", "mode", "R", "event", "min_distance", "truncated"}, {}};
    std::vector<std::vector<std::uint64_t>> hits(modes.size(), std::vector<std::uint64_t>(c.R_grid.size()));
    std::vector<std::uint64_t> valid(modes.size()), truncated(modes.size());
    std::uint64_t moves = 0, total = 0;
    for (std::size_t e = 0; e < res.size(); ++e)
        for (std::size_t w = 0; w < res[e].size(); ++w) {
            const Out& o = res[e][w];
            ++total;
            moves += o.moves;
            for (std::size_t m = 0; m < modes.size(); ++m) {
                const auto& r = o.reports[m];
                const std::string mode = modes[m] == EnvMode::same ? "same" : "independent";
                for (std::size_t j = 0; j < c.R_grid.size(); ++j) {
                    t.add({num(std::uint64_t(e)), num(std::uint64_t(w)), mode, num(c.R_grid[j]), num(int(r.event[j])),
                           num(r.min_distance[j]), num(int(o.truncated[m]))});
                    if (j > 0 && r.event[j] && !r.event[j - 1])
                        rep.failures.push_back("separation: event not monotone in R for env " + num(std::uint64_t(e)) +
                                               " pair " + num(std::uint64_t(w)));
                }
                if (o.truncated[m]) {
                    ++truncated[m];
                    continue;
                }
                ++valid[m];
                for (std::size_t j = 0; j < c.R_grid.size(); ++j) hits[m][j] += r.event[j];
            }
        }
    rep.tables.push_back(std::move(t));
    std::vector<std::vector<double>> p(modes.size());
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const std::string mode = modes[m] == EnvMode::same ? "same" : "independent";
        std::vector<double> xs;
        for (std::size_t j = 0; j < c.R_grid.size(); ++j) {
            const double q = valid[m] ? double(hits[m][j]) / double(valid[m]) : NAN;
            p[m].push_back(q);
            xs.push_back(double(c.R_grid[j]));
            std::string flags;
            if (modes[m] == EnvMode::independent && modes.size() == 2) {
                const double se = std::hypot(adjusted_se(hits[0][j], valid[0]), adjusted_se(hits[m][j], valid[m]));
                flags = q <= p[0][j] + 3.0 * se ? "le_same_plus_3se" : "above_same_plus_3se";
            }
            rep.summary.push_back({"P(M_R)", "mode=" + mode + ";R=" + num(c.R_grid[j]), q, binomial_se(q, valid[m]),
                                   valid[m], flags});
        }
        rep.summary.push_back({"P(M_R)_nonincreasing", "mode=" + mode, nonincreasing(p[m]) ? 1.0 : 0.0, NAN, valid[m], ""});
        if (xs.size() >= 2) {
            add_fit(rep, "P(M_R);mode=" + mode, xs, p[m], valid[m]);
            std::vector<double> lx;
            for (double x : xs) lx.push_back(std::log(x));
            const auto f = linear_fit(lx, p[m]);
            rep.summary.push_back({"P(M_R);mode=" + mode, "semilog_slope", f.first, f.second, valid[m], ""});
        }
        check_truncation(rep, truncated[m], total, "pairs_" + mode);
    }
    rep.counters.emplace_back("moves", moves);
    rep.work_units = moves;
}

// ---------------------------------------------------------------- variance

void run_variance(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const ConductanceLaw law = c.law();
    const std::size_t nn = c.n_list.size();
    struct Out {
        std::vector<double> F;
        bool truncated = false;
        std::uint64_t moves = 0;
    };
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        const RegenWalk r = regen_walk(c, env, e, w);
        Out o;
        o.moves = r.moves;
        o.truncated = r.path.count() < c.n_list.back() + 2;
        if (!o.truncated)
            for (std::uint64_t n : c.n_list)
                o.F.push_back(std::min(1.0, clock_star(r.path, double(n), 1.0, law.inv_tail(double(n)))));
        return o;
    });
    std::vector<std::vector<std::vector<double>>> values(nn);
    CsvTable t{"variance_values", {"env", "walk", "n", "F"}, {}};
    std::uint64_t truncated = 0, total = 0, dropped = 0, moves = 0;
    for (std::size_t e = 0; e < res.size(); ++e) {
        bool complete = true;
        for (const Out& o : res[e]) {
            ++total;
            truncated += o.truncated;
            moves += o.moves;
            complete = complete && !o.truncated;
        }
        for (std::size_t w = 0; w < res[e].size(); ++w)
            for (std::size_t i = 0; i < nn; ++i)
                t.add({num(std::uint64_t(e)), num(std::uint64_t(w)), num(c.n_list[i]),
                       res[e][w].truncated ? "nan" : num(res[e][w].F[i])});
        if (!complete) {
            ++dropped;
            continue;
        }
        for (std::size_t i = 0; i < nn; ++i) {
            std::vector<double> row;
            for (const Out& o : res[e]) row.push_back(o.F[i]);
            values[i].push_back(std::move(row));
        }
    }
    rep.tables.push_back(std::move(t));
    rep.counters.emplace_back("environments_dropped", dropped);
    rep.counters.emplace_back("moves", moves);
    rep.work_units = moves;
    std::vector<double> xs, vs;
    for (std::size_t i = 0; i < nn; ++i) {
        const std::string p = "n=" + num(c.n_list[i]);
        if (values[i].size() < 2 || c.n_walk < 2) {
            rep.summary.push_back({"quenched_variance", p, NAN, NAN, values[i].size(), "insufficient_data"});
            vs.push_back(NAN);
            xs.push_back(double(c.n_list[i]));
            continue;
        }
        const auto q = quenched_variance(values[i]);
        rep.summary.push_back({"quenched_variance", p, q.estimate, q.stderr_, q.n_env, q.clamped ? "clamped" : ""});
        rep.summary.push_back({"outer_variance", p, q.outer, NAN, q.n_env, ""});
        rep.summary.push_back({"within_correction", p, q.within, NAN, q.n_env, ""});
        const auto pw = paired_walk_covariance(values[i]);
        rep.summary.push_back({"paired_walk_covariance", p, pw.estimate, pw.stderr_, pw.n_env, pw.clamped ? "clamped" : ""});
        xs.push_back(double(c.n_list[i]));
        vs.push_back(q.estimate);
    }
    rep.summary.push_back({"quenched_variance_strictly_decreasing", "", strictly_decreasing(vs) ? 1.0 : 0.0, NAN,
                           values.empty() ? 0 : values[0].size(), ""});
    if (nn >= 2) add_fit(rep, "quenched_variance", xs, vs, values.empty() ? 0 : values[0].size());
    check_truncation(rep, truncated, total, "walks");
}

// ---------------------------------------------------------------- smalltime

void run_smalltime(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const ConductanceLaw law = c.law();
    if (!(c.rho < c.eta / c.gamma)) throw std::invalid_argument("smalltime needs rho < eta/gamma");
    struct Out {
        std::vector<std::uint64_t> inc;
        bool truncated = false;
        std::uint64_t moves = 0;
    };
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        const RegenWalk r = regen_walk(c, env, e, w);
        Out o;
        o.truncated = r.truncated;
        o.moves = r.moves;
        for (std::size_t k = 1; k + 1 < r.path.count(); ++k) o.inc.push_back(r.path.tau[k + 1] - r.path.tau[k]);
        return o;
    });
    std::vector<std::vector<std::uint64_t>> incs;
    std::uint64_t truncated = 0, total = 0, moves = 0;
    for (const auto& env : res)
        for (const Out& o : env) {
            ++total;
            truncated += o.truncated;
            moves += o.moves;
            incs.push_back(o.inc);
        }
    rep.counters.emplace_back("moves", moves);
    rep.work_units = moves;
    CsvTable t{"smalltime", {"n", "m", "threshold", "probability", "stderr", "walks", "truncated"}, {}};
    std::vector<double> ps;
    for (std::uint64_t n : c.n_list) {
        const auto r = small_time_clock_check(incs, double(n), c.eta, c.rho, c.gamma, law.inv_tail(double(n)));
        t.add({num(n), num(std::uint64_t(r.increments_used)), num(std::pow(double(n), -c.rho)), num(r.probability),
               num(r.stderr_), num(std::uint64_t(r.walks)), num(std::uint64_t(r.truncated))});
        rep.summary.push_back({"P(S*>n^-rho)", "n=" + num(n) + ";eta=" + num(c.eta) + ";rho=" + num(c.rho),
                               r.probability, r.stderr_, r.walks - r.truncated, r.degenerate ? "degenerate" : ""});
        ps.push_back(r.probability);
    }
    rep.tables.push_back(std::move(t));
    rep.summary.push_back({"smalltime_strictly_decreasing", "", strictly_decreasing(ps) ? 1.0 : 0.0, NAN, total, ""});
    check_truncation(rep, truncated, total, "walks");

    if (c.samples > 0) {
        Rng rng(c.seed, "big-jump");
        const double n = 100.0;
        const double scale = std::pow(n, 1.0 / c.gamma);
        const auto rows = one_big_jump_check(c.gamma, std::size_t(n), {10.0 * scale, 30.0 * scale, 100.0 * scale},
                                             c.samples, rng);
        CsvTable b{"big_jump", {"n", "x", "p_sum", "p_single", "ratio", "stderr_ratio", "large_deviation"}, {}};
        for (const auto& r : rows) {
            b.add({num(n), num(r.x), num(r.p_sum), num(r.p_single), num(r.ratio), num(r.stderr_ratio),
                   num(int(r.large_deviation))});
            rep.summary.push_back({"big_jump_ratio", "n=100;x=" + num(r.x), r.ratio, r.stderr_ratio, c.samples,
                                   r.large_deviation ? "large_deviation" : ""});
        }
        rep.tables.push_back(std::move(b));
        rep.work_units += c.samples;
    }
}

// ---------------------------------------------------------------- pointmass

void run_pointmass(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const std::size_t nn = c.n_list.size();
    struct Out {
        std::vector<Point> x;
        bool truncated = false;
        std::uint64_t moves = 0;
    };
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        const RegenWalk r = regen_walk(c, env, e, w);
        Out o;
        o.moves = r.moves;
        o.truncated = r.path.count() <= c.n_list.back();
        if (!o.truncated)
            for (std::uint64_t n : c.n_list) o.x.push_back(r.path.x[n]);
        return o;
    });
    std::vector<std::vector<Point>> by_n(nn);
    std::uint64_t truncated = 0, total = 0, moves = 0;
    for (const auto& env : res)
        for (const Out& o : env) {
            ++total;
            truncated += o.truncated;
            moves += o.moves;
            if (!o.truncated)
                for (std::size_t i = 0; i < nn; ++i) by_n[i].push_back(o.x[i]);
        }
    rep.counters.emplace_back("moves", moves);
    rep.work_units = moves;
    CsvTable t{"pointmass", {"n", "sup", "stderr", "walks", "mode"}, {}};
    std::vector<double> xs, sups;
    for (std::size_t i = 0; i < nn; ++i) {
        xs.push_back(double(c.n_list[i]));
        if (by_n[i].empty()) {
            sups.push_back(NAN);
            continue;
        }
        const auto pm = point_mass(by_n[i]);
        t.add({num(c.n_list[i]), num(pm.sup), num(pm.stderr_), num(std::uint64_t(pm.walks)), point_string(pm.mode, c.d)});
        rep.summary.push_back({"sup_point_mass", "n=" + num(c.n_list[i]), pm.sup, pm.stderr_, pm.walks, ""});
        sups.push_back(pm.sup);
    }
    rep.tables.push_back(std::move(t));
    if (nn >= 2) add_fit(rep, "sup_point_mass", xs, sups, total - truncated);
    check_truncation(rep, truncated, total, "walks");
}

// ---------------------------------------------------------------- fk

void run_fk(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const auto res = over_walks(c, [&](const Environment& env, std::uint64_t e, std::uint64_t w) {
        return regen_walk(c, env, e, w);
    });
    std::vector<std::array<double, kMaxDim>> rows;
    std::uint64_t truncated = 0, total = 0, moves = 0;
    for (const auto& env : res)
        for (const RegenWalk& r : env) {
            ++total;
            truncated += r.truncated;
            moves += r.moves;
            for (std::size_t k = 2; k < r.path.count(); ++k) {
                std::array<double, kMaxDim> dx{};
                for (int i = 0; i < c.d; ++i) dx[std::size_t(i)] = double(r.path.x[k][i] - r.path.x[k - 1][i]);
                rows.push_back(dx);
            }
        }
    rep.counters.emplace_back("moves", moves);
    rep.counters.emplace_back("increments", rows.size());
    rep.work_units = moves;
    check_truncation(rep, truncated, total, "walks");
    Eigen::MatrixXd inc(Eigen::Index(rows.size()), c.d);
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (int i = 0; i < c.d; ++i) inc(Eigen::Index(j), i) = rows[j][std::size_t(i)];
    LimitModel m;
    try {
        m = estimate_limit_model(inc, c.gamma);
    } catch (const std::exception& ex) {
        rep.failures.push_back(std::string("fk: ") + ex.what());
        return;
    }
    CsvTable mt{"fk_model", {"quantity", "row"}, {}};
    for (int i = 0; i < c.d; ++i) mt.header.push_back("c" + std::to_string(i + 1));
    auto add_vec = [&](const std::string& q, const Eigen::VectorXd& v) {
        std::vector<std::string> row{q, "0"};
        for (int i = 0; i < c.d; ++i) row.push_back(num(v(i)));
        mt.add(row);
    };
    auto add_mat = [&](const std::string& q, const Eigen::MatrixXd& a) {
        for (int r = 0; r < c.d; ++r) {
            std::vector<std::string> row{q, num(r + 1)};
            for (int i = 0; i < c.d; ++i) row.push_back(num(a(r, i)));
            mt.add(row);
        }
    };
    add_vec("v", m.v);
    add_vec("v0", m.v0);
    add_mat("Sigma", m.Sigma);
    add_mat("M_d", m.M_d);
    rep.tables.push_back(std::move(mt));
    const double left_null = (m.v0.transpose() * m.M_d).norm();
    const int rank = numerical_rank(m.M_d);
    rep.summary.push_back({"speed", "|v|", m.v.norm(), NAN, std::uint64_t(rows.size()), ""});
    rep.summary.push_back({"v0_left_null_norm", "", left_null, NAN, std::uint64_t(rows.size()), ""});
    rep.summary.push_back({"rank_M_d", "", double(rank), NAN, std::uint64_t(rows.size()), ""});
    if (!(left_null <= 1e-9 * std::max(1.0, m.M_d.norm())))
        rep.failures.push_back("fk: v0 is not a left null vector of M_d (norm " + num(left_null) + ")");
    if (rank > c.d - 1) rep.failures.push_back("fk: M_d has full rank");

    if (c.samples == 0) return;
    ClockGrid clock;
    clock.step = c.clock_step;
    const auto paths = parallel_map(c.samples, c.threads, [&](std::size_t j) {
        Rng cr(c.seed, "fk-clock", j), br(c.seed, "fk-bm", j);
        return fractional_kinetics_path(c.gamma, m.M_d, c.t_grid, cr, br, clock);
    });
    CsvTable pt{"fk_paths", {"path", "t"}, {}};
    for (int i = 0; i < c.d; ++i) pt.header.push_back("c" + std::to_string(i + 1));
    for (std::size_t j = 0; j < paths.size(); ++j)
        for (std::size_t g = 0; g < c.t_grid.size(); ++g) {
            std::vector<std::string> row{num(std::uint64_t(j)), num(c.t_grid[g])};
            for (int i = 0; i < c.d; ++i) row.push_back(num(paths[j](Eigen::Index(g), i)));
            pt.add(row);
        }
    rep.tables.push_back(std::move(pt));
    const double trace = (m.M_d * m.M_d.transpose()).trace();
    for (std::size_t g = 0; g < c.t_grid.size(); ++g) {
        std::vector<double> sq;
        for (const auto& p : paths) sq.push_back(p.row(Eigen::Index(g)).squaredNorm());
        const double expect = std::pow(c.t_grid[g], c.gamma) * inverse_subordinator_moment(c.gamma, 1) * trace;
        const double se = mean_se(sq);
        rep.summary.push_back({"fk_second_moment", "t=" + num(c.t_grid[g]), mean(sq), se, sq.size(),
                               "expected=" + num(expect)});
    }
    rep.work_units += c.samples;
}

// ---------------------------------------------------------------- oracle

void run_oracle(ExperimentReport& rep)
{
    const Config& c = rep.config;
    const double g = c.gamma;
    const std::size_t block = 4096;
    auto draw = [&](const char* tag, const std::function<double(Rng&)>& f) {
        const std::size_t blocks = (c.samples + block - 1) / block;
        const auto parts = parallel_map(blocks, c.threads, [&](std::size_t b) {
            Rng rng(c.seed, tag, b);
            std::vector<double> v;
            for (std::size_t i = b * block; i < std::min<std::size_t>(c.samples, (b + 1) * block); ++i) v.push_back(f(rng));
            return v;
        });
        std::vector<double> out;
        for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
        return out;
    };
    const double p_floor = 1e-4;
    const auto xs = draw("oracle-stable", [&](Rng& r) { return sample_one_sided_stable(g, r); });
    rep.work_units = 3 * c.samples;
    if (xs.size() < 50) {
        rep.failures.push_back("oracle needs at least 50 samples");
        return;
    }
    if (g == 0.5) {
        const auto ks = ks_distance(xs, half_stable_cdf);
        rep.summary.push_back({"ks_half_stable", "", ks.statistic, NAN, ks.n,
                               std::string(ks.statistic < 0.02 ? "D<0.02" : "D>=0.02") + ";p=" + num(ks.p_value)});
        if (ks.p_value < p_floor) rep.failures.push_back("oracle: stable sampler rejected against erfc(1/(2 sqrt x))");
    }
    const double cs = 3.0;
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) grid.push_back(cs * i / 10.0);
    std::vector<double> scaled;
    for (double x : xs) scaled.push_back(std::pow(cs, 1.0 / g) * x);
    const auto sub = draw("oracle-subordinator", [&](Rng& r) { return subordinator_path(g, grid, r).back(); });
    const auto sc = ks_two_sample(scaled, sub);
    rep.summary.push_back({"ks_scaling_identity", "c=3", sc.statistic, NAN, sc.n, "p=" + num(sc.p_value)});
    if (sc.p_value < p_floor) rep.failures.push_back("oracle: scaling identity rejected");
    for (double s : {0.5, 1.0, 2.0}) {
        std::vector<double> v;
        for (double x : xs) v.push_back(std::exp(-s * x));
        const double m = mean(v), se = mean_se(v), exact = std::exp(-std::pow(s, g));
        const bool within = std::abs(m - exact) <= 3.0 * se;
        rep.summary.push_back({"laplace", "s=" + num(s), m, se, v.size(),
                               std::string(within ? "within_3se" : "outside_3se") + ";exact=" + num(exact)});
        if (std::abs(m - exact) > 5.0 * se) rep.failures.push_back("oracle: Laplace functional off at s = " + num(s));
    }
    std::uint64_t galois = 0;
    std::vector<double> tg;
    for (int i = 0; i <= 1000; ++i) tg.push_back(i * 1e-3);
    for (std::uint64_t p = 0; p < 20; ++p) {
        Rng rng(c.seed, "oracle-galois", p);
        const auto S = subordinator_path(g, tg, rng);
        const auto inv = inverse_subordinator(tg, S, S);
        for (std::size_t i = 0; i < S.size(); ++i) galois += !(inv[i] >= tg[i]);
    }
    rep.summary.push_back({"galois_violations", "", double(galois), NAN, 20 * tg.size(), ""});
    if (galois) rep.failures.push_back("oracle: Galois inequality violated " + num(galois) + " times");
    ClockGrid clock;
    clock.step = c.clock_step;
    const std::uint64_t ml_n = std::max<std::uint64_t>(50, c.samples / 100);
    const auto parts = parallel_map(ml_n, c.threads, [&](std::size_t i) {
        Rng rng(c.seed, "oracle-ml", i);
        return inverse_subordinator_at(g, {1.0}, rng, clock)[0];
    });
    rep.summary.push_back({"mittag_leffler_mean", "t=1", mean(parts), mean_se(parts), parts.size(),
                           "exact=" + num(inverse_subordinator_moment(g, 1))});
}

}  // namespace

const SummaryRow* ExperimentReport::find(const std::string& quantity, const std::string& parameter) const
{
    for (const auto& r : summary)
        if (r.quantity == quantity && (parameter.empty() || r.parameter == parameter)) return &r;
    return nullptr;
}

std::uint64_t ExperimentReport::counter(const std::string& name) const
{
    for (const auto& [k, v] : counters)
        if (k == name) return v;
    return 0;
}

std::string csv_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_csv(const CsvTable& table)
{
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    };
    std::string out;
    auto line = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + field(row[i]);
        out += '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    return out;
}

CsvTable summary_table(const ExperimentReport& report)
{
    CsvTable t{"summary", {"experiment", "quantity", "parameter", "estimate", "stderr", "n_samples", "flags"}, {}};
    for (const auto& r : report.summary)
        t.add({report.config.experiment, r.quantity, r.parameter, csv_number(r.estimate), csv_number(r.stderr_),
               std::to_string(r.n_samples), r.flags});
    return t;
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

void write_report(const ExperimentReport& report, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
    write_file_atomic(at("config.ini"), emit_config(report.config));
    write_file_atomic(at("summary.csv"), to_csv(summary_table(report)));
    CsvTable counters{"counters", {"experiment", "counter", "value"}, {}};
    for (const auto& [k, v] : report.counters) counters.add({report.config.experiment, k, std::to_string(v)});
    write_file_atomic(at("counters.csv"), to_csv(counters));
    CsvTable failures{"failures", {"experiment", "failure"}, {}};
    for (const auto& f : report.failures) failures.add({report.config.experiment, f});
    write_file_atomic(at("failures.csv"), to_csv(failures));
    for (const auto& t : report.tables) write_file_atomic(at(t.name + ".csv"), to_csv(t));
    CsvTable metrics{"metrics", {"experiment", "threads", "wall_seconds", "work_units", "units_per_second"}, {}};
    metrics.add({report.config.experiment, std::to_string(report.config.threads), csv_number(report.wall_seconds),
                 std::to_string(report.work_units),
                 csv_number(report.wall_seconds > 0 ? double(report.work_units) / report.wall_seconds : NAN)});
    write_file_atomic(at("metrics.csv"), to_csv(metrics));
}

ExperimentReport run_experiment(const ExperimentConfig& config)
{
    static const std::map<std::string, std::function<void(ExperimentReport&)>> runners{
        {"drift", run_drift},         {"tail", run_tail},           {"regen", run_regen},
        {"joint", run_joint},         {"separation", run_separation}, {"variance", run_variance},
        {"smalltime", run_smalltime}, {"pointmass", run_pointmass}, {"fk", run_fk},
        {"oracle", run_oracle}};
    const auto it = runners.find(config.experiment);
    if (it == runners.end()) throw std::invalid_argument("unknown experiment '" + config.experiment + "'");
    ExperimentReport rep;
    rep.config = config;
    const auto t0 = std::chrono::steady_clock::now();
    it->second(rep);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace fkrwrc
