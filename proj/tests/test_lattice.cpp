#include <doctest.h>

#include <cmath>
#include <set>

#include "fkrwrc/lattice.hpp"
#include "fkrwrc/rng.hpp"
#include "fkrwrc/stats.hpp"

using namespace fkrwrc;

namespace {

LatticeConfig line(double lambda, double K = 20.0) { return LatticeConfig::make(1, lambda, {1.0}, 5.0, K); }

}  // namespace

TEST_CASE("config validation")
{
    CHECK_THROWS_AS(LatticeConfig::make(5, 1.0, {1, 0, 0, 0, 0}, 8.0, 20.0), std::invalid_argument);
    CHECK_THROWS_AS(LatticeConfig::make(5, 1.0, {1, 0, 0, 0, 0}, 9.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(LatticeConfig::make(5, 1.0, {1, 1, 0, 0, 0}, 9.0, 20.0), std::invalid_argument);
    CHECK_THROWS_AS(LatticeConfig::make(5, -1.0, {1, 0, 0, 0, 0}, 9.0, 20.0), std::invalid_argument);
    const auto c = LatticeConfig::defaults();
    CHECK(c.d() == 5);
    CHECK(c.alpha() == 9.0);
    CHECK(c.K() == 20.0);
    CHECK(c.ell_is_e1());
}

TEST_CASE("basis order for a general direction")
{
    const double s = 1.0 / std::sqrt(14.0);
    const auto c = LatticeConfig::make(3, 1.0, {1 * s, -3 * s, 2 * s}, 7.0, 20.0);
    CHECK(c.basis(0).axis == 1);
    CHECK(c.basis(0).sign == -1);
    CHECK(c.basis(1).axis == 2);
    CHECK(c.basis(2).axis == 0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += c.frame(i)[std::size_t(k)] * c.frame(j)[std::size_t(k)];
            CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
    CHECK(c.level(make_point({0, -1, 0})) >= 1.0 / std::sqrt(3.0));
}

TEST_CASE("canonical edges")
{
    const Point x = make_point({1, 2}), y = make_point({1, 3});
    CHECK(canonical_edge(x, y) == canonical_edge(y, x));
    CHECK(canonical_edge(x, y).x == x);
    CHECK_THROWS_AS(canonical_edge(x, make_point({2, 3})), std::invalid_argument);
}

TEST_CASE("pareto quantile and Inv")
{
    const ConductanceLaw law(0.5, LawFamily::pareto);
    CHECK(law.quantile_upper(0.25) == 16.0);
    CHECK(law.inv_tail(16) == 256.0);
    CHECK(law.inv_tail(1) == 1.0);
    CHECK_THROWS_AS(law.inv_tail(0.5), std::domain_error);
    CHECK(law.survival(0.5) == 1.0);
    CHECK(law.survival(4.0) == doctest::Approx(0.5));
}

TEST_CASE("pareto_log Inv agrees with bisection on the tail")
{
    const ConductanceLaw law(0.5, LawFamily::pareto_log);
    CHECK(law.support_min() > std::exp(1.0));
    CHECK(law.survival(law.support_min()) == doctest::Approx(1.0).epsilon(1e-12));
    for (double n : {2.0, 10.0, 1000.0}) {
        // Independent bisection of (1 + ln s) s^{-γ} = 1/n above the support minimum.
        double lo = law.support_min(), hi = 1e30;
        for (int i = 0; i < 400; ++i) {
            const double mid = std::sqrt(lo * hi);
            ((1.0 + std::log(mid)) / std::sqrt(mid) > 1.0 / n ? lo : hi) = mid;
        }
        const double s = law.inv_tail(n);
        CHECK(std::abs((1.0 + std::log(s)) / std::sqrt(s) - 1.0 / n) < 1e-9);
        CHECK(s == doctest::Approx(lo).epsilon(1e-9));
    }
}

TEST_CASE("tilted conductance")
{
    {
        Environment env(line(0.5), ConductanceLaw(0.5, LawFamily::pareto), 1);
        env.set_uniform(1.0);
        CHECK(env.tilted_conductance(canonical_edge(make_point({0}), make_point({1}))) ==
              doctest::Approx(1.648721).epsilon(1e-6));
    }
    {
        Environment env(LatticeConfig::defaults(), ConductanceLaw(0.5, LawFamily::pareto), 1);
        env.set_uniform(1.0);
        const Point x = make_point({3, 7, 0, 0, 0});
        CHECK(env.tilted_conductance(canonical_edge(x, x + unit_point(1))) == doctest::Approx(std::exp(6.0)));
        const Edge e = canonical_edge(make_point({1, 0, 0, 0, 0}), make_point({2, 0, 0, 0, 0}));
        env.set_override(e, 3.2);
        CHECK(env.tilted_conductance(e) == doctest::Approx(3.2 * std::exp(3.0)));
        const Edge far = canonical_edge(make_point({400, 0, 0, 0, 0}), make_point({401, 0, 0, 0, 0}));
        CHECK_THROWS_AS(env.tilted_conductance(far), std::range_error);
        CHECK_NOTHROW(env.tilted_conductance(far, make_point({400, 0, 0, 0, 0})));
    }
}

TEST_CASE("sampling is pure, overrides take precedence")
{
    const auto cfg = LatticeConfig::defaults();
    const ConductanceLaw law(0.5, LawFamily::pareto);
    Environment a(cfg, law, 42), b(cfg, law, 42), c(cfg, law, 43);
    const Edge e = canonical_edge(make_point({5, -3, 2, 0, 1}), make_point({5, -3, 3, 0, 1}));
    CHECK(a.base_conductance(e) == b.base_conductance(e));
    CHECK(a.base_conductance(e) != c.base_conductance(e));
    a.set_override(e, 7.5);
    CHECK(a.base_conductance(e) == 7.5);
    CHECK(a.base_conductance(e) != b.base_conductance(e));
}

TEST_CASE("conductance tail law and independence")
{
    const auto cfg = LatticeConfig::defaults();
    const ConductanceLaw law(0.5, LawFamily::pareto);
    Environment env(cfg, law, 2024);
    Rng rng(3, "probe");
    std::vector<double> xs, ys;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        Point x;
        for (int k = 0; k < 5; ++k) x[k] = Coord(rng.below(2001)) - 1000;
        xs.push_back(env.base_conductance(canonical_edge(x, x + unit_point(0))));
        if (i < 10000) ys.push_back(env.base_conductance(canonical_edge(x, x + unit_point(1))));
    }
    const auto h = hill_estimator(xs, 1000);
    CHECK(h.index >= 0.45);
    CHECK(h.index <= 0.55);
    for (double u : {2.0, 8.0, 32.0}) {
        const double p = double(std::count_if(xs.begin(), xs.end(), [&](double c) { return c >= u; })) / n;
        const double q = law.survival(u);
        CHECK(std::abs(p - q) < 3.0 * std::sqrt(q * (1 - q) / n));
    }
    // Adjacent edges at a common site: correlation of log conductances.
    std::vector<double> a(xs.begin(), xs.begin() + 10000);
    for (auto* v : {&a, &ys})
        for (double& x : *v) x = std::log(x);
    const double ma = mean(a), mb = mean(ys);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (ys[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (ys[i] - mb) * (ys[i] - mb);
    }
    CHECK(std::abs(sab / std::sqrt(saa * sbb)) < 3.0 / std::sqrt(10000.0));
}

TEST_CASE("K-open points")
{
    const auto cfg = LatticeConfig::defaults();
    const ConductanceLaw law(0.5, LawFamily::pareto);
    Environment env(cfg, law, 9);
    const Point x = make_point({0, 0, 0, 0, 0});
    for (const Edge& e : incident_edges(cfg, x)) env.set_override(e, cfg.K());
    CHECK(is_k_open(env, x));
    env.set_override(incident_edges(cfg, x)[3], cfg.K() + 1);
    CHECK_FALSE(is_k_open(env, x));

    Environment fresh(cfg, law, 10);
    Rng rng(4, "kopen");
    int open = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        Point y;
        for (int k = 0; k < 5; ++k) y[k] = Coord(rng.below(4001)) - 2000;
        bool all = true;
        for (const Edge& e : incident_edges(cfg, y)) all = all && is_k_normal(fresh, e);
        CHECK(all == is_k_open(fresh, y));
        open += is_k_open(fresh, y);
    }
    const double q = std::pow(law.normal_probability(cfg.K()), 10.0);
    CHECK(std::abs(double(open) / n - q) < 3.0 * std::sqrt(q * (1 - q) / n));
}

TEST_CASE("K-good search")
{
    const auto cfg = LatticeConfig::defaults();
    Environment env(cfg, ConductanceLaw(0.5, LawFamily::pareto), 11);
    env.set_uniform(1.0);
    CHECK(is_k_good(env, Point{}, 1));
    CHECK(is_k_good(env, Point{}, 40));
    env.set_override(incident_edges(cfg, Point{})[0], 1000.0);
    CHECK_FALSE(is_k_good(env, Point{}, 5));
}

TEST_CASE("omega_K view")
{
    const auto cfg = LatticeConfig::defaults();
    Environment env(cfg, ConductanceLaw(0.5, LawFamily::pareto), 12);
    const Point x1{}, x2 = make_point({0, 4, 0, 0, 0});
    const Environment view = omega_k_view(env, x1, x2);
    CHECK(view.override_count() == 20);
    CHECK(omega_k_view(env, x1, x1).override_count() == 10);
    CHECK(view.base_conductance(canonical_edge(x1, x1 + unit_point(0))) == cfg.K());
    const Edge outside = canonical_edge(make_point({3, 0, 0, 0, 0}), make_point({4, 0, 0, 0, 0}));
    CHECK(view.base_conductance(outside) == env.base_conductance(outside));
    std::size_t changed = 0;
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 6; ++b)
            for (int c = -1; c <= 1; ++c)
                for (int axis = 0; axis < 5; ++axis) {
                    const Point p = make_point({a, b, c, 0, 0});
                    const Edge e = canonical_edge(p, p + unit_point(axis));
                    if (view.base_conductance(e) != env.base_conductance(e)) ++changed;
                }
    CHECK(changed <= 20);
    CHECK(changed >= 1);
}

TEST_CASE("geometry helpers")
{
    const auto cfg = LatticeConfig::defaults();
    CHECK(level(cfg, make_point({3, -2, 0, 0, 0})) == 3.0);
    const auto V = neighborhood(cfg, Point{});
    CHECK(V.size() == 11);
    CHECK(std::set<Point>(V.begin(), V.end()).size() == 11);
    CHECK(incident_edges(cfg, Point{}).size() == 10);
    CHECK(in_box(cfg, Point{}, 0.5, 0.5, Point{}));
    CHECK(in_box(cfg, Point{}, 1.0, 1.0, make_point({1, 0, 0, 0, 0})));
    CHECK_FALSE(in_box(cfg, Point{}, 1.0, 1.0, make_point({1, 2, 0, 0, 0})));
}
