#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fkrwrc {

inline constexpr int kMaxDim = 8;
using Coord = std::int32_t;

struct Point {
    std::array<Coord, kMaxDim> c{};

    Coord& operator[](int i) { return c[std::size_t(i)]; }
    Coord operator[](int i) const { return c[std::size_t(i)]; }

    friend bool operator==(const Point&, const Point&) = default;
    friend auto operator<=>(const Point&, const Point&) = default;
};

Point operator+(Point a, const Point& b);
Point operator-(Point a, const Point& b);
Point unit_point(int axis, int sign = 1);
Point make_point(std::initializer_list<Coord> coords);
int l1_distance(const Point& a, const Point& b, int d);
std::string to_string(const Point& x, int d);

struct PointHash {
    std::size_t operator()(const Point& x) const noexcept;
};

struct SignedAxis {
    int axis = 0;
    int sign = 1;
};

/// Geometry: dimension, bias, box exponent, ellipticity bound and the ordered basis.
class LatticeConfig {
  public:
    /// Validating constructor. lambda = 0 is accepted for symmetric test kernels.
    static LatticeConfig make(int d, double lambda, const std::vector<double>& ell, double alpha, double K);
    static LatticeConfig defaults(int d = 5);

    int d() const { return d_; }
    double lambda() const { return lambda_; }
    double alpha() const { return alpha_; }
    double K() const { return K_; }
    const std::array<double, kMaxDim>& ell() const { return ell_; }
    bool ell_is_e1() const { return ell_is_e1_; }

    /// Ordered basis e_1..e_d (e_1·ℓ ≥ … ≥ e_d·ℓ ≥ 0), as signed standard axes.
    SignedAxis basis(int k) const { return basis_[std::size_t(k)]; }
    /// Orthonormal frame f_1 = ℓ, f_2..f_d.
    const std::array<double, kMaxDim>& frame(int k) const { return frame_[std::size_t(k)]; }

    double level(const Point& x) const;
    double project(const Point& x, int k) const;

    /// Direction index: 2k is +e_{k+1}, 2k+1 is −e_{k+1}.
    int directions() const { return 2 * d_; }
    Point direction(int dir) const;
    Point step(Point x, int dir) const;
    double direction_level(int dir) const { return dir_level_[std::size_t(dir)]; }
    static int opposite(int dir) { return dir ^ 1; }
    /// Direction index of y − x, or −1 if not nearest neighbours.
    int direction_to(const Point& x, const Point& y) const;

  private:
    int d_ = 0;
    double lambda_ = 0.0;
    double alpha_ = 0.0;
    double K_ = 1.0;
    bool ell_is_e1_ = false;
    std::array<double, kMaxDim> ell_{};
    std::array<SignedAxis, kMaxDim> basis_{};
    std::array<std::array<double, kMaxDim>, kMaxDim> frame_{};
    std::array<double, 2 * kMaxDim> dir_level_{};
};

/// Nearest-neighbour edge, endpoints ordered lexicographically.
struct Edge {
    Point x;
    Point y;
    int axis = 0;

    friend bool operator==(const Edge& a, const Edge& b) { return a.x == b.x && a.axis == b.axis; }
};

Edge canonical_edge(const Point& x, const Point& y);

struct EdgeHash {
    std::size_t operator()(const Edge& e) const noexcept;
};

enum class LawFamily { pareto, pareto_log };

std::string to_string(LawFamily f);
LawFamily parse_law_family(const std::string& s);

/// Law of c_*: P(c_* ≥ u) = L(u)u^{−γ} on its support.
class ConductanceLaw {
  public:
    ConductanceLaw() = default;
    ConductanceLaw(double gamma, LawFamily family);

    double gamma() const { return gamma_; }
    LawFamily family() const { return family_; }
    double support_min() const { return support_min_; }

    double slowly_varying(double u) const;
    /// P(c_* ≥ u).
    double survival(double u) const;
    /// Inverse of the survival function at U ∈ (0, 1].
    double quantile_upper(double U) const;
    double inv_tail(double n) const;
    /// P(c_* ∈ [1/K, K]).
    double normal_probability(double K) const;

  private:
    double solve_survival(double target) const;

    double gamma_ = 0.5;
    LawFamily family_ = LawFamily::pareto;
    double support_min_ = 1.0;
};

struct CachePolicy {
    std::size_t site_cache_entries = 4096;
};

class Environment {
  public:
    Environment(LatticeConfig config, ConductanceLaw law, std::uint64_t seed);

    const LatticeConfig& config() const { return config_; }
    const ConductanceLaw& law() const { return law_; }
    std::uint64_t seed() const { return seed_; }
    const CachePolicy& cache_policy() const { return cache_; }
    void set_cache_policy(CachePolicy c) { cache_ = c; }

    /// c_*(e): override if present, else the uniform value if set, else the sample.
    double base_conductance(const Edge& e) const;
    double sampled_conductance(const Edge& e) const;
    double tilted_conductance(const Edge& e) const;
    double tilted_conductance(const Edge& e, const Point& origin) const;

    void set_override(const Edge& e, double value);
    void set_uniform(double value);
    std::optional<double> uniform_value() const { return uniform_; }
    std::size_t override_count() const { return overrides_.size(); }
    bool has_override(const Edge& e) const { return overrides_.count(e) != 0; }

    double max_tilt_exponent() const { return max_tilt_exponent_; }
    void set_max_tilt_exponent(double v) { max_tilt_exponent_ = v; }

  private:
    LatticeConfig config_;
    ConductanceLaw law_;
    std::uint64_t seed_;
    std::uint64_t edge_key_;
    std::unordered_map<Edge, double, EdgeHash> overrides_;
    std::optional<double> uniform_;
    double max_tilt_exponent_ = 700.0;
    CachePolicy cache_;
};

/// Seed of the environment with the given index under a master seed.
std::uint64_t environment_seed(std::uint64_t master_seed, std::uint64_t env_index);

bool is_k_normal(const Environment& env, const Edge& e);
bool is_k_open(const Environment& env, const Point& x);
bool is_k_good(const Environment& env, const Point& x, int depth);
Environment omega_k_view(const Environment& env, const Point& x1, const Point& x2);

double level(const LatticeConfig& config, const Point& x);
std::vector<Point> neighborhood(const LatticeConfig& config, const Point& x);
std::vector<Edge> incident_edges(const LatticeConfig& config, const Point& x);
bool in_box(const LatticeConfig& config, const Point& y, double L, double Lp, const Point& x);

}  // namespace fkrwrc
