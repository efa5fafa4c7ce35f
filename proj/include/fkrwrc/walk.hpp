#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "fkrwrc/lattice.hpp"
#include "fkrwrc/rng.hpp"

namespace fkrwrc {

inline constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

struct EnhancedState {
    Point x;
    int z = 0;

    friend bool operator==(const EnhancedState&, const EnhancedState&) = default;
};

/// Transition data at one site, by direction index.
struct SiteKernel {
    Point x;
    int n = 0;
    std::array<double, 2 * kMaxDim> p{};
    std::array<double, 2 * kMaxDim> pk{};
    bool k_open = false;
};

SiteKernel site_kernel(const Environment& env, const Point& x);

std::vector<double> transition_distribution(const Environment& env, const Point& x);
/// Same kernel from absolute tilted conductances with coordinates taken relative to `origin`.
std::vector<double> transition_distribution_absolute(const Environment& env, const Point& x, const Point& origin);
/// Entries (dir, z=1), (dir, z=0) for dir = +e_1, −e_1, …, +e_d, −e_d.
std::vector<double> enhanced_transition_distribution(const Environment& env, const EnhancedState& s);

/// Source of uniforms in (0, 1] addressed by (step counter, lane).
class UniformSource {
  public:
    virtual ~UniformSource() = default;
    virtual double uniform(std::uint64_t counter, std::uint32_t lane) const = 0;
};

class StreamSource final : public UniformSource {
  public:
    explicit StreamSource(CounterStream s) : stream_(s) {}
    double uniform(std::uint64_t counter, std::uint32_t lane) const override { return stream_.uniform(counter, lane); }

  private:
    CounterStream stream_;
};

/// Replays a fixed list of uniforms, one per step.
class ForcedUniforms final : public UniformSource {
  public:
    explicit ForcedUniforms(std::vector<double> values) : values_(std::move(values)) {}
    double uniform(std::uint64_t counter, std::uint32_t lane) const override;

  private:
    std::vector<double> values_;
};

/// Stream of the walk with the given indices.
CounterStream walk_stream(std::uint64_t master_seed, std::uint64_t env_index, std::uint64_t walk_index);

class Trajectory {
  public:
    Trajectory() = default;
    Trajectory(const LatticeConfig& config, EnhancedState start, Point origin = {});

    const LatticeConfig& config() const { return *config_; }
    const std::vector<EnhancedState>& states() const { return states_; }
    const EnhancedState& start() const { return states_.front(); }
    const EnhancedState& back() const { return states_.back(); }
    const EnhancedState& operator[](std::size_t i) const { return states_[i]; }
    std::size_t step_count() const { return states_.size() - 1; }
    std::size_t size() const { return states_.size(); }
    double max_level() const { return max_level_; }
    const Point& origin() const { return origin_; }

    /// Appends a state; throws unless it is a nearest neighbour of the last one.
    void push(const EnhancedState& s);
    double recomputed_max_level() const;

  private:
    std::shared_ptr<const LatticeConfig> config_;
    std::vector<EnhancedState> states_;
    Point origin_;
    double max_level_ = 0.0;
};

/// Index into the enhanced vector selected by inverse-CDF sampling of U.
int sample_enhanced_index(const SiteKernel& k, double U);

void step(const Environment& env, Trajectory& traj, const UniformSource& source);

enum class RunStatus { hit, truncated };

struct RunOutcome {
    RunStatus status = RunStatus::truncated;
    std::size_t index = 0;
};

using StopPredicate = std::function<bool(const Trajectory&)>;
using StepFunction = std::function<void(Trajectory&)>;

RunOutcome run_until(Trajectory& traj, const StopPredicate& stop, std::uint64_t max_steps, const StepFunction& advance);
RunOutcome run_until(const Environment& env, Trajectory& traj, const StopPredicate& stop, std::uint64_t max_steps,
                     const UniformSource& source);
StopPredicate level_at_least(double R);

void write_trajectory(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory(std::istream& is, const LatticeConfig& config);

/// One simulated move: a single step, or a compressed run of back-and-forth steps on one edge.
struct Move {
    enum class Kind : std::uint8_t { step, bounce };
    Kind kind = Kind::step;
    /// step: X_{time−1} = from, X_time = to. bounce: X_time = from (b), partner to (a).
    Point from;
    Point to;
    int dir = 0;
    int z = 0;
    std::uint64_t time = 0;
    /// bounce only: number of steps along the edge, and arrival times of the first z = 0 step
    /// leaving b and leaving a (kNever if none).
    std::uint64_t count = 0;
    std::uint64_t zero_from_b = kNever;
    std::uint64_t zero_from_a = kNever;
};

struct WalkerOptions {
    /// Compress back-and-forth runs when p(b,a)·p(a,b) reaches this value; > 1 disables.
    double compress_threshold = 0.5;
};

/// Streaming simulator with a bounded site cache and exact trap compression.
class Walker {
  public:
    Walker(const Environment& env, CounterStream stream, Point start, WalkerOptions options = {});

    /// Performs one move without letting the time pass `time_cap`.
    Move next(std::uint64_t time_cap = kNever);

    const Point& position() const { return pos_; }
    std::uint64_t time() const { return time_; }
    std::uint64_t moves() const { return moves_; }
    const SiteKernel& kernel(const Point& x);
    const Environment& environment() const { return *env_; }

  private:
    const Environment* env_;
    CounterStream stream_;
    WalkerOptions options_;
    Point pos_;
    Point prev_;
    int prev_dir_ = -1;
    bool pending_exit_ = false;
    int exclude_dir_ = -1;
    std::uint64_t time_ = 0;
    std::uint64_t moves_ = 0;
    std::vector<SiteKernel> cache_;
    std::vector<std::uint8_t> cache_valid_;
    std::size_t cache_mask_ = 0;
};

}  // namespace fkrwrc
