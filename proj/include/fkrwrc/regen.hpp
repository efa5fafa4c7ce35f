#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "fkrwrc/lattice.hpp"
#include "fkrwrc/walk.hpp"

namespace fkrwrc {

struct RegenerationRecord {
    std::size_t k = 0;
    std::uint64_t tau = 0;
    Point point;
    /// NaN until the next epoch is known.
    double chi = 0.0;
    bool confirmed = false;
    bool has_increment = false;
    std::uint64_t dtau = 0;
    Point dx;
};

/// First K-open ladder time of a stored trajectory.
std::optional<std::size_t> ladder_time(const Environment& env, const Trajectory& traj);
std::optional<std::size_t> ladder_time(const Trajectory& traj, const std::function<bool(const Point&)>& k_open);

enum class DefectKind { back, ori, open };

struct DefectResult {
    DefectKind kind = DefectKind::open;
    /// D if finite, else the observed horizon.
    std::size_t n = 0;
    std::optional<std::size_t> back;
    std::optional<std::size_t> ori;
};

/// D = BACK ∧ ORI for a trajectory that starts at the candidate.
DefectResult detect_D(const LatticeConfig& config, const Trajectory& from_candidate);

/// Running minimum and maximum of the frame projections.
struct Extents {
    std::array<double, kMaxDim> lo{};
    std::array<double, kMaxDim> hi{};

    void reset(const LatticeConfig& config, const Point& x);
    void add(const LatticeConfig& config, const Point& x);
};

/// Smallest integer m ≥ 0 with the block inside 𝓑(m, m^α), from block extents around the base point.
double chi_from_extents(const LatticeConfig& config, const Extents& ext, const Point& base);
std::vector<double> chi(const LatticeConfig& config, const std::vector<RegenerationRecord>& records,
                        const Trajectory& traj);

struct RegenBudget {
    /// Walk time allowed between the previous regeneration (or start) and the next one.
    std::uint64_t max_segment_steps = 10'000'000;
    std::uint64_t max_moves = kNever;
};

struct RegenResult {
    std::vector<RegenerationRecord> records;
    bool truncated = false;
    std::uint64_t candidates = 0;
    std::uint64_t failures = 0;
    std::uint64_t moves = 0;
    std::uint64_t time = 0;
    double max_level = 0.0;
    /// Confirmed records later seen to backtrack or re-trigger ORI.
    std::uint64_t violations = 0;
};

/// Online (S_n, R_n, M_n) iteration over a stream of moves.
class RegenTracker {
  public:
    RegenTracker(const LatticeConfig& config, double delta, std::function<bool(const Point&)> k_open);

    void start(const Point& x0, std::uint64_t t0 = 0);
    void on_move(const Move& mv);

    const std::vector<RegenerationRecord>& records() const { return records_; }
    std::uint64_t candidates() const { return candidates_; }
    std::uint64_t failures() const { return failures_; }
    std::uint64_t violations() const { return violations_; }
    double max_level() const { return rmax_; }
    std::uint64_t time() const { return time_; }
    /// Time of the last confirmed regeneration, or the start time.
    std::uint64_t segment_start() const { return records_.empty() ? t0_ : records_.back().tau; }

  private:
    struct Candidate {
        std::uint64_t time;
        Point point;
        double level;
        double base_level;
        bool triggered = false;
        std::uint64_t trigger_time = 0;
        double M = 0.0;
        Extents ext;
        std::vector<std::pair<std::uint64_t, Extents>> snapshots;
    };

    void trigger(Candidate& c, std::uint64_t n);
    void visit(const Point& x, std::uint64_t n);
    void zero_step(const Point& from, std::uint64_t n);
    void resolve();

    LatticeConfig config_;
    double delta_;
    std::function<bool(const Point&)> k_open_;
    double e1_level_;
    std::uint64_t t0_ = 0;
    std::uint64_t time_ = 0;
    double rmax_ = 0.0;
    double floor_ = -INFINITY;
    int chain_ = 0;
    bool fresh_ = true;
    std::deque<Candidate> pending_;
    std::deque<Candidate> watch_;
    std::optional<Candidate> last_;
    std::vector<RegenerationRecord> records_;
    std::uint64_t candidates_ = 0;
    std::uint64_t failures_ = 0;
    std::uint64_t violations_ = 0;
};

RegenResult regeneration_sequence(const Environment& env, CounterStream stream, std::size_t target_count, double delta,
                                  RegenBudget budget = {}, Point start = {}, WalkerOptions options = {});

/// Same iteration driven by an arbitrary move source (mock samplers, injected paths).
RegenResult regeneration_sequence(const LatticeConfig& config, const std::function<bool(const Point&)>& k_open,
                                  const std::function<std::optional<Move>()>& next, Point start, std::size_t target_count,
                                  double delta, RegenBudget budget = {});

/// Moves of a stored trajectory, one step each; empty once exhausted.
std::function<std::optional<Move>()> replay_moves(const Trajectory& traj);

}  // namespace fkrwrc
