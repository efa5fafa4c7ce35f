#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fkrwrc/lattice.hpp"
#include "fkrwrc/walk.hpp"

namespace fkrwrc {

enum class EnvMode { same, independent };

/// Two dense walks; `env2` differs from `env1` only in independent mode.
struct JointTrajectory {
    const Environment* env1 = nullptr;
    const Environment* env2 = nullptr;
    Trajectory traj1;
    Trajectory traj2;
    EnvMode mode = EnvMode::same;
    bool truncated = false;

    const Trajectory& traj(int i) const { return i == 0 ? traj1 : traj2; }
    const Environment& env(int i) const { return i == 0 ? *env1 : *env2; }
};

struct JointRegenRecord {
    std::size_t k = 0;
    long level = 0;
    std::array<std::uint64_t, 2> hit_time{};
    std::array<Point, 2> point{};
    bool confirmed = false;
};

/// Levels R whose first entry is a K-open ladder entry (ℓ = e_1).
std::vector<long> ladder_entry_levels(const Trajectory& traj, const std::function<bool(const Point&)>& k_open);

struct LadderLevel {
    std::optional<long> level;
    bool truncated = false;
};

/// Smallest R > start_level with both first entries into level R being K-open ladder entries.
LadderLevel joint_ladder_level(const JointTrajectory& joint, long start_level);

struct WalkDefect {
    std::optional<std::size_t> back;
    std::optional<std::size_t> ori;
    /// 𝒟^{•i}_{≤R} if finite.
    std::optional<std::size_t> D;
    /// Running max level at the trigger, if any.
    std::optional<double> M;
};

struct JointDefect {
    std::array<WalkDefect, 2> walk;
    /// M = M^1 ∧ M^2; empty means open at the horizon.
    std::optional<double> M;
};

/// 𝒟^{•i}_{≤R} for two walks that start at time `from[i]` of the stored trajectories.
JointDefect joint_defect(const JointTrajectory& joint, std::array<std::size_t, 2> from, double horizon_R);

struct JointBudget {
    std::uint64_t max_steps = 10'000'000;
    std::uint64_t max_moves = kNever;
};

struct JointRegenResult {
    std::vector<JointRegenRecord> records;
    bool truncated = false;
    std::uint64_t candidates = 0;
    std::uint64_t failures = 0;
    std::uint64_t violations = 0;
    std::array<std::uint64_t, 2> moves{};
    /// Smallest level still eligible as the next candidate when the run stopped.
    long next_threshold = 0;
    long max_level = 0;
};

using MoveSource = std::function<std::optional<Move>()>;

struct JointStop {
    std::size_t target_count = 1;
    /// Stop once every level below this is known not to be 𝓛_1 (0 disables).
    long decide_below = 0;
};

/// (L_k, M_k) iteration over two move sources (ℓ = e_1).
JointRegenResult joint_regeneration_levels(const LatticeConfig& config,
                                           std::array<std::function<bool(const Point&)>, 2> k_open,
                                           std::array<MoveSource, 2> sources, std::array<Point, 2> starts,
                                           JointStop stop, double delta, JointBudget budget = {});
JointRegenResult joint_regeneration_levels(const Environment& env, std::array<CounterStream, 2> streams,
                                           std::array<Point, 2> starts, JointStop stop, double delta,
                                           JointBudget budget = {}, WalkerOptions options = {});

/// The same iteration evaluated directly on stored traces via joint_defect.
std::vector<JointRegenRecord> joint_regeneration_levels_bruteforce(const JointTrajectory& joint,
                                                                   std::size_t target_count, double delta);

struct SeparationReport {
    std::vector<long> R_grid;
    std::vector<bool> event;
    /// Minimal ℓ1 distance between the traces beyond R, or −1 if larger than `distance_cap`.
    std::vector<int> min_distance;
    int distance_cap = 2;
    bool truncated = false;
};

using Trace = std::vector<Point>;

/// 𝐌_R on finite traces: some pair of trace points beyond level R is within ℓ1 distance 2.
SeparationReport separation_event(const LatticeConfig& config, const Trace& trace1, const Trace& trace2,
                                  const std::vector<long>& R_grid, int distance_cap = 2);
Trace trace_of(const Trajectory& traj);

/// Distinct sites visited before the first entry into level ≥ horizon.
struct PairTraces {
    Trace trace1;
    Trace trace2;
    bool truncated = false;
    std::array<std::uint64_t, 2> moves{};
};

PairTraces run_pair_traces(const Environment& env1, const Environment& env2, std::array<CounterStream, 2> streams,
                           std::array<Point, 2> starts, double horizon, std::uint64_t max_steps,
                           std::uint64_t max_moves, WalkerOptions options = {});

/// Dense pair of `steps` steps each; independent mode uses a second environment with a derived seed.
JointTrajectory run_pair(EnvMode mode, const Environment& env, Environment* second, const Point& U1, const Point& U2,
                         std::uint64_t steps, std::array<CounterStream, 2> streams);
Environment independent_environment(const Environment& env);

/// Checks that the start point lies in 𝒰 = {U : |U·ℓ| < e_1·ℓ}.
void require_start_in_U(const LatticeConfig& config, const Point& U);

enum class OmegaFunctional { one, positive_exit };

struct OmegaKResult {
    double mean_omega = 0.0;
    double mean_omega_k = 0.0;
    double difference = 0.0;
    double stderr_ = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t rejections = 0;
    std::uint64_t nonzero = 0;
    std::uint64_t truncated = 0;
};

struct OmegaKOptions {
    std::uint64_t seed = 1;
    long horizon_R = 16;
    std::uint64_t n_samples = 10000;
    OmegaFunctional functional = OmegaFunctional::one;
    int exit_radius = 8;
    std::uint64_t max_env_draws = 100'000'000;
    std::uint64_t max_steps = 10'000'000;
    WalkerOptions walker;
    unsigned threads = 1;
};

/// Weight of one pair of walks run to T^i_R: f · 1{BACK and visit clauses open} · Π p_K/p over the
/// steps whose departure point lies in 𝓥_{x1} ∪ 𝓥_{x2} (the conditional probability of ORI staying open).
double omega_k_pair_weight(const Environment& env, std::array<CounterStream, 2> streams, std::array<Point, 2> starts,
                           long horizon_R, OmegaFunctional f, int exit_radius, std::uint64_t max_steps,
                           WalkerOptions options, bool* truncated = nullptr);

/// Paired comparison of E[f·1{𝒟^•_{≤R} open}] under ω and ω_K.
OmegaKResult omega_k_invariance_test(const std::function<Environment(std::uint64_t)>& env_sampler, const Point& x1,
                                     const Point& x2, const OmegaKOptions& options);

}  // namespace fkrwrc
