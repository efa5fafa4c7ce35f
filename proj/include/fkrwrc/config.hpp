#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fkrwrc/lattice.hpp"

namespace fkrwrc {

inline const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names{"drift",    "tail",      "regen", "joint", "separation",
                                                "variance", "smalltime", "pointmass", "fk",    "oracle"};
    return names;
}

/// Error carrying the 1-based line of the offending entry (0 when not tied to a line).
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::size_t line, const std::string& what)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
    {
    }
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
    std::string out = "out";

    // [lattice]
    int d = 5;
    double lambda = 1.0;
    std::vector<double> ell;
    double alpha = 9.0;
    double K = 20.0;

    // [law]
    double gamma = 0.5;
    LawFamily family = LawFamily::pareto;
    std::optional<double> uniform_conductance;

    // [budget]
    std::uint64_t n_env = 1;
    std::uint64_t n_walk = 1;
    std::uint64_t max_steps = 10'000'000;
    std::uint64_t max_moves = 100'000'000;
    double delta = 6.0;
    double truncation_tolerance = 0.01;

    // [params]
    std::vector<std::uint64_t> n_list;
    std::vector<double> t_grid;
    std::vector<long> R_grid;
    std::vector<double> u_list;
    long horizon = 256;
    double eta = 0.5;
    double rho = 0.9;
    std::string functional = "one";
    std::string env_mode = "both";
    std::uint64_t samples = 0;
    std::uint64_t hill_k = 0;
    std::uint64_t records = 0;
    double clock_step = 1e-3;

    LatticeConfig lattice() const;
    ConductanceLaw law() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// INI text: root keys, then [lattice], [law], [budget], [params]. Unset keys take per-experiment defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved config in the same format; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& config);

/// FKRWRC_SEED and FKRWRC_THREADS, if set.
void apply_environment_overrides(ExperimentConfig& config);

}  // namespace fkrwrc
