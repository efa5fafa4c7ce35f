#include "fkrwrc/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fkrwrc {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& s, std::size_t line, const std::string& key)
{
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
        throw ConfigError(line, key + ": expected a finite real, got '" + s + "'");
    return v;
}

std::uint64_t to_uint(const std::string& s, std::size_t line, const std::string& key)
{
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(line, key + ": expected a nonnegative integer, got '" + s + "'");
    errno = 0;
    const auto v = std::strtoull(s.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigError(line, key + ": integer out of range");
    return v;
}

long to_long(const std::string& s, std::size_t line, const std::string& key)
{
    const std::string digits = !s.empty() && s[0] == '-' ? s.substr(1) : s;
    const auto v = to_uint(digits, line, key);
    if (v > std::uint64_t(std::numeric_limits<long>::max())) throw ConfigError(line, key + ": integer out of range");
    return s[0] == '-' ? -long(v) : long(v);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
    return out;
}

void require(bool ok, std::size_t line, const std::string& msg)
{
    if (!ok) throw ConfigError(line, msg);
}

struct Field {
    std::string section;
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&, std::size_t)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Field>& fields()
{
    using C = ExperimentConfig;
    auto u64 = [](const char* key, std::uint64_t C::*m, std::uint64_t lo, const char* range) {
        return [key, m, lo, range](C& c, const std::string& v, std::size_t line) {
            const auto x = to_uint(v, line, key);
            require(x >= lo, line, std::string(key) + " = " + v + " out of range: " + range);
            c.*m = x;
        };
    };
    auto get_u64 = [](std::uint64_t C::*m) { return [m](const C& c) { return std::to_string(c.*m); }; };
    auto real = [](const char* key, double C::*m, std::function<bool(double)> ok, const char* range) {
        return [key, m, ok, range](C& c, const std::string& v, std::size_t line) {
            const double x = to_double(v, line, key);
            require(ok(x), line, std::string(key) + " = " + v + " out of range: " + range);
            c.*m = x;
        };
    };
    auto get_real = [](double C::*m) { return [m](const C& c) { return fmt(c.*m); }; };

    static const std::vector<Field> table{
        {"", "experiment",
         [](C& c, const std::string& v, std::size_t line) {
             const auto& names = experiment_names();
             if (std::find(names.begin(), names.end(), v) == names.end())
                 throw ConfigError(line, "unknown experiment '" + v + "'");
             c.experiment = v;
         },
         [](const C& c) { return c.experiment; }},
        {"", "seed", [](C& c, const std::string& v, std::size_t line) { c.seed = to_uint(v, line, "seed"); },
         [](const C& c) { return std::to_string(c.seed); }},
        {"", "threads",
         [](C& c, const std::string& v, std::size_t line) {
             const auto t = to_uint(v, line, "threads");
             require(t >= 1 && t <= 1024, line, "threads = " + v + " out of range: threads ∈ [1, 1024]");
             c.threads = unsigned(t);
         },
         [](const C& c) { return std::to_string(c.threads); }},
        {"", "out",
         [](C& c, const std::string& v, std::size_t line) {
             require(!v.empty(), line, "out must be a nonempty path");
             c.out = v;
         },
         [](const C& c) { return c.out; }},

        {"lattice", "d",
         [](C& c, const std::string& v, std::size_t line) {
             const auto d = to_uint(v, line, "d");
             require(d >= 2 && d <= std::uint64_t(kMaxDim), line,
                     "d = " + v + " out of range: d ∈ [2, " + std::to_string(kMaxDim) + "]");
             c.d = int(d);
         },
         [](const C& c) { return std::to_string(c.d); }},
        {"lattice", "lambda", real("lambda", &C::lambda, [](double x) { return x > 0.0 && x <= 50.0; }, "λ ∈ (0, 50]"),
         get_real(&C::lambda)},
        {"lattice", "ell",
         [](C& c, const std::string& v, std::size_t line) {
             c.ell.clear();
             for (const auto& item : split_list(v)) c.ell.push_back(to_double(item, line, "ell"));
             require(!c.ell.empty(), line, "ell must list d components");
         },
         [](const C& c) { return join<double>(c.ell, fmt); }},
        {"lattice", "alpha", real("alpha", &C::alpha, [](double x) { return x > 0.0; }, "α > d + 3"), get_real(&C::alpha)},
        {"lattice", "K", real("K", &C::K, [](double x) { return x >= 1.0; }, "K ≥ 1"), get_real(&C::K)},

        {"law", "gamma", real("gamma", &C::gamma, [](double x) { return x > 0.0 && x < 1.0; }, "γ ∈ (0,1)"),
         get_real(&C::gamma)},
        {"law", "family",
         [](C& c, const std::string& v, std::size_t line) {
             try {
                 c.family = parse_law_family(v);
             } catch (const std::exception&) {
                 throw ConfigError(line, "family must be pareto or pareto_log, got '" + v + "'");
             }
         },
         [](const C& c) { return to_string(c.family); }},
        {"law", "uniform_conductance",
         [](C& c, const std::string& v, std::size_t line) {
             if (v == "none") {
                 c.uniform_conductance.reset();
                 return;
             }
             const double x = to_double(v, line, "uniform_conductance");
             require(x > 0.0, line, "uniform_conductance = " + v + " out of range: c > 0 or none");
             c.uniform_conductance = x;
         },
         [](const C& c) { return c.uniform_conductance ? fmt(*c.uniform_conductance) : std::string("none"); }},

        {"budget", "n_env", u64("n_env", &C::n_env, 1, "n_env ≥ 1"), get_u64(&C::n_env)},
        {"budget", "n_walk", u64("n_walk", &C::n_walk, 1, "n_walk ≥ 1"), get_u64(&C::n_walk)},
        {"budget", "max_steps", u64("max_steps", &C::max_steps, 1, "max_steps ≥ 1"), get_u64(&C::max_steps)},
        {"budget", "max_moves", u64("max_moves", &C::max_moves, 1, "max_moves ≥ 1"), get_u64(&C::max_moves)},
        {"budget", "delta", real("delta", &C::delta, [](double x) { return x > 0.0; }, "Δ > 0"), get_real(&C::delta)},
        {"budget", "truncation_tolerance",
         real("truncation_tolerance", &C::truncation_tolerance, [](double x) { return x >= 0.0 && x <= 1.0; }, "tolerance ∈ [0, 1]"),
         get_real(&C::truncation_tolerance)},

        {"params", "n_list",
         [](C& c, const std::string& v, std::size_t line) {
             c.n_list.clear();
             for (const auto& item : split_list(v)) c.n_list.push_back(to_uint(item, line, "n_list"));
             for (std::size_t i = 0; i < c.n_list.size(); ++i)
                 require(c.n_list[i] >= 1 && (i == 0 || c.n_list[i] > c.n_list[i - 1]), line,
                         "n_list must be strictly increasing positive integers");
         },
         [](const C& c) { return join<std::uint64_t>(c.n_list, [](auto x) { return std::to_string(x); }); }},
        {"params", "t_grid",
         [](C& c, const std::string& v, std::size_t line) {
             c.t_grid.clear();
             for (const auto& item : split_list(v)) c.t_grid.push_back(to_double(item, line, "t_grid"));
             require(!c.t_grid.empty(), line, "t_grid must not be empty");
             for (std::size_t i = 0; i < c.t_grid.size(); ++i)
                 require(c.t_grid[i] >= 0.0 && (i == 0 || c.t_grid[i] > c.t_grid[i - 1]), line,
                         "t_grid must be strictly increasing and nonnegative");
         },
         [](const C& c) { return join<double>(c.t_grid, fmt); }},
        {"params", "R_grid",
         [](C& c, const std::string& v, std::size_t line) {
             c.R_grid.clear();
             for (const auto& item : split_list(v)) c.R_grid.push_back(to_long(item, line, "R_grid"));
             require(!c.R_grid.empty(), line, "R_grid must not be empty");
             for (std::size_t i = 0; i < c.R_grid.size(); ++i)
                 require(c.R_grid[i] >= 1 && (i == 0 || c.R_grid[i] > c.R_grid[i - 1]), line,
                         "R_grid must be strictly increasing positive integers");
         },
         [](const C& c) { return join<long>(c.R_grid, [](auto x) { return std::to_string(x); }); }},
        {"params", "u_list",
         [](C& c, const std::string& v, std::size_t line) {
             c.u_list.clear();
             for (const auto& item : split_list(v)) c.u_list.push_back(to_double(item, line, "u_list"));
             require(!c.u_list.empty(), line, "u_list must not be empty");
             for (double u : c.u_list) require(u > 0.0, line, "u_list entries must be positive");
         },
         [](const C& c) { return join<double>(c.u_list, fmt); }},
        {"params", "horizon",
         [](C& c, const std::string& v, std::size_t line) {
             const long h = to_long(v, line, "horizon");
             require(h >= 2, line, "horizon = " + v + " out of range: horizon ≥ 2");
             c.horizon = h;
         },
         [](const C& c) { return std::to_string(c.horizon); }},
        {"params", "eta", real("eta", &C::eta, [](double x) { return x > 0.0 && x <= 1.0; }, "η ∈ (0, 1]"),
         get_real(&C::eta)},
        {"params", "rho", real("rho", &C::rho, [](double x) { return x > 0.0; }, "ρ > 0"), get_real(&C::rho)},
        {"params", "functional",
         [](C& c, const std::string& v, std::size_t line) {
             require(v == "one" || v == "positive_exit" || v == "both", line,
                     "functional must be one, positive_exit or both");
             c.functional = v;
         },
         [](const C& c) { return c.functional; }},
        {"params", "env_mode",
         [](C& c, const std::string& v, std::size_t line) {
             require(v == "same" || v == "independent" || v == "both", line,
                     "env_mode must be same, independent or both");
             c.env_mode = v;
         },
         [](const C& c) { return c.env_mode; }},
        {"params", "samples", u64("samples", &C::samples, 0, "samples ≥ 0"), get_u64(&C::samples)},
        {"params", "hill_k", u64("hill_k", &C::hill_k, 1, "hill_k ≥ 1"), get_u64(&C::hill_k)},
        {"params", "records", u64("records", &C::records, 1, "records ≥ 1"), get_u64(&C::records)},
        {"params", "clock_step", real("clock_step", &C::clock_step, [](double x) { return x > 0.0 && x <= 1.0; }, "step ∈ (0, 1]"),
         get_real(&C::clock_step)},
    };
    return table;
}

std::vector<std::uint64_t> powers_of_two(int lo, int hi)
{
    std::vector<std::uint64_t> v;
    for (int k = lo; k <= hi; ++k) v.push_back(std::uint64_t(1) << k);
    return v;
}

void apply_experiment_defaults(ExperimentConfig& c)
{
    const std::string& e = c.experiment;
    c.t_grid = {0.25, 0.5, 0.75, 1.0};
    c.R_grid = {4, 16, 64};
    c.u_list = {2.0, 8.0, 32.0};
    if (e == "drift") {
        c.n_env = 200;
        c.n_list = powers_of_two(12, 18);
    } else if (e == "tail") {
        c.samples = 100000;
    } else if (e == "regen") {
        c.n_env = 100;
        c.records = 100;
    } else if (e == "joint") {
        c.n_env = 1000;
        c.n_list = {8, 16, 32};
        c.horizon = 16;
        c.samples = 10000;
        c.records = 3;
        c.functional = "both";
    } else if (e == "separation") {
        c.n_env = 500;
        c.horizon = 256;
    } else if (e == "variance") {
        c.n_env = 200;
        c.n_walk = 200;
        c.n_list = {256, 1024, 4096};
    } else if (e == "smalltime") {
        c.n_env = 1000;
        c.n_list = {1024, 16384};
        c.samples = 100000;
    } else if (e == "pointmass") {
        c.n_env = 10000;
        c.n_list = {4, 16, 64};
    } else if (e == "fk") {
        c.n_env = 100;
        c.records = 200;
        c.samples = 1000;
    } else if (e == "oracle") {
        c.samples = 100000;
    }
}

}  // namespace

LatticeConfig ExperimentConfig::lattice() const { return LatticeConfig::make(d, lambda, ell, alpha, K); }

ConductanceLaw ExperimentConfig::law() const { return ConductanceLaw(gamma, family); }

ExperimentConfig parse_config(const std::string& text)
{
    struct Entry {
        std::string value;
        std::size_t line;
    };
    std::map<std::string, Entry> entries;
    std::string section;
    std::istringstream is(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(lineno, "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "lattice" && section != "law" && section != "budget" && section != "params")
                throw ConfigError(lineno, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(lineno, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
        if (it == table.end()) throw ConfigError(lineno, "unknown key '" + key + "'");
        if (it->section != section)
            throw ConfigError(lineno, "key '" + key + "' belongs in " +
                                          (it->section.empty() ? std::string("the root section")
                                                               : "[" + it->section + "]"));
        if (entries.count(key)) throw ConfigError(lineno, "duplicate key '" + key + "'");
        entries[key] = {value, lineno};
    }

    ExperimentConfig c;
    const auto exp = entries.find("experiment");
    if (exp == entries.end()) throw ConfigError(0, "missing required key 'experiment'");
    fields().front().set(c, exp->second.value, exp->second.line);
    apply_experiment_defaults(c);
    for (const auto& f : fields()) {
        const auto it = entries.find(f.key);
        if (it != entries.end()) f.set(c, it->second.value, it->second.line);
    }

    auto line_of = [&](const std::string& key) {
        const auto it = entries.find(key);
        return it == entries.end() ? std::size_t(0) : it->second.line;
    };
    if (!entries.count("ell")) {
        c.ell.assign(std::size_t(c.d), 0.0);
        c.ell[0] = 1.0;
    }
    if (!entries.count("rho")) c.rho = 0.9 * c.eta / c.gamma;
    if (!entries.count("hill_k")) {
        if (c.experiment == "tail")
            c.hill_k = std::max<std::uint64_t>(1, c.samples / 100);
        else
            c.hill_k = std::max<std::uint64_t>(1, c.n_env * c.n_walk * std::max<std::uint64_t>(c.records, 1) / 10);
    }
    const auto& e = c.experiment;
    if (e == "drift" || e == "joint" || e == "variance" || e == "smalltime" || e == "pointmass")
        require(!c.n_list.empty(), line_of("n_list"), e + " needs a nonempty n_list");
    if (!entries.count("records")) {
        if (c.experiment == "variance" || c.experiment == "pointmass")
            c.records = c.n_list.back() + 2;
        else if (c.experiment == "smalltime")
            c.records = std::uint64_t(std::floor(std::pow(double(c.n_list.back()), 1.0 - c.eta))) + 2;
        else if (c.records == 0)
            c.records = 1;
    }

    require(int(c.ell.size()) == c.d, line_of("ell"), "ell must have d = " + std::to_string(c.d) + " components");
    double norm2 = 0.0;
    for (double x : c.ell) norm2 += x * x;
    require(std::abs(std::sqrt(norm2) - 1.0) <= 1e-12, line_of("ell"), "ell must be a unit vector");
    require(c.alpha > c.d + 3.0, line_of("alpha"), "alpha = " + fmt(c.alpha) + " out of range: α > d + 3");
    require(c.rho < c.eta / c.gamma, line_of("rho"),
            "rho = " + fmt(c.rho) + " violates ρ < η/γ = " + fmt(c.eta / c.gamma));
    for (double t : c.t_grid)
        require(!(c.experiment == "fk" && t <= 0.0), line_of("t_grid"), "fk needs positive t_grid entries");
    if (c.experiment == "joint" || c.experiment == "separation") {
        bool e1 = c.ell[0] == 1.0;
        for (int i = 1; i < c.d; ++i) e1 = e1 && c.ell[std::size_t(i)] == 0.0;
        require(e1, line_of("ell"), c.experiment + " requires ell = e_1");
    }
    if (c.experiment == "pointmass" || c.experiment == "variance")
        require(c.records >= c.n_list.back() + 2, line_of("records"), "records must be at least max(n_list) + 2");
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(0, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& config)
{
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            section = f.section;
            out += "\n[" + section + "]\n";
        }
        out += f.key + " = " + f.get(config) + "\n";
    }
    return out;
}

void apply_environment_overrides(ExperimentConfig& config)
{
    if (const char* s = std::getenv("FKRWRC_SEED")) config.seed = to_uint(trim(s), 0, "FKRWRC_SEED");
    if (const char* t = std::getenv("FKRWRC_THREADS")) {
        const auto n = to_uint(trim(t), 0, "FKRWRC_THREADS");
        require(n >= 1 && n <= 1024, 0, "FKRWRC_THREADS out of range: [1, 1024]");
        config.threads = unsigned(n);
    }
}

}  // namespace fkrwrc
