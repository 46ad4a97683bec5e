#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pesa {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values appeared during time stepping; `step` is the solver or
// rollout step that produced them.
struct BlowupError : std::runtime_error {
    BlowupError(const std::string& what, std::size_t step_idx)
        : std::runtime_error(what), step(step_idx) {}
    std::size_t step;
};

enum class System { burgers, fn, gs };

std::string system_name(System s);
System system_from_name(const std::string& name);

// Two-channel (u, v) state on an N x N periodic grid, flat [c][row][col].
using Field = std::vector<double>;

struct SystemSpec {
    System name = System::burgers;
    double domain_size = 1.0;  // L, physical length per side
    int grid = 32;             // N, points per side
    double dt = 1e-3;          // solver step (s)
    std::map<std::string, double> coefficients;

    // Initial-condition knobs (defaults per system; all overridable).
    int ic_bumps = 4;      // burgers: Gaussian bumps per channel
    int ic_warmup = 2000;  // fn: warm-up solver steps after seeding noise
    int ic_patches = 3;    // gs: square perturbation patches
    double ic_sigma = 1.0; // fn: noise standard deviation

    static constexpr int channels = 2;

    double spacing() const { return domain_size / grid; }
    double coeff(const std::string& key) const;

    // Validates the coefficient set and the explicit-scheme stability bound
    // D*dt/h^2 <= 0.25 for every diffusive channel.
    static SystemSpec make(System sys, double domain_size, int grid, double dt,
                           std::map<std::string, double> coefficients = {});
    static std::map<std::string, double> default_coefficients(System sys);
    static double default_dt(System sys);
    static double default_domain_size(System sys);

    // Diffusivities per state channel (nu/nu, mu_u/mu_v, D_u/D_v).
    std::vector<double> diffusivities() const;
};

// 5-point periodic Laplacian of one N x N channel.
void laplacian(const double* field, int n, double h, double* out);
std::vector<double> laplacian(const std::vector<double>& field, int n, double h);

// One forward-Euler step of the named system. Throws BlowupError on
// non-finite input or output.
Field step_burgers(const Field& state, const SystemSpec& spec);
Field step_fn(const Field& state, const SystemSpec& spec);
Field step_gs(const Field& state, const SystemSpec& spec);
Field step_system(const Field& state, const SystemSpec& spec);

// Seeded initial condition; deterministic in (spec, seed).
Field gen_ic(const SystemSpec& spec, std::uint64_t seed);

}  // namespace pesa
