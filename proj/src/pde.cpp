#include "pesa/pde.hpp"

#include <algorithm>
#include <cmath>

#include "pesa/rng.hpp"

namespace pesa {

std::string system_name(System s) {
    switch (s) {
        case System::burgers: return "burgers";
        case System::fn: return "fn";
        case System::gs: return "gs";
    }
    throw ConfigError("unknown system enum value");
}

System system_from_name(const std::string& name) {
    if (name == "burgers") return System::burgers;
    if (name == "fn") return System::fn;
    if (name == "gs") return System::gs;
    throw ConfigError("unknown system '" + name + "' (expected burgers, fn, or gs)");
}

double SystemSpec::coeff(const std::string& key) const {
    auto it = coefficients.find(key);
    if (it == coefficients.end())
        throw ConfigError("missing coefficient '" + key + "' for system " + system_name(name));
    return it->second;
}

std::map<std::string, double> SystemSpec::default_coefficients(System sys) {
    switch (sys) {
        case System::burgers: return {{"nu", 0.005}};
        case System::fn: return {{"mu_u", 1.0}, {"mu_v", 100.0}, {"alpha", 0.01}, {"beta", 0.25}};
        case System::gs: return {{"D_u", 2.0e-5}, {"D_v", 5.0e-6}, {"F", 0.04}, {"k", 0.06}};
    }
    throw ConfigError("unknown system enum value");
}

double SystemSpec::default_dt(System sys) {
    switch (sys) {
        case System::burgers: return 0.001;
        case System::fn: return 0.002;
        case System::gs: return 0.5;
    }
    throw ConfigError("unknown system enum value");
}

double SystemSpec::default_domain_size(System sys) {
    switch (sys) {
        case System::burgers: return 1.0;
        case System::fn: return 128.0;
        case System::gs: return 1.0;
    }
    throw ConfigError("unknown system enum value");
}

std::vector<double> SystemSpec::diffusivities() const {
    switch (name) {
        case System::burgers: return {coeff("nu"), coeff("nu")};
        case System::fn: return {coeff("mu_u"), coeff("mu_v")};
        case System::gs: return {coeff("D_u"), coeff("D_v")};
    }
    throw ConfigError("unknown system enum value");
}

SystemSpec SystemSpec::make(System sys, double domain_size, int grid, double dt,
                            std::map<std::string, double> coefficients) {
    SystemSpec spec;
    spec.name = sys;
    spec.domain_size = domain_size;
    spec.grid = grid;
    spec.dt = dt;
    spec.coefficients = coefficients.empty() ? default_coefficients(sys) : std::move(coefficients);

    if (grid < 2) throw ConfigError("grid must be >= 2, got " + std::to_string(grid));
    if (domain_size <= 0.0) throw ConfigError("domain size must be positive");
    if (dt <= 0.0) throw ConfigError("dt must be positive");

    auto expected = default_coefficients(sys);
    for (const auto& [key, _] : expected)
        if (!spec.coefficients.count(key))
            throw ConfigError("system " + system_name(sys) + " requires coefficient '" + key +
                              "'");
    for (const auto& [key, _] : spec.coefficients)
        if (!expected.count(key))
            throw ConfigError("coefficient '" + key + "' does not belong to system " +
                              system_name(sys));

    const double h = spec.spacing();
    for (double d : spec.diffusivities()) {
        double ratio = d * dt / (h * h);
        if (ratio > 0.25)
            throw ConfigError("stability guard violated for " + system_name(sys) + ": D*dt/h^2 = " +
                              std::to_string(d) + "*" + std::to_string(dt) + "/" +
                              std::to_string(h * h) + " = " + std::to_string(ratio) + " > 0.25");
    }
    return spec;
}

void laplacian(const double* f, int n, double h, double* out) {
    const double inv_h2 = 1.0 / (h * h);
    for (int y = 0; y < n; ++y) {
        int up = (y + n - 1) % n, dn = (y + 1) % n;
        for (int x = 0; x < n; ++x) {
            int lf = (x + n - 1) % n, rt = (x + 1) % n;
            out[y * n + x] = (f[up * n + x] + f[dn * n + x] + f[y * n + lf] + f[y * n + rt] -
                              4.0 * f[y * n + x]) *
                             inv_h2;
        }
    }
}

std::vector<double> laplacian(const std::vector<double>& field, int n, double h) {
    std::vector<double> out(field.size());
    laplacian(field.data(), n, h, out.data());
    return out;
}

namespace {

void check_state(const Field& state, const SystemSpec& spec, const char* op) {
    const std::size_t expect = static_cast<std::size_t>(SystemSpec::channels) * spec.grid *
                               spec.grid;
    if (state.size() != expect)
        throw ConfigError(std::string(op) + ": state has " + std::to_string(state.size()) +
                          " values, expected " + std::to_string(expect));
    for (double v : state)
        if (!std::isfinite(v)) throw BlowupError(std::string(op) + ": non-finite state", 0);
}

void check_finite(const Field& state, const char* op) {
    for (double v : state)
        if (!std::isfinite(v)) throw BlowupError(std::string(op) + ": non-finite result", 0);
}

}  // namespace

Field step_burgers(const Field& state, const SystemSpec& spec) {
    if (spec.name != System::burgers) throw ConfigError("step_burgers: spec is not burgers");
    check_state(state, spec, "step_burgers");
    const int n = spec.grid;
    const double h = spec.spacing();
    const double nu = spec.coeff("nu");
    const double dt = spec.dt;
    const double inv2h = 1.0 / (2.0 * h);
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const double* u = state.data();
    const double* v = state.data() + nn;

    std::vector<double> lap_u(nn), lap_v(nn);
    laplacian(u, n, h, lap_u.data());
    laplacian(v, n, h, lap_v.data());

    Field next(state.size());
    for (int y = 0; y < n; ++y) {
        int up = (y + n - 1) % n, dn = (y + 1) % n;
        for (int x = 0; x < n; ++x) {
            int lf = (x + n - 1) % n, rt = (x + 1) % n;
            std::size_t i = static_cast<std::size_t>(y) * n + x;
            double ux = (u[y * n + rt] - u[y * n + lf]) * inv2h;
            double uy = (u[dn * n + x] - u[up * n + x]) * inv2h;
            double vx = (v[y * n + rt] - v[y * n + lf]) * inv2h;
            double vy = (v[dn * n + x] - v[up * n + x]) * inv2h;
            next[i] = u[i] + dt * (-u[i] * ux - v[i] * uy + nu * lap_u[i]);
            next[nn + i] = v[i] + dt * (-u[i] * vx - v[i] * vy + nu * lap_v[i]);
        }
    }
    check_finite(next, "step_burgers");
    return next;
}

Field step_fn(const Field& state, const SystemSpec& spec) {
    if (spec.name != System::fn) throw ConfigError("step_fn: spec is not fn");
    check_state(state, spec, "step_fn");
    const int n = spec.grid;
    const double h = spec.spacing();
    const double mu_u = spec.coeff("mu_u"), mu_v = spec.coeff("mu_v");
    const double alpha = spec.coeff("alpha"), beta = spec.coeff("beta");
    const double dt = spec.dt;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const double* u = state.data();
    const double* v = state.data() + nn;

    std::vector<double> lap_u(nn), lap_v(nn);
    laplacian(u, n, h, lap_u.data());
    laplacian(v, n, h, lap_v.data());

    Field next(state.size());
    for (std::size_t i = 0; i < nn; ++i) {
        next[i] = u[i] + dt * (mu_u * lap_u[i] + u[i] - u[i] * u[i] * u[i] - v[i] + alpha);
        next[nn + i] = v[i] + dt * (mu_v * lap_v[i] + (u[i] - v[i]) * beta);
    }
    check_finite(next, "step_fn");
    return next;
}

Field step_gs(const Field& state, const SystemSpec& spec) {
    if (spec.name != System::gs) throw ConfigError("step_gs: spec is not gs");
    check_state(state, spec, "step_gs");
    const int n = spec.grid;
    const double h = spec.spacing();
    const double du = spec.coeff("D_u"), dv = spec.coeff("D_v");
    const double feed = spec.coeff("F"), kill = spec.coeff("k");
    const double dt = spec.dt;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const double* u = state.data();
    const double* v = state.data() + nn;

    std::vector<double> lap_u(nn), lap_v(nn);
    laplacian(u, n, h, lap_u.data());
    laplacian(v, n, h, lap_v.data());

    Field next(state.size());
    for (std::size_t i = 0; i < nn; ++i) {
        double uvv = u[i] * v[i] * v[i];
        next[i] = u[i] + dt * (du * lap_u[i] - uvv + feed * (1.0 - u[i]));
        next[nn + i] = v[i] + dt * (dv * lap_v[i] + uvv - (feed + kill) * v[i]);
    }
    check_finite(next, "step_gs");
    return next;
}

Field step_system(const Field& state, const SystemSpec& spec) {
    switch (spec.name) {
        case System::burgers: return step_burgers(state, spec);
        case System::fn: return step_fn(state, spec);
        case System::gs: return step_gs(state, spec);
    }
    throw ConfigError("unknown system enum value");
}

namespace {

double periodic_dist(double a, double b, double length) {
    double d = std::abs(a - b);
    return std::min(d, length - d);
}

Field ic_burgers(const SystemSpec& spec, Rng& rng) {
    const int n = spec.grid;
    const double len = spec.domain_size;
    const double width = len / 8.0;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    Field f(2 * nn, 0.0);
    for (int ch = 0; ch < 2; ++ch)
        for (int b = 0; b < spec.ic_bumps; ++b) {
            double amp = rng.uniform(-1.0, 1.0);
            double cx = rng.uniform(0.0, len);
            double cy = rng.uniform(0.0, len);
            for (int y = 0; y < n; ++y) {
                double py = (y + 0.5) * spec.spacing();
                double dy = periodic_dist(py, cy, len);
                for (int x = 0; x < n; ++x) {
                    double px = (x + 0.5) * spec.spacing();
                    double dx = periodic_dist(px, cx, len);
                    f[ch * nn + y * n + x] +=
                        amp * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
                }
            }
        }
    return f;
}

Field ic_fn(const SystemSpec& spec, Rng& rng) {
    const std::size_t nn = static_cast<std::size_t>(spec.grid) * spec.grid;
    Field f(2 * nn);
    for (double& v : f) v = spec.ic_sigma * rng.normal();
    for (int w = 0; w < spec.ic_warmup; ++w) f = step_fn(f, spec);
    return f;
}

Field ic_gs(const SystemSpec& spec, Rng& rng) {
    const int n = spec.grid;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    Field f(2 * nn);
    std::fill(f.begin(), f.begin() + nn, 1.0);
    std::fill(f.begin() + nn, f.end(), 0.0);
    const int side = std::max(1, n / 10);
    for (int p = 0; p < spec.ic_patches; ++p) {
        int cy = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
        int cx = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
        for (int dy = 0; dy < side; ++dy)
            for (int dx = 0; dx < side; ++dx) {
                std::size_t i = static_cast<std::size_t>((cy + dy) % n) * n + (cx + dx) % n;
                f[i] = 0.5;
                f[nn + i] = 0.25;
            }
    }
    return f;
}

}  // namespace

Field gen_ic(const SystemSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    switch (spec.name) {
        case System::burgers: return ic_burgers(spec, rng);
        case System::fn: return ic_fn(spec, rng);
        case System::gs: return ic_gs(spec, rng);
    }
    throw ConfigError("unknown system enum value");
}

}  // namespace pesa
