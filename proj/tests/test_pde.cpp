#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pesa/pde.hpp"
#include "pesa/rng.hpp"

using namespace pesa;

namespace {

Field roll(const Field& f, int n, int sy, int sx) {
    Field out(f.size());
    std::size_t nn = static_cast<std::size_t>(n) * n;
    for (int ch = 0; ch < 2; ++ch)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                out[ch * nn + ((y + sy) % n) * n + (x + sx) % n] = f[ch * nn + y * n + x];
    return out;
}

double max_drift(const Field& a, const Field& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace

TEST_CASE("laplacian: constants, analytic sine, linearity") {
    const int n = 64;
    const double L = 2.0, h = L / n;

    std::vector<double> c(n * n, 7.5);
    for (double v : laplacian(c, n, h)) CHECK(v == 0.0);

    std::vector<double> s(n * n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) s[y * n + x] = std::sin(2.0 * std::numbers::pi * x * h / L);
    auto lap = laplacian(s, n, h);
    const double k2 = std::pow(2.0 * std::numbers::pi / L, 2);
    double worst = 0.0;
    for (int i = 0; i < n * n; ++i) worst = std::max(worst, std::abs(lap[i] + k2 * s[i]));
    CHECK(worst < 0.02 * k2);  // O(h^2) truncation

    Rng rng(30);
    std::vector<double> a(n * n), b(n * n);
    for (auto* f : {&a, &b})
        for (double& v : *f) v = rng.uniform(-1.0, 1.0);
    std::vector<double> comb(n * n);
    for (int i = 0; i < n * n; ++i) comb[i] = 2.0 * a[i] + 3.0 * b[i];
    auto lc = laplacian(comb, n, h);
    auto la = laplacian(a, n, h), lb = laplacian(b, n, h);
    for (int i = 0; i < n * n; ++i)
        CHECK(lc[i] == doctest::Approx(2.0 * la[i] + 3.0 * lb[i]).epsilon(1e-12));
}

TEST_CASE("burgers: constant states are exact fixed points") {
    auto spec = SystemSpec::make(System::burgers, 1.0, 16, 0.001);
    std::size_t nn = 16 * 16;
    Field state(2 * nn);
    std::fill(state.begin(), state.begin() + nn, 0.7);
    std::fill(state.begin() + nn, state.end(), -1.3);
    Field next = step_burgers(state, spec);
    CHECK(max_drift(state, next) == 0.0);
}

TEST_CASE("burgers: small-amplitude sine decays at the heat-equation rate") {
    const int n = 32;
    auto spec = SystemSpec::make(System::burgers, 1.0, n, 0.001);
    const double nu = spec.coeff("nu"), eps = 1e-4;
    std::size_t nn = static_cast<std::size_t>(n) * n;
    Field state(2 * nn, 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            state[y * n + x] = eps * std::sin(2.0 * std::numbers::pi * x / n);

    const int steps = 100;
    Field cur = state;
    for (int s = 0; s < steps; ++s) cur = step_burgers(cur, spec);

    double e0 = 0.0, e1 = 0.0;
    for (std::size_t i = 0; i < nn; ++i) {
        e0 += state[i] * state[i];
        e1 += cur[i] * cur[i];
    }
    double measured = std::sqrt(e1 / e0);  // amplitude ratio
    double predicted = std::exp(-nu * std::pow(2.0 * std::numbers::pi / spec.domain_size, 2) *
                                steps * spec.dt);
    CHECK(std::abs(measured - predicted) / predicted < 0.01);
}

TEST_CASE("fn: uniform u = v = 0.01^(1/3) drifts < 1e-9 per step over 1000 steps") {
    auto spec = SystemSpec::make(System::fn, 128.0, 16, 0.002);
    const double fp = std::cbrt(0.01);  // root of u - u^3 - v + alpha with v = u
    Field state(2 * 16 * 16, fp);
    Field cur = state;
    for (int s = 0; s < 1000; ++s) {
        Field next = step_fn(cur, spec);
        CHECK(max_drift(cur, next) < 1e-9);
        cur = std::move(next);
    }
    CHECK(max_drift(state, cur) < 1e-6);
}

TEST_CASE("fn: default coefficients match the published configuration") {
    auto coeffs = SystemSpec::default_coefficients(System::fn);
    CHECK(coeffs.at("alpha") == 0.01);
    CHECK(coeffs.at("beta") == 0.25);
    CHECK(coeffs.at("mu_u") == 1.0);
    CHECK(coeffs.at("mu_v") == 100.0);
    CHECK(SystemSpec::default_dt(System::fn) == 0.002);
    CHECK(SystemSpec::default_coefficients(System::burgers).at("nu") == 0.005);
    CHECK(SystemSpec::default_dt(System::burgers) == 0.001);
}

TEST_CASE("gs: uniform (1, 0) is an exact fixed point") {
    auto spec = SystemSpec::make(System::gs, 1.0, 16, 0.5);
    CHECK(spec.coeff("D_u") == 2.0e-5);
    CHECK(spec.coeff("D_v") == 5.0e-6);
    std::size_t nn = 16 * 16;
    Field state(2 * nn, 0.0);
    std::fill(state.begin(), state.begin() + nn, 1.0);
    Field cur = state;
    for (int s = 0; s < 100; ++s) cur = step_gs(cur, spec);
    CHECK(max_drift(state, cur) == 0.0);
}

TEST_CASE("gs: one Euler step on a 4x4 state matches a scalar reference to 1e-12") {
    const int n = 4;
    auto spec = SystemSpec::make(System::gs, 1.0, n, 0.5);
    std::size_t nn = static_cast<std::size_t>(n) * n;
    Field state(2 * nn);
    Rng rng(31);
    for (double& v : state) v = rng.uniform(0.0, 1.0);

    Field got = step_gs(state, spec);

    // Independent scalar reference, written directly from the governing
    // equations with explicit modular indexing.
    const double du = 2.0e-5, dv = 5.0e-6, F = 0.04, k = 0.06, dt = 0.5;
    const double h = 1.0 / n;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * n + x;
            auto at = [&](const double* f, int yy, int xx) {
                return f[((yy + n) % n) * n + (xx + n) % n];
            };
            const double* u = state.data();
            const double* v = state.data() + nn;
            double lap_u = (at(u, y - 1, x) + at(u, y + 1, x) + at(u, y, x - 1) +
                            at(u, y, x + 1) - 4.0 * u[i]) / (h * h);
            double lap_v = (at(v, y - 1, x) + at(v, y + 1, x) + at(v, y, x - 1) +
                            at(v, y, x + 1) - 4.0 * v[i]) / (h * h);
            double uvv = u[i] * v[i] * v[i];
            double eu = u[i] + dt * (du * lap_u - uvv + F * (1.0 - u[i]));
            double ev = v[i] + dt * (dv * lap_v + uvv - (F + k) * v[i]);
            CHECK(std::abs(got[i] - eu) < 1e-12);
            CHECK(std::abs(got[nn + i] - ev) < 1e-12);
        }
}

TEST_CASE("all solvers are shift-equivariant under periodic BCs") {
    const int n = 12;
    Rng rng(32);
    auto check_system = [&](const SystemSpec& spec, double lo, double hi) {
        Field state(2 * static_cast<std::size_t>(n) * n);
        for (double& v : state) v = rng.uniform(lo, hi);
        Field rolled = roll(state, n, 3, 5);
        Field a = roll(step_system(state, spec), n, 3, 5);
        Field b = step_system(rolled, spec);
        CHECK(max_drift(a, b) == 0.0);
    };
    check_system(SystemSpec::make(System::burgers, 1.0, n, 0.001), -0.5, 0.5);
    check_system(SystemSpec::make(System::fn, 128.0, n, 0.002), -0.5, 0.5);
    check_system(SystemSpec::make(System::gs, 1.0, n, 0.5), 0.0, 1.0);
}

TEST_CASE("stability guard rejects D*dt/h^2 > 0.25 at construction") {
    // FN on a unit domain at 32^2: mu_v * dt / h^2 = 100 * 0.002 * 1024 >> 0.25.
    CHECK_THROWS_AS(SystemSpec::make(System::fn, 1.0, 32, 0.002), ConfigError);
    CHECK_NOTHROW(SystemSpec::make(System::fn, 128.0, 32, 0.002));
    // Error message names the violated inequality.
    try {
        SystemSpec::make(System::fn, 1.0, 32, 0.002);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("0.25") != std::string::npos);
    }
}

TEST_CASE("spec construction validates the coefficient set") {
    CHECK_THROWS_AS(SystemSpec::make(System::burgers, 1.0, 16, 0.001, {{"mu_u", 1.0}}),
                    ConfigError);
    CHECK_THROWS_AS(
        SystemSpec::make(System::burgers, 1.0, 16, 0.001, {{"nu", 0.005}, {"F", 0.04}}),
        ConfigError);
    CHECK_THROWS_AS(SystemSpec::make(System::gs, 1.0, 16, 0.5, {{"D_u", 2e-5}}), ConfigError);
}

TEST_CASE("blow-up detection raises instead of propagating NaN") {
    auto spec = SystemSpec::make(System::burgers, 1.0, 8, 0.001);
    Field state(2 * 64, 0.0);
    state[5] = std::nan("");
    CHECK_THROWS_AS(step_burgers(state, spec), BlowupError);
}

TEST_CASE("gen_ic is deterministic in (spec, seed)") {
    for (System sys : {System::burgers, System::fn, System::gs}) {
        auto spec = SystemSpec::make(sys, SystemSpec::default_domain_size(sys), 16,
                                     SystemSpec::default_dt(sys));
        spec.ic_warmup = 50;  // keep FN fast
        Field a = gen_ic(spec, 42);
        Field b = gen_ic(spec, 42);
        Field c = gen_ic(spec, 43);
        CHECK(a == b);
        CHECK(a != c);
    }
}

TEST_CASE("gs IC with zero patches is the uniform (1, 0) background") {
    auto spec = SystemSpec::make(System::gs, 1.0, 16, 0.5);
    spec.ic_patches = 0;
    Field f = gen_ic(spec, 1);
    std::size_t nn = 16 * 16;
    for (std::size_t i = 0; i < nn; ++i) {
        CHECK(f[i] == 1.0);
        CHECK(f[nn + i] == 0.0);
    }
}

TEST_CASE("gs IC patches take the (0.5, 0.25) perturbation values") {
    auto spec = SystemSpec::make(System::gs, 1.0, 20, 0.5);
    Field f = gen_ic(spec, 9);
    std::size_t nn = 20 * 20;
    std::size_t patched = 0;
    for (std::size_t i = 0; i < nn; ++i) {
        bool in_patch = f[i] == 0.5;
        CHECK(f[i] == (in_patch ? 0.5 : 1.0));
        CHECK(f[nn + i] == (in_patch ? 0.25 : 0.0));
        patched += in_patch;
    }
    // 3 patches of side 2 on a 20^2 grid; overlap may reduce the count.
    CHECK(patched > 0);
    CHECK(patched <= 12);
}

TEST_CASE("fn IC with zero warm-up is raw Gaussian noise with near-zero mean") {
    const int n = 64;
    auto spec = SystemSpec::make(System::fn, 128.0, n, 0.002);
    spec.ic_warmup = 0;
    Field f = gen_ic(spec, 123);
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double bound = 3.0 * spec.ic_sigma / std::sqrt(2.0 * n * n);
    CHECK(std::abs(mean) < bound);
    // Sample variance should be near sigma^2 as well.
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    var /= static_cast<double>(f.size());
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}
