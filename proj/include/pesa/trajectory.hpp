#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pesa/io.hpp"
#include "pesa/pde.hpp"

namespace pesa {

// Time-ordered snapshots of a simulated system. data is flat
// [t][channel][row][col]; snapshot 0 is the initial condition. Values are
// f32-representable after any file round trip.
struct Trajectory {
    SystemSpec spec;
    std::uint64_t seed = 0;
    int save_stride = 1;  // solver steps per stored snapshot
    int snapshots = 0;    // T
    std::vector<double> data;

    std::size_t snapshot_len() const {
        return static_cast<std::size_t>(SystemSpec::channels) * spec.grid * spec.grid;
    }
    const double* snapshot(int t) const { return data.data() + snapshot_len() * t; }
    double* snapshot(int t) { return data.data() + snapshot_len() * t; }
    // Physical time between stored snapshots.
    double snapshot_dt() const { return spec.dt * save_stride; }
};

// Pure function of (spec, seed, snapshots, save_stride): IC plus
// (snapshots-1) * save_stride solver steps.
Trajectory simulate(const SystemSpec& spec, std::uint64_t seed, int snapshots, int save_stride);

// PSTR container: "PSTR" + version 0x01, u32-LE JSON header length, JSON
// header {system, L, N, channels, dt, save_stride, T, seed, coefficients, ic_*},
// then T*c*N*N little-endian f32 payload. Bit-exact round trip.
void write_trajectory(const Trajectory& t, const std::string& path);
Trajectory read_trajectory(const std::string& path);

}  // namespace pesa
