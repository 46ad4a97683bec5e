#include "pesa/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace pesa {

Trajectory simulate(const SystemSpec& spec, std::uint64_t seed, int snapshots, int save_stride) {
    if (snapshots < 1) throw ConfigError("simulate: need at least one snapshot");
    if (save_stride < 1) throw ConfigError("simulate: save_stride must be >= 1");

    Trajectory traj;
    traj.spec = spec;
    traj.seed = seed;
    traj.save_stride = save_stride;
    traj.snapshots = snapshots;
    traj.data.resize(traj.snapshot_len() * snapshots);

    Field state = gen_ic(spec, seed);
    std::copy(state.begin(), state.end(), traj.snapshot(0));
    for (int t = 1; t < snapshots; ++t) {
        for (int s = 0; s < save_stride; ++s) {
            try {
                state = step_system(state, spec);
            } catch (const BlowupError& e) {
                throw BlowupError(e.what(), static_cast<std::size_t>(t - 1) * save_stride + s);
            }
        }
        std::copy(state.begin(), state.end(), traj.snapshot(t));
    }
    return traj;
}

namespace {

constexpr char kMagic[4] = {'P', 'S', 'T', 'R'};
constexpr unsigned char kVersion = 0x01;

nlohmann::json spec_to_json(const SystemSpec& spec) {
    return {{"system", system_name(spec.name)},
            {"L", spec.domain_size},
            {"N", spec.grid},
            {"channels", SystemSpec::channels},
            {"dt", spec.dt},
            {"coefficients", spec.coefficients},
            {"ic_bumps", spec.ic_bumps},
            {"ic_warmup", spec.ic_warmup},
            {"ic_patches", spec.ic_patches},
            {"ic_sigma", spec.ic_sigma}};
}

SystemSpec spec_from_json(const nlohmann::json& j) {
    std::map<std::string, double> coeffs;
    for (auto& [k, v] : j.at("coefficients").items()) coeffs[k] = v.get<double>();
    SystemSpec spec = SystemSpec::make(system_from_name(j.at("system").get<std::string>()),
                                       j.at("L").get<double>(), j.at("N").get<int>(),
                                       j.at("dt").get<double>(), std::move(coeffs));
    if (j.contains("ic_bumps")) spec.ic_bumps = j.at("ic_bumps").get<int>();
    if (j.contains("ic_warmup")) spec.ic_warmup = j.at("ic_warmup").get<int>();
    if (j.contains("ic_patches")) spec.ic_patches = j.at("ic_patches").get<int>();
    if (j.contains("ic_sigma")) spec.ic_sigma = j.at("ic_sigma").get<double>();
    return spec;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + tmp + "' for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw IoError("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
}

void write_trajectory(const Trajectory& t, const std::string& path) {
    nlohmann::json header = spec_to_json(t.spec);
    header["save_stride"] = t.save_stride;
    header["T"] = t.snapshots;
    header["seed"] = t.seed;
    const std::string hj = header.dump();

    std::string bytes;
    bytes.reserve(9 + hj.size() + t.data.size() * 4);
    bytes.append(kMagic, 4);
    bytes.push_back(static_cast<char>(kVersion));
    put_u32(bytes, static_cast<std::uint32_t>(hj.size()));
    bytes += hj;
    for (double v : t.data) {
        float f = static_cast<float>(v);
        char buf[4];
        std::memcpy(buf, &f, 4);
        bytes.append(buf, 4);
    }
    atomic_write_file(path, bytes);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

Trajectory read_trajectory(const std::string& path) {
    std::string bytes = read_file(path);

    if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("bad magic in '" + path + "'");
    if (static_cast<unsigned char>(bytes[4]) != kVersion)
        throw IoError("unsupported version " + std::to_string(static_cast<unsigned>(
                          static_cast<unsigned char>(bytes[4]))) + " in '" + path + "'");
    std::uint32_t hlen = get_u32(reinterpret_cast<const unsigned char*>(bytes.data() + 5));
    if (bytes.size() < 9 + static_cast<std::size_t>(hlen))
        throw IoError("truncated payload: header extends past end of '" + path + "'");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(9, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed header in '" + path + "': " + e.what());
    }

    Trajectory t;
    try {
        t.spec = spec_from_json(header);
        t.save_stride = header.at("save_stride").get<int>();
        t.snapshots = header.at("T").get<int>();
        t.seed = header.at("seed").get<std::uint64_t>();
        if (header.at("channels").get<int>() != SystemSpec::channels)
            throw IoError("unsupported channel count in '" + path + "'");
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed header in '" + path + "': " + e.what());
    }
    if (t.snapshots < 1 || t.save_stride < 1)
        throw IoError("malformed header in '" + path + "': non-positive T or save_stride");

    const std::size_t want = t.snapshot_len() * t.snapshots;
    const std::size_t have = (bytes.size() - 9 - hlen) / 4;
    if ((bytes.size() - 9 - hlen) % 4 != 0 || have < want)
        throw IoError("size mismatch in '" + path + "': header declares " +
                      std::to_string(want) + " floats, payload holds " + std::to_string(have));
    if (have > want)
        throw IoError("size mismatch in '" + path + "': trailing bytes after payload");

    t.data.resize(want);
    const char* p = bytes.data() + 9 + hlen;
    for (std::size_t i = 0; i < want; ++i) {
        float v;
        std::memcpy(&v, p + 4 * i, 4);
        t.data[i] = static_cast<double>(v);
    }
    for (double v : t.data)
        if (!std::isfinite(v)) throw IoError("non-finite value in payload of '" + path + "'");
    return t;
}

}  // namespace pesa
