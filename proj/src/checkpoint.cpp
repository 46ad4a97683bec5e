#include "pesa/checkpoint.hpp"

#include <algorithm>
#include <cstring>

#include "pesa/pde.hpp"

namespace pesa {

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return {{"state_channels", cfg.state_channels},
            {"pi_channels", cfg.pi_channels},
            {"pi_layers", cfg.pi_layers},
            {"kernel_size", cfg.kernel_size},
            {"dt", cfg.dt},
            {"h", cfg.h},
            {"modes1", cfg.modes1},
            {"modes2", cfg.modes2},
            {"enc_width", cfg.enc_width},
            {"dec_width", cfg.dec_width},
            {"attn_hidden", cfg.attn_hidden},
            {"variant", variant_name(cfg.variant)},
            {"pyconv_init", cfg.pyconv_init},
            {"pyconv_trainable", cfg.pyconv_trainable},
            {"init_seed", cfg.init_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "state_channels", "pi_channels", "pi_layers", "kernel_size", "dt", "h",
        "modes1", "modes2", "enc_width", "dec_width", "attn_hidden", "variant",
        "pyconv_init", "pyconv_trainable", "init_seed"};
    for (auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown model config key '" + key + "'");

    ModelConfig cfg;
    auto get = [&](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("state_channels", cfg.state_channels);
    get("pi_channels", cfg.pi_channels);
    get("pi_layers", cfg.pi_layers);
    get("kernel_size", cfg.kernel_size);
    get("dt", cfg.dt);
    get("h", cfg.h);
    get("modes1", cfg.modes1);
    get("modes2", cfg.modes2);
    get("enc_width", cfg.enc_width);
    get("dec_width", cfg.dec_width);
    get("attn_hidden", cfg.attn_hidden);
    if (j.contains("variant")) cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    get("pyconv_init", cfg.pyconv_init);
    get("pyconv_trainable", cfg.pyconv_trainable);
    get("init_seed", cfg.init_seed);
    return cfg;
}

namespace {

constexpr char kMagic[4] = {'P', 'S', 'C', 'K'};
constexpr unsigned char kVersion = 0x01;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Cursor {
    const unsigned char* p;
    std::size_t left;
    const std::string& path;

    void need(std::size_t n) const {
        if (left < n) throw IoError("truncated payload in '" + path + "'");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, p, 8);
        p += 8;
        left -= 8;
        return v;
    }
};

}  // namespace

void write_checkpoint(const PeSANet& model, const std::string& path) {
    nlohmann::json header = {{"config", model_config_to_json(model.config())},
                             {"grid", model.grid()}};
    const std::string hj = header.dump();

    std::string bytes;
    bytes.append(kMagic, 4);
    bytes.push_back(static_cast<char>(kVersion));
    put_u32(bytes, static_cast<std::uint32_t>(hj.size()));
    bytes += hj;

    const ParamSet& params = model.params();
    put_u32(bytes, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(bytes, static_cast<std::uint32_t>(p.name.size()));
        bytes += p.name;
        put_u32(bytes, static_cast<std::uint32_t>(p.value.ndim()));
        for (std::size_t d : p.value.shape()) put_u64(bytes, d);
        for (double v : p.value.data()) {
            char buf[8];
            std::memcpy(buf, &v, 8);
            bytes.append(buf, 8);
        }
    }
    atomic_write_file(path, bytes);
}

PeSANet read_checkpoint(const std::string& path) {
    std::string bytes = read_file(path);
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("bad magic in '" + path + "'");
    if (static_cast<unsigned char>(bytes[4]) != kVersion)
        throw IoError("unsupported checkpoint version in '" + path + "'");

    Cursor cur{reinterpret_cast<const unsigned char*>(bytes.data()) + 5, bytes.size() - 5, path};
    std::uint32_t hlen = cur.u32();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(cur.str(hlen));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed header in '" + path + "': " + e.what());
    }

    ModelConfig cfg;
    std::size_t grid;
    try {
        cfg = model_config_from_json(header.at("config"));
        grid = header.at("grid").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed header in '" + path + "': " + e.what());
    }

    PeSANet model(cfg, grid);
    ParamSet& params = model.params();
    std::uint32_t count = cur.u32();
    if (count != params.size())
        throw IoError("checkpoint '" + path + "' holds " + std::to_string(count) +
                      " parameters, config-built skeleton has " + std::to_string(params.size()));

    for (auto& p : params) {
        std::uint32_t name_len = cur.u32();
        std::string name = cur.str(name_len);
        if (name != p.name)
            throw IoError("checkpoint '" + path + "': parameter '" + name +
                          "' does not match skeleton parameter '" + p.name + "'");
        std::uint32_t rank = cur.u32();
        Shape shape(rank);
        for (auto& d : shape) d = cur.u64();
        if (shape != p.value.shape())
            throw IoError("checkpoint '" + path + "': parameter '" + name + "' has shape " +
                          shape_str(shape) + ", skeleton expects " + shape_str(p.value.shape()));
        auto& dst = p.value.mutable_data();
        for (double& v : dst) v = cur.f64();
    }
    if (cur.left != 0) throw IoError("trailing bytes after payload in '" + path + "'");
    return model;
}

}  // namespace pesa
