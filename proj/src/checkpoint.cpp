#include "dmce/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dmce/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace dmce {

namespace {

constexpr char kMagic[5] = {'D', 'M', 'C', 'E', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw ConfigError(path + ": truncated checkpoint");
    return v;
}

double read_f64(std::istream& is, const std::string& path) {
    double v = 0.0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw ConfigError(path + ": truncated checkpoint");
    return v;
}

void write_magic(std::ostream& os) { os.write(kMagic, sizeof(kMagic)); }

void check_magic(std::istream& is, const std::string& path) {
    char buf[sizeof(kMagic)] = {};
    if (!is.read(buf, sizeof(buf)) || std::memcmp(buf, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError(path + ": not a DMCE1 checkpoint");
}

void write_mlp_blob(std::ostream& os, const Mlp& net) {
    write_u32(os, static_cast<std::uint32_t>(net.layer_dims().size()));
    for (std::size_t d : net.layer_dims()) write_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        for (double w : net.weights()[k]) write_f64(os, w);
        for (double b : net.biases()[k]) write_f64(os, b);
    }
}

Mlp read_mlp_blob(std::istream& is, const std::string& path) {
    const std::uint32_t dim_count = read_u32(is, path);
    if (dim_count < 2) throw ConfigError(path + ": invalid layer dim count");
    std::vector<std::size_t> dims(dim_count);
    for (auto& d : dims) {
        d = read_u32(is, path);
        if (d == 0) throw ConfigError(path + ": zero layer width");
    }
    // Build with a throwaway init then overwrite parameters in place.
    Rng dummy(0);
    Mlp net(dims, dummy);
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        for (double& w : net.weights()[k]) w = read_f64(is, path);
        for (double& b : net.biases()[k]) b = read_f64(is, path);
    }
    return net;
}

}  // namespace

void save_predictor(const std::string& path, const NoisePredictor& predictor) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError(path + ": cannot open for writing");
    write_magic(os);
    write_mlp_blob(os, predictor.core());
    write_f64(os, predictor.train_signal_power());
    write_u32(os, static_cast<std::uint32_t>(predictor.time_embedding_dim()));
    if (!os) throw ConfigError(path + ": write failed");
}

NoisePredictor load_predictor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError(path + ": cannot open");
    check_magic(is, path);
    Mlp core = read_mlp_blob(is, path);
    const double p_hat = read_f64(is, path);
    const std::uint32_t embed_dim = read_u32(is, path);
    return NoisePredictor(std::move(core), embed_dim, p_hat);
}

void save_mlp_bundle(const std::string& path, const std::vector<NamedMlp>& nets) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError(path + ": cannot open for writing");
    write_magic(os);
    write_u32(os, static_cast<std::uint32_t>(nets.size()));
    for (const auto& [name, net] : nets) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_mlp_blob(os, net);
    }
    if (!os) throw ConfigError(path + ": write failed");
}

std::vector<NamedMlp> load_mlp_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError(path + ": cannot open");
    check_magic(is, path);
    const std::uint32_t count = read_u32(is, path);
    std::vector<NamedMlp> nets;
    nets.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(is, path);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw ConfigError(path + ": truncated checkpoint");
        nets.emplace_back(std::move(name), read_mlp_blob(is, path));
    }
    return nets;
}

}  // namespace dmce
