#include "sotvae/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sotvae/tensor.hpp"

namespace sotvae {

static_assert(std::numeric_limits<double>::is_iec559,
              "checkpoint format assumes IEEE-754 doubles");

namespace {

constexpr char kMagic[] = "SOTVAE-CKPT-1";

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    std::string s(read_u64(is), '\0');
    is.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    for (double x : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        write_u64(os, bits);
    }
}

std::vector<double> read_doubles(std::istream& is) {
    std::vector<double> v(read_u64(is));
    for (double& x : v) {
        std::uint64_t bits = read_u64(is);
        std::memcpy(&x, &bits, 8);
    }
    return v;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamRegistry& reg,
                     const ModelConfig& cfg, std::uint64_t epoch,
                     const OptimizerState* opt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
    os << kMagic << "\n";
    write_u64(os, cfg.hash());
    write_string(os, cfg.serialize());
    write_u64(os, epoch);

    write_u64(os, reg.params().size());
    for (const auto& [name, t] : reg.params()) {
        write_string(os, name);
        write_u64(os, t->shape.size());
        for (std::size_t dim : t->shape) write_u64(os, dim);
        write_doubles(os, t->data);
    }

    os.put(opt ? 1 : 0);
    if (opt) {
        write_u64(os, opt->step);
        for (const auto& [name, t] : reg.params()) {
            auto mi = opt->m.find(name), vi = opt->v.find(name);
            if (mi == opt->m.end() || vi == opt->v.end())
                throw std::runtime_error("checkpoint: missing moments for " + name);
            write_doubles(os, mi->second);
            write_doubles(os, vi->second);
        }
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string magic;
    std::getline(is, magic);
    if (magic != kMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ckpt;
    std::uint64_t stored_hash = read_u64(is);
    ckpt.config = ModelConfig::deserialize(parse_kv(read_string(is)));
    if (ckpt.config.hash() != stored_hash)
        throw std::runtime_error("checkpoint: config hash mismatch in " + path);
    ckpt.epoch = read_u64(is);

    std::uint64_t n = read_u64(is);
    std::vector<std::string> order;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = read_string(is);
        std::vector<std::size_t> shape(read_u64(is));
        for (std::size_t& dim : shape) dim = read_u64(is);
        ckpt.tensors[name] = {shape, read_doubles(is)};
        order.push_back(std::move(name));
    }

    int has_opt = is.get();
    if (has_opt == 1) {
        OptimizerState opt;
        opt.step = read_u64(is);
        for (const std::string& name : order) {
            opt.m[name] = read_doubles(is);
            opt.v[name] = read_doubles(is);
        }
        ckpt.opt = std::move(opt);
    } else if (has_opt != 0) {
        throw std::runtime_error("checkpoint: corrupt optimizer flag in " + path);
    }
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ParamRegistry& reg) {
    if (ckpt.tensors.size() != reg.params().size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (const auto& [name, t] : reg.params()) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end())
            throw std::runtime_error("checkpoint: missing parameter " + name);
        if (it->second.first != t->shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        t->data = it->second.second;
    }
}

}  // namespace sotvae
