#pragma once

// Versioned binary checkpoint of a Trainer: parameters, Adam moments, spectral
// states, RNG streams and sampler position. Reloading into a Trainer built from
// the same configuration resumes bit-exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsgan/error.hpp"
#include "dsgan/train.hpp"

namespace dsgan {

inline constexpr char kCheckpointMagic[8] = {'D', 'S', 'G', 'A', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class BinWriter {
public:
    explicit BinWriter(std::ostream& os) : os_(os) {}
    template <class U>
    void pod(const U& v) {
        os_.write(reinterpret_cast<const char*>(&v), sizeof(U));
    }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    template <class U>
    void vec(const std::vector<U>& v) {
        pod<std::uint64_t>(v.size());
        os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(U)));
    }

private:
    std::ostream& os_;
};

class BinReader {
public:
    explicit BinReader(std::istream& is) : is_(is) {}
    template <class U>
    U pod() {
        U v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof(U));
        check();
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint64_t>();
        require(n < (1ull << 32), "checkpoint: corrupt string length");
        std::string s(n, '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        check();
        return s;
    }
    template <class U>
    std::vector<U> vec() {
        const auto n = pod<std::uint64_t>();
        require(n < (1ull << 34) / sizeof(U), "checkpoint: corrupt vector length");
        std::vector<U> v(n);
        is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(U)));
        check();
        return v;
    }

private:
    void check() {
        if (!is_) throw std::runtime_error("checkpoint: unexpected end of file");
    }
    std::istream& is_;
};

inline std::string rng_text(const Rng& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

inline Rng rng_from_text(const std::string& s) {
    Rng r;
    std::istringstream is(s);
    is >> r;
    require(!is.fail(), "checkpoint: corrupt RNG state");
    return r;
}

template <class T>
void write_params(BinWriter& w, const std::vector<Param<T>*>& params) {
    w.pod<std::uint64_t>(params.size());
    for (const auto* p : params) {
        w.str(p->name);
        w.vec(p->value);
    }
}

template <class T>
void read_params(BinReader& r, const std::vector<Param<T>*>& params) {
    require(r.pod<std::uint64_t>() == params.size(), "checkpoint: parameter count mismatch");
    for (auto* p : params) {
        const std::string name = r.str();
        require(name == p->name, "checkpoint: expected parameter '" + p->name + "', found '" + name + "'");
        auto v = r.vec<T>();
        require(v.size() == p->value.size(), "checkpoint: shape mismatch for " + p->name);
        p->value = std::move(v);
        p->zero_grad();
    }
}

template <class T>
void write_adam(BinWriter& w, const AdamState<T>& s) {
    w.pod<std::uint64_t>(s.step);
    w.pod<std::uint64_t>(s.m.size());
    for (std::size_t i = 0; i < s.m.size(); ++i) {
        w.vec(s.m[i]);
        w.vec(s.v[i]);
    }
}

template <class T>
AdamState<T> read_adam(BinReader& r) {
    AdamState<T> s;
    s.step = r.pod<std::uint64_t>();
    const auto n = r.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
        s.m.push_back(r.vec<T>());
        s.v.push_back(r.vec<T>());
    }
    return s;
}

}  // namespace detail

/// Writes `trainer` to `path`. `config_text` is stored verbatim so a checkpoint
/// is self-describing.
template <class T>
void save_checkpoint(const std::string& path, Trainer<T>& trainer, const std::string& config_text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write checkpoint " + tmp);
        detail::BinWriter w(os);
        os.write(kCheckpointMagic, sizeof kCheckpointMagic);
        w.pod(kCheckpointVersion);
        w.pod<std::uint32_t>(sizeof(T));
        w.str(config_text);
        w.pod<std::int64_t>(trainer.iteration());
        detail::write_params(w, trainer.generator().params());
        detail::write_params(w, trainer.discriminator().params());
        detail::write_adam(w, trainer.adam_g());
        detail::write_adam(w, trainer.adam_d());
        const auto sw = trainer.discriminator().spectral_weights();
        w.pod<std::uint64_t>(sw.size());
        for (const auto* wt : sw) {
            w.vec(wt->state().u);
            w.vec(wt->state().v);
            w.pod<std::uint64_t>(wt->state().iterations);
        }
        w.str(detail::rng_text(trainer.noise_rng()));
        w.str(detail::rng_text(trainer.pretext_rng()));
        const auto& s = trainer.sampler();
        w.str(detail::rng_text(s.rng()));
        w.vec(s.order());
        w.pod<std::uint64_t>(s.position());
        w.pod<std::uint64_t>(s.epoch());
        if (!os) throw std::runtime_error("failed writing checkpoint " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint into place: " + path);
}

namespace detail {

inline std::ifstream open_checkpoint(const std::string& path, std::uint32_t& scalar_size, std::string& config) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[sizeof kCheckpointMagic];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw std::runtime_error(path + " is not a checkpoint");
    BinReader r(is);
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    scalar_size = r.pod<std::uint32_t>();
    config = r.str();
    return is;
}

}  // namespace detail

/// The configuration text stored in a checkpoint.
inline std::string read_checkpoint_config(const std::string& path) {
    std::uint32_t scalar = 0;
    std::string config;
    detail::open_checkpoint(path, scalar, config);
    return config;
}

/// Restores `trainer` (built from the stored configuration) from `path`.
template <class T>
void load_checkpoint(const std::string& path, Trainer<T>& trainer) {
    std::uint32_t scalar = 0;
    std::string config;
    std::ifstream is = detail::open_checkpoint(path, scalar, config);
    detail::require(scalar == sizeof(T), "checkpoint: scalar type mismatch");
    detail::BinReader r(is);
    trainer.set_iteration(static_cast<long>(r.pod<std::int64_t>()));
    detail::read_params(r, trainer.generator().params());
    detail::read_params(r, trainer.discriminator().params());
    trainer.adam_g() = detail::read_adam<T>(r);
    trainer.adam_d() = detail::read_adam<T>(r);
    const auto sw = trainer.discriminator().spectral_weights();
    detail::require(r.pod<std::uint64_t>() == sw.size(), "checkpoint: spectral state count mismatch");
    for (auto* wt : sw) {
        wt->state().u = r.vec<T>();
        wt->state().v = r.vec<T>();
        wt->state().iterations = r.pod<std::uint64_t>();
    }
    trainer.noise_rng() = detail::rng_from_text(r.str());
    trainer.pretext_rng() = detail::rng_from_text(r.str());
    Rng srng = detail::rng_from_text(r.str());
    auto order = r.vec<int>();
    const auto pos = r.pod<std::uint64_t>();
    const auto epoch = r.pod<std::uint64_t>();
    detail::require(static_cast<int>(order.size()) == trainer.dataset().size(), "checkpoint: dataset size mismatch");
    trainer.sampler().restore(srng, std::move(order), pos, epoch);
    trainer.set_last_checkpoint(path);
}

}  // namespace dsgan
