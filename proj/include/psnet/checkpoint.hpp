#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "psnet/config.hpp"
#include "psnet/errors.hpp"
#include "psnet/model.hpp"
#include "psnet/optimizer.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// On-disk training snapshot: header scalars, identity labels for the
// classifier head, the effective config echo, and named tensors (model
// parameters plus optimizer moments). Round trip is bit exact.
template <typename T>
struct CheckpointData {
    int step = 0;                  // training step this snapshot belongs to
    std::uint64_t epoch = 0;       // completed epochs within that step
    std::uint64_t global_step = 0; // cumulative optimizer updates (log continuity)
    int num_classes = 0;           // 0 = classifier head absent
    double adacos_scale = 0.0;
    std::vector<std::string> identities;  // class index -> identity label
    std::string config_echo;
    std::vector<std::pair<std::string, Tensor<T>>> tensors;

    const Tensor<T>* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }

    const Tensor<T>& require(const std::string& name) const {
        const Tensor<T>* t = find(name);
        if (!t) throw DataError("checkpoint is missing tensor '" + name + "'");
        return *t;
    }
};

namespace detail {

constexpr char kCkptMagic[8] = {'P', 'S', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCkptEndian = 0x01020304u;
constexpr std::uint32_t kCkptVersion = 1;

template <typename V>
void put(std::ostream& os, const V& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V get(std::istream& is, const char* what) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const char* what) {
    const auto n = get<std::uint64_t>(is, what);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw DataError(std::string("checkpoint truncated while reading ") + what);
    return s;
}

template <typename T>
constexpr std::uint8_t dtype_tag() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? 1 : 2;
}

}  // namespace detail

template <typename T>
void write_checkpoint(const std::string& path, const CheckpointData<T>& ck) {
    namespace d = detail;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot write checkpoint: " + path);
        os.write(d::kCkptMagic, sizeof d::kCkptMagic);
        d::put(os, d::kCkptEndian);
        d::put(os, d::kCkptVersion);
        d::put<std::int32_t>(os, ck.step);
        d::put<std::uint64_t>(os, ck.epoch);
        d::put<std::uint64_t>(os, ck.global_step);
        d::put<std::int32_t>(os, ck.num_classes);
        d::put<double>(os, ck.adacos_scale);
        d::put<std::uint64_t>(os, ck.identities.size());
        for (const auto& id : ck.identities) d::put_string(os, id);
        d::put_string(os, ck.config_echo);
        d::put<std::uint64_t>(os, ck.tensors.size());
        for (const auto& [name, t] : ck.tensors) {
            d::put_string(os, name);
            d::put(os, d::dtype_tag<T>());
            d::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
            for (int i = 0; i < t.rank(); ++i) d::put<std::int32_t>(os, t.dim(i));
            os.write(reinterpret_cast<const char*>(t.data()),
                     static_cast<std::streamsize>(t.numel() * sizeof(T)));
        }
        os.flush();
        if (!os) throw DataError("failed writing checkpoint: " + path);
    }
    std::filesystem::rename(tmp, path);
}

template <typename T>
CheckpointData<T> read_checkpoint(const std::string& path) {
    namespace d = detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, d::kCkptMagic, sizeof magic) != 0)
        throw DataError("not a checkpoint file: " + path);
    if (d::get<std::uint32_t>(is, "endian tag") != d::kCkptEndian)
        throw DataError("checkpoint byte order mismatch: " + path);
    const auto version = d::get<std::uint32_t>(is, "version");
    if (version != d::kCkptVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    CheckpointData<T> ck;
    ck.step = d::get<std::int32_t>(is, "step");
    ck.epoch = d::get<std::uint64_t>(is, "epoch");
    ck.global_step = d::get<std::uint64_t>(is, "global step");
    ck.num_classes = d::get<std::int32_t>(is, "class count");
    ck.adacos_scale = d::get<double>(is, "scale");
    const auto id_count = d::get<std::uint64_t>(is, "identity count");
    for (std::uint64_t i = 0; i < id_count; ++i)
        ck.identities.push_back(d::get_string(is, "identity"));
    ck.config_echo = d::get_string(is, "config echo");
    const auto tcount = d::get<std::uint64_t>(is, "tensor count");
    for (std::uint64_t i = 0; i < tcount; ++i) {
        std::string name = d::get_string(is, "tensor name");
        const auto tag = d::get<std::uint8_t>(is, "dtype");
        if (tag != d::dtype_tag<T>())
            throw DataError("checkpoint tensor '" + name + "' has mismatched element type");
        const auto rank = d::get<std::uint32_t>(is, "rank");
        std::vector<int> shape;
        for (std::uint32_t r = 0; r < rank; ++r)
            shape.push_back(d::get<std::int32_t>(is, "dim"));
        Tensor<T> t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(T)));
        if (!is) throw DataError("checkpoint truncated in tensor '" + name + "'");
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

// Collects the full model parameter set into the checkpoint.
template <typename T>
void pack_model(CheckpointData<T>& ck, ModelState<T>& model) {
    for (auto& p : model.all_params()) ck.tensors.emplace_back(p.name, *p.value);
    ck.num_classes = model.has_adacos() ? model.adacos.num_classes : 0;
    ck.adacos_scale = model.has_adacos() ? static_cast<double>(model.adacos.scale) : 0.0;
}

// Rebuilds the model from the checkpoint's own config echo, then overwrites
// every parameter from the stored tensors. Missing tensors are named.
template <typename T>
void unpack_model(const CheckpointData<T>& ck, ModelState<T>& model) {
    Config cfg;
    std::istringstream echo(ck.config_echo);
    cfg.load_stream(echo, "checkpoint config echo");
    model.init(model_config_from(cfg), cfg.get_seed());
    if (ck.num_classes > 0) {
        if (static_cast<int>(ck.identities.size()) != ck.num_classes)
            throw DataError("checkpoint identity list does not match classifier size");
        model.init_adacos(ck.num_classes, cfg.get_seed());
        model.adacos.scale = static_cast<T>(ck.adacos_scale);
    }
    for (auto& p : model.all_params()) {
        const Tensor<T>& src = ck.require(p.name);
        if (!src.same_shape(*p.value))
            throw DataError("checkpoint tensor '" + p.name + "' has shape " + src.shape_string() +
                            ", model expects " + p.value->shape_string());
        *p.value = src;
    }
}

// Optimizer moments stored alongside model tensors under an "opt.<group>."
// prefix; slot order mirrors the parameter group order.
template <typename T>
void pack_adam(CheckpointData<T>& ck, const Adam<T>& opt, const std::string& group) {
    Tensor<T> tt({1});
    tt[0] = static_cast<T>(opt.t);
    ck.tensors.emplace_back("opt." + group + ".t", tt);
    for (std::size_t i = 0; i < opt.names.size(); ++i) {
        ck.tensors.emplace_back("opt." + group + "." + opt.names[i] + ".m", opt.m[i]);
        ck.tensors.emplace_back("opt." + group + "." + opt.names[i] + ".v", opt.v[i]);
    }
}

template <typename T>
void unpack_adam(const CheckpointData<T>& ck, Adam<T>& opt, const std::string& group,
                 const std::vector<ParamRef<T>>& params, double lr, double b1, double b2) {
    opt.init(params, lr, b1, b2);
    opt.t = static_cast<std::int64_t>(ck.require("opt." + group + ".t")[0]);
    for (std::size_t i = 0; i < opt.names.size(); ++i) {
        const std::string base = "opt." + group + "." + opt.names[i];
        const Tensor<T>& m = ck.require(base + ".m");
        const Tensor<T>& v = ck.require(base + ".v");
        if (!m.same_shape(opt.m[i]) || !v.same_shape(opt.v[i]))
            throw DataError("checkpoint optimizer slot '" + base + "' has mismatched shape");
        opt.m[i] = m;
        opt.v[i] = v;
    }
}

}  // namespace psnet
