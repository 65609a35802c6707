// Binary checkpoint:
//   "SIDPCKPT" | u32 version | u64 header length | JSON header
//   | parameters (f64) | optional Adam moments m, v (f64)
// Integers and floats are little-endian.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidp/config.hpp"
#include "sidp/policy.hpp"
#include "sidp/scene_io.hpp"

namespace sidp {

inline constexpr std::array<char, 8> kCheckpointMagic{'S', 'I', 'D', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Policy policy;
    std::optional<OptimizerState> optimizer;
};

namespace detail {

template <class U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_doubles(std::string& out, const std::vector<double>& xs) {
    out.reserve(out.size() + xs.size() * 8);
    for (double x : xs) put_le(out, std::bit_cast<std::uint64_t>(x));
}

class ByteReader {
public:
    explicit ByteReader(std::string data) : data_(std::move(data)) {}

    template <class U>
    U le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<double> doubles(std::size_t n) {
        if (n > (data_.size() - pos_) / 8) throw IoError("checkpoint truncated");
        std::vector<double> out(n);
        for (auto& x : out) x = std::bit_cast<double>(le<std::uint64_t>());
        return out;
    }
    [[nodiscard]] bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (n > data_.size() - pos_) throw IoError("checkpoint truncated");
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Policy& policy, const OptimizerState* opt = nullptr) {
    json layers = json::array();
    for (const auto& l : policy.params.layers) layers.push_back({l.in, l.out});
    json header = {{"policy", policy.config},
                   {"schedule", {{"kind", policy.schedule.kind}, {"steps", policy.schedule.steps()},
                                 {"beta", policy.schedule.beta}}},
                   {"layers", layers},
                   {"param_count", policy.params.size()},
                   {"optimizer", nullptr}};
    const bool with_moments = opt != nullptr && !opt->m.empty();
    if (opt != nullptr) {
        header["optimizer"] = {{"learning_rate", opt->learning_rate}, {"weight_decay", opt->weight_decay},
                               {"beta1", opt->beta1},                 {"beta2", opt->beta2},
                               {"epsilon", opt->epsilon},             {"step", opt->step},
                               {"moments", with_moments}};
    }
    const std::string text = header.dump();
    std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    detail::put_le(out, kCheckpointVersion);
    detail::put_le(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    detail::put_doubles(out, policy.params.values);
    if (with_moments) {
        detail::put_doubles(out, opt->m);
        detail::put_doubles(out, opt->v);
    }
    return out;
}

inline Checkpoint deserialize_checkpoint(std::string data) {
    detail::ByteReader r(std::move(data));
    const std::string magic = r.bytes(kCheckpointMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic.begin())) throw IoError("not a checkpoint file");
    if (const auto v = r.le<std::uint32_t>(); v != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(v));
    }
    const auto header_len = r.le<std::uint64_t>();
    json h;
    try {
        h = json::parse(r.bytes(static_cast<std::size_t>(header_len)));
    } catch (const json::parse_error& e) {
        throw IoError(std::string("corrupt checkpoint header: ") + e.what());
    }
    try {
        const auto cfg = h.at("policy").get<PolicyConfig>();
        cfg.validate();
        Policy p{cfg, schedule_new(cfg), {}};
        if (p.schedule.beta != h.at("schedule").at("beta").get<std::vector<double>>()) {
            throw IoError("checkpoint schedule does not match its policy config");
        }
        p.params.layers = denoiser_layout(cfg);
        const auto stored = h.at("layers").get<std::vector<std::array<int, 2>>>();
        if (stored.size() != p.params.layers.size()) throw IoError("checkpoint layer count mismatch");
        std::size_t total = 0;
        for (std::size_t i = 0; i < stored.size(); ++i) {
            if (stored[i][0] != p.params.layers[i].in || stored[i][1] != p.params.layers[i].out) {
                throw IoError("checkpoint layer shape mismatch");
            }
            total += p.params.layers[i].count();
        }
        const auto n = h.at("param_count").get<std::size_t>();
        if (n != total) throw IoError("checkpoint parameter count mismatch");
        p.params.values = r.doubles(n);

        Checkpoint ck{std::move(p), std::nullopt};
        if (const auto& o = h.at("optimizer"); !o.is_null()) {
            OptimizerState s;
            s.learning_rate = o.at("learning_rate").get<double>();
            s.weight_decay = o.at("weight_decay").get<double>();
            s.beta1 = o.at("beta1").get<double>();
            s.beta2 = o.at("beta2").get<double>();
            s.epsilon = o.at("epsilon").get<double>();
            s.step = o.at("step").get<std::int64_t>();
            if (o.at("moments").get<bool>()) {
                s.m = r.doubles(n);
                s.v = r.doubles(n);
            }
            ck.optimizer = std::move(s);
        }
        if (!r.at_end()) throw IoError("trailing bytes after checkpoint payload");
        return ck;
    } catch (const json::exception& e) {
        throw IoError(std::string("corrupt checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw IoError(std::string("checkpoint holds an invalid policy config: ") + e.what());
    }
}

inline void save_checkpoint(const std::filesystem::path& path, const Policy& policy,
                            const OptimizerState* opt = nullptr) {
    write_text_file(path, serialize_checkpoint(policy, opt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(std::move(data));
}

}  // namespace sidp
