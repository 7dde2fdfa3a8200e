#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "gazeread/errors.hpp"
#include "gazeread/model.hpp"

namespace gazeread {

// Checkpoint layout: magic "GZRD1", u32 little-endian header length, UTF-8
// JSON header {config, precision, init_seed, tensors: name/shape/offset},
// then the raw little-endian tensor payload. Round trips are bit-exact.
inline constexpr char kCheckpointMagic[5] = {'G', 'Z', 'R', 'D', '1'};

template <class Real>
const char* precision_name() {
    if constexpr (std::is_same_v<Real, float>) return "f32";
    else return "f64";
}

template <class Real>
void save_checkpoint(const ModelParams<Real>& params, const ModelConfig& cfg, const std::string& path,
                     std::uint64_t init_seed = 0) {
    json header;
    header["config"] = config_to_json(cfg);
    header["precision"] = precision_name<Real>();
    header["init_seed"] = init_seed;
    json tensors = json::array();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        const auto& t = params.tensors[i];
        std::uint64_t nbytes = static_cast<std::uint64_t>(t.numel()) * sizeof(Real);
        tensors.push_back(json{{"name", params.names[i]}, {"shape", t.shape}, {"offset", offset},
                               {"nbytes", nbytes}});
        offset += nbytes;
    }
    header["tensors"] = std::move(tensors);
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, 5);
    std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    char lenbuf[4] = {static_cast<char>(hlen & 0xFF), static_cast<char>((hlen >> 8) & 0xFF),
                      static_cast<char>((hlen >> 16) & 0xFF), static_cast<char>((hlen >> 24) & 0xFF)};
    out.write(lenbuf, 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : params.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(Real)));
    if (!out) throw IoError("checkpoint write failed: " + path);
}

struct CheckpointInfo {
    ModelConfig config;
    std::string precision;
    std::uint64_t init_seed = 0;
    std::int64_t total_params = 0;
};

template <class Real>
struct LoadedCheckpoint {
    ModelParams<Real> params;
    ModelConfig config;
    std::uint64_t init_seed = 0;
};

namespace ckpt_detail {

inline json read_header(std::ifstream& in, const std::string& path, std::uint64_t* payload_start) {
    char magic[5];
    if (!in.read(magic, 5) || std::memcmp(magic, kCheckpointMagic, 5) != 0)
        throw DataError("corrupt checkpoint (bad magic): " + path);
    unsigned char lenbuf[4];
    if (!in.read(reinterpret_cast<char*>(lenbuf), 4)) throw DataError("corrupt checkpoint (truncated): " + path);
    std::uint32_t hlen = static_cast<std::uint32_t>(lenbuf[0]) | (static_cast<std::uint32_t>(lenbuf[1]) << 8) |
                         (static_cast<std::uint32_t>(lenbuf[2]) << 16) |
                         (static_cast<std::uint32_t>(lenbuf[3]) << 24);
    std::string hs(hlen, '\0');
    if (!in.read(hs.data(), hlen)) throw DataError("corrupt checkpoint (truncated header): " + path);
    *payload_start = 9 + hlen;
    try {
        return json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt checkpoint (bad header json): ") + e.what());
    }
}

} // namespace ckpt_detail

inline CheckpointInfo inspect_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::uint64_t payload_start = 0;
    json header = ckpt_detail::read_header(in, path, &payload_start);
    CheckpointInfo info;
    info.config = config_from_json(header.at("config"));
    info.precision = header.at("precision").get<std::string>();
    info.init_seed = header.at("init_seed").get<std::uint64_t>();
    for (const auto& t : header.at("tensors")) {
        std::int64_t n = 1;
        for (const auto& d : t.at("shape")) n *= d.get<std::int64_t>();
        info.total_params += n;
    }
    return info;
}

template <class Real>
LoadedCheckpoint<Real> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::uint64_t payload_start = 0;
    json header = ckpt_detail::read_header(in, path, &payload_start);

    LoadedCheckpoint<Real> out;
    out.config = config_from_json(header.at("config"));
    out.init_seed = header.value("init_seed", std::uint64_t{0});
    std::string prec = header.at("precision").get<std::string>();
    if (prec != precision_name<Real>())
        throw DataError("checkpoint precision " + prec + " does not match requested " + precision_name<Real>());

    // the stored manifest must agree with the config-derived plan
    auto plan = shape_plan(out.config);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != plan.size()) throw DataError("corrupt checkpoint: tensor manifest size mismatch");

    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& tj = tensors[i];
        if (tj.at("name").get<std::string>() != plan[i].name)
            throw DataError("corrupt checkpoint: tensor name mismatch at " + plan[i].name);
        std::vector<std::int64_t> shape = tj.at("shape").get<std::vector<std::int64_t>>();
        if (shape != plan[i].shape) throw DataError("corrupt checkpoint: shape mismatch at " + plan[i].name);
        std::uint64_t offset = tj.at("offset").get<std::uint64_t>();
        std::uint64_t nbytes = tj.at("nbytes").get<std::uint64_t>();
        Tensor<Real> t(shape);
        if (nbytes != t.data.size() * sizeof(Real)) throw DataError("corrupt checkpoint: byte count mismatch");
        in.seekg(static_cast<std::streamoff>(payload_start + offset));
        if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(nbytes)))
            throw DataError("corrupt checkpoint: truncated payload at " + plan[i].name);
        out.params.index[plan[i].name] = out.params.tensors.size();
        out.params.names.push_back(plan[i].name);
        out.params.tensors.push_back(std::move(t));
    }
    return out;
}

} // namespace gazeread
