#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazeread/errors.hpp"
#include "gazeread/scenario.hpp"

namespace gazeread {

using json = nlohmann::ordered_json; // insertion order -> deterministic bytes

// ------------------------------------------------------------------- base64

inline std::string base64_encode(const std::vector<std::uint8_t>& in) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= in.size(); i += 3) {
        std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
    }
    if (i + 1 == in.size()) {
        std::uint32_t v = in[i] << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == in.size()) {
        std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& in) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw DataError("base64: invalid character");
    };
    std::vector<std::uint8_t> out;
    out.reserve(in.size() / 4 * 3);
    std::uint32_t buf = 0;
    int bits = 0;
    for (char c : in) {
        int v = val(c);
        if (v < 0) break;
        buf = (buf << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xFF));
        }
    }
    return out;
}

// -------------------------------------------------------------- quantization

// Decimal quantization before serialization keeps files compact and makes
// the written text the canonical value: parse(dump(x)) == x bit-exactly.
inline double quantize(double v, double step) { return std::round(v / step) * step; }

constexpr double kGazeQuantum = 1e-7; // 0.1 um / 0.1 upix
constexpr double kImuQuantum = 1e-6;

// ------------------------------------------------------------ clip <-> json

inline json gaze_to_json(const GazeWindow& w) {
    json arr = json::array();
    for (std::int64_t i = 0; i < w.count(); ++i) {
        json row = json::array();
        for (int c = 0; c < w.dim(); ++c) row.push_back(w.at(i, c));
        arr.push_back(std::move(row));
    }
    return json{{"hz", w.hz}, {"repr", repr_name(w.repr)}, {"data", std::move(arr)}};
}

inline GazeWindow gaze_from_json(const json& j) {
    GazeWindow w;
    w.hz = j.at("hz").get<double>();
    w.repr = repr_from_name(j.at("repr").get<std::string>());
    const auto& data = j.at("data");
    for (const auto& row : data) {
        if (static_cast<int>(row.size()) != w.dim()) throw DataError("gaze row width does not match repr");
        for (const auto& v : row) w.samples.push_back(v.get<double>());
    }
    w.duration_s = static_cast<double>(w.count()) / w.hz;
    return w;
}

inline json imu_to_json(const ImuWindow& w) {
    json arr = json::array();
    for (std::int64_t i = 0; i < w.count(); ++i) {
        json row = json::array();
        for (int c = 0; c < ImuWindow::dim; ++c) row.push_back(w.at(i, c));
        arr.push_back(std::move(row));
    }
    return json{{"hz", w.hz}, {"data", std::move(arr)}};
}

inline ImuWindow imu_from_json(const json& j) {
    ImuWindow w;
    w.hz = j.at("hz").get<double>();
    for (const auto& row : j.at("data")) {
        if (row.size() != 6) throw DataError("imu row must have 6 channels");
        for (const auto& v : row) w.samples.push_back(v.get<double>());
    }
    w.duration_s = static_cast<double>(w.count()) / w.hz;
    return w;
}

inline json rgb_to_json(const RgbPatch& p) {
    return json{{"h", p.h}, {"w", p.w}, {"c", p.c}, {"data", base64_encode(p.bytes)}};
}

inline RgbPatch rgb_from_json(const json& j) {
    RgbPatch p;
    p.h = j.at("h").get<int>();
    p.w = j.at("w").get<int>();
    p.c = j.at("c").get<int>();
    p.bytes = base64_decode(j.at("data").get<std::string>());
    p.validate();
    return p;
}

inline json clip_to_json(const LabeledClip& clip) {
    json j;
    j["id"] = clip.id;
    j["label"] = clip.label;
    j["meta"] = json{{"mode", to_string(clip.meta.mode)},
                     {"medium", to_string(clip.meta.medium)},
                     {"direction", to_string(clip.meta.direction)},
                     {"scenario", clip.meta.scenario_tag()}};
    j["gaze"] = clip.gaze ? gaze_to_json(*clip.gaze) : json(nullptr);
    j["imu"] = clip.imu ? imu_to_json(*clip.imu) : json(nullptr);
    j["rgb"] = clip.rgb ? rgb_to_json(*clip.rgb) : json(nullptr);
    return j;
}

inline LabeledClip clip_from_json(const json& j) {
    LabeledClip clip;
    clip.id = j.at("id").get<std::string>();
    clip.label = j.at("label").get<int>();
    const auto& m = j.at("meta");
    clip.meta.mode = mode_from_string(m.at("mode").get<std::string>());
    clip.meta.medium = medium_from_string(m.at("medium").get<std::string>());
    clip.meta.direction = direction_from_string(m.at("direction").get<std::string>());
    clip.meta.label = clip.label == 1 ? Label::reading : Label::not_reading;
    std::string tag = m.at("scenario").get<std::string>();
    if (clip.meta.label == Label::not_reading && tag == "hard_negative") clip.meta.activity = Activity::hard_negative;
    if (!j.at("gaze").is_null()) clip.gaze = gaze_from_json(j.at("gaze"));
    if (!j.at("imu").is_null()) clip.imu = imu_from_json(j.at("imu"));
    if (!j.at("rgb").is_null()) clip.rgb = rgb_from_json(j.at("rgb"));
    clip.validate();
    return clip;
}

// ------------------------------------------------- alternating <-> jsonl

inline json alternating_to_json(const AlternatingSequence& seq, const std::string& id) {
    json j;
    j["id"] = id;
    j["meta"] = json{{"scenario", "alt" + std::to_string(seq.scenario_id)}};
    j["initial_state"] = to_string(seq.initial_state);
    json cps = json::array();
    for (const auto& cp : seq.change_points) cps.push_back(json{{"t", cp.t}, {"state", to_string(cp.state)}});
    j["change_points"] = std::move(cps);
    j["gaze"] = gaze_to_json(seq.gaze);
    j["imu"] = imu_to_json(seq.imu);
    std::vector<std::uint8_t> all;
    for (const auto& f : seq.frames) all.insert(all.end(), f.bytes.begin(), f.bytes.end());
    j["rgb"] = json{{"hz", seq.rgb_hz}, {"h", seq.patch_px}, {"w", seq.patch_px}, {"c", seq.channels},
                    {"data", base64_encode(all)}};
    return j;
}

inline AlternatingSequence alternating_from_json(const json& j) {
    AlternatingSequence seq;
    std::string tag = j.at("meta").at("scenario").get<std::string>();
    if (tag.rfind("alt", 0) == 0) seq.scenario_id = std::stoi(tag.substr(3));
    seq.initial_state = label_from_string(j.at("initial_state").get<std::string>());
    for (const auto& cp : j.at("change_points"))
        seq.change_points.push_back({cp.at("t").get<double>(), label_from_string(cp.at("state").get<std::string>())});
    seq.gaze = gaze_from_json(j.at("gaze"));
    seq.imu = imu_from_json(j.at("imu"));
    const auto& r = j.at("rgb");
    seq.rgb_hz = r.at("hz").get<double>();
    seq.patch_px = r.at("h").get<int>();
    seq.channels = r.at("c").get<int>();
    std::vector<std::uint8_t> all = base64_decode(r.at("data").get<std::string>());
    std::size_t frame_bytes = static_cast<std::size_t>(seq.patch_px) * seq.patch_px * seq.channels;
    if (frame_bytes == 0 || all.size() % frame_bytes != 0) throw DataError("alternating rgb payload misaligned");
    for (std::size_t off = 0; off < all.size(); off += frame_bytes) {
        RgbPatch p;
        p.h = p.w = seq.patch_px;
        p.c = seq.channels;
        p.bytes.assign(all.begin() + static_cast<std::ptrdiff_t>(off),
                       all.begin() + static_cast<std::ptrdiff_t>(off + frame_bytes));
        seq.frames.push_back(std::move(p));
    }
    return seq;
}

// ---------------------------------------------------------------- file io

inline void write_jsonl(const std::vector<json>& lines, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& j : lines) out << j.dump() << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<json> lines;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            lines.push_back(json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad json: " + e.what());
        }
    }
    return lines;
}

inline std::vector<LabeledClip> read_clips(const std::string& path) {
    std::vector<LabeledClip> clips;
    for (const auto& j : read_jsonl(path)) clips.push_back(clip_from_json(j));
    if (clips.empty()) throw DataError(path + ": no clips");
    return clips;
}

} // namespace gazeread
