#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gazeread/errors.hpp"
#include "gazeread/gaze.hpp"

namespace gazeread {

// ------------------------------------------------------------------- labels

enum class Label : int { not_reading = 0, reading = 1 };

enum class Mode : int { none = 0, walk_read, out_loud, engaged, scan, write_read, skim };
enum class Medium : int { none = 0, print, digital, objects };
enum class Direction : int { ltr = 0, rtl, vertical };
enum class Activity : int { daily = 0, hard_negative };

inline const char* to_string(Label v) { return v == Label::reading ? "reading" : "not_reading"; }
inline const char* to_string(Mode v) {
    switch (v) {
        case Mode::none: return "none";
        case Mode::walk_read: return "walk_read";
        case Mode::out_loud: return "out_loud";
        case Mode::engaged: return "engaged";
        case Mode::scan: return "scan";
        case Mode::write_read: return "write_read";
        case Mode::skim: return "skim";
    }
    return "?";
}
inline const char* to_string(Medium v) {
    switch (v) {
        case Medium::none: return "none";
        case Medium::print: return "print";
        case Medium::digital: return "digital";
        case Medium::objects: return "objects";
    }
    return "?";
}
inline const char* to_string(Direction v) {
    switch (v) {
        case Direction::ltr: return "ltr";
        case Direction::rtl: return "rtl";
        case Direction::vertical: return "vertical";
    }
    return "?";
}
inline const char* to_string(Activity v) { return v == Activity::daily ? "daily" : "hard_negative"; }

inline Label label_from_string(const std::string& s) {
    if (s == "reading") return Label::reading;
    if (s == "not_reading") return Label::not_reading;
    throw DataError("unknown label: " + s);
}
inline Mode mode_from_string(const std::string& s) {
    for (Mode m : {Mode::none, Mode::walk_read, Mode::out_loud, Mode::engaged, Mode::scan, Mode::write_read,
                   Mode::skim})
        if (s == to_string(m)) return m;
    throw DataError("unknown mode: " + s);
}
inline Medium medium_from_string(const std::string& s) {
    for (Medium m : {Medium::none, Medium::print, Medium::digital, Medium::objects})
        if (s == to_string(m)) return m;
    throw DataError("unknown medium: " + s);
}
inline Direction direction_from_string(const std::string& s) {
    for (Direction d : {Direction::ltr, Direction::rtl, Direction::vertical})
        if (s == to_string(d)) return d;
    throw DataError("unknown direction: " + s);
}
inline Activity activity_from_string(const std::string& s) {
    for (Activity a : {Activity::daily, Activity::hard_negative})
        if (s == to_string(a)) return a;
    throw DataError("unknown activity: " + s);
}

// number of classes per task
enum class Task : int { binary = 0, mode7, medium4 };

inline const char* to_string(Task t) {
    switch (t) {
        case Task::binary: return "binary";
        case Task::mode7: return "mode7";
        case Task::medium4: return "medium4";
    }
    return "?";
}
inline Task task_from_string(const std::string& s) {
    for (Task t : {Task::binary, Task::mode7, Task::medium4})
        if (s == to_string(t)) return t;
    throw DataError("unknown task: " + s);
}
inline int class_count(Task t) { return t == Task::binary ? 2 : (t == Task::mode7 ? 7 : 4); }

// --------------------------------------------------------------- scenarios

struct ScenarioSpec {
    Label label = Label::reading;
    Mode mode = Mode::engaged;
    Medium medium = Medium::print;
    Direction direction = Direction::ltr;
    Activity activity = Activity::daily; // negatives only
    std::uint64_t seed = 0;

    void validate() const {
        if (label == Label::reading && (mode == Mode::none || medium == Medium::none))
            throw ConfigError("reading scenario needs a mode and a medium");
        if (label == Label::not_reading && mode != Mode::none)
            throw ConfigError("not_reading scenario must have mode none");
    }

    // breakdown tag: reading -> "mode/medium", negatives -> activity
    std::string scenario_tag() const {
        if (label == Label::reading) return std::string(to_string(mode)) + "/" + to_string(medium);
        return to_string(activity);
    }
};

// class index of a scenario under each task head
inline int class_index(const ScenarioSpec& s, Task t) {
    switch (t) {
        case Task::binary: return static_cast<int>(s.label);
        case Task::mode7: return static_cast<int>(s.label == Label::reading ? s.mode : Mode::none);
        case Task::medium4: return static_cast<int>(s.label == Label::reading ? s.medium : Medium::none);
    }
    return 0;
}

// ------------------------------------------------------------ sensor blocks

// 6-DoF motion window: [ax, ay(vertical), az, gx, gy(yaw rate), gz]
struct ImuWindow {
    double hz = 60.0;
    double duration_s = 2.0;
    std::vector<double> samples; // [count x 6]

    static constexpr int dim = 6;
    std::int64_t count() const { return static_cast<std::int64_t>(samples.size()) / dim; }
    double& at(std::int64_t i, int c) { return samples[static_cast<std::size_t>(i * dim + c)]; }
    double at(std::int64_t i, int c) const { return samples[static_cast<std::size_t>(i * dim + c)]; }

    void validate() const {
        if (count() != std::llround(hz * duration_s)) throw DataError("imu window: sample count != round(hz*T)");
    }
};

// square foveated crop; grayscale content replicated across channels
struct RgbPatch {
    int h = 64, w = 64, c = 3;
    std::vector<std::uint8_t> bytes; // row-major [h][w][c]

    std::uint8_t at(int y, int x, int ch) const {
        return bytes[static_cast<std::size_t>((y * w + x) * c + ch)];
    }
    void validate() const {
        if (static_cast<std::size_t>(h) * w * c != bytes.size()) throw DataError("rgb patch: byte count mismatch");
    }
};

// ------------------------------------------------------------ labeled clips

struct LabeledClip {
    std::string id;
    int label = 0; // binary class index
    ScenarioSpec meta;
    std::optional<GazeWindow> gaze;
    std::optional<ImuWindow> imu;
    std::optional<RgbPatch> rgb;

    void validate() const {
        if (!gaze && !imu && !rgb) throw DataError("clip " + id + ": no modality present");
        double t = gaze ? gaze->duration_s : (imu ? imu->duration_s : 0.0);
        if (gaze && std::fabs(gaze->duration_s - t) > 1e-9) throw DataError("clip duration mismatch");
        if (imu && t > 0.0 && std::fabs(imu->duration_s - t) > 1e-9) throw DataError("clip duration mismatch");
    }
};

// continuous recording alternating between reading and not reading
struct ChangePoint {
    double t = 0.0;
    Label state = Label::reading; // state after the change
};

struct AlternatingSequence {
    int scenario_id = 1;
    GazeWindow gaze;  // point3d at native rate, full length
    ImuWindow imu;
    double rgb_hz = 30.0;
    int patch_px = 64, channels = 3;
    std::vector<RgbPatch> frames;
    std::vector<ChangePoint> change_points; // strictly increasing, alternating states
    Label initial_state = Label::reading;

    Label state_at(double t) const {
        Label s = initial_state;
        for (const auto& cp : change_points) {
            if (cp.t <= t)
                s = cp.state;
            else
                break;
        }
        return s;
    }
};

} // namespace gazeread
