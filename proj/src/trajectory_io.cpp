#include "tdex/trajectory_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tdex/error.hpp"

namespace tdex {

using nlohmann::json;

namespace {

template <std::size_t N>
std::array<double, N> read_fixed(const json& j, const char* field) {
    if (!j.is_array() || j.size() != N) {
        throw DataError(std::string("field `") + field + "` must have " + std::to_string(N) +
                        " numbers");
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        if (!j[i].is_number()) throw DataError(std::string("field `") + field + "` is not numeric");
        out[i] = j[i].get<double>();
    }
    return out;
}

const json& require(const json& rec, const char* field) {
    auto it = rec.find(field);
    if (it == rec.end()) throw DataError(std::string("missing field `") + field + "`");
    return *it;
}

TactileFrame read_tactile(const json& j) {
    std::array<double, kTactileDim> flat{};
    auto bad = [] { throw DataError("field `tactile` must be a 15x4x4x3 array"); };
    if (!j.is_array() || j.size() != kNumPads) bad();
    std::size_t i = 0;
    for (const auto& pad : j) {
        if (!pad.is_array() || pad.size() != kPadRows) bad();
        for (const auto& row : pad) {
            if (!row.is_array() || row.size() != kPadCols) bad();
            for (const auto& cell : row) {
                if (!cell.is_array() || cell.size() != kAxes) bad();
                for (const auto& v : cell) {
                    if (!v.is_number()) bad();
                    flat[i++] = v.get<double>();
                }
            }
        }
    }
    return TactileFrame::from_flat(flat);
}

json write_tactile(const TactileFrame& f) {
    json pads = json::array();
    for (std::size_t p = 0; p < kNumPads; ++p) {
        json rows = json::array();
        for (std::size_t r = 0; r < kPadRows; ++r) {
            json cols = json::array();
            for (std::size_t c = 0; c < kPadCols; ++c) {
                cols.push_back({f.at(p, r, c, 0), f.at(p, r, c, 1), f.at(p, r, c, 2)});
            }
            rows.push_back(std::move(cols));
        }
        pads.push_back(std::move(rows));
    }
    return pads;
}

TrajectoryFrame read_frame(const json& rec) {
    if (!rec.is_object()) throw DataError("trajectory record is not an object");
    TrajectoryFrame f;
    const json& t = require(rec, "t");
    if (!t.is_number()) throw DataError("field `t` is not numeric");
    f.t = t.get<double>();
    f.tactile = read_tactile(require(rec, "tactile"));
    f.state.ee_pos = read_fixed<3>(require(rec, "ee_pos"), "ee_pos");
    f.state.ee_quat = read_fixed<4>(require(rec, "ee_quat"), "ee_quat");
    f.state.joints = read_fixed<kNumJoints>(require(rec, "joints"), "joints");
    const json& tips = require(rec, "fingertips");
    if (!tips.is_array() || tips.size() != kNumFingers) {
        throw DataError("field `fingertips` must be 4x3");
    }
    for (std::size_t k = 0; k < kNumFingers; ++k) {
        f.state.fingertips[k] = read_fixed<3>(tips[k], "fingertips");
    }
    if (auto it = rec.find("visual_feature"); it != rec.end() && !it->is_null()) {
        if (!it->is_array()) throw DataError("field `visual_feature` must be an array");
        std::vector<double> v;
        v.reserve(it->size());
        for (const auto& x : *it) {
            if (!x.is_number()) throw DataError("field `visual_feature` is not numeric");
            v.push_back(x.get<double>());
        }
        f.visual = std::move(v);
    }
    if (auto it = rec.find("action"); it != rec.end() && !it->is_null()) {
        f.action = Action::from_span(read_fixed<kActionDim>(*it, "action"));
    }
    return f;
}

json write_frame(const TrajectoryFrame& f) {
    json rec;
    rec["t"] = f.t;
    rec["tactile"] = write_tactile(f.tactile);
    rec["ee_pos"] = f.state.ee_pos;
    rec["ee_quat"] = f.state.ee_quat;
    rec["joints"] = f.state.joints;
    rec["fingertips"] = f.state.fingertips;
    if (f.visual) rec["visual_feature"] = *f.visual;
    if (f.action) rec["action"] = f.action->to_array();
    return rec;
}

}  // namespace

Trajectory read_trajectory(std::istream& in) {
    Trajectory traj;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            traj.frames.push_back(read_frame(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    traj.validate();
    return traj;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return read_trajectory(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
    for (const auto& f : traj.frames) out << write_frame(f).dump() << '\n';
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_trajectory(out, traj);
}

std::vector<std::filesystem::path> list_trajectory_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<Trajectory> read_trajectory_dir(const std::filesystem::path& dir) {
    std::vector<Trajectory> out;
    for (const auto& p : list_trajectory_files(dir)) out.push_back(read_trajectory(p));
    return out;
}

void write_trajectory_dir(const std::filesystem::path& dir, const std::vector<Trajectory>& trajs) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%03zu.jsonl", i);
        write_trajectory(dir / name, trajs[i]);
    }
}

}  // namespace tdex
