// Scene files: JSON with a base64, row-major, bit-packed occupancy payload.
// Bits are packed MSB-first; cell (x, y) is bit y·width + x.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>

#include "sidp/scene.hpp"

namespace sidp {

namespace detail {

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
    std::string out(It(bytes.begin()), It(bytes.end()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string text) {
    using namespace boost::archive::iterators;
    using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
    if (text.size() % 4 != 0) throw IoError("base64 payload length is not a multiple of 4");
    const auto pad = static_cast<std::size_t>(std::count(text.end() - std::min<std::size_t>(2, text.size()), text.end(), '='));
    std::replace(text.end() - static_cast<std::ptrdiff_t>(pad), text.end(), '=', 'A');
    std::vector<std::uint8_t> out;
    try {
        out.assign(It(text.cbegin()), It(text.cend()));
    } catch (const std::exception& e) {
        throw IoError(std::string("invalid base64 payload: ") + e.what());
    }
    out.resize(out.size() - pad);
    return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> pack_occupancy(const OccupancyGrid& grid) {
    std::vector<std::uint8_t> bytes((grid.size() + 7) / 8, 0);
    const auto& cells = grid.cells();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    return bytes;
}

inline OccupancyGrid unpack_occupancy(const std::vector<std::uint8_t>& bytes, int width, int height,
                                      double resolution) {
    OccupancyGrid grid(width, height, resolution);
    if (bytes.size() != (grid.size() + 7) / 8) throw IoError("occupancy payload size does not match the grid");
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = grid.index(x, y);
            const bool occ = (bytes[i / 8] >> (7 - i % 8)) & 1u;
            if (!occ && grid.is_boundary(x, y)) throw IoError("scene boundary ring must be occupied");
            if (!grid.is_boundary(x, y)) grid.set(x, y, occ);
        }
    }
    return grid;
}

inline nlohmann::json scene_to_json(const Scene& scene) {
    return {{"id", scene.id},
            {"seed", scene.seed},
            {"resolution", scene.grid.resolution()},
            {"width", scene.grid.width()},
            {"height", scene.grid.height()},
            {"occupancy", detail::base64_encode(pack_occupancy(scene.grid))},
            {"robot_radius", scene.robot_radius}};
}

inline Scene scene_from_json(const nlohmann::json& j, double esdf_max_dist = 2.0) {
    try {
        const int w = j.at("width").get<int>();
        const int h = j.at("height").get<int>();
        const double res = j.at("resolution").get<double>();
        auto grid = unpack_occupancy(detail::base64_decode(j.at("occupancy").get<std::string>()), w, h, res);
        return Scene(j.at("id").get<std::string>(), j.at("seed").get<std::uint64_t>(),
                     j.at("robot_radius").get<double>(), std::move(grid), esdf_max_dist);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed scene file: ") + e.what());
    } catch (const ConfigError& e) {
        throw IoError(std::string("malformed scene file: ") + e.what());
    }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("cannot parse " + path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw IoError("write failed for " + path.string());
}

inline void save_scene(const Scene& scene, const std::filesystem::path& path) {
    write_text_file(path, scene_to_json(scene).dump(2) + "\n");
}

inline Scene load_scene(const std::filesystem::path& path, double esdf_max_dist = 2.0) {
    return scene_from_json(read_json_file(path), esdf_max_dist);
}

}  // namespace sidp
