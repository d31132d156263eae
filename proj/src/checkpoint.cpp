#include "tdex/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "tdex/error.hpp"

namespace tdex {

using nlohmann::json;

void write_f32_le(std::ostream& out, std::span<const double> values) {
    std::vector<unsigned char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
        for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<double> read_f32_le(std::istream& in, std::size_t count) {
    std::vector<unsigned char> buf(count * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw DataError("truncated float32 data");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[i * 4 + b]) << (8 * b);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params, const json& meta) {
    std::filesystem::create_directories(dir);
    json tensors = json::array();
    std::size_t offset = 0;
    for (const auto& e : params.entries()) {
        tensors.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"offset", offset},
                           {"count", e.value.size()}});
        offset += e.value.size();
    }
    json manifest = {{"format", "tdex-checkpoint"}, {"version", 1},     {"dtype", "float32"},
                     {"endianness", "little"},      {"layout", "row-major"}, {"tensors", tensors},
                     {"total", offset},             {"meta", meta}};
    std::ofstream m(dir / "manifest.json");
    if (!m) throw DataError("cannot write " + (dir / "manifest.json").string());
    m << manifest.dump(2) << '\n';
    std::ofstream b(dir / "params.bin", std::ios::binary);
    if (!b) throw DataError("cannot write " + (dir / "params.bin").string());
    for (const auto& e : params.entries()) write_f32_le(b, e.value.data());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream m(dir / "manifest.json");
    if (!m) throw DataError("missing checkpoint manifest in " + dir.string());
    json manifest;
    try {
        manifest = json::parse(m);
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "tdex-checkpoint" || manifest.value("dtype", "") != "float32") {
        throw DataError("unsupported checkpoint format in " + dir.string());
    }
    std::ifstream b(dir / "params.bin", std::ios::binary);
    if (!b) throw DataError("missing params.bin in " + dir.string());
    Checkpoint ck;
    try {
        for (const auto& t : manifest.at("tensors")) {
            Shape shape = t.at("shape").get<Shape>();
            const std::size_t count = t.at("count").get<std::size_t>();
            if (shape_numel(shape) != count) throw DataError("tensor count/shape mismatch");
            ck.params.add(t.at("name").get<std::string>(), Tensor(shape, read_f32_le(b, count)));
        }
        ck.meta = manifest.at("meta");
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint manifest: " + std::string(e.what()));
    }
    return ck;
}

}  // namespace tdex
