#include "fdx/model/checkpoint.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fdx::model {

namespace fs = std::filesystem;

namespace {

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

std::vector<char> encode_weights(const std::vector<float>& values) {
    std::vector<char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t le = to_le(std::bit_cast<std::uint32_t>(values[i]));
        std::memcpy(bytes.data() + 4 * i, &le, 4);
    }
    return bytes;
}

std::vector<float> decode_weights(const std::string& bytes) {
    std::vector<float> values(bytes.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t le;
        std::memcpy(&le, bytes.data() + 4 * i, 4);
        values[i] = std::bit_cast<float>(to_le(le));
    }
    return values;
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::CorruptCheckpoint, "missing " + path.filename().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.filename().string() + ": " + e.what());
    }
}

json manifest_tensors(const ParamLayout& layout) {
    json tensors = json::array();
    for (const auto& t : layout.tensors) {
        tensors.push_back(json{{"name", t.name}, {"shape", t.shape}, {"offset", t.offset * 4}});
    }
    return tensors;
}

} // namespace

void save_checkpoint(const Parameters<float>& p, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    const std::string hash = hex64(config_hash(p.config));

    json config{{"version", kFormatVersion}, {"config", config_fields(p.config)}, {"config_hash", hash}};
    const std::string config_text = config.dump(2) + "\n";
    write_file(dir / "config.json", config_text.data(), config_text.size());

    const auto bytes = encode_weights(p.values);
    write_file(dir / "weights.bin", bytes.data(), bytes.size());

    json manifest{{"version", kFormatVersion},
                  {"dtype", "f32le"},
                  {"config_hash", hash},
                  {"total_bytes", bytes.size()},
                  {"weights_fnv1a64", hex64(fnv1a64(bytes.data(), bytes.size()))},
                  {"tensors", manifest_tensors(p.lay())}};
    const std::string manifest_text = manifest.dump(2) + "\n";
    write_file(dir / "manifest.json", manifest_text.data(), manifest_text.size());
}

Parameters<float> load_checkpoint(const fs::path& dir) {
    const json config = read_json(dir / "config.json");
    ModelConfig cfg;
    std::string recorded;
    try {
        if (config.at("version") != kFormatVersion) throw Error(ErrorCode::CorruptCheckpoint, "unknown version");
        recorded = config.at("config_hash").get<std::string>();
        cfg = config_from_fields(config.at("config"));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("config.json: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptCheckpoint) throw;
        throw Error(ErrorCode::CorruptCheckpoint, "config.json: " + e.detail());
    }
    const std::string hash = hex64(config_hash(cfg));
    if (hash != recorded)
        throw Error(ErrorCode::ConfigHashMismatch, "config.json hashes to " + hash + ", recorded " + recorded);

    const json manifest = read_json(dir / "manifest.json");
    const ParamLayout layout = make_layout(cfg);
    const std::string bytes = read_file(dir / "weights.bin");
    try {
        if (manifest.at("config_hash") != hash)
            throw Error(ErrorCode::ConfigHashMismatch, "manifest belongs to config " +
                                                           manifest.at("config_hash").get<std::string>());
        if (manifest.at("dtype") != "f32le") throw Error(ErrorCode::CorruptCheckpoint, "unsupported dtype");
        if (manifest.at("tensors") != manifest_tensors(layout))
            throw Error(ErrorCode::CorruptCheckpoint, "tensor table does not match the config layout");
        if (manifest.at("total_bytes").get<std::size_t>() != layout.total * 4 || bytes.size() != layout.total * 4)
            throw Error(ErrorCode::CorruptCheckpoint, "weights.bin has " + std::to_string(bytes.size()) +
                                                          " bytes, expected " + std::to_string(layout.total * 4));
        if (manifest.at("weights_fnv1a64") != hex64(fnv1a64(bytes.data(), bytes.size())))
            throw Error(ErrorCode::CorruptCheckpoint, "weights.bin checksum mismatch");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("manifest.json: ") + e.what());
    }
    auto values = decode_weights(bytes);
    if (!all_finite(values)) throw Error(ErrorCode::CorruptCheckpoint, "weights contain non-finite values");
    return wrap_parameters(cfg, std::move(values));
}

} // namespace fdx::model
