#include "idu/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace idu::model {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& out, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw TruncatedError("checkpoint truncated reading " + what);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

uint16_t get_u16(std::istream& in, const std::string& what) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (in.gcount() != 2) throw TruncatedError("checkpoint truncated reading " + what);
    return static_cast<uint16_t>(b[0] | b[1] << 8);
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"input_dim", c.input_dim}, {"widths", c.widths},   {"attn_dim", c.attn_dim},
            {"group", c.group},         {"dropout", c.dropout}, {"n_classes", c.n_classes},
            {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.at("input_dim").get<int>();
    c.widths = j.at("widths").get<std::vector<int>>();
    c.attn_dim = j.at("attn_dim").get<int>();
    c.group = j.at("group").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.n_classes = j.at("n_classes").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, ModelParams& params, const CheckpointMeta& meta) {
    params.shape_audit();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);

    nlohmann::json j{{"config", config_to_json(params.config)},
                     {"class_names", meta.class_names},
                     {"feature_digest", meta.feature_digest},
                     {"encoder_digest", meta.encoder_digest},
                     {"config_digest", meta.config_digest},
                     {"task", meta.task}};
    const std::string meta_str = j.dump();

    out.write("IDUD", 4);
    put_u32(out, 1);
    put_u32(out, static_cast<uint32_t>(meta_str.size()));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    params.visit([&](const std::string& name, core::Tensor& t, bool) {
        put_u16(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        out.put(static_cast<char>(t.rank()));
        for (int d : t.dims) put_u32(out, static_cast<uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(sizeof(float) * t.size()));
    });
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4) throw TruncatedError("checkpoint truncated reading magic");
    if (std::memcmp(magic, "IDUD", 4) != 0)
        throw MagicMismatchError(path + ": not an IDUD checkpoint");
    const uint32_t version = get_u32(in, "version");
    if (version != 1)
        throw VersionMismatchError(path + ": unsupported checkpoint version " + std::to_string(version));

    const uint32_t meta_len = get_u32(in, "metadata length");
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), meta_len);
    if (in.gcount() != static_cast<std::streamsize>(meta_len))
        throw TruncatedError("checkpoint truncated reading metadata");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }

    LoadedCheckpoint result;
    result.meta.config = config_from_json(j.at("config"));
    result.meta.class_names = j.at("class_names").get<std::vector<std::string>>();
    result.meta.feature_digest = j.value("feature_digest", "");
    result.meta.encoder_digest = j.value("encoder_digest", "");
    result.meta.config_digest = j.value("config_digest", "");
    result.meta.task = j.value("task", "class");

    // read all named tensors, then place them by name with shape checks
    std::map<std::string, core::Tensor> tensors;
    while (true) {
        const int peek = in.peek();
        if (peek == std::char_traits<char>::eof()) break;
        const uint16_t name_len = get_u16(in, "tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != static_cast<std::streamsize>(name_len))
            throw TruncatedError("checkpoint truncated reading tensor name");
        const int rank = in.get();
        if (rank == std::char_traits<char>::eof())
            throw TruncatedError("checkpoint truncated reading rank of " + name);
        std::vector<int> dims;
        size_t numel = 1;
        for (int r = 0; r < rank; ++r) {
            const uint32_t d = get_u32(in, "dims of " + name);
            dims.push_back(static_cast<int>(d));
            numel *= d;
        }
        core::Tensor t;
        t.dims = dims;
        t.data.resize(numel);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(sizeof(float) * numel));
        if (in.gcount() != static_cast<std::streamsize>(sizeof(float) * numel))
            throw TruncatedError("checkpoint truncated reading payload of " + name);
        tensors.emplace(std::move(name), std::move(t));
    }

    ModelParams expected = ModelParams::init(result.meta.config);
    long visited = 0;
    expected.visit([&](const std::string& name, core::Tensor& t, bool) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw TensorShapeError("checkpoint missing tensor " + name);
        if (it->second.dims != t.dims)
            throw TensorShapeError("checkpoint tensor " + name + " has shape " + it->second.shape_str() +
                                   ", expected " + t.shape_str());
        t = it->second;
        ++visited;
    });
    if (visited != static_cast<long>(tensors.size()))
        throw TensorShapeError("checkpoint holds " + std::to_string(tensors.size()) +
                               " tensors, expected " + std::to_string(visited));
    result.params = std::move(expected);
    result.params.shape_audit();
    return result;
}

}  // namespace idu::model
