#include "checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rng.hpp"

namespace etdpc::model {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'T', 'D', 'P', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

json config_to_json(const ModelConfig& c) {
    json stages = json::array();
    for (const auto& s : c.vision_stages)
        stages.push_back({{"channels", s.channels}, {"blocks", s.blocks}, {"stride", s.stride}});
    return json{{"image_height", c.image_height},
                {"image_width", c.image_width},
                {"vision_stages", stages},
                {"pool_grid_h", c.pool_grid_h},
                {"pool_grid_w", c.pool_grid_w},
                {"text_layers", c.text_layers},
                {"text_heads", c.text_heads},
                {"text_dim", c.text_dim},
                {"text_ffn_dim", c.text_ffn_dim},
                {"seq_len", c.seq_len},
                {"head_mixing", c.head_mixing},
                {"projection_dim", c.projection_dim},
                {"dropout", c.dropout},
                {"cross_attention_dim", c.cross_attention_dim},
                {"bidirectional_cross_attention", c.bidirectional_cross_attention},
                {"modality", modality_name(c.modality)},
                {"class_count", c.class_count},
                {"vocab_size", c.vocab_size}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.image_height = j.at("image_height").get<int32_t>();
    c.image_width = j.at("image_width").get<int32_t>();
    c.vision_stages.clear();
    for (const auto& s : j.at("vision_stages"))
        c.vision_stages.push_back({s.at("channels").get<int64_t>(), s.at("blocks").get<int64_t>(),
                                   s.at("stride").get<int64_t>()});
    c.pool_grid_h = j.at("pool_grid_h").get<int64_t>();
    c.pool_grid_w = j.at("pool_grid_w").get<int64_t>();
    c.text_layers = j.at("text_layers").get<int64_t>();
    c.text_heads = j.at("text_heads").get<int64_t>();
    c.text_dim = j.at("text_dim").get<int64_t>();
    c.text_ffn_dim = j.at("text_ffn_dim").get<int64_t>();
    c.seq_len = j.at("seq_len").get<int64_t>();
    c.head_mixing = j.at("head_mixing").get<bool>();
    c.projection_dim = j.at("projection_dim").get<int64_t>();
    c.dropout = j.at("dropout").get<double>();
    c.cross_attention_dim = j.at("cross_attention_dim").get<int64_t>();
    c.bidirectional_cross_attention = j.at("bidirectional_cross_attention").get<bool>();
    c.modality = modality_from(j.at("modality").get<std::string>());
    c.class_count = j.at("class_count").get<int64_t>();
    c.vocab_size = j.at("vocab_size").get<int64_t>();
    return c;
}

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& v, uint64_t& hash) {
    for (double d : v) {
        uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        hash = fnv1a64_bytes(b, 8, hash);
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_doubles(std::istream& in, std::vector<double>& v, uint64_t& hash, const std::string& path) {
    for (double& d : v) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw DataError("truncated checkpoint: " + path);
        hash = fnv1a64_bytes(b, 8, hash);
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
        std::memcpy(&d, &bits, 8);
    }
}

}  // namespace

void save_bundle(const std::string& path, const Bundle& bundle, const nn::Adam* optimizer) {
    json header;
    header["model_config"] = config_to_json(bundle.config);
    header["class_labels"] = bundle.class_labels;
    header["vocab"] = bundle.vocab.tokens();
    json ptable = json::array();
    for (const auto& e : bundle.params.entries())
        ptable.push_back({{"name", e.name}, {"shape", e.value.shape}, {"trainable", e.trainable}});
    header["params"] = ptable;
    if (optimizer) {
        const nn::AdamConfig& oc = optimizer->config();
        header["optimizer"] = {{"step", optimizer->step_count()},
                               {"learning_rate", oc.learning_rate},
                               {"weight_decay", oc.weight_decay},
                               {"epsilon", oc.epsilon},
                               {"clip_value", oc.clip_value},
                               {"beta1", oc.beta1},
                               {"beta2", oc.beta2}};
    } else {
        header["optimizer"] = nullptr;
    }
    const std::string hstr = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    write_u32(out, kVersion);
    write_u64(out, hstr.size());
    out.write(hstr.data(), static_cast<std::streamsize>(hstr.size()));

    uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto& e : bundle.params.entries()) write_doubles(out, e.value.v, hash);
    if (optimizer) {
        auto& opt = *const_cast<nn::Adam*>(optimizer);
        for (const auto& t : opt.first_moments()) write_doubles(out, t.v, hash);
        for (const auto& t : opt.second_moments()) write_doubles(out, t.v, hash);
    }
    write_u64(out, hash);
    if (!out) throw DataError("short write on checkpoint: " + path);
}

LoadedBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path);
    const uint32_t version = read_u32(in);
    if (version != kVersion)
        throw DataError("checkpoint version mismatch in " + path + ": found " +
                        std::to_string(version) + ", expected " + std::to_string(kVersion));
    const uint64_t hlen = read_u64(in);
    if (!in || hlen > (1ULL << 31)) throw DataError("corrupt checkpoint header: " + path);
    std::string hstr(hlen, '\0');
    in.read(hstr.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError("truncated checkpoint: " + path);

    json header;
    try {
        header = json::parse(hstr);
    } catch (const json::parse_error& e) {
        throw DataError("corrupt checkpoint header in " + path + ": " + e.what());
    }

    const ModelConfig config = config_from_json(header.at("model_config"));
    corpus::Vocabulary vocab(header.at("vocab").get<std::vector<std::string>>());
    auto labels = header.at("class_labels").get<std::vector<std::string>>();

    LoadedBundle result{make_bundle(config, std::move(vocab), std::move(labels), /*init_seed=*/0), {}};
    Bundle& b = result.bundle;

    const json& ptable = header.at("params");
    if (ptable.size() != b.params.size())
        throw DataError("checkpoint parameter table does not match the architecture: " + path);
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < b.params.size(); ++i) {
        auto& e = b.params.entries()[i];
        const json& row = ptable.at(i);
        if (row.at("name").get<std::string>() != e.name ||
            row.at("shape").get<std::vector<int64_t>>() != e.value.shape)
            throw DataError("checkpoint parameter '" + row.at("name").get<std::string>() +
                            "' does not match the architecture: " + path);
        read_doubles(in, e.value.v, hash, path);
    }
    if (!header.at("optimizer").is_null()) {
        const json& oj = header.at("optimizer");
        nn::AdamConfig oc;
        oc.learning_rate = oj.at("learning_rate").get<double>();
        oc.weight_decay = oj.at("weight_decay").get<double>();
        oc.epsilon = oj.at("epsilon").get<double>();
        oc.clip_value = oj.at("clip_value").get<double>();
        oc.beta1 = oj.at("beta1").get<double>();
        oc.beta2 = oj.at("beta2").get<double>();
        nn::Adam adam(b.params, oc);
        for (auto& t : adam.first_moments()) read_doubles(in, t.v, hash, path);
        for (auto& t : adam.second_moments()) read_doubles(in, t.v, hash, path);
        adam.set_step_count(oj.at("step").get<int64_t>());
        result.optimizer = std::move(adam);
    }
    const uint64_t stored = read_u64(in);
    if (!in) throw DataError("truncated checkpoint: " + path);
    if (stored != hash) throw DataError("checkpoint content hash mismatch (corrupt file): " + path);
    return result;
}

}  // namespace etdpc::model
