#include <fstream>
#include <sstream>

#include "../common/binary_io.hpp"
#include "etlnet/model.hpp"

namespace etlnet {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::string config_block(const ModelConfig& cfg) {
    std::string text;
    for (const auto& [k, v] : model_config_to_kv(cfg)) text += k + "=" + v + "\n";
    return text;
}

ModelConfig parse_config_block(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("checkpoint config line without '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    try {
        return model_config_from_kv(kv);
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("checkpoint config: ") + e.what());
    }
}

ModelConfig read_header(std::istream& in, const std::string& path) {
    binio::expect_magic(in, "ETLN", path);
    const auto version = binio::get_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) {
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    return parse_config_block(binio::get_string(in, "config block"));
}

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out.write("ETLN", 4);
    binio::put_le<std::uint32_t>(out, kCheckpointVersion);
    binio::put_string(out, config_block(model.config()));
    const auto params = model.parameters();
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        binio::put_string(out, p.name);
        const auto& shape = p.tensor->shape();
        binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) binio::put_le<std::uint64_t>(out, d);
        for (T v : p.tensor->data()) binio::put_f32(out, static_cast<float>(v));
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
    return read_header(in, path.string());
}

template <class T>
Model<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
    const ModelConfig cfg = read_header(in, path.string());
    Rng rng(0);
    Model<T> model = build_model<T>(cfg, rng);
    auto params = model.parameters();
    const auto count = binio::get_le<std::uint32_t>(in, "tensor count");
    if (count != params.size()) {
        throw FormatError(path.string() + ": checkpoint holds " + std::to_string(count) + " tensors, model has " +
                          std::to_string(params.size()));
    }
    for (auto& p : params) {
        const auto name = binio::get_string(in, "tensor name");
        if (name != p.name) throw FormatError(path.string() + ": expected tensor '" + p.name + "', found '" + name + "'");
        const auto rank = binio::get_le<std::uint32_t>(in, "tensor rank");
        Shape shape(rank);
        for (auto& d : shape) d = binio::get_le<std::uint64_t>(in, "tensor extent");
        if (shape != p.tensor->shape()) {
            throw FormatError(path.string() + ": tensor '" + name + "' has shape " + shape_str(shape) +
                              ", model expects " + shape_str(p.tensor->shape()));
        }
        for (auto& v : p.tensor->data()) v = static_cast<T>(binio::get_f32(in, "tensor values"));
    }
    return model;
}

template void save_checkpoint(const std::filesystem::path&, const Model<float>&);
template void save_checkpoint(const std::filesystem::path&, const Model<double>&);
template Model<float> load_checkpoint<float>(const std::filesystem::path&);
template Model<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace etlnet
