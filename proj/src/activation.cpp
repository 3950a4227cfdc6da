#include <lpass/activation.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

namespace lpass {

void ActivationTensor::validate() const
{
    if (static_cast<index_t>(sample_ids.size()) != data.rows()) {
        throw Error("activation tensor: " + std::to_string(sample_ids.size()) + " sample ids for " +
                    std::to_string(data.rows()) + " rows");
    }
    for (const auto& id : sample_ids) {
        if (id.empty() || id.find('\n') != std::string::npos) {
            throw Error("activation tensor: sample ids must be non-empty and free of newlines");
        }
    }
    if (!data.allFinite()) throw Error("activation tensor: non-finite value in layer " + std::to_string(layer_index));
}

namespace {

void put_u32(std::string& buf, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t checked_u32(index_t v, const char* what)
{
    if (v < 0 || static_cast<std::uint64_t>(v) > UINT32_MAX) throw Error(std::string("LPT ") + what + " exceeds u32");
    return static_cast<std::uint32_t>(v);
}

} // namespace

void write_tensor(const ActivationTensor& tensor, std::ostream& out)
{
    tensor.validate();

    std::string ids;
    for (std::size_t i = 0; i < tensor.sample_ids.size(); ++i) {
        if (i) ids.push_back('\n');
        ids += tensor.sample_ids[i];
    }

    std::string buf;
    buf.reserve(lpt_header_bytes + ids.size() + 4 * static_cast<std::size_t>(tensor.data.size()));
    buf.append(lpt_magic);
    put_u32(buf, tensor.layer_index);
    put_u32(buf, checked_u32(tensor.num_samples(), "num_samples"));
    put_u32(buf, checked_u32(tensor.hidden_dim(), "hidden_dim"));
    put_u32(buf, checked_u32(static_cast<index_t>(ids.size()), "id block"));
    buf += ids;
    const float* values = tensor.data.data();
    for (index_t i = 0; i < tensor.data.size(); ++i) put_u32(buf, std::bit_cast<std::uint32_t>(values[i]));

    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("LPT write failed");
}

void write_tensor(const ActivationTensor& tensor, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_tensor(tensor, out);
    out.close();
    if (!out) throw Error("I/O failure writing " + path.string());
}

ActivationTensor read_tensor(std::istream& in)
{
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < lpt_magic.size() || std::string_view(bytes).substr(0, 4) != lpt_magic) {
        throw Error("not an LPT file");
    }
    if (bytes.size() < lpt_header_bytes) {
        throw Error("truncated LPT header: expected " + std::to_string(lpt_header_bytes) + " bytes, got " +
                    std::to_string(bytes.size()));
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

    ActivationTensor t;
    t.layer_index = get_u32(p + 4);
    const std::uint64_t rows = get_u32(p + 8);
    const std::uint64_t cols = get_u32(p + 12);
    const std::uint64_t id_len = get_u32(p + 16);

    const std::uint64_t expected = lpt_header_bytes + id_len + 4 * rows * cols;
    if (bytes.size() < expected) {
        throw Error("truncated LPT payload: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
    }
    if (bytes.size() > expected) {
        throw Error("LPT file has " + std::to_string(bytes.size() - expected) + " trailing bytes");
    }

    const std::string_view id_block(bytes.data() + lpt_header_bytes, id_len);
    if (rows > 0) {
        std::size_t start = 0;
        while (true) {
            const auto nl = id_block.find('\n', start);
            t.sample_ids.emplace_back(id_block.substr(start, nl == std::string_view::npos ? nl : nl - start));
            if (nl == std::string_view::npos) break;
            start = nl + 1;
        }
    } else if (!id_block.empty()) {
        throw Error("LPT id block is non-empty for zero samples");
    }

    t.data.resize(static_cast<index_t>(rows), static_cast<index_t>(cols));
    const unsigned char* payload = p + lpt_header_bytes + id_len;
    float* values = t.data.data();
    for (std::uint64_t i = 0; i < rows * cols; ++i) values[i] = std::bit_cast<float>(get_u32(payload + 4 * i));

    t.validate();
    return t;
}

ActivationTensor read_tensor(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open LPT file " + path.string());
    try {
        return read_tensor(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::string_view to_string(Pooling p)
{
    switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::first_token: return "first_token";
    case Pooling::last_token: return "last_token";
    }
    return "mean";
}

Pooling parse_pooling(std::string_view name)
{
    if (name == "mean") return Pooling::mean;
    if (name == "first_token") return Pooling::first_token;
    if (name == "last_token") return Pooling::last_token;
    throw Error("unknown pooling mode '" + std::string(name) + "'");
}

namespace {
constexpr std::array<std::pair<ConfigTag, std::string_view>, 6> config_names = {{
    {ConfigTag::baseline, "baseline"},
    {ConfigTag::quant4, "quant4"},
    {ConfigTag::quant8, "quant8"},
    {ConfigTag::pruned, "pruned"},
    {ConfigTag::pruned_quant4, "pruned_quant4"},
    {ConfigTag::pruned_quant8, "pruned_quant8"},
}};
} // namespace

std::string_view to_string(ConfigTag c)
{
    for (const auto& [tag, name] : config_names) {
        if (tag == c) return name;
    }
    return "baseline";
}

ConfigTag parse_config_tag(std::string_view name)
{
    for (const auto& [tag, n] : config_names) {
        if (n == name) return tag;
    }
    throw Error("unknown config tag '" + std::string(name) + "'");
}

ActivationSetManifest read_activation_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open activation manifest " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }

    ActivationSetManifest m;
    try {
        m.model_id = doc.at("model_id").get<std::string>();
        m.config_tag = parse_config_tag(doc.at("config_tag").get<std::string>());
        m.num_layers = doc.at("num_layers").get<std::uint32_t>();
        m.pooling = parse_pooling(doc.at("pooling").get<std::string>());
        for (const auto& entry : doc.at("layers")) m.layer_files.emplace_back(entry.at("path").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    if (m.layer_files.size() != static_cast<std::size_t>(m.num_layers) + 1) {
        throw Error(path.string() + ": expected " + std::to_string(m.num_layers + 1) + " layer files, found " +
                    std::to_string(m.layer_files.size()));
    }
    m.base_dir = path.parent_path();
    return m;
}

void write_activation_manifest(const ActivationSetManifest& m, const std::filesystem::path& path)
{
    nlohmann::json doc;
    doc["model_id"] = m.model_id;
    doc["config_tag"] = std::string(to_string(m.config_tag));
    doc["num_layers"] = m.num_layers;
    doc["pooling"] = std::string(to_string(m.pooling));
    doc["layers"] = nlohmann::json::array();
    for (std::size_t k = 0; k < m.layer_files.size(); ++k) {
        doc["layers"].push_back({{"layer", k}, {"path", m.layer_files[k].generic_string()}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

std::vector<ActivationTensor> load_activation_set(const ActivationSetManifest& manifest)
{
    std::vector<ActivationTensor> layers;
    layers.reserve(manifest.layer_files.size());
    for (std::size_t k = 0; k < manifest.layer_files.size(); ++k) {
        auto t = read_tensor(manifest.base_dir / manifest.layer_files[k]);
        if (t.layer_index != k) {
            throw Error("layer file " + manifest.layer_files[k].string() + " holds layer " +
                        std::to_string(t.layer_index) + ", expected " + std::to_string(k));
        }
        if (!layers.empty()) {
            if (t.sample_ids != layers.front().sample_ids) {
                throw Error("layer " + std::to_string(k) + " sample ids differ from layer 0");
            }
        }
        layers.push_back(std::move(t));
    }
    return layers;
}

} // namespace lpass
