#include "lsim/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lsim/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; byte swapping not implemented");

namespace lsim {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'M', 'N'};
constexpr uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint truncated while reading " + what);
    return v;
}

// Zero-weight skeleton with the right shapes for a config; loading fills it.
MlpParams zero_mlp(const std::vector<int64_t>& dims) {
    MlpParams p;
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        MlpLayer l;
        l.w = Tensor::zeros({dims[i + 1], dims[i]});
        l.b = Tensor::zeros({1, dims[i + 1]});
        l.act = (i + 2 < dims.size()) ? Activation::Relu : Activation::None;
        p.layers.push_back(std::move(l));
    }
    return p;
}

ModelParams skeleton(const ModelConfig& cfg) {
    const int64_t d = cfg.node_dim, D = cfg.graph_dim;
    ModelParams p;
    p.cfg = cfg;
    p.semantic_table = Tensor::zeros({cfg.categories, d});
    p.geo_mlp = zero_mlp({5, d, d});
    p.node_mlp = zero_mlp({2 * d, d, d});
    p.edge_mlp = zero_mlp({8, d, d});
    p.intra_mlp = zero_mlp({3 * d, d, d});
    p.update_mlp = zero_mlp({3 * d, d, d});
    p.gate_mlp = zero_mlp({d, D});
    p.value_mlp = zero_mlp({d, D});
    p.out_mlp = zero_mlp({D, D});
    return p;
}

}  // namespace

void save_checkpoint(const ModelParams& p, const std::string& path) {
    p.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put<uint32_t>(out, uint32_t(p.cfg.categories));
    put<uint32_t>(out, uint32_t(p.cfg.node_dim));
    put<uint32_t>(out, uint32_t(p.cfg.graph_dim));
    put<uint32_t>(out, uint32_t(p.cfg.rounds));
    put<uint8_t>(out, p.cfg.use_edges ? 1 : 0);
    put<uint8_t>(out, p.cfg.use_positions ? 1 : 0);
    put<uint8_t>(out, p.cfg.use_semantics ? 1 : 0);
    put<uint8_t>(out, 0);
    const auto named = p.named_tensors();
    put<uint32_t>(out, uint32_t(named.size()));
    for (const auto& [name, t] : named) {
        put<uint32_t>(out, uint32_t(name.size()));
        out.write(name.data(), std::streamsize(name.size()));
        put<uint32_t>(out, uint32_t(t->shape().size()));
        for (int64_t dim : t->shape()) put<uint64_t>(out, uint64_t(dim));
        out.write(reinterpret_cast<const char*>(t->data()),
                  std::streamsize(t->numel() * sizeof(double)));
    }
    out.write(kMagic, 4);
    if (!out) throw IoError("write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path + ": not a model checkpoint (bad magic)");
    const uint32_t version = get<uint32_t>(in, "version");
    if (version != kVersion)
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kVersion) + ")");
    ModelConfig cfg;
    cfg.categories = int32_t(get<uint32_t>(in, "categories"));
    cfg.node_dim = int32_t(get<uint32_t>(in, "node_dim"));
    cfg.graph_dim = int32_t(get<uint32_t>(in, "graph_dim"));
    cfg.rounds = int32_t(get<uint32_t>(in, "rounds"));
    cfg.use_edges = get<uint8_t>(in, "use_edges") != 0;
    cfg.use_positions = get<uint8_t>(in, "use_positions") != 0;
    cfg.use_semantics = get<uint8_t>(in, "use_semantics") != 0;
    get<uint8_t>(in, "padding");
    if (cfg.categories < 1 || cfg.node_dim < 1 || cfg.graph_dim < 1 || cfg.rounds < 1)
        throw IoError(path + ": nonsense header values");

    ModelParams p = skeleton(cfg);
    auto named = p.named_tensors();
    const uint32_t count = get<uint32_t>(in, "tensor count");
    if (count != named.size())
        throw DimError(path + ": checkpoint has " + std::to_string(count) + " tensors, model needs " +
                       std::to_string(named.size()));
    for (auto& [name, t] : named) {
        const uint32_t len = get<uint32_t>(in, "name length");
        std::string fname(len, '\0');
        in.read(fname.data(), len);
        if (!in) throw IoError(path + ": truncated tensor name");
        if (fname != name)
            throw DimError(path + ": expected tensor \"" + name + "\", found \"" + fname + "\"");
        const uint32_t rank = get<uint32_t>(in, name + " rank");
        if (rank != t->shape().size())
            throw DimError(path + ": " + name + " has rank " + std::to_string(rank));
        for (size_t i = 0; i < rank; ++i) {
            const uint64_t dim = get<uint64_t>(in, name + " dims");
            if (int64_t(dim) != t->shape()[i])
                throw DimError(path + ": " + name + " dimension " + std::to_string(i) + " is " +
                               std::to_string(dim) + ", expected " +
                               std::to_string(t->shape()[i]));
        }
        in.read(reinterpret_cast<char*>(t->data()),
                std::streamsize(t->numel() * sizeof(double)));
        if (!in) throw IoError(path + ": truncated data for " + name);
        t->ensure_finite("checkpoint tensor " + name);
    }
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path + ": missing trailer");
    return p;
}

}  // namespace lsim
