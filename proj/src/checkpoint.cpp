#include "mokge/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mokge {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'K', 'G', 'E', 'C', 'K', 'P'};

template <typename T>
void write_pod(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw std::runtime_error("checkpoint truncated");
    return value;
}

std::string read_string(std::istream& is, std::size_t len) {
    std::string s(len, '\0');
    if (len > 0 && !is.read(s.data(), static_cast<std::streamsize>(len)))
        throw std::runtime_error("checkpoint truncated");
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& metadata) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(os, kCheckpointVersion);
    const std::string meta = metadata.dump();
    write_pod<std::uint64_t>(os, meta.size());
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    write_pod<std::uint64_t>(os, params.size());
    for (const auto& [name, t] : params) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
        for (std::size_t d : t.shape())
            write_pod<std::uint64_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!os)
        throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[sizeof(kMagic)];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.metadata = nlohmann::json::parse(read_string(is, read_pod<std::uint64_t>(is)));
    const auto count = read_pod<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = read_string(is, read_pod<std::uint32_t>(is));
        const auto rank = read_pod<std::uint32_t>(is);
        Shape shape(rank);
        std::size_t numel = 1;
        for (auto& d : shape) {
            d = read_pod<std::uint64_t>(is);
            numel *= d;
        }
        std::vector<double> values(numel);
        if (numel > 0 && !is.read(reinterpret_cast<char*>(values.data()),
                                  static_cast<std::streamsize>(numel * sizeof(double))))
            throw std::runtime_error("checkpoint truncated in tensor " + name);
        ckpt.tensors.emplace(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
    }
    return ckpt;
}

void restore_parameters(ParameterSet& params, const Checkpoint& ckpt) {
    if (ckpt.tensors.size() != params.size())
        throw std::runtime_error("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                                 " tensors, model expects " + std::to_string(params.size()));
    for (auto& [name, t] : params) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end())
            throw std::runtime_error("checkpoint is missing parameter " + name);
        if (it->second.shape() != t.shape())
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": " +
                                     shape_string(it->second.shape()) + " vs " +
                                     shape_string(t.shape()));
        std::ranges::copy(it->second.data(), t.mutable_data().begin());
    }
}

}  // namespace mokge
