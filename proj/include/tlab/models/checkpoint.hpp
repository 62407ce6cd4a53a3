#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/layout/framework.hpp"
#include "tlab/transformer/config.hpp"
#include "tlab/transformer/model.hpp"
#include "tlab/transformer/params.hpp"

namespace tlab {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'D', 'F', 'T', 'M'};

/// Trained weights plus everything needed to resume or decode with them.
/// `objective` is the pretraining lineage: the objective that produced a
/// pretrained checkpoint, or the tag of the checkpoint a fine-tune started
/// from (none for random init).
struct Checkpoint {
    ModelConfig config;
    PretrainObjective objective = PretrainObjective::None;
    std::optional<Framework> framework;  ///< set once fine-tuned
    bool encoder_decoder = false;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::size_t interval = 5;
    std::vector<std::string> vocab;
    ParameterSet<float> params;

    TransformerModel<float> model() const { return {config, encoder_decoder, params}; }

    friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
        return a.config == b.config && a.objective == b.objective && a.framework == b.framework &&
               a.encoder_decoder == b.encoder_decoder && a.step == b.step && a.seed == b.seed &&
               a.interval == b.interval && a.vocab == b.vocab && a.params.equals(b.params);
    }
};

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
  public:
    ByteReader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == end_; }
    std::size_t remaining() const { return end_ - pos_; }

  private:
    void need(std::size_t n) const {
        if (n > end_ - pos_) throw CheckpointError("checkpoint truncated");
    }
    const std::string& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::string& bytes, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < n) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n - off, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

inline std::string checkpoint_header(const Checkpoint& c) {
    std::ostringstream h;
    h << "layers=" << c.config.layers << '\n'
      << "heads=" << c.config.heads << '\n'
      << "hidden=" << c.config.hidden << '\n'
      << "vocab_size=" << c.config.vocab_size << '\n'
      << "max_positions=" << c.config.max_positions << '\n'
      << "type_count=" << c.config.type_count << '\n'
      << "ffn_multiplier=" << c.config.ffn_multiplier << '\n'
      << "tie_output=" << (c.config.tie_output_embedding ? 1 : 0) << '\n'
      << "objective=" << to_string(c.objective) << '\n'
      << "framework=" << (c.framework ? std::string(to_string(*c.framework)) : std::string("none")) << '\n'
      << "encoder_decoder=" << (c.encoder_decoder ? 1 : 0) << '\n'
      << "step=" << c.step << '\n'
      << "seed=" << c.seed << '\n'
      << "interval=" << c.interval << '\n'
      << "vocab=";
    for (std::size_t i = 0; i < c.vocab.size(); ++i) h << (i ? " " : "") << c.vocab[i];
    h << '\n';
    return h.str();
}

inline std::uint64_t parse_uint(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw CheckpointError("checkpoint header missing '" + key + "'");
    try {
        std::size_t used = 0;
        const auto v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw CheckpointError("checkpoint header has malformed '" + key + "'");
    }
}

}  // namespace detail

/// Serialized bytes: magic, version, header length + key=value header,
/// tensor count, per-tensor records (name length, name, rank, dims,
/// little-endian float32 data), then CRC32 of everything before it.
inline std::string serialize_checkpoint(const Checkpoint& c) {
    std::string out(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);
    const auto header = detail::checkpoint_header(c);
    detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    detail::put_u32(out, static_cast<std::uint32_t>(c.params.size()));
    for (const auto& [name, t] : c.params.tensors()) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : t.data()) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            detail::put_u32(out, bits);
        }
    }
    detail::put_u32(out, detail::crc32_of(out, out.size()));
    return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 16) throw CheckpointError("checkpoint truncated");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw CheckpointError("not a checkpoint file (bad magic)");
    {
        detail::ByteReader head(bytes, bytes.size());
        head.take(4);
        const auto version = head.u32();
        if (version != kCheckpointVersion)
            throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                                  std::to_string(kCheckpointVersion) + ")");
    }
    const std::size_t body = bytes.size() - 4;
    const std::string stored = bytes.substr(body);
    detail::ByteReader tail(stored, 4);
    if (tail.u32() != detail::crc32_of(bytes, body)) throw CheckpointError("checkpoint checksum mismatch");

    detail::ByteReader r(bytes, body);
    r.take(8);
    const auto header = r.take(r.u32());
    std::map<std::string, std::string> kv;
    std::istringstream hs(header);
    std::string line;
    while (std::getline(hs, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw CheckpointError("malformed checkpoint header line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    Checkpoint c;
    c.config.layers = detail::parse_uint(kv, "layers");
    c.config.heads = detail::parse_uint(kv, "heads");
    c.config.hidden = detail::parse_uint(kv, "hidden");
    c.config.vocab_size = detail::parse_uint(kv, "vocab_size");
    c.config.max_positions = detail::parse_uint(kv, "max_positions");
    c.config.type_count = detail::parse_uint(kv, "type_count");
    c.config.ffn_multiplier = detail::parse_uint(kv, "ffn_multiplier");
    c.config.tie_output_embedding = detail::parse_uint(kv, "tie_output") != 0;
    c.encoder_decoder = detail::parse_uint(kv, "encoder_decoder") != 0;
    c.step = detail::parse_uint(kv, "step");
    c.seed = detail::parse_uint(kv, "seed");
    c.interval = detail::parse_uint(kv, "interval");
    try {
        c.objective = parse_objective(kv.at("objective"));
        const auto& fw = kv.at("framework");
        if (fw != "none") c.framework = parse_framework(fw);
        std::istringstream vs(kv.at("vocab"));
        c.vocab.assign(std::istream_iterator<std::string>(vs), std::istream_iterator<std::string>());
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
    }
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name = r.take(r.u32());
        const auto rank = r.u32();
        if (rank > 8) throw CheckpointError("checkpoint tensor '" + name + "' has implausible rank");
        Shape shape(rank);
        std::size_t numel = 1;
        for (auto& d : shape) {
            d = r.u32();
            numel *= d;
            if (d != 0 && numel / d > r.remaining()) throw CheckpointError("checkpoint truncated");
        }
        if (numel > r.remaining() / 4) throw CheckpointError("checkpoint truncated");
        std::vector<float> data(numel);
        for (auto& v : data) {
            const auto bits = r.u32();
            std::memcpy(&v, &bits, 4);
        }
        c.params.set(name, Tensor<float>::from_data(std::move(shape), std::move(data)));
    }
    if (!r.done()) throw CheckpointError("checkpoint has trailing bytes before checksum");
    const auto specs = parameter_specs(c.config, c.encoder_decoder);
    if (specs.size() != c.params.size())
        throw CheckpointError("checkpoint holds " + std::to_string(c.params.size()) + " tensors, expected " +
                              std::to_string(specs.size()));
    for (const auto& spec : specs) {
        if (!c.params.contains(spec.name)) throw CheckpointError("checkpoint is missing tensor '" + spec.name + "'");
        if (c.params.get(spec.name).shape() != spec.shape)
            throw CheckpointError("checkpoint tensor '" + spec.name + "' has the wrong shape");
    }
    return c;
}

/// Writes through a temporary file and renames, so readers never see a
/// partial checkpoint.
inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    const auto bytes = serialize_checkpoint(c);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError("failed writing checkpoint " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into place at " + path + ": " + ec.message());
}

/// Reads and verifies the whole file before building anything.
inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot read checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace tlab
