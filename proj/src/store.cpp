// SPDX-License-Identifier: Apache-2.0
#include "lotpool/store.hpp"

#include <zlib.h>

#include <charconv>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lotpool/errors.hpp"

namespace lotpool {

namespace {

constexpr char kMagic[4] = {'L', 'P', 'C', 'K'};
constexpr std::uint8_t kDtypeFloat = 1;
constexpr std::uint8_t kDtypeBits = 2;

class Writer {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t>& buffer() { return buf_; }

  private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
  public:
    Reader(const std::vector<std::uint8_t>& buf, std::size_t end) : buf_(buf), end_(end) {}

    std::size_t offset() const { return off_; }

    void need(std::size_t n, const char* what) const {
        if (n > end_ - off_) throw FormatError(std::string("truncated checkpoint while reading ") + what, off_);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return buf_[off_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf_[off_ + i]} << (8 * i);
        off_ += 4;
        return v;
    }
    const std::uint8_t* take(std::size_t n, const char* what) {
        need(n, what);
        const std::uint8_t* p = buf_.data() + off_;
        off_ += n;
        return p;
    }

  private:
    const std::vector<std::uint8_t>& buf_;
    std::size_t end_;
    std::size_t off_ = 0;
};

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string encode_meta(const CheckpointMeta& m) {
    std::ostringstream os;
    os << "schema_version=" << m.schema_version << '\n'
       << "imp_iteration=" << m.imp_iteration << '\n'
       << "density=" << format_double(m.density) << '\n'
       << "rewind_epoch=" << m.rewind_epoch << '\n'
       << "prune_fraction=" << format_double(m.prune_fraction) << '\n'
       << "layer_sizes=" << join_sizes(m.layer_sizes) << '\n'
       << "init_seed=" << m.init_seed << '\n'
       << "shuffle_seed=" << m.shuffle_seed << '\n';
    for (const auto& [k, v] : m.extra) {
        if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw DomainError("metadata entry '" + k + "' cannot be stored as a key=value line");
        os << k << '=' << v << '\n';
    }
    return os.str();
}

template <typename T>
T parse_number(const std::string& text, const std::string& key, std::size_t offset) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw FormatError("bad numeric metadata value for '" + key + "': '" + text + "'", offset);
    return v;
}

CheckpointMeta decode_meta(const std::string& text, std::size_t offset) {
    CheckpointMeta m;
    m.layer_sizes.clear();
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("metadata line without '=': '" + line + "'", offset);
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "schema_version") m.schema_version = parse_number<std::uint32_t>(val, key, offset);
        else if (key == "imp_iteration") m.imp_iteration = parse_number<int>(val, key, offset);
        else if (key == "density") m.density = parse_number<double>(val, key, offset);
        else if (key == "rewind_epoch") m.rewind_epoch = parse_number<int>(val, key, offset);
        else if (key == "prune_fraction") m.prune_fraction = parse_number<double>(val, key, offset);
        else if (key == "init_seed") m.init_seed = parse_number<std::uint64_t>(val, key, offset);
        else if (key == "shuffle_seed") m.shuffle_seed = parse_number<std::uint64_t>(val, key, offset);
        else if (key == "layer_sizes") {
            std::istringstream parts(val);
            std::string part;
            while (std::getline(parts, part, ',')) m.layer_sizes.push_back(parse_number<std::size_t>(part, key, offset));
        } else {
            m.extra[key] = val;
        }
    }
    return m;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& bits) {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return out;
}

void validate_checkpoint(const Checkpoint& ckpt) {
    require_aligned(ckpt.params, ckpt.mask);
    std::size_t m = 0;
    for (const auto& e : ckpt.params.entries()) {
        if (!e.is_weight()) continue;
        const auto& bits = ckpt.mask[m++].bits;
        const auto w = e.tensor.data();
        for (std::size_t i = 0; i < w.size(); ++i)
            if (!bits[i] && w[i] != 0.0f)
                throw DomainError("checkpoint entry '" + e.name + "' is nonzero outside its mask");
    }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    validate_checkpoint(ckpt);
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.str(encode_meta(ckpt.meta));
    w.u32(static_cast<std::uint32_t>(ckpt.params.num_entries() + ckpt.mask.num_entries()));
    for (const auto& e : ckpt.params.entries()) {
        w.str(e.name);
        w.u8(kDtypeFloat);
        w.u32(static_cast<std::uint32_t>(e.tensor.rank()));
        for (std::size_t d : e.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (float v : e.tensor.data()) w.f32(v);
    }
    for (const auto& e : ckpt.mask.entries()) {
        w.str(e.name);
        w.u8(kDtypeBits);
        w.u32(static_cast<std::uint32_t>(e.shape.size()));
        for (std::size_t d : e.shape) w.u32(static_cast<std::uint32_t>(d));
        const auto packed = pack_bits(e.bits);
        w.bytes(packed.data(), packed.size());
    }
    auto& buf = w.buffer();
    const auto crc = static_cast<std::uint32_t>(::crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    w.u32(crc);
    return std::move(buf);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("bad checkpoint magic (expected \"LPCK\")", 0);
    if (bytes.size() < 12) throw FormatError("truncated checkpoint", bytes.size());
    const std::size_t body_end = bytes.size() - 4;
    Reader r(bytes, body_end);
    r.take(4, "magic");
    if (const auto version = r.u32("version"); version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);

    // Structural pass: bounds-checked walk that records where everything lives.
    struct RawTensor {
        std::string name;
        std::uint8_t dtype;
        Shape shape;
        const std::uint8_t* data;
        std::size_t offset;
    };
    const std::uint32_t meta_len = r.u32("metadata length");
    const std::size_t meta_off = r.offset();
    const auto* meta_ptr = r.take(meta_len, "metadata");
    const std::uint32_t count = r.u32("tensor count");
    std::vector<RawTensor> raw;
    for (std::uint32_t t = 0; t < count; ++t) {
        RawTensor rt;
        rt.offset = r.offset();
        const std::uint32_t name_len = r.u32("tensor name length");
        const auto* name = r.take(name_len, "tensor name");
        rt.name.assign(reinterpret_cast<const char*>(name), name_len);
        rt.dtype = r.u8("dtype tag");
        if (rt.dtype != kDtypeFloat && rt.dtype != kDtypeBits)
            throw FormatError("unknown dtype tag " + std::to_string(rt.dtype), r.offset() - 1);
        const std::uint32_t ndim = r.u32("ndim");
        if (ndim == 0) throw FormatError("tensor '" + rt.name + "' has no dimensions", r.offset() - 4);
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t dim = r.u32("dimension");
            if (dim == 0) throw FormatError("tensor '" + rt.name + "' has a zero dimension", r.offset() - 4);
            rt.shape.push_back(dim);
            numel *= dim;
            if (numel > body_end) throw FormatError("tensor '" + rt.name + "' is larger than the file", r.offset());
        }
        const std::size_t nbytes = rt.dtype == kDtypeFloat ? numel * 4 : (numel + 7) / 8;
        rt.data = r.take(nbytes, "tensor data");
        raw.push_back(std::move(rt));
    }
    if (r.offset() != body_end) throw FormatError("unexpected bytes after the last tensor", r.offset());

    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body_end + i]} << (8 * i);
    const auto actual = static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(body_end)));
    if (stored != actual) throw CorruptionError("checkpoint checksum mismatch");

    Checkpoint ck;
    ck.meta = decode_meta(std::string(reinterpret_cast<const char*>(meta_ptr), meta_len), meta_off);
    for (const auto& rt : raw) {
        const std::size_t numel = shape_numel(rt.shape);
        if (rt.dtype == kDtypeFloat) {
            if (!ck.mask.entries().empty())
                throw FormatError("parameter tensor '" + rt.name + "' after mask entries", rt.offset);
            std::vector<float> values(numel);
            for (std::size_t i = 0; i < numel; ++i) {
                const std::uint8_t* p = rt.data + 4 * i;
                const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                                           (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
                std::memcpy(&values[i], &bits, 4);
            }
            ck.params.add(rt.name, Tensor(rt.shape, std::move(values)));
        } else {
            std::vector<std::uint8_t> bits(numel);
            for (std::size_t i = 0; i < numel; ++i) bits[i] = (rt.data[i / 8] >> (i % 8)) & 1u;
            if (numel % 8 != 0 && (rt.data[numel / 8] >> (numel % 8)) != 0)
                throw FormatError("mask '" + rt.name + "' has nonzero padding bits", rt.offset);
            ck.mask.add(rt.name, rt.shape, std::move(bits));
        }
    }
    validate_checkpoint(ck);
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

std::string utc_timestamp() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(fixed, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& dir) {
    std::ofstream out(dir / kManifestName, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest in '" + dir.string() + "'");
    out << "schema_version=" << kCheckpointVersion << '\n';
    out << "created=" << manifest.created << '\n';
    out << "dataset_fingerprint=" << manifest.dataset_fingerprint << '\n';
    out << "rewind=" << manifest.rewind_file << '\n';
    out << "checkpoint_count=" << manifest.checkpoints.size() << '\n';
    for (std::size_t t = 0; t < manifest.checkpoints.size(); ++t)
        out << "checkpoint." << t << '=' << manifest.checkpoints[t] << '\n';
    for (const auto& [k, v] : manifest.config) out << "config." << k << '=' << v << '\n';
    if (!out) throw std::runtime_error("failed writing manifest in '" + dir.string() + "'");
}

RunManifest load_manifest(const std::filesystem::path& dir) {
    const auto path = dir / kManifestName;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest '" + path.string() + "'");
    RunManifest m;
    std::map<std::size_t, std::string> ckpts;
    std::size_t expected = 0;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_off = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("manifest line without '='", line_off);
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "schema_version") {
            if (val != std::to_string(kCheckpointVersion))
                throw FormatError("unsupported manifest schema " + val, line_off);
        } else if (key == "created") m.created = val;
        else if (key == "dataset_fingerprint") m.dataset_fingerprint = val;
        else if (key == "rewind") m.rewind_file = val;
        else if (key == "checkpoint_count") expected = parse_number<std::size_t>(val, key, line_off);
        else if (key.rfind("checkpoint.", 0) == 0)
            ckpts[parse_number<std::size_t>(key.substr(11), key, line_off)] = val;
        else if (key.rfind("config.", 0) == 0) m.config[key.substr(7)] = val;
        else throw FormatError("unknown manifest key '" + key + "'", line_off);
    }
    if (ckpts.size() != expected) throw FormatError("manifest lists " + std::to_string(ckpts.size()) +
                                                        " checkpoints but declares " + std::to_string(expected), 0);
    for (std::size_t t = 0; t < expected; ++t) {
        auto it = ckpts.find(t);
        if (it == ckpts.end()) throw FormatError("manifest is missing checkpoint." + std::to_string(t), 0);
        m.checkpoints.push_back(it->second);
    }
    std::vector<std::string> files = m.checkpoints;
    if (!m.rewind_file.empty()) files.push_back(m.rewind_file);
    for (const auto& f : files) {
        if (!std::filesystem::exists(dir / f))
            throw std::runtime_error("manifest lists missing file '" + (dir / f).string() + "'");
        (void)load_checkpoint(dir / f);
    }
    return m;
}

}  // namespace lotpool
