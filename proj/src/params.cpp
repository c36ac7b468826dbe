#include "fedicu/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fedicu/errors.hpp"

namespace fedicu {

static_assert(std::endian::native == std::endian::little,
              "parameter files assume a little-endian host");

std::size_t ParamVector::total_size() const {
    std::size_t n = 0;
    for (const ParamShape& s : layout) n += s.size();
    return n;
}

bool ParamVector::same_layout(const ParamVector& other) const {
    return layout == other.layout;
}

namespace {

constexpr char kMagic[4] = {'F', 'M', 'P', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw FormatError("parameter file truncated in header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_params(const ParamVector& params) {
    if (params.layout.empty()) throw FormatError("serialize_params: empty layout");
    if (params.values.size() != params.total_size())
        throw LayoutError("serialize_params: values length does not match layout");

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(params.layout.size()));
    for (const ParamShape& s : params.layout) {
        put_u32(out, static_cast<std::uint32_t>(s.name.size()));
        out.insert(out.end(), s.name.begin(), s.name.end());
        put_u32(out, static_cast<std::uint32_t>(s.rows));
        put_u32(out, static_cast<std::uint32_t>(s.cols));
    }
    const std::size_t byte_count = params.values.size() * sizeof(double);
    const std::size_t offset = out.size();
    out.resize(offset + byte_count);
    std::memcpy(out.data() + offset, params.values.data(), byte_count);
    return out;
}

ParamVector deserialize_params(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("deserialize_params: bad magic");
    pos = 4;

    ParamVector out;
    const std::uint32_t entries = get_u32(bytes, pos);
    if (entries == 0) throw FormatError("deserialize_params: empty layout");
    for (std::uint32_t i = 0; i < entries; ++i) {
        const std::uint32_t name_len = get_u32(bytes, pos);
        if (pos + name_len > bytes.size())
            throw FormatError("parameter file truncated in layout table");
        ParamShape shape;
        shape.name.assign(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
        pos += name_len;
        shape.rows = get_u32(bytes, pos);
        shape.cols = get_u32(bytes, pos);
        out.layout.push_back(std::move(shape));
    }

    const std::size_t total = out.total_size();
    if (pos + total * sizeof(double) != bytes.size())
        throw FormatError("parameter file has " + std::to_string(bytes.size() - pos) +
                          " value bytes, layout expects " +
                          std::to_string(total * sizeof(double)));
    out.values.resize(total);
    std::memcpy(out.values.data(), bytes.data() + pos, total * sizeof(double));
    return out;
}

void save_params(const ParamVector& params, const std::string& path) {
    const std::vector<std::uint8_t> bytes = serialize_params(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("save_params: cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("save_params: write failed for " + path);
}

ParamVector load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("load_params: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize_params(bytes);
}

}  // namespace fedicu
