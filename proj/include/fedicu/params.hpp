#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedicu {

struct ParamShape {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
    bool operator==(const ParamShape&) const = default;
};

// Flattened model weights with a fixed layout: the unit of aggregation,
// checkpointing and transfer between clients. The layout is identical for
// every model built from the same config, so elementwise arithmetic over
// `values` is well defined.
struct ParamVector {
    std::vector<ParamShape> layout;
    std::vector<double> values;

    std::size_t total_size() const;
    bool same_layout(const ParamVector& other) const;
};

// Binary container: magic "FMP1", layout table, then little-endian 64-bit
// floats. Round-trips are bit-exact.
std::vector<std::uint8_t> serialize_params(const ParamVector& params);
ParamVector deserialize_params(const std::vector<std::uint8_t>& bytes);

void save_params(const ParamVector& params, const std::string& path);
ParamVector load_params(const std::string& path);

}  // namespace fedicu
