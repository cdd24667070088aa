#include "etlnet/tensor.hpp"

#include <string>

namespace etlnet {

std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string_view to_string(Precision p) { return p == Precision::standard ? "standard" : "extended"; }

Precision parse_precision(std::string_view text) {
    if (text == "standard" || text == "float32") return Precision::standard;
    if (text == "extended" || text == "float64") return Precision::extended;
    throw ArgumentError("unknown precision '" + std::string(text) + "' (expected standard or extended)");
}

}  // namespace etlnet
