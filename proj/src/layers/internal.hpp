#pragma once

#include <string>

#include "etlnet/layers.hpp"

namespace etlnet::detail {

inline void require_train_cache(const LayerCache& cache, const char* layer) {
    if (cache.mode != Mode::train) {
        throw ContractViolation(std::string(layer) + " backward received a cache from an eval-mode forward");
    }
}

inline void require_same_shape(const Shape& got, const Shape& expected, const char* layer, const char* what) {
    if (got != expected) {
        throw ContractViolation(std::string(layer) + " backward: " + what + " shape " + shape_str(got) +
                                " does not match cached " + shape_str(expected));
    }
}

}  // namespace etlnet::detail
