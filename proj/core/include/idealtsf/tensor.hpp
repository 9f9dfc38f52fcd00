#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace idealtsf {

/// Dense rank-3 array, row-major [d0][d1][d2]. Batched window data lives here
/// as [batch][channel][time].
struct Tensor3 {
    std::size_t d0 = 0, d1 = 0, d2 = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(std::size_t a, std::size_t b, std::size_t c)
        : d0(a), d1(b), d2(c), data(a * b * c, 0.0) {}

    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * d1 + j) * d2 + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * d1 + j) * d2 + k];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor3& o) const {
        return d0 == o.d0 && d1 == o.d1 && d2 == o.d2;
    }
};

/// Named parameter tensor of rank 1 or 2.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    static Tensor matrix(std::size_t rows, std::size_t cols) {
        Tensor t;
        t.shape = {rows, cols};
        t.data.assign(rows * cols, 0.0);
        return t;
    }
    static Tensor vector(std::size_t n) {
        Tensor t;
        t.shape = {n};
        t.data.assign(n, 0.0);
        return t;
    }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
};

/// Flat, named collection of model parameters. std::map keeps names in
/// lexicographic order, which fixes the flattening layout.
using ParamSet = std::map<std::string, Tensor>;

/// Gradients, structurally isomorphic to their ParamSet.
using GradSet = ParamSet;

inline std::size_t total_size(const ParamSet& params) {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.data.size();
    return n;
}

/// Concatenates all tensors in name order into one vector.
inline std::vector<double> flatten(const ParamSet& params) {
    std::vector<double> flat;
    flat.reserve(total_size(params));
    for (const auto& [name, t] : params) {
        flat.insert(flat.end(), t.data.begin(), t.data.end());
    }
    return flat;
}

/// Writes a flat vector back into the named tensors (inverse of flatten).
inline void set_from_flat(ParamSet& params, const std::vector<double>& flat) {
    if (flat.size() != total_size(params)) {
        throw std::invalid_argument("set_from_flat: size mismatch");
    }
    std::size_t off = 0;
    for (auto& [name, t] : params) {
        std::copy(flat.begin() + off, flat.begin() + off + t.data.size(), t.data.begin());
        off += t.data.size();
    }
}

/// Throws unless both sets have identical names and shapes.
inline void check_isomorphic(const ParamSet& a, const ParamSet& b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": tensor count mismatch");
    }
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first || ia->second.shape != ib->second.shape) {
            throw std::invalid_argument(std::string(what) + ": shape mismatch at '" +
                                        ia->first + "'");
        }
    }
}

}  // namespace idealtsf
