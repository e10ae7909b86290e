#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace reasonbreak {

// Dense NCHW tensor of doubles. Vectors are represented as (N, C, 1, 1).
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw std::invalid_argument("tensor: negative dimension");
    }

    size_t size() const { return v.size(); }

    double& at(int in, int ic, int iy, int ix) {
        return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// Deterministic seeded generator used for all parameter/test randomness.
using Rng = std::mt19937_64;

inline std::vector<double> random_uniform(Rng& rng, size_t count, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(count);
    for (auto& x : out) x = dist(rng);
    return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

// Unit-normalize in place; zero vectors are left untouched.
inline void normalize(std::vector<double>& a) {
    double nrm = norm2(a);
    if (nrm > 0.0)
        for (double& x : a) x /= nrm;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

}  // namespace reasonbreak
