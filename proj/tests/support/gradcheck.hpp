#pragma once

// Central finite differences and random fixtures shared by the unit and
// acceptance suites.

#include "dcign/random.hpp"
#include "dcign/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace dcign::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = uniform(rng, lo, hi);
    return t;
}

// d f / d x by central differences, one coordinate at a time.
inline Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
    Tensor g = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Moves entries out of (-margin, margin) so a finite-difference stencil never
// straddles the ReLU kink.
inline Tensor away_from_zero(Tensor t, double margin = 1e-3) {
    for (auto& v : t.values())
        if (std::abs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
    return t;
}

// max |a - b| / max(|a|, |b|, floor) over all entries.
inline double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

// <w, t>: turns a tensor-valued function into a scalar probe.
inline double dot(const Tensor& w, const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += w[i] * t[i];
    return s;
}

} // namespace dcign::testing
