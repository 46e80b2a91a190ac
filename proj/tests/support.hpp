#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <arfade/arfade.hpp>

namespace arfade::test {

/// Coefficients of prod_i (z - pole_i) written as z^p - a1 z^(p-1) - ... - ap.
inline std::vector<double> coeffs_from_poles(const std::vector<cplx>& poles) {
    std::vector<cplx> poly{1.0};
    for (const cplx& r : poles) {
        std::vector<cplx> next(poly.size() + 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            next[i + 1] -= r * poly[i];
        }
        poly = std::move(next);
    }
    std::vector<double> a;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        a.push_back(-poly[i].real());
    }
    return a;
}

struct RandomModel {
    std::vector<double> coeffs;
    std::vector<cplx> poles;
    double max_pole = 0.0;
};

/// Real AR(p) with poles drawn inside |z| <= max_radius, complex poles in conjugate pairs.
inline RandomModel random_model(std::mt19937_64& rng, std::size_t p, double max_radius = 0.95) {
    std::uniform_real_distribution<double> radius(0.05, max_radius);
    std::uniform_real_distribution<double> angle(0.1, std::numbers::pi - 0.1);
    std::uniform_real_distribution<double> sign(-1.0, 1.0);
    RandomModel m;
    while (m.poles.size() < p) {
        if (p - m.poles.size() >= 2 && sign(rng) > 0.0) {
            const auto z = std::polar(radius(rng), angle(rng));
            m.poles.push_back(z);
            m.poles.push_back(std::conj(z));
        } else {
            m.poles.emplace_back(sign(rng) > 0.0 ? radius(rng) : -radius(rng), 0.0);
        }
    }
    for (const auto& z : m.poles) {
        m.max_pole = std::max(m.max_pole, std::abs(z));
    }
    m.coeffs = coeffs_from_poles(m.poles);
    return m;
}

/// r(k) = sum_j psi_j psi_{j+k} from the impulse response of the recursion, unit innovation.
inline std::vector<double> impulse_acov(const std::vector<double>& a, std::size_t max_lag, std::size_t length = 20000) {
    std::vector<double> psi(length, 0.0);
    psi[0] = 1.0;
    for (std::size_t t = 1; t < length; ++t) {
        for (std::size_t i = 1; i <= a.size() && i <= t; ++i) {
            psi[t] += a[i - 1] * psi[t - i];
        }
    }
    std::vector<double> r(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        for (std::size_t j = 0; j + k < length; ++j) {
            r[k] += psi[j] * psi[j + k];
        }
    }
    return r;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

inline double std_error(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile(v, 0.5);
}

/// Least-squares slope of y on x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

inline double spectral_norm(const ComplexMatrix& m) {
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    return svd.singularValues()(0);
}

inline const ARParams& jakes_model() {
    static const ARParams ar({1.8, -0.9}, 1.0);
    return ar;
}

} // namespace arfade::test
