#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "core.hpp"
#include "model.hpp"
#include "yule_walker.hpp"

namespace arfade {

struct CoeffNmse {
    /// |a_hat_i - a_i|^2 / a_i^2; NaN where a_i = 0.
    std::vector<double> per_coeff;
    /// sum_i |a_hat_i - a_i|^2 / sum_i a_i^2.
    double aggregate = 0.0;
};

/// Compares real parts of the estimate against real ground truth.
inline CoeffNmse nmse_coeffs(std::span<const double> estimate, std::span<const double> truth) {
    if (estimate.size() != truth.size()) {
        throw InvalidArgument("estimate and truth have different orders");
    }
    CoeffNmse out;
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = estimate[i] - truth[i];
        const double a2 = truth[i] * truth[i];
        out.per_coeff.push_back(a2 > 0.0 ? d * d / a2 : std::numeric_limits<double>::quiet_NaN());
        err += d * d;
        ref += a2;
    }
    if (!(ref > 0.0)) {
        throw InvalidArgument("aggregate NMSE needs a non-zero true coefficient vector");
    }
    out.aggregate = err / ref;
    return out;
}

inline CoeffNmse nmse_coeffs(const ARCoeffEstimate& estimate, const ARParams& truth) {
    const auto re = estimate.real_coeffs();
    return nmse_coeffs(re, truth.coeffs());
}

/// ||estimate - truth||_F^2 / ||truth||_F^2.
inline double nmse_channel(const ComplexMatrix& estimate, const ComplexMatrix& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
        throw InvalidArgument("estimate and truth shapes differ");
    }
    const double ref = truth.squaredNorm();
    if (!(ref > 0.0)) {
        throw InvalidArgument("true channel has zero norm");
    }
    return (estimate - truth).squaredNorm() / ref;
}

/// Column-wise NMSE, one entry per time instant.
inline std::vector<double> nmse_channel_per_instant(const ComplexMatrix& estimate, const ComplexMatrix& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
        throw InvalidArgument("estimate and truth shapes differ");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(truth.cols()));
    for (Eigen::Index t = 0; t < truth.cols(); ++t) {
        const double ref = truth.col(t).squaredNorm();
        if (!(ref > 0.0)) {
            throw InvalidArgument("true channel column has zero norm");
        }
        out.push_back((estimate.col(t) - truth.col(t)).squaredNorm() / ref);
    }
    return out;
}

} // namespace arfade
