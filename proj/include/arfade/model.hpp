#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core.hpp"

namespace arfade {

/// Poles with magnitude at or above 1 - kStationarityMargin are treated as unit roots.
inline constexpr double kStationarityMargin = 1e-9;

struct StationarityReport {
    bool is_stationary = true;
    /// Magnitudes of the roots of z^p - a1 z^(p-1) - ... - ap, sorted descending.
    std::vector<double> pole_magnitudes;

    double spectral_radius() const noexcept {
        return pole_magnitudes.empty() ? 0.0 : pole_magnitudes.front();
    }
};

namespace detail {

inline RealMatrix companion_matrix(std::span<const double> coeffs) {
    const auto p = static_cast<Eigen::Index>(coeffs.size());
    RealMatrix f = RealMatrix::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        f(0, j) = coeffs[static_cast<std::size_t>(j)];
    }
    for (Eigen::Index i = 1; i < p; ++i) {
        f(i, i - 1) = 1.0;
    }
    return f;
}

} // namespace detail

/// Pole magnitudes from the eigenvalues of the companion matrix. Report-only, never throws.
inline StationarityReport check_stationarity(std::span<const double> coeffs) {
    StationarityReport report;
    if (coeffs.empty()) {
        return report;
    }
    Eigen::EigenSolver<RealMatrix> solver(detail::companion_matrix(coeffs), false);
    const auto& poles = solver.eigenvalues();
    report.pole_magnitudes.reserve(static_cast<std::size_t>(poles.size()));
    for (Eigen::Index i = 0; i < poles.size(); ++i) {
        report.pole_magnitudes.push_back(std::abs(poles[i]));
    }
    std::sort(report.pole_magnitudes.begin(), report.pole_magnitudes.end(), std::greater<>());
    report.is_stationary = report.spectral_radius() < 1.0 - kStationarityMargin;
    return report;
}

/// AR(p) model: coefficients a1..ap and innovation variance.
class ARParams {
public:
    /// Throws NonStationaryError unless every pole lies strictly inside the unit circle.
    ARParams(std::vector<double> coeffs, double innovation_variance)
        : ARParams(std::move(coeffs), innovation_variance, true) {}

    /// Skips the stationarity check. Used for estimated coefficients and burn-in simulation.
    static ARParams unchecked(std::vector<double> coeffs, double innovation_variance) {
        return ARParams(std::move(coeffs), innovation_variance, false);
    }

    std::size_t order() const noexcept { return coeffs_.size(); }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    double innovation_variance() const noexcept { return innovation_variance_; }

    StationarityReport stationarity() const { return check_stationarity(coeffs_); }

    ARParams with_innovation_variance(double variance) const {
        return ARParams(coeffs_, variance, false);
    }

private:
    ARParams(std::vector<double> coeffs, double innovation_variance, bool check)
        : coeffs_(std::move(coeffs)), innovation_variance_(innovation_variance) {
        if (!(innovation_variance_ > 0.0) || !std::isfinite(innovation_variance_)) {
            throw InvalidArgument("innovation variance must be positive and finite");
        }
        for (double a : coeffs_) {
            if (!std::isfinite(a)) {
                throw InvalidArgument("AR coefficients must be finite");
            }
        }
        if (check) {
            const auto report = check_stationarity(coeffs_);
            if (!report.is_stationary) {
                throw NonStationaryError("AR coefficients are not stationary (spectral radius " +
                                             std::to_string(report.spectral_radius()) + ")",
                                         report.spectral_radius());
            }
        }
    }

    std::vector<double> coeffs_;
    double innovation_variance_;
};

inline StationarityReport check_stationarity(const ARParams& params) {
    return check_stationarity(params.coeffs());
}

/// r(0), r(1), ..., r(K). Negative lags follow from r(-k) = conj(r(k)).
struct AcovSequence {
    std::vector<cplx> values;

    std::size_t max_lag() const noexcept { return values.empty() ? 0 : values.size() - 1; }

    cplx at(long lag) const {
        const auto k = static_cast<std::size_t>(lag < 0 ? -lag : lag);
        if (k >= values.size()) {
            throw InvalidArgument("lag " + std::to_string(lag) + " outside the autocovariance sequence");
        }
        return lag < 0 ? std::conj(values[k]) : values[k];
    }
};

/// Autocovariance of the process driven by unit-variance innovations.
/// Lags 0..p come from the stationary linear system, later lags from the recursion.
inline AcovSequence theoretical_acov(std::span<const double> coeffs, std::size_t max_lag) {
    const auto report = check_stationarity(coeffs);
    if (!report.is_stationary) {
        throw NonStationaryError("theoretical autocovariance requires stationary coefficients",
                                 report.spectral_radius());
    }
    const std::size_t p = coeffs.size();
    const auto n = static_cast<Eigen::Index>(p + 1);

    // r(k) - sum_i a_i r(|k - i|) = delta(k) for k = 0..p.
    RealMatrix system = RealMatrix::Identity(n, n);
    RealVector rhs = RealVector::Zero(n);
    rhs(0) = 1.0;
    for (std::size_t k = 0; k <= p; ++k) {
        for (std::size_t i = 1; i <= p; ++i) {
            const std::size_t lag = k >= i ? k - i : i - k;
            system(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(lag)) -= coeffs[i - 1];
        }
    }
    const RealVector head = system.fullPivLu().solve(rhs);

    std::vector<double> r(std::max(max_lag, p) + 1, 0.0);
    for (std::size_t k = 0; k <= p; ++k) {
        r[k] = head(static_cast<Eigen::Index>(k));
    }
    for (std::size_t k = p + 1; k < r.size(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 1; i <= p; ++i) {
            acc += coeffs[i - 1] * r[k - i];
        }
        r[k] = acc;
    }

    AcovSequence out;
    out.values.reserve(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        out.values.emplace_back(r[k], 0.0);
    }
    return out;
}

inline AcovSequence theoretical_acov(const ARParams& params, std::size_t max_lag) {
    return theoretical_acov(params.coeffs(), max_lag);
}

/// State-space embedding: state [h(t), h(t-1), ..., h(t-p+1)].
struct CompanionForm {
    RealMatrix transition;
    RealMatrix process_noise_cov;
    Eigen::RowVectorXd observation_row;

    std::size_t order() const noexcept { return static_cast<std::size_t>(transition.rows()); }
};

inline CompanionForm companion_form(std::span<const double> coeffs, double innovation_variance) {
    if (coeffs.empty()) {
        throw InvalidArgument("companion form needs order p >= 1");
    }
    const auto p = static_cast<Eigen::Index>(coeffs.size());
    CompanionForm form;
    form.transition = detail::companion_matrix(coeffs);
    form.process_noise_cov = RealMatrix::Zero(p, p);
    form.process_noise_cov(0, 0) = innovation_variance;
    form.observation_row = Eigen::RowVectorXd::Zero(p);
    form.observation_row(0) = 1.0;
    return form;
}

inline CompanionForm companion_form(const ARParams& params) {
    return companion_form(params.coeffs(), params.innovation_variance());
}

} // namespace arfade
