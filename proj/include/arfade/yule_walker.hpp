#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "acov.hpp"
#include "channel.hpp"
#include "core.hpp"

namespace arfade {

/// Solves above this condition number are rejected.
inline constexpr double kMaxConditionNumber = 1e12;

struct ToeplitzSolution {
    std::vector<cplx> x;
    /// Ratio of the extreme eigenvalue magnitudes of the system matrix.
    double condition_number = 0.0;
    /// True when Levinson hit a non-positive prediction-error variance and the dense path was used.
    bool used_dense_fallback = false;
};

namespace detail {

inline Eigen::VectorXcd to_eigen(std::span<const cplx> v) {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = v[i];
    }
    return out;
}

inline double condition_number(const Eigen::MatrixXcd& dense) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(dense, Eigen::EigenvaluesOnly);
    const auto mags = eig.eigenvalues().cwiseAbs();
    const double lo = mags.minCoeff();
    const double hi = mags.maxCoeff();
    if (!(lo > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return hi / lo;
}

} // namespace detail

/// Levinson recursion for a Hermitian Toeplitz system. Returns nullopt when a
/// prediction-error variance is not positive (indefinite leading block).
inline std::optional<std::vector<cplx>> solve_levinson(const HermitianToeplitz& matrix, std::span<const cplx> rhs) {
    const std::size_t p = matrix.dim();
    if (rhs.size() != p) {
        throw InvalidArgument("right-hand side length does not match the Toeplitz dimension");
    }
    // Diagonal offsets: c(k) is the entry at (i, i - k).
    auto c = [&](long k) -> cplx { return k >= 0 ? matrix(static_cast<std::size_t>(k), 0) : matrix(0, static_cast<std::size_t>(-k)); };

    const double t0 = matrix(0, 0).real();
    if (!(t0 > 0.0)) {
        return std::nullopt;
    }
    std::vector<cplx> fwd{cplx{1.0 / t0}};
    std::vector<cplx> bwd{cplx{1.0 / t0}};
    std::vector<cplx> x{rhs[0] / t0};

    for (std::size_t m = 1; m < p; ++m) {
        cplx eps_f{};
        cplx eps_b{};
        for (std::size_t j = 0; j < m; ++j) {
            eps_f += c(static_cast<long>(m - j)) * fwd[j];
            eps_b += c(-static_cast<long>(j + 1)) * bwd[j];
        }
        const cplx denom = 1.0 - eps_f * eps_b;
        if (!(denom.real() > 0.0) || !std::isfinite(denom.real())) {
            return std::nullopt;
        }
        std::vector<cplx> next_f(m + 1);
        std::vector<cplx> next_b(m + 1);
        for (std::size_t j = 0; j <= m; ++j) {
            const cplx f_j = j < m ? fwd[j] : cplx{};
            const cplx b_j = j > 0 ? bwd[j - 1] : cplx{};
            next_f[j] = (f_j - eps_f * b_j) / denom;
            next_b[j] = (b_j - eps_b * f_j) / denom;
        }
        fwd = std::move(next_f);
        bwd = std::move(next_b);

        cplx eps_x{};
        for (std::size_t j = 0; j < m; ++j) {
            eps_x += c(static_cast<long>(m - j)) * x[j];
        }
        x.push_back(cplx{});
        const cplx step = rhs[m] - eps_x;
        for (std::size_t j = 0; j <= m; ++j) {
            x[j] += step * bwd[j];
        }
    }
    return x;
}

/// Dense LU solve of the same system.
inline std::vector<cplx> solve_dense(const HermitianToeplitz& matrix, std::span<const cplx> rhs) {
    if (rhs.size() != matrix.dim()) {
        throw InvalidArgument("right-hand side length does not match the Toeplitz dimension");
    }
    const Eigen::VectorXcd sol = matrix.dense().fullPivLu().solve(detail::to_eigen(rhs));
    return {sol.data(), sol.data() + sol.size()};
}

/// Solves R_p a = r_p. Levinson first, dense LU when the recursion breaks down.
/// Throws IllConditionedError for a non-positive leading entry or a condition number above 1e12.
inline ToeplitzSolution solve_yule_walker(const HermitianToeplitz& matrix, std::span<const cplx> rhs) {
    if (rhs.size() != matrix.dim()) {
        throw InvalidArgument("Yule-Walker system of dimension " + std::to_string(matrix.dim()) +
                              " with a right-hand side of length " + std::to_string(rhs.size()));
    }
    const double lead = matrix(0, 0).real();
    if (!(lead > 0.0) || !std::isfinite(lead)) {
        throw IllConditionedError("Toeplitz matrix has a non-positive zero-lag entry",
                                  std::numeric_limits<double>::infinity());
    }
    ToeplitzSolution out;
    out.condition_number = detail::condition_number(matrix.dense());
    if (!(out.condition_number <= kMaxConditionNumber)) {
        throw IllConditionedError("Toeplitz matrix is ill-conditioned (condition number " +
                                      std::to_string(out.condition_number) + ")",
                                  out.condition_number);
    }
    if (auto x = solve_levinson(matrix, rhs)) {
        out.x = std::move(*x);
    } else {
        out.x = solve_dense(matrix, rhs);
        out.used_dense_fallback = true;
    }
    return out;
}

/// AR coefficients from R_p (entry (i, j) = r(j - i)) and r_p = [r(1), ..., r(p)].
/// The equations r(k) = sum_i a_i r(k - i) have the transpose of R_p as their matrix,
/// which is conj(R_p); for real autocovariances this is R_p a = r_p.
inline ToeplitzSolution solve_ar_coefficients(const HermitianToeplitz& r_p, std::span<const cplx> rhs) {
    std::vector<cplx> conj_rhs(rhs.begin(), rhs.end());
    for (auto& v : conj_rhs) {
        v = std::conj(v);
    }
    auto sol = solve_yule_walker(r_p, conj_rhs);
    for (auto& v : sol.x) {
        v = std::conj(v);
    }
    return sol;
}

enum class CoeffVariant { Biased, Unbiased, TimeBasedBiased, TimeBasedUnbiased };

inline const char* to_string(CoeffVariant v) noexcept {
    switch (v) {
    case CoeffVariant::Biased: return "proposed-biased";
    case CoeffVariant::Unbiased: return "proposed-unbiased";
    case CoeffVariant::TimeBasedBiased: return "time-based-biased";
    case CoeffVariant::TimeBasedUnbiased: return "time-based";
    }
    return "?";
}

struct ARCoeffEstimate {
    std::vector<cplx> coeffs;
    CoeffVariant variant = CoeffVariant::Unbiased;
    double condition_number = 0.0;
    std::size_t n_rx = 0;
    std::size_t horizon = 0;

    std::size_t order() const noexcept { return coeffs.size(); }

    std::vector<double> real_coeffs() const {
        std::vector<double> out;
        out.reserve(coeffs.size());
        for (const auto& a : coeffs) {
            out.push_back(a.real());
        }
        return out;
    }

    /// Euclidean norm of the imaginary parts.
    double imag_norm() const {
        double acc = 0.0;
        for (const auto& a : coeffs) {
            acc += a.imag() * a.imag();
        }
        return std::sqrt(acc);
    }
};

struct EstimateOptions {
    /// Relative diagonal loading of the zero-lag entry. Experimental, off by default.
    double diagonal_loading = 0.0;
};

/// Spatially averaged Yule-Walker estimate from all N_r rows.
inline ARCoeffEstimate estimate_ar(const ObservationSet& obs, std::size_t order, AcovVariant variant,
                                   double sigma_x2, double sigma_w2, const EstimateOptions& options = {}) {
    if (order == 0) {
        throw InvalidArgument("AR order must be at least 1");
    }
    if (order >= obs.horizon()) {
        throw InvalidArgument("AR order " + std::to_string(order) + " must be below the horizon " +
                              std::to_string(obs.horizon()));
    }
    auto acov = acov_sequence(obs, order, variant, sigma_x2, sigma_w2);
    if (options.diagonal_loading != 0.0) {
        acov.values[0] *= 1.0 + options.diagonal_loading;
    }
    const auto toeplitz = build_toeplitz(acov, order);
    const std::span<const cplx> rhs(acov.values.data() + 1, order);
    auto sol = solve_ar_coefficients(toeplitz, rhs);
    return {std::move(sol.x),
            variant == AcovVariant::Biased ? CoeffVariant::Biased : CoeffVariant::Unbiased,
            sol.condition_number,
            obs.n_rx(),
            obs.horizon()};
}

/// Baseline without spatial averaging: the same pipeline on a single antenna row.
inline ARCoeffEstimate estimate_ar_time_based(const ObservationSet& obs, std::size_t order, AcovVariant variant,
                                              double sigma_x2, double sigma_w2, std::size_t antenna,
                                              const EstimateOptions& options = {}) {
    if (antenna >= obs.n_rx()) {
        throw InvalidArgument("antenna index " + std::to_string(antenna) + " out of range");
    }
    ObservationSet row{obs.matrix.row(static_cast<Eigen::Index>(antenna)), obs.noise_variance};
    auto est = estimate_ar(row, order, variant, sigma_x2, sigma_w2, options);
    est.variant = variant == AcovVariant::Biased ? CoeffVariant::TimeBasedBiased : CoeffVariant::TimeBasedUnbiased;
    return est;
}

} // namespace arfade
