#pragma once

#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "channel.hpp"
#include "core.hpp"
#include "model.hpp"

namespace arfade {

enum class AcovVariant { Biased, Unbiased };

inline const char* to_string(AcovVariant v) noexcept {
    return v == AcovVariant::Biased ? "biased" : "unbiased";
}

/// Estimated r(0..K) in the unit-innovation normalization.
struct AcovEstimate {
    std::vector<cplx> values;
    AcovVariant variant = AcovVariant::Unbiased;
    std::size_t n_rx = 0;
    std::size_t horizon = 0;
    bool noise_corrected = true;

    std::size_t max_lag() const noexcept { return values.empty() ? 0 : values.size() - 1; }

    cplx at(long lag) const {
        const auto k = static_cast<std::size_t>(std::labs(lag));
        if (k >= values.size()) {
            throw InvalidArgument("lag " + std::to_string(lag) + " outside the estimate");
        }
        return lag < 0 ? std::conj(values[k]) : values[k];
    }
};

/// p x p Hermitian Toeplitz matrix with entry (i, j) = t(j - i), t(-k) = conj(t(k)).
class HermitianToeplitz {
public:
    explicit HermitianToeplitz(std::vector<cplx> first_row) : first_row_(std::move(first_row)) {
        if (first_row_.empty()) {
            throw InvalidArgument("Toeplitz matrix needs at least one entry");
        }
        first_row_[0] = {first_row_[0].real(), 0.0};
    }

    std::size_t dim() const noexcept { return first_row_.size(); }
    std::span<const cplx> first_row() const noexcept { return first_row_; }

    cplx operator()(std::size_t i, std::size_t j) const noexcept {
        return j >= i ? first_row_[j - i] : std::conj(first_row_[i - j]);
    }

    Eigen::MatrixXcd dense() const {
        const auto p = static_cast<Eigen::Index>(dim());
        Eigen::MatrixXcd m(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) {
                m(i, j) = (*this)(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            }
        }
        return m;
    }

    HermitianToeplitz scaled(double c) const {
        std::vector<cplx> row(first_row_);
        for (auto& v : row) {
            v *= c;
        }
        return HermitianToeplitz(std::move(row));
    }

private:
    std::vector<cplx> first_row_;
};

namespace detail {

/// Pairwise summation with a fixed split, so the result does not depend on threading.
template <typename T>
T pairwise_sum(std::span<const T> xs) {
    constexpr std::size_t kBlock = 16;
    if (xs.size() <= kBlock) {
        T acc{};
        for (const auto& x : xs) {
            acc += x;
        }
        return acc;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline void check_observations(const ObservationSet& obs) {
    if (obs.matrix.size() == 0) {
        throw InvalidArgument("observation matrix is empty");
    }
}

inline void check_variance(double sigma_x2, double sigma_w2) {
    if (!(sigma_x2 > 0.0)) {
        throw InvalidArgument("innovation variance must be positive");
    }
    if (!(sigma_w2 >= 0.0)) {
        throw InvalidArgument("noise variance must be non-negative");
    }
}

/// sum over n and valid t of h_n(t + k) conj(h_n(t)).
inline cplx lagged_product_sum(const ComplexMatrix& h, long lag) {
    const auto T = static_cast<long>(h.cols());
    const auto k = std::labs(lag);
    std::vector<cplx> terms;
    terms.reserve(static_cast<std::size_t>(h.rows() * (T - k)));
    // Both signs enumerate the pairs (u + |k|, u) in the same order; the negative
    // lag takes the conjugate of each product, so r(-k) is exactly conj(r(k)).
    for (Eigen::Index n = 0; n < h.rows(); ++n) {
        for (long u = 0; u + k < T; ++u) {
            const cplx lead = h(n, u + k);
            const cplx lag_value = h(n, u);
            terms.push_back(lag >= 0 ? lead * std::conj(lag_value) : lag_value * std::conj(lead));
        }
    }
    return pairwise_sum<cplx>(terms);
}

inline void check_lag(const ObservationSet& obs, long lag) {
    check_observations(obs);
    if (lag == 0) {
        throw InvalidArgument("lag 0 has its own estimator (acov_lag0)");
    }
    if (std::labs(lag) >= static_cast<long>(obs.horizon())) {
        throw InvalidArgument("|lag| must be below the horizon T");
    }
}

} // namespace detail

/// Noise-corrected lag-0 estimate, shared by both variants. May come out negative.
inline double acov_lag0(const ObservationSet& obs, double sigma_x2, double sigma_w2) {
    detail::check_observations(obs);
    detail::check_variance(sigma_x2, sigma_w2);
    std::vector<double> power;
    power.reserve(static_cast<std::size_t>(obs.matrix.size()));
    for (Eigen::Index n = 0; n < obs.matrix.rows(); ++n) {
        for (Eigen::Index t = 0; t < obs.matrix.cols(); ++t) {
            power.push_back(std::norm(obs.matrix(n, t)));
        }
    }
    const double count = static_cast<double>(obs.matrix.size());
    return detail::pairwise_sum<double>(power) / (sigma_x2 * count) - sigma_w2 / sigma_x2;
}

/// Divides the lag-k sum by sigma_x^2 N_r T.
inline cplx acov_biased(const ObservationSet& obs, long lag, double sigma_x2) {
    detail::check_lag(obs, lag);
    detail::check_variance(sigma_x2, 0.0);
    const double denom = sigma_x2 * static_cast<double>(obs.n_rx()) * static_cast<double>(obs.horizon());
    return detail::lagged_product_sum(obs.matrix, lag) / denom;
}

/// Divides the lag-k sum by sigma_x^2 N_r (T - |k|).
inline cplx acov_unbiased(const ObservationSet& obs, long lag, double sigma_x2) {
    detail::check_lag(obs, lag);
    detail::check_variance(sigma_x2, 0.0);
    const double valid = static_cast<double>(static_cast<long>(obs.horizon()) - std::labs(lag));
    const double denom = sigma_x2 * static_cast<double>(obs.n_rx()) * valid;
    return detail::lagged_product_sum(obs.matrix, lag) / denom;
}

inline AcovEstimate acov_sequence(const ObservationSet& obs, std::size_t max_lag, AcovVariant variant,
                                  double sigma_x2, double sigma_w2) {
    detail::check_observations(obs);
    if (max_lag >= obs.horizon()) {
        throw InvalidArgument("max lag " + std::to_string(max_lag) + " must be below the horizon " +
                              std::to_string(obs.horizon()));
    }
    AcovEstimate out;
    out.variant = variant;
    out.n_rx = obs.n_rx();
    out.horizon = obs.horizon();
    out.noise_corrected = true;
    out.values.reserve(max_lag + 1);
    out.values.emplace_back(acov_lag0(obs, sigma_x2, sigma_w2), 0.0);
    for (std::size_t k = 1; k <= max_lag; ++k) {
        const auto lag = static_cast<long>(k);
        out.values.push_back(variant == AcovVariant::Biased ? acov_biased(obs, lag, sigma_x2)
                                                            : acov_unbiased(obs, lag, sigma_x2));
    }
    return out;
}

/// Toeplitz matrix of lags 0..dim-1.
inline HermitianToeplitz build_toeplitz(std::span<const cplx> acov, std::size_t dim) {
    if (dim == 0) {
        throw InvalidArgument("Toeplitz dimension must be positive");
    }
    if (acov.size() < dim) {
        throw InvalidArgument("Toeplitz of dimension " + std::to_string(dim) + " needs lags 0.." +
                              std::to_string(dim - 1) + ", got " + std::to_string(acov.size()) + " lags");
    }
    return HermitianToeplitz(std::vector<cplx>(acov.begin(), acov.begin() + static_cast<long>(dim)));
}

inline HermitianToeplitz build_toeplitz(const AcovEstimate& acov, std::size_t dim) {
    return build_toeplitz(acov.values, dim);
}

inline HermitianToeplitz build_toeplitz(const AcovSequence& acov, std::size_t dim) {
    return build_toeplitz(acov.values, dim);
}

} // namespace arfade
