#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "channel.hpp"
#include "core.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "yule_walker.hpp"

namespace arfade {

/// Kalman filter over the companion-form state of every antenna. All antennas
/// share F, Q and the noise variance, so they share one error covariance and gain.
struct KalmanState {
    /// Row n holds [h_n(t), h_n(t-1), ..., h_n(t-p+1)].
    ComplexMatrix means;
    RealMatrix covariance;
    CompanionForm model;
    double noise_variance = 0.0;
    /// Smallest min-eigenvalue / max-eigenvalue ratio of the covariance seen so far.
    double min_eig_ratio = 1.0;

    std::size_t n_rx() const noexcept { return static_cast<std::size_t>(means.rows()); }
};

namespace detail {

inline double eig_ratio(const RealMatrix& cov) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> eig(cov, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) {
        return 0.0;
    }
    return ev.minCoeff() / scale;
}

inline RealMatrix stationary_covariance(std::span<const double> coeffs, double sigma_x2) {
    const std::size_t p = coeffs.size();
    const auto acov = theoretical_acov(coeffs, p - 1);
    const auto dim = static_cast<Eigen::Index>(p);
    RealMatrix cov(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            cov(i, j) = sigma_x2 * acov.at(static_cast<long>(j - i)).real();
        }
    }
    return cov;
}

} // namespace detail

/// Filter with an explicit prior covariance; means start at zero.
inline KalmanState kalman_init_with_prior(CompanionForm model, RealMatrix prior, double sigma_w2, std::size_t n_rx) {
    if (n_rx == 0) {
        throw InvalidArgument("tracking needs at least one antenna");
    }
    if (!(sigma_w2 >= 0.0)) {
        throw InvalidArgument("noise variance must be non-negative");
    }
    const auto p = static_cast<Eigen::Index>(model.order());
    if (prior.rows() != p || prior.cols() != p) {
        throw InvalidArgument("prior covariance has the wrong shape");
    }
    KalmanState state;
    state.means = ComplexMatrix::Zero(static_cast<Eigen::Index>(n_rx), p);
    state.covariance = std::move(prior);
    state.model = std::move(model);
    state.noise_variance = sigma_w2;
    state.min_eig_ratio = detail::eig_ratio(state.covariance);
    return state;
}

/// Stationary prior sigma_x^2 R_p. Throws NonStationaryError for non-stationary coefficients.
inline KalmanState kalman_init(std::span<const double> coeffs, double sigma_x2, double sigma_w2, std::size_t n_rx) {
    if (coeffs.empty()) {
        throw InvalidArgument("tracking needs AR order p >= 1");
    }
    auto prior = detail::stationary_covariance(coeffs, sigma_x2);
    return kalman_init_with_prior(companion_form(coeffs, sigma_x2), std::move(prior), sigma_w2, n_rx);
}

inline KalmanState kalman_init(const ARParams& params, double sigma_w2, std::size_t n_rx) {
    return kalman_init(params.coeffs(), params.innovation_variance(), sigma_w2, n_rx);
}

inline KalmanState kalman_init(const ARCoeffEstimate& estimate, double sigma_x2, double sigma_w2, std::size_t n_rx) {
    const auto re = estimate.real_coeffs();
    return kalman_init(re, sigma_x2, sigma_w2, n_rx);
}

/// Predict with (F, Q), then update every antenna against its observation of h(t).
/// Returns the filtered h(t) per antenna.
inline ComplexVector kalman_step(KalmanState& state, const ComplexVector& observation) {
    if (static_cast<std::size_t>(observation.size()) != state.n_rx()) {
        throw InvalidArgument("observation length does not match the number of antennas");
    }
    if (!observation.allFinite()) {
        throw InvalidArgument("observation contains non-finite entries");
    }
    const auto& f = state.model.transition;
    const auto p = f.rows();

    state.means = state.means * f.transpose();
    RealMatrix pred = f * state.covariance * f.transpose() + state.model.process_noise_cov;

    const double innovation_var = pred(0, 0) + state.noise_variance;
    const RealVector gain = pred.col(0) / innovation_var;
    const ComplexVector innovation = observation - state.means.col(0);
    state.means.noalias() += innovation * gain.transpose().cast<cplx>();

    // Joseph form keeps the covariance symmetric PSD.
    RealMatrix i_kh = RealMatrix::Identity(p, p);
    i_kh.col(0) -= gain;
    state.covariance = i_kh * pred * i_kh.transpose() + state.noise_variance * gain * gain.transpose();
    state.covariance = 0.5 * (state.covariance + state.covariance.transpose()).eval();
    state.min_eig_ratio = std::min(state.min_eig_ratio, detail::eig_ratio(state.covariance));
    return state.means.col(0);
}

enum class CoeffSource { Genie, ProposedBiased, ProposedUnbiased, TimeBased };

inline const char* to_string(CoeffSource s) noexcept {
    switch (s) {
    case CoeffSource::Genie: return "genie";
    case CoeffSource::ProposedBiased: return "proposed-biased";
    case CoeffSource::ProposedUnbiased: return "proposed-unbiased";
    case CoeffSource::TimeBased: return "time-based";
    }
    return "?";
}

struct TrackResult {
    ComplexMatrix estimates;
    /// Empty unless the true channel was supplied.
    std::vector<double> per_instant_nmse;
    CoeffSource coeff_source = CoeffSource::Genie;
    /// Smallest relative eigenvalue of the error covariance over all steps.
    double min_eig_ratio = 1.0;
    /// False when some run used the diffuse prior because the coefficients were not stationary.
    bool stationary_prior = true;
};

namespace detail {

/// Stationary prior when the coefficients allow it, otherwise observed power times identity.
inline KalmanState init_for_tracking(std::span<const double> coeffs, double sigma_x2, double sigma_w2,
                                     const ObservationSet& obs, bool& stationary) {
    stationary = check_stationarity(coeffs).is_stationary;
    if (stationary) {
        return kalman_init(coeffs, sigma_x2, sigma_w2, obs.n_rx());
    }
    const double power = obs.matrix.squaredNorm() / static_cast<double>(obs.matrix.size());
    const auto p = static_cast<Eigen::Index>(coeffs.size());
    return kalman_init_with_prior(companion_form(coeffs, sigma_x2), power * RealMatrix::Identity(p, p), sigma_w2,
                                  obs.n_rx());
}

} // namespace detail

/// Derotates the received signal and filters all T instants with fixed coefficients.
/// Non-stationary coefficients are used as given, with a diffuse prior.
inline TrackResult track_channel(const ComplexMatrix& received, const PilotSequence& pilots,
                                 std::span<const double> coeffs, CoeffSource source, double sigma_x2,
                                 double sigma_w2, const ComplexMatrix* truth = nullptr) {
    const auto obs = derotate(received, pilots, sigma_w2);
    if (truth && (truth->rows() != received.rows() || truth->cols() != received.cols())) {
        throw InvalidArgument("true channel shape does not match the received signal");
    }
    TrackResult out;
    out.coeff_source = source;
    auto state = detail::init_for_tracking(coeffs, sigma_x2, sigma_w2, obs, out.stationary_prior);
    out.estimates.resize(received.rows(), received.cols());
    for (Eigen::Index t = 0; t < received.cols(); ++t) {
        out.estimates.col(t) = kalman_step(state, obs.matrix.col(t));
    }
    out.min_eig_ratio = state.min_eig_ratio;
    if (truth) {
        out.per_instant_nmse = nmse_channel_per_instant(out.estimates, *truth);
    }
    return out;
}

inline TrackResult track_channel(const ComplexMatrix& received, const PilotSequence& pilots,
                                 const ARParams& genie, double sigma_w2, const ComplexMatrix* truth = nullptr) {
    return track_channel(received, pilots, genie.coeffs(), CoeffSource::Genie, genie.innovation_variance(),
                         sigma_w2, truth);
}

/// Maps the first columns of the observations to real AR coefficients. May throw.
using CoeffProvider = std::function<std::vector<double>(const ObservationSet&)>;

/// Instantaneous tracking: the estimate at instant t (1-based count of observations)
/// comes from a filter run over the first t columns, with coefficients estimated from
/// those same columns. Instants before `min_columns` reuse the estimate from the
/// first `min_columns` columns.
inline TrackResult track_instantaneous(const ComplexMatrix& received, const PilotSequence& pilots,
                                       const CoeffProvider& provider, std::size_t min_columns,
                                       CoeffSource source, double sigma_x2, double sigma_w2,
                                       const ComplexMatrix* truth = nullptr) {
    const auto obs = derotate(received, pilots, sigma_w2);
    const auto horizon = static_cast<std::size_t>(obs.matrix.cols());
    if (truth && (truth->rows() != received.rows() || truth->cols() != received.cols())) {
        throw InvalidArgument("true channel shape does not match the received signal");
    }
    TrackResult out;
    out.coeff_source = source;
    out.estimates.resize(obs.matrix.rows(), obs.matrix.cols());

    std::vector<double> current;
    std::optional<KalmanState> state;
    std::size_t consumed = 0;
    for (std::size_t t = 1; t <= horizon; ++t) {
        const std::size_t cols = std::min(std::max(t, min_columns), horizon);
        ObservationSet prefix{obs.matrix.leftCols(static_cast<Eigen::Index>(cols)), sigma_w2};
        auto coeffs = provider(prefix);
        if (!state || coeffs != current) {
            current = std::move(coeffs);
            bool stationary = true;
            ObservationSet seen{obs.matrix.leftCols(static_cast<Eigen::Index>(t)), sigma_w2};
            state = detail::init_for_tracking(current, sigma_x2, sigma_w2, seen, stationary);
            out.stationary_prior = out.stationary_prior && stationary;
            consumed = 0;
        }
        ComplexVector filtered;
        while (consumed < t) {
            filtered = kalman_step(*state, obs.matrix.col(static_cast<Eigen::Index>(consumed)));
            ++consumed;
        }
        out.estimates.col(static_cast<Eigen::Index>(t - 1)) = filtered;
        out.min_eig_ratio = std::min(out.min_eig_ratio, state->min_eig_ratio);
    }
    if (truth) {
        out.per_instant_nmse = nmse_channel_per_instant(out.estimates, *truth);
    }
    return out;
}

/// Zero-innovation recursion h(t) = sum_i a_i h(t - i), iterated `steps` times.
/// `history` holds past values per antenna in chronological order (last column newest).
inline ComplexMatrix ar_predict(const ComplexMatrix& history, std::span<const cplx> coeffs, std::size_t steps) {
    const std::size_t p = coeffs.size();
    if (steps == 0) {
        throw InvalidArgument("prediction needs at least one step");
    }
    if (static_cast<std::size_t>(history.cols()) < p) {
        throw InvalidArgument("history is shorter than the AR order");
    }
    const Eigen::Index depth = history.cols();
    ComplexMatrix buffer(history.rows(), depth + static_cast<Eigen::Index>(steps));
    buffer.leftCols(depth) = history;
    for (std::size_t m = 0; m < steps; ++m) {
        const Eigen::Index t = depth + static_cast<Eigen::Index>(m);
        buffer.col(t).setZero();
        for (std::size_t i = 1; i <= p; ++i) {
            buffer.col(t) += coeffs[i - 1] * buffer.col(t - static_cast<Eigen::Index>(i));
        }
    }
    return buffer.rightCols(static_cast<Eigen::Index>(steps));
}

} // namespace arfade
