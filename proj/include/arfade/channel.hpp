#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "core.hpp"
#include "model.hpp"
#include "random.hpp"

namespace arfade {

/// True channel H (N_r x T) with the parameters and seed that produced it.
struct ChannelRealization {
    ComplexMatrix matrix;
    ARParams params;
    std::uint64_t seed = 0;

    std::size_t n_rx() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t horizon() const noexcept { return static_cast<std::size_t>(matrix.cols()); }
};

/// Noisy channel observations H + W.
struct ObservationSet {
    ComplexMatrix matrix;
    double noise_variance = 0.0;

    std::size_t n_rx() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t horizon() const noexcept { return static_cast<std::size_t>(matrix.cols()); }
};

/// Unit-modulus pilot symbols s(0..T-1); diag(S) is unitary.
struct PilotSequence {
    std::vector<cplx> symbols;

    std::size_t size() const noexcept { return symbols.size(); }

    static PilotSequence ones(std::size_t length) { return {std::vector<cplx>(length, cplx{1.0, 0.0})}; }

    static PilotSequence qpsk(std::size_t length, std::uint64_t seed) {
        std::mt19937_64 engine(derive_seed(seed, Stream::Pilots, 0));
        PilotSequence out;
        out.symbols.reserve(length);
        for (std::size_t t = 0; t < length; ++t) {
            const auto quadrant = static_cast<double>(engine() & 3U);
            out.symbols.push_back(std::polar(1.0, std::numbers::pi / 4.0 + quadrant * std::numbers::pi / 2.0));
        }
        return out;
    }
};

inline constexpr double kPilotModulusTolerance = 1e-9;

enum class StartMode {
    /// First p samples drawn from the exact stationary distribution.
    Stationary,
    /// Start from zeros and discard a warm-up run.
    BurnIn,
};

struct GenerationOptions {
    StartMode start = StartMode::Stationary;
    /// Warm-up length for BurnIn; defaults to 10 p / (1 - max|pole|).
    std::optional<std::size_t> burn_in_steps;
};

namespace detail {

inline std::size_t default_burn_in(const ARParams& params) {
    const double radius = params.stationarity().spectral_radius();
    if (params.order() == 0) {
        return 0;
    }
    if (radius >= 1.0 - kStationarityMargin) {
        throw NonStationaryError("burn-in length must be given explicitly for non-stationary coefficients", radius);
    }
    return static_cast<std::size_t>(std::ceil(10.0 * static_cast<double>(params.order()) / (1.0 - radius)));
}

} // namespace detail

/// Simulates N_r independent AR(p) rows of length T. Row n draws from its own
/// substream of `seed`, so the first rows do not change when n_rx grows.
inline ChannelRealization generate_channel(const ARParams& params, std::size_t n_rx, std::size_t horizon,
                                           std::uint64_t seed, const GenerationOptions& options = {}) {
    if (n_rx == 0 || horizon == 0) {
        throw InvalidArgument("channel dimensions must be positive");
    }
    const std::size_t p = params.order();
    const auto coeffs = params.coeffs();
    const double sigma2 = params.innovation_variance();

    Eigen::MatrixXcd start_factor;
    std::size_t burn_in = 0;
    if (options.start == StartMode::Stationary) {
        // Covariance of [h(0), ..., h(p-1)]: entry (i, j) = sigma2 r(i - j).
        const auto acov = theoretical_acov(coeffs, p == 0 ? 0 : p - 1);
        const auto dim = static_cast<Eigen::Index>(p);
        Eigen::MatrixXcd cov(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) {
                cov(i, j) = sigma2 * acov.at(static_cast<long>(i - j));
            }
        }
        start_factor = cov.llt().matrixL();
    } else {
        burn_in = options.burn_in_steps ? *options.burn_in_steps : detail::default_burn_in(params);
    }

    ChannelRealization out{ComplexMatrix::Zero(static_cast<Eigen::Index>(n_rx), static_cast<Eigen::Index>(horizon)),
                           params, seed};
    std::vector<cplx> row(burn_in + horizon);
    std::vector<cplx> z(p);
    for (std::size_t n = 0; n < n_rx; ++n) {
        ComplexGaussian gauss(derive_seed(seed, Stream::Channel, n));
        std::fill(row.begin(), row.end(), cplx{});
        std::size_t t0 = 0;
        if (options.start == StartMode::Stationary) {
            for (auto& v : z) {
                v = gauss();
            }
            for (std::size_t i = 0; i < p && i < horizon; ++i) {
                cplx acc{};
                for (std::size_t j = 0; j <= i; ++j) {
                    acc += start_factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
                }
                row[i] = acc;
            }
            t0 = p;
        }
        for (std::size_t t = t0; t < row.size(); ++t) {
            cplx acc = gauss(sigma2);
            for (std::size_t i = 1; i <= p && i <= t; ++i) {
                acc += coeffs[i - 1] * row[t - i];
            }
            row[t] = acc;
        }
        for (std::size_t t = 0; t < horizon; ++t) {
            out.matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t)) = row[burn_in + t];
        }
    }
    return out;
}

namespace detail {

inline void check_noise_variance(double noise_variance) {
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
        throw InvalidArgument("noise variance must be finite and non-negative");
    }
}

inline ComplexMatrix noise_matrix(Eigen::Index rows, Eigen::Index cols, double variance, std::uint64_t seed) {
    ComplexMatrix w(rows, cols);
    for (Eigen::Index n = 0; n < rows; ++n) {
        ComplexGaussian gauss(derive_seed(seed, Stream::Noise, static_cast<std::uint64_t>(n)));
        for (Eigen::Index t = 0; t < cols; ++t) {
            w(n, t) = gauss(variance);
        }
    }
    return w;
}

inline void check_pilots(const PilotSequence& pilots, std::size_t horizon) {
    if (pilots.size() != horizon) {
        throw InvalidArgument("pilot length " + std::to_string(pilots.size()) + " does not match horizon " +
                              std::to_string(horizon));
    }
    for (std::size_t t = 0; t < pilots.size(); ++t) {
        if (std::abs(std::abs(pilots.symbols[t]) - 1.0) > kPilotModulusTolerance) {
            throw InvalidArgument("pilot symbol " + std::to_string(t) + " is not unit-modulus");
        }
    }
}

} // namespace detail

/// H + W with W i.i.d. CN(0, noise_variance).
inline ObservationSet observe(const ChannelRealization& channel, double noise_variance, std::uint64_t seed) {
    detail::check_noise_variance(noise_variance);
    ObservationSet out{channel.matrix, noise_variance};
    if (noise_variance > 0.0) {
        out.matrix += detail::noise_matrix(channel.matrix.rows(), channel.matrix.cols(), noise_variance, seed);
    }
    return out;
}

/// Y = H diag(s) + W. Uses the same noise substreams as observe() for a given seed.
inline ComplexMatrix received_signal(const ChannelRealization& channel, const PilotSequence& pilots,
                                     double noise_variance, std::uint64_t seed) {
    detail::check_noise_variance(noise_variance);
    detail::check_pilots(pilots, channel.horizon());
    ComplexMatrix y = channel.matrix;
    for (Eigen::Index t = 0; t < y.cols(); ++t) {
        y.col(t) *= pilots.symbols[static_cast<std::size_t>(t)];
    }
    if (noise_variance > 0.0) {
        y += detail::noise_matrix(y.rows(), y.cols(), noise_variance, seed);
    }
    return y;
}

/// Column t multiplied by conj(s(t)).
inline ObservationSet derotate(const ComplexMatrix& received, const PilotSequence& pilots, double noise_variance) {
    detail::check_pilots(pilots, static_cast<std::size_t>(received.cols()));
    ObservationSet out{received, noise_variance};
    for (Eigen::Index t = 0; t < out.matrix.cols(); ++t) {
        out.matrix.col(t) *= std::conj(pilots.symbols[static_cast<std::size_t>(t)]);
    }
    return out;
}

// Realization CSV: one line per antenna, re and im of each time instant interleaved,
// preceded by a header line re_t0,im_t0,re_t1,im_t1,...

inline void write_matrix_csv(std::ostream& os, const ComplexMatrix& m) {
    os << std::setprecision(17);
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
        os << (t ? "," : "") << "re_t" << t << ",im_t" << t;
    }
    os << '\n';
    for (Eigen::Index n = 0; n < m.rows(); ++n) {
        for (Eigen::Index t = 0; t < m.cols(); ++t) {
            os << (t ? "," : "") << m(n, t).real() << ',' << m(n, t).imag();
        }
        os << '\n';
    }
}

inline void write_matrix_csv(const std::string& path, const ComplexMatrix& m) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_matrix_csv(os, m);
    if (!os) {
        throw IoError("failed writing " + path);
    }
}

inline ComplexMatrix read_matrix_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw InvalidArgument("matrix CSV is empty");
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw InvalidArgument("matrix CSV has a non-numeric cell '" + cell + "'");
            }
        }
        if (values.size() % 2 != 0 || values.empty()) {
            throw InvalidArgument("matrix CSV rows must hold re,im pairs");
        }
        if (!rows.empty() && values.size() != rows.front().size()) {
            throw InvalidArgument("matrix CSV rows have different lengths");
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw InvalidArgument("matrix CSV has no data rows");
    }
    const auto n_rows = static_cast<Eigen::Index>(rows.size());
    const auto n_cols = static_cast<Eigen::Index>(rows.front().size() / 2);
    ComplexMatrix m(n_rows, n_cols);
    for (Eigen::Index n = 0; n < n_rows; ++n) {
        const auto& r = rows[static_cast<std::size_t>(n)];
        for (Eigen::Index t = 0; t < n_cols; ++t) {
            m(n, t) = {r[static_cast<std::size_t>(2 * t)], r[static_cast<std::size_t>(2 * t + 1)]};
        }
    }
    return m;
}

inline ComplexMatrix read_matrix_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    return read_matrix_csv(is);
}

} // namespace arfade
