#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace arfade;

namespace {

struct Scene {
    ChannelRealization channel;
    PilotSequence pilots;
    ComplexMatrix received;
};

Scene make_scene(std::size_t n_rx, std::size_t horizon, double sigma_w2, std::uint64_t seed) {
    Scene s{generate_channel(test::jakes_model(), n_rx, horizon, derive_seed(seed, {1})),
            PilotSequence::qpsk(horizon, seed), {}};
    s.received = received_signal(s.channel, s.pilots, sigma_w2, derive_seed(seed, {2}));
    return s;
}

/// Covariance form of the Riccati recursion, iterated to its fixed point.
RealMatrix riccati_fixed_point(const CompanionForm& m, RealMatrix p, double sigma_w2) {
    for (int i = 0; i < 20000; ++i) {
        const RealMatrix pred = m.transition * p * m.transition.transpose() + m.process_noise_cov;
        const RealVector g = pred.col(0);
        p = pred - g * g.transpose() / (pred(0, 0) + sigma_w2);
    }
    return p;
}

ComplexVector random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    ComplexVector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) {
        x = {d(rng), d(rng)};
    }
    return v;
}

} // namespace

TEST(KalmanInit, AR1Covariance) {
    const std::vector<double> a{0.5};
    const auto s = kalman_init(a, 1.0, 1.0, 3);
    ASSERT_EQ(s.covariance.rows(), 1);
    EXPECT_NEAR(s.covariance(0, 0), 4.0 / 3.0, 1e-14);
}

TEST(KalmanInit, ZeroMeans) {
    const auto s = kalman_init(test::jakes_model(), 5.0, 7);
    EXPECT_EQ(s.means.rows(), 7);
    EXPECT_EQ(s.means.cols(), 2);
    EXPECT_TRUE(s.means.isZero(0.0));
}

TEST(KalmanInit, JakesCovarianceMatchesAcov) {
    const std::vector<double> a{1.8, -0.9};
    const auto s = kalman_init(a, 2.0, 1.0, 1);
    const auto r = test::impulse_acov(a, 1);
    EXPECT_NEAR(s.covariance(0, 0), 2.0 * r[0], 1e-9 * r[0]);
    EXPECT_NEAR(s.covariance(1, 1), 2.0 * r[0], 1e-9 * r[0]);
    EXPECT_NEAR(s.covariance(0, 1), 2.0 * r[1], 1e-9 * r[0]);
    EXPECT_NEAR(s.covariance(1, 0), 2.0 * r[1], 1e-9 * r[0]);
}

TEST(KalmanInit, FromEstimateUsesRealParts) {
    ARCoeffEstimate est;
    est.coeffs = {cplx(1.8, 0.01), cplx(-0.9, -0.02)};
    const auto s = kalman_init(est, 1.0, 1.0, 2);
    EXPECT_EQ(s.model.transition(0, 0), 1.8);
    EXPECT_EQ(s.model.transition(0, 1), -0.9);
}

TEST(KalmanInit, Errors) {
    EXPECT_THROW(kalman_init(std::vector<double>{1.0}, 1.0, 1.0, 2), NonStationaryError);
    EXPECT_THROW(kalman_init(std::vector<double>{}, 1.0, 1.0, 2), InvalidArgument);
    EXPECT_THROW(kalman_init(test::jakes_model(), 1.0, 0), InvalidArgument);
    EXPECT_THROW(kalman_init(test::jakes_model(), -1.0, 2), InvalidArgument);
}

TEST(KalmanStep, NoiselessLimitReturnsObservation) {
    auto s = kalman_init(test::jakes_model(), 1e-12, 4);
    for (std::uint64_t t = 0; t < 5; ++t) {
        const auto y = random_vector(4, t);
        const auto h = kalman_step(s, y);
        EXPECT_LT((h - y).cwiseAbs().maxCoeff(), 1e-6) << "step " << t;
    }
}

TEST(KalmanStep, UninformativeLimitReturnsPrediction) {
    auto s = kalman_init(test::jakes_model(), 1e12, 4);
    s.means.col(0) = random_vector(4, 1);
    s.means.col(1) = random_vector(4, 2);
    for (std::uint64_t t = 0; t < 5; ++t) {
        const ComplexVector predicted = 1.8 * s.means.col(0) - 0.9 * s.means.col(1);
        const auto h = kalman_step(s, random_vector(4, 10 + t));
        EXPECT_LT((h - predicted).cwiseAbs().maxCoeff(), 1e-6) << "step " << t;
    }
}

TEST(KalmanStep, Errors) {
    auto s = kalman_init(test::jakes_model(), 1.0, 3);
    EXPECT_THROW(kalman_step(s, random_vector(2, 1)), InvalidArgument);
    ComplexVector bad = random_vector(3, 1);
    bad(1) = cplx(std::nan(""), 0.0);
    EXPECT_THROW(kalman_step(s, bad), InvalidArgument);
    bad(1) = cplx(0.0, std::numeric_limits<double>::infinity());
    EXPECT_THROW(kalman_step(s, bad), InvalidArgument);
}

TEST(KalmanStep, CovarianceConvergesToRiccatiFixedPoint) {
    auto s = kalman_init(test::jakes_model(), 1.0, 1);
    const RealMatrix fixed = riccati_fixed_point(s.model, s.covariance, 1.0);
    std::vector<double> dist;
    for (int t = 1; t <= 64; ++t) {
        kalman_step(s, ComplexVector::Zero(1));
        dist.push_back((s.covariance - fixed).norm() / fixed.norm());
    }
    EXPECT_LT(dist.back(), 1e-6);
    // Envelope: the largest distance over [t, 64] never grows with t.
    double envelope = std::numeric_limits<double>::infinity();
    for (std::size_t t : {4, 8, 16, 32, 63}) {
        const double tail = *std::max_element(dist.begin() + static_cast<long>(t), dist.end());
        EXPECT_LE(tail, envelope);
        envelope = tail;
    }
}

TEST(KalmanStep, CovarianceStaysPsd) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 40; ++i) {
        const auto m = test::random_model(rng, 1 + static_cast<std::size_t>(i % 4), 0.99);
        for (double sigma_w2 : {1e-12, 1e-3, 1.0, 1e3, 1e12}) {
            auto s = kalman_init(m.coeffs, 1.0, sigma_w2, 2);
            for (std::uint64_t t = 0; t < 64; ++t) {
                kalman_step(s, random_vector(2, t));
            }
            EXPECT_GE(s.min_eig_ratio, -1e-10) << "model " << i << " sigma_w2 " << sigma_w2;
            EXPECT_TRUE(s.covariance.isApprox(s.covariance.transpose(), 0.0));
        }
    }
}

TEST(Track, GenieBeatsRawObservationAndImproves) {
    const auto& ar = test::jakes_model();
    const double raw = 1.0 / test::impulse_acov({1.8, -0.9}, 0)[0];
    std::vector<double> avg(64, 0.0);
    const int trials = 40;
    for (int k = 0; k < trials; ++k) {
        const auto s = make_scene(64, 64, 1.0, static_cast<std::uint64_t>(k));
        const auto r = track_channel(s.received, s.pilots, ar, 1.0, &s.channel.matrix);
        ASSERT_EQ(r.per_instant_nmse.size(), 64U);
        for (std::size_t t = 0; t < 64; ++t) {
            EXPECT_GE(r.per_instant_nmse[t], 0.0);
            avg[t] += r.per_instant_nmse[t] / trials;
        }
        EXPECT_GE(r.min_eig_ratio, -1e-10);
        EXPECT_TRUE(r.stationary_prior);
        EXPECT_EQ(r.coeff_source, CoeffSource::Genie);
    }
    for (std::size_t t = 1; t < 64; ++t) {
        EXPECT_LT(avg[t], raw) << "t = " << t + 1;
    }
    const double early = std::accumulate(avg.begin(), avg.begin() + 4, 0.0) / 4.0;
    const double late = std::accumulate(avg.end() - 16, avg.end(), 0.0) / 16.0;
    EXPECT_LT(late, early);
}

TEST(Track, Deterministic) {
    const auto s = make_scene(16, 32, 1.0, 5);
    const auto coeffs = estimate_ar(derotate(s.received, s.pilots, 1.0), 2, AcovVariant::Unbiased, 1.0, 1.0).real_coeffs();
    const auto a = track_channel(s.received, s.pilots, coeffs, CoeffSource::ProposedUnbiased, 1.0, 1.0, &s.channel.matrix);
    const auto b = track_channel(s.received, s.pilots, coeffs, CoeffSource::ProposedUnbiased, 1.0, 1.0, &s.channel.matrix);
    EXPECT_EQ(a.estimates, b.estimates);
    EXPECT_EQ(a.per_instant_nmse, b.per_instant_nmse);
}

TEST(Track, NonStationaryCoefficientsUseDiffusePrior) {
    const auto s = make_scene(8, 32, 1.0, 6);
    const std::vector<double> unit_root{1.0};
    const auto r = track_channel(s.received, s.pilots, unit_root, CoeffSource::TimeBased, 1.0, 1.0);
    EXPECT_FALSE(r.stationary_prior);
    EXPECT_TRUE(r.estimates.allFinite());
    EXPECT_TRUE(r.per_instant_nmse.empty());
}

TEST(Track, ShapeMismatch) {
    const auto s = make_scene(8, 32, 1.0, 6);
    const ComplexMatrix wrong = ComplexMatrix::Ones(8, 31);
    EXPECT_THROW(track_channel(s.received, s.pilots, test::jakes_model(), 1.0, &wrong), InvalidArgument);
}

TEST(TrackInstantaneous, ConstantCoefficientsMatchFullRun) {
    const auto s = make_scene(8, 32, 1.0, 7);
    const auto& ar = test::jakes_model();
    const CoeffProvider genie = [&](const ObservationSet&) {
        return std::vector<double>(ar.coeffs().begin(), ar.coeffs().end());
    };
    const auto inst = track_instantaneous(s.received, s.pilots, genie, 4, CoeffSource::Genie, 1.0, 1.0, &s.channel.matrix);
    const auto full = track_channel(s.received, s.pilots, ar, 1.0, &s.channel.matrix);
    EXPECT_EQ(inst.estimates, full.estimates);
    EXPECT_EQ(inst.per_instant_nmse, full.per_instant_nmse);
}

TEST(TrackInstantaneous, PrefixesStartAtMinimumColumns) {
    const auto s = make_scene(4, 10, 1.0, 8);
    std::vector<long> seen;
    const CoeffProvider probe = [&](const ObservationSet& prefix) {
        seen.push_back(prefix.matrix.cols());
        return std::vector<double>{0.5};
    };
    track_instantaneous(s.received, s.pilots, probe, 4, CoeffSource::ProposedUnbiased, 1.0, 1.0);
    EXPECT_EQ(seen, (std::vector<long>{4, 4, 4, 4, 5, 6, 7, 8, 9, 10}));
}

TEST(TrackInstantaneous, EstimateAtTUsesOnlyFirstTColumns) {
    const auto s = make_scene(4, 16, 1.0, 9);
    const CoeffProvider est = [](const ObservationSet& prefix) {
        return estimate_ar(prefix, 2, AcovVariant::Unbiased, 1.0, 1.0).real_coeffs();
    };
    const auto r = track_instantaneous(s.received, s.pilots, est, 4, CoeffSource::ProposedUnbiased, 1.0, 1.0);
    for (Eigen::Index t : {3, 6, 11}) {
        ComplexMatrix tampered = s.received;
        tampered.rightCols(16 - (t + 1)).setConstant(cplx(9.0, -9.0));
        const auto r2 = track_instantaneous(tampered, s.pilots, est, 4, CoeffSource::ProposedUnbiased, 1.0, 1.0);
        EXPECT_EQ(r.estimates.col(t), r2.estimates.col(t)) << "t = " << t + 1;
    }
}

TEST(ArPredict, GeometricDecay) {
    ComplexMatrix history(1, 1);
    history(0, 0) = 1.0;
    const std::vector<cplx> a{0.5};
    const auto out = ar_predict(history, a, 3);
    EXPECT_EQ(out(0, 0), cplx(0.5));
    EXPECT_EQ(out(0, 1), cplx(0.25));
    EXPECT_EQ(out(0, 2), cplx(0.125));
}

TEST(ArPredict, ZeroCoefficients) {
    const ComplexMatrix history = ComplexMatrix::Random(3, 2);
    const std::vector<cplx> a{0.0, 0.0};
    EXPECT_TRUE(ar_predict(history, a, 5).isZero(0.0));
}

TEST(ArPredict, UsesMostRecentColumns) {
    ComplexMatrix history(1, 3);
    history << 100.0, 2.0, 1.0;
    const std::vector<cplx> a{1.8, -0.9};
    EXPECT_NEAR(std::abs(ar_predict(history, a, 1)(0, 0) - (1.8 * 1.0 - 0.9 * 2.0)), 0.0, 1e-15);
}

TEST(ArPredict, BoundedByCompanionPowerNorm) {
    std::mt19937_64 rng(22);
    for (int i = 0; i < 30; ++i) {
        const auto m = test::random_model(rng, 1 + static_cast<std::size_t>(i % 4));
        const std::size_t p = m.coeffs.size();
        const std::vector<cplx> a(m.coeffs.begin(), m.coeffs.end());
        const ComplexMatrix history = ComplexMatrix::Random(2, static_cast<Eigen::Index>(p));
        const auto out = ar_predict(history, a, 400);
        const RealMatrix f = companion_form(m.coeffs, 1.0).transition;
        for (Eigen::Index n = 0; n < 2; ++n) {
            const double state = history.row(n).norm();
            RealMatrix power = RealMatrix::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
            for (Eigen::Index k = 0; k < 400; ++k) {
                power = f * power;
                Eigen::JacobiSVD<RealMatrix> svd(power);
                EXPECT_LE(std::abs(out(n, k)), svd.singularValues()(0) * state * (1.0 + 1e-9) + 1e-300);
            }
            EXPECT_LT(std::abs(out(n, 399)), 1e-4 * state);
        }
    }
}

TEST(ArPredict, Errors) {
    const ComplexMatrix history = ComplexMatrix::Ones(2, 1);
    const std::vector<cplx> a{1.8, -0.9};
    EXPECT_THROW(ar_predict(history, a, 3), InvalidArgument);
    EXPECT_THROW(ar_predict(ComplexMatrix::Ones(2, 2), a, 0), InvalidArgument);
}

TEST(TrackOrdering, GenieThenUnbiasedThenTimeBased) {
    ExperimentConfig c;
    c.protocol = Protocol::Track;
    c.grid = {{64, 64, 0.0}};
    c.trials = 200;
    c.master_seed = 2025;
    c.variants = {Variant::Genie, Variant::ProposedUnbiased, Variant::TimeBased};
    const auto records = run_records(c, 1);
    for (const auto& r : records) {
        if (r.metric == "psd_min_eig") {
            EXPECT_GE(r.value, -1e-10);
        }
    }
    std::map<Variant, double> median;
    for (const auto& r : aggregate(c, records)) {
        if (r.metric == "nmse") {
            median[r.variant] = r.median;
            EXPECT_EQ(r.n_failed, 0U);
        }
    }
    EXPECT_LE(median[Variant::Genie], median[Variant::ProposedUnbiased]);
    EXPECT_LE(median[Variant::ProposedUnbiased], median[Variant::TimeBased]);
}
