#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace arfade;

namespace {

double cross_correlation(const ComplexMatrix& h, Eigen::Index a, Eigen::Index b) {
    const cplx c = h.row(a).dot(h.row(b));
    return std::abs(c) / std::sqrt(h.row(a).squaredNorm() * h.row(b).squaredNorm());
}

} // namespace

TEST(Generate, WhiteNoiseIsUnitPower) {
    const ARParams white(std::vector<double>{}, 1.0);
    double power = 0.0;
    const int seeds = 4000;
    for (int s = 0; s < seeds; ++s) {
        const auto ch = generate_channel(white, 2, 4, static_cast<std::uint64_t>(s));
        power += ch.matrix.squaredNorm() / 8.0;
    }
    // Standard error of the mean of 32000 unit exponentials is about 0.0056.
    EXPECT_NEAR(power / seeds, 1.0, 0.025);
}

TEST(Generate, JakesLagOneCorrelation) {
    const auto& ar = test::jakes_model();
    const auto r = theoretical_acov(ar, 1);
    std::vector<double> lag0;
    std::vector<double> lag1;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto h = generate_channel(ar, 64, 64, s).matrix;
        lag0.push_back(h.squaredNorm() / (64.0 * 64.0));
        lag1.push_back((h.rightCols(63).cwiseProduct(h.leftCols(63).conjugate())).sum().real() / (64.0 * 63.0));
    }
    EXPECT_NEAR(test::mean(lag0), r.values[0].real(), 3.0 * test::std_error(lag0));
    EXPECT_NEAR(test::mean(lag1), r.values[1].real(), 3.0 * test::std_error(lag1));
    EXPECT_NEAR(test::mean(lag1) / test::mean(lag0), 1.8 / 1.9, 0.005);
}

TEST(Generate, Deterministic) {
    const auto a = generate_channel(test::jakes_model(), 8, 32, 99);
    const auto b = generate_channel(test::jakes_model(), 8, 32, 99);
    EXPECT_EQ(a.matrix, b.matrix);
    EXPECT_EQ(a.seed, 99U);
    const auto c = generate_channel(test::jakes_model(), 8, 32, 100);
    EXPECT_NE(a.matrix, c.matrix);
}

TEST(Generate, RowsDoNotDependOnAntennaCount) {
    const auto small = generate_channel(test::jakes_model(), 3, 16, 5);
    const auto large = generate_channel(test::jakes_model(), 10, 16, 5);
    EXPECT_EQ(small.matrix, large.matrix.topRows(3));
}

TEST(Generate, RowsAreUncorrelated) {
    const ARParams ar({0.5}, 1.0);
    const auto h = generate_channel(ar, 8, 4096, 2024).matrix;
    for (Eigen::Index a = 0; a < 8; ++a) {
        for (Eigen::Index b = a + 1; b < 8; ++b) {
            EXPECT_LT(cross_correlation(h, a, b), 0.05) << "rows " << a << ", " << b;
        }
    }
}

TEST(Generate, LongRunMatchesTheoreticalAcov) {
    for (const auto& coeffs : {std::vector<double>{0.5}, std::vector<double>{0.5, 0.2}}) {
        const ARParams ar(coeffs, 2.0);
        const auto h = generate_channel(ar, 1, 100000, 77).matrix;
        const auto r = theoretical_acov(ar, ar.order());
        const ObservationSet obs{h, 0.0};
        for (std::size_t k = 0; k <= ar.order(); ++k) {
            const double sample = k == 0 ? acov_lag0(obs, 1.0, 0.0) : acov_unbiased(obs, static_cast<long>(k), 1.0).real();
            const double target = 2.0 * r.values[k].real();
            EXPECT_NEAR(sample, target, 0.02 * std::abs(target)) << "lag " << k;
        }
    }
}

TEST(Generate, BurnInStartIsStationaryToo) {
    const auto& ar = test::jakes_model();
    EXPECT_EQ(detail::default_burn_in(ar), static_cast<std::size_t>(std::ceil(20.0 / (1.0 - std::sqrt(0.9)))));
    GenerationOptions opts;
    opts.start = StartMode::BurnIn;
    double power = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        power += generate_channel(ar, 16, 8, s, opts).matrix.col(0).squaredNorm() / 16.0;
    }
    EXPECT_NEAR(power / 200.0 / theoretical_acov(ar, 0).values[0].real(), 1.0, 0.1);
}

TEST(Generate, Errors) {
    EXPECT_THROW(generate_channel(test::jakes_model(), 0, 4, 1), InvalidArgument);
    EXPECT_THROW(generate_channel(test::jakes_model(), 4, 0, 1), InvalidArgument);
    EXPECT_THROW(generate_channel(ARParams::unchecked({1.0}, 1.0), 4, 4, 1), NonStationaryError);
    GenerationOptions opts;
    opts.start = StartMode::BurnIn;
    EXPECT_THROW(generate_channel(ARParams::unchecked({1.0}, 1.0), 4, 4, 1, opts), NonStationaryError);
    opts.burn_in_steps = 10;
    EXPECT_NO_THROW(generate_channel(ARParams::unchecked({1.0}, 1.0), 4, 4, 1, opts));
}

TEST(Observe, NoiselessIsExact) {
    const auto ch = generate_channel(test::jakes_model(), 4, 16, 3);
    EXPECT_EQ(observe(ch, 0.0, 8).matrix, ch.matrix);
}

TEST(Observe, NoiseHasConfiguredVariance) {
    ChannelRealization zero{ComplexMatrix::Zero(64, 256), ARParams(std::vector<double>{}, 1.0), 0};
    const auto obs = observe(zero, 1.0, 4);
    const double var = obs.matrix.squaredNorm() / static_cast<double>(obs.matrix.size());
    EXPECT_NEAR(var, 1.0, 0.03);
    EXPECT_NEAR(obs.matrix.real().squaredNorm() / obs.matrix.imag().squaredNorm(), 1.0, 0.05);
    EXPECT_EQ(obs.noise_variance, 1.0);
}

TEST(Observe, RejectsNegativeVariance) {
    const auto ch = generate_channel(test::jakes_model(), 2, 4, 3);
    EXPECT_THROW(observe(ch, -1.0, 1), InvalidArgument);
}

TEST(Snr, ChannelPowerReferenceAtZeroDb) {
    const auto& ar = test::jakes_model();
    const double r0 = test::impulse_acov({1.8, -0.9}, 0)[0];
    EXPECT_NEAR(noise_variance_for_snr(ar, 0.0, SnrReference::ChannelPower), r0, 1e-9 * r0);
    EXPECT_NEAR(noise_variance_for_snr(ar, 10.0, SnrReference::ChannelPower), r0 / 10.0, 1e-9 * r0);
    EXPECT_EQ(noise_variance_for_snr(ar, 0.0, SnrReference::Innovation), 1.0);
}

TEST(Received, IdentityPilotsMatchObserve) {
    const auto ch = generate_channel(test::jakes_model(), 4, 16, 3);
    const auto y = received_signal(ch, PilotSequence::ones(16), 0.7, 21);
    EXPECT_EQ(y, observe(ch, 0.7, 21).matrix);
}

TEST(Received, ConstantPilotRotates) {
    const auto ch = generate_channel(test::jakes_model(), 4, 16, 3);
    const cplx s = std::polar(1.0, std::numbers::pi / 4.0);
    const PilotSequence pilots{std::vector<cplx>(16, s)};
    const auto y = received_signal(ch, pilots, 0.0, 1);
    EXPECT_LT((y - ch.matrix * s).norm(), 1e-12 * ch.matrix.norm());
}

TEST(Received, QpskRoundTrip) {
    const auto ch = generate_channel(test::jakes_model(), 4, 32, 3);
    const auto pilots = PilotSequence::qpsk(32, 5);
    for (const auto& s : pilots.symbols) {
        EXPECT_NEAR(std::abs(s), 1.0, 1e-15);
    }
    const auto back = derotate(received_signal(ch, pilots, 0.0, 1), pilots, 0.0);
    EXPECT_LT((back.matrix - ch.matrix).norm(), 1e-12 * ch.matrix.norm());
}

TEST(Received, DerotatedNoiseHasSameLag0Statistics) {
    const auto ch = generate_channel(test::jakes_model(), 32, 64, 3);
    const auto pilots = PilotSequence::qpsk(64, 5);
    const auto a = derotate(received_signal(ch, pilots, 1.0, 9), pilots, 1.0);
    const auto b = observe(ch, 1.0, 9);
    // Identical noise draws; derotation only rotates each noise sample, so noise power is unchanged.
    const ComplexMatrix wa = a.matrix - ch.matrix;
    const ComplexMatrix wb = b.matrix - ch.matrix;
    EXPECT_NEAR(wa.squaredNorm(), wb.squaredNorm(), 1e-9 * wb.squaredNorm());
}

TEST(Received, Errors) {
    const auto ch = generate_channel(test::jakes_model(), 2, 8, 3);
    EXPECT_THROW(received_signal(ch, PilotSequence::ones(7), 0.0, 1), InvalidArgument);
    PilotSequence bad = PilotSequence::ones(8);
    bad.symbols[3] = 1.1;
    EXPECT_THROW(received_signal(ch, bad, 0.0, 1), InvalidArgument);
    EXPECT_THROW(derotate(ch.matrix, bad, 0.0), InvalidArgument);
    EXPECT_THROW(derotate(ch.matrix, PilotSequence::ones(9), 0.0), InvalidArgument);
}

TEST(MatrixCsv, RoundTrip) {
    const auto ch = generate_channel(test::jakes_model(), 3, 5, 3);
    std::stringstream ss;
    write_matrix_csv(ss, ch.matrix);
    std::string header;
    std::getline(std::stringstream(ss.str()), header);
    EXPECT_EQ(header, "re_t0,im_t0,re_t1,im_t1,re_t2,im_t2,re_t3,im_t3,re_t4,im_t4");
    EXPECT_EQ(read_matrix_csv(ss), ch.matrix);
}

TEST(MatrixCsv, Malformed) {
    std::stringstream odd("h\n1,2,3\n");
    EXPECT_THROW(read_matrix_csv(odd), InvalidArgument);
    std::stringstream ragged("h\n1,2\n1,2,3,4\n");
    EXPECT_THROW(read_matrix_csv(ragged), InvalidArgument);
    std::stringstream text("h\n1,x\n");
    EXPECT_THROW(read_matrix_csv(text), InvalidArgument);
    EXPECT_THROW(read_matrix_csv(std::string("/nonexistent/dir/h.csv")), IoError);
}
