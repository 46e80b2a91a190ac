// arfade: simulate AR(p) SIMO channels, estimate AR coefficients, track, run experiments.
//
// Exit codes: 0 success, 1 configuration / argument error, 2 I/O error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <arfade/arfade.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;

struct GlobalOptions {
    std::uint64_t seed = 42;
    std::optional<std::size_t> trials;
    std::string out;
    unsigned threads = std::max(1U, std::thread::hardware_concurrency());
};

struct ModelOptions {
    std::string coeffs = "1.8,-0.9";
    double innovation_variance = 1.0;
    std::size_t n_rx = 64;
    std::size_t horizon = 64;
    double snr_db = 0.0;
    std::string snr_reference = "innovation";

    void attach(CLI::App* app) {
        app->add_option("--coeffs", coeffs, "Comma-separated AR coefficients")->capture_default_str();
        app->add_option("--innovation-variance", innovation_variance, "Innovation variance sigma_x^2")
            ->capture_default_str();
        app->add_option("--nrx", n_rx, "Receive antennas N_r")->capture_default_str();
        app->add_option("--horizon", horizon, "Observation window T")->capture_default_str();
        app->add_option("--snr", snr_db, "SNR in dB")->capture_default_str();
        app->add_option("--snr-reference", snr_reference, "innovation | channel_power")->capture_default_str();
    }

    arfade::ARParams params() const {
        std::vector<double> a;
        for (const auto& item : arfade::detail::split_list(coeffs)) {
            a.push_back(arfade::detail::parse_double(item, "--coeffs"));
        }
        try {
            return arfade::ARParams(std::move(a), innovation_variance);
        } catch (const arfade::Error& e) {
            throw arfade::ConfigError(std::string("invalid AR model: ") + e.what());
        }
    }

    arfade::SnrReference reference() const {
        const auto r = arfade::parse_snr_reference(snr_reference);
        if (!r) {
            throw arfade::ConfigError("unknown SNR reference '" + snr_reference + "'");
        }
        return *r;
    }
};

arfade::Variant parse_variant_or_throw(const std::string& s) {
    const auto v = arfade::parse_variant(s);
    if (!v) {
        throw arfade::ConfigError("unknown variant '" + s + "'");
    }
    return *v;
}

void print_coeffs(const arfade::ARCoeffEstimate& est) {
    std::cout << "variant " << arfade::to_string(est.variant) << "  N_r=" << est.n_rx << " T=" << est.horizon
              << "  cond=" << std::setprecision(4) << est.condition_number << '\n';
    std::cout << std::setprecision(9);
    for (std::size_t i = 0; i < est.coeffs.size(); ++i) {
        std::cout << "a" << i + 1 << " = " << est.coeffs[i].real() << (est.coeffs[i].imag() < 0 ? " - " : " + ")
                  << std::abs(est.coeffs[i].imag()) << "i\n";
    }
}

int run_estimate(const GlobalOptions& g, const ModelOptions& m, const std::string& variant_name,
                 const std::string& input, double input_noise_variance, std::size_t order,
                 const std::string& export_channel) {
    const auto variant = parse_variant_or_throw(variant_name);
    if (variant == arfade::Variant::Genie) {
        throw arfade::ConfigError("genie is not an estimator");
    }
    arfade::ObservationSet obs;
    std::optional<arfade::ARParams> truth;
    double sigma_x2 = m.innovation_variance;
    double sigma_w2 = input_noise_variance;
    std::size_t p = order;
    if (!input.empty()) {
        obs = {arfade::read_matrix_csv(input), input_noise_variance};
        if (p == 0) {
            throw arfade::ConfigError("--order is required with --input");
        }
    } else {
        truth = m.params();
        p = truth->order();
        sigma_w2 = arfade::noise_variance_for_snr(*truth, m.snr_db, m.reference());
        const auto channel = arfade::generate_channel(*truth, m.n_rx, m.horizon, arfade::derive_seed(g.seed, {1}));
        obs = arfade::observe(channel, sigma_w2, arfade::derive_seed(g.seed, {2}));
        if (!export_channel.empty()) {
            arfade::write_matrix_csv(export_channel, channel.matrix);
        }
    }
    const auto est = arfade::detail::estimate_variant(variant, obs, p, sigma_x2, sigma_w2);
    print_coeffs(est);
    if (truth) {
        const auto nmse = arfade::nmse_coeffs(est, *truth);
        std::cout << "nmse = " << arfade::format_number(nmse.aggregate) << '\n';
    }
    if (!g.out.empty()) {
        arfade::detail::write_file(g.out, [&](std::ostream& os) {
            os << "index,real,imag\n";
            for (std::size_t i = 0; i < est.coeffs.size(); ++i) {
                os << i + 1 << ',' << arfade::format_number(est.coeffs[i].real()) << ','
                   << arfade::format_number(est.coeffs[i].imag()) << '\n';
            }
        });
    }
    return kExitOk;
}

int run_track(const GlobalOptions& g, const ModelOptions& m, const std::string& source_name, bool instant) {
    const auto variant = parse_variant_or_throw(source_name);
    const auto ar = m.params();
    const double sigma_x2 = ar.innovation_variance();
    const double sigma_w2 = arfade::noise_variance_for_snr(ar, m.snr_db, m.reference());
    const auto channel = arfade::generate_channel(ar, m.n_rx, m.horizon, arfade::derive_seed(g.seed, {1}));
    const auto pilots = arfade::PilotSequence::qpsk(m.horizon, g.seed);
    const arfade::ComplexMatrix y = arfade::received_signal(channel, pilots, sigma_w2, arfade::derive_seed(g.seed, {2}));
    const auto source = arfade::detail::coeff_source(variant);

    arfade::CoeffProvider provider = [&](const arfade::ObservationSet& obs) {
        if (variant == arfade::Variant::Genie) {
            return std::vector<double>(ar.coeffs().begin(), ar.coeffs().end());
        }
        return arfade::detail::estimate_variant(variant, obs, ar.order(), sigma_x2, sigma_w2).real_coeffs();
    };
    arfade::TrackResult result;
    if (instant) {
        result = arfade::track_instantaneous(y, pilots, provider, ar.order() + 2, source, sigma_x2, sigma_w2,
                                             &channel.matrix);
    } else {
        const auto coeffs = provider(arfade::derotate(y, pilots, sigma_w2));
        result = arfade::track_channel(y, pilots, coeffs, source, sigma_x2, sigma_w2, &channel.matrix);
    }
    const double nmse = arfade::nmse_channel(result.estimates, channel.matrix);
    std::cout << "source " << arfade::to_string(variant) << "  N_r=" << m.n_rx << " T=" << m.horizon
              << " snr_db=" << m.snr_db << '\n'
              << "nmse = " << arfade::format_number(nmse) << "  final-instant nmse = "
              << arfade::format_number(result.per_instant_nmse.back())
              << (result.stationary_prior ? "" : "  (non-stationary coefficients, diffuse prior)") << '\n';
    if (!g.out.empty()) {
        arfade::detail::write_file(g.out, [&](std::ostream& os) {
            os << "t,nmse\n";
            for (std::size_t t = 0; t < result.per_instant_nmse.size(); ++t) {
                os << t << ',' << arfade::format_number(result.per_instant_nmse[t]) << '\n';
            }
        });
    }
    return kExitOk;
}

int run_experiment_cmd(const GlobalOptions& g, const std::string& preset_name, const std::string& config_path,
                       const std::string& snr_reference) {
    arfade::ExperimentConfig config;
    if (!config_path.empty()) {
        config = arfade::load_config(config_path);
    } else {
        const auto kind = arfade::parse_experiment_kind(preset_name);
        if (!kind || *kind == arfade::ExperimentKind::Custom) {
            throw arfade::ConfigError("unknown preset '" + preset_name + "'");
        }
        config = arfade::preset(*kind);
        config.master_seed = g.seed;
    }
    if (g.trials) {
        config.trials = *g.trials;
    }
    if (!g.out.empty()) {
        config.output_path = g.out;
    }
    if (!snr_reference.empty()) {
        const auto r = arfade::parse_snr_reference(snr_reference);
        if (!r) {
            throw arfade::ConfigError("unknown SNR reference '" + snr_reference + "'");
        }
        config.snr_reference = *r;
    }
    if (config.output_path.empty()) {
        config.output_path = std::string(arfade::to_string(config.experiment)) + ".csv";
    }
    arfade::run_experiment(config, g.threads, &std::cout);
    std::cout << "wrote " << config.output_path << " and " << arfade::aggregate_path(config.output_path) << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"AR(p) fading-channel coefficient estimation and Kalman tracking"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--seed", global.seed, "Master seed")->capture_default_str();
    app.add_option("--trials", global.trials, "Monte Carlo trials per grid point")->check(CLI::PositiveNumber);
    app.add_option("--out", global.out, "Output CSV path");
    app.add_option("--threads", global.threads, "Worker threads")->check(CLI::PositiveNumber);

    ModelOptions est_model;
    std::string est_variant = "proposed-unbiased";
    std::string est_input;
    double est_noise_variance = 0.0;
    std::size_t est_order = 0;
    std::string est_export;
    auto* estimate = app.add_subcommand("estimate", "Estimate AR coefficients from simulated or loaded observations");
    est_model.attach(estimate);
    estimate->add_option("--variant", est_variant,
                         "proposed-biased | proposed-unbiased | time-based | time-based-biased")
        ->capture_default_str();
    estimate->add_option("--input", est_input, "Observation matrix CSV (re,im interleaved per antenna row)");
    estimate->add_option("--noise-variance", est_noise_variance, "sigma_w^2 of the loaded observations");
    estimate->add_option("--order", est_order, "AR order for loaded observations");
    estimate->add_option("--export-channel", est_export, "Write the simulated channel matrix as CSV");

    ModelOptions track_model;
    std::string track_source = "proposed-unbiased";
    bool track_instant = false;
    auto* track = app.add_subcommand("track", "Kalman tracking of one simulated channel");
    track_model.attach(track);
    track->add_option("--source", track_source, "genie | proposed-biased | proposed-unbiased | time-based")
        ->capture_default_str();
    track->add_flag("--instant", track_instant, "Re-estimate coefficients from the first t observations at each t");

    std::string exp_preset;
    std::string exp_config;
    std::string exp_snr_reference;
    auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment and write CSVs");
    auto* preset_opt = experiment->add_option("--preset", exp_preset, "fig1 | fig2 | fig3 | fig4");
    auto* config_opt = experiment->add_option("--config", exp_config, "Experiment config file");
    preset_opt->excludes(config_opt);
    experiment->add_option("--snr-reference", exp_snr_reference, "innovation | channel_power");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*estimate) {
            return run_estimate(global, est_model, est_variant, est_input, est_noise_variance, est_order, est_export);
        }
        if (*track) {
            return run_track(global, track_model, track_source, track_instant);
        }
        if (exp_preset.empty() && exp_config.empty()) {
            throw arfade::ConfigError("experiment needs --preset or --config");
        }
        return run_experiment_cmd(global, exp_preset, exp_config, exp_snr_reference);
    } catch (const arfade::IoError& e) {
        std::cerr << "arfade: " << e.what() << '\n';
        return kExitIo;
    } catch (const arfade::Error& e) {
        std::cerr << "arfade: " << e.what() << '\n';
        return kExitConfig;
    }
}
