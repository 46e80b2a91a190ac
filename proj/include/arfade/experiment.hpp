#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "channel.hpp"
#include "core.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "random.hpp"
#include "tracking.hpp"
#include "yule_walker.hpp"

namespace arfade {

enum class ExperimentKind { CoeffNmseVsT, InstantTrackNmse, TrackNmseVsSnr, TrackNmseVsN, Custom };

/// What a trial computes.
enum class Protocol {
    /// Coefficient NMSE of each estimator.
    CoeffNmse,
    /// Channel NMSE of a Kalman run over the full window with coefficients from all T columns.
    Track,
    /// Per-instant channel NMSE, coefficients re-estimated from the first t columns.
    InstantTrack,
};

enum class Variant { Genie, ProposedBiased, ProposedUnbiased, TimeBased, TimeBasedBiased };

/// Reference power of the SNR.
enum class SnrReference {
    /// SNR = sigma_x^2 / sigma_w^2.
    Innovation,
    /// SNR = sigma_x^2 r(0) / sigma_w^2 (average channel power over noise power).
    ChannelPower,
};

inline const char* to_string(ExperimentKind k) noexcept {
    switch (k) {
    case ExperimentKind::CoeffNmseVsT: return "fig1";
    case ExperimentKind::InstantTrackNmse: return "fig2";
    case ExperimentKind::TrackNmseVsSnr: return "fig3";
    case ExperimentKind::TrackNmseVsN: return "fig4";
    case ExperimentKind::Custom: return "custom";
    }
    return "?";
}

inline const char* to_string(Protocol p) noexcept {
    switch (p) {
    case Protocol::CoeffNmse: return "coeff_nmse";
    case Protocol::Track: return "track";
    case Protocol::InstantTrack: return "instant_track";
    }
    return "?";
}

inline const char* to_string(Variant v) noexcept {
    switch (v) {
    case Variant::Genie: return "genie";
    case Variant::ProposedBiased: return "proposed-biased";
    case Variant::ProposedUnbiased: return "proposed-unbiased";
    case Variant::TimeBased: return "time-based";
    case Variant::TimeBasedBiased: return "time-based-biased";
    }
    return "?";
}

inline const char* to_string(SnrReference r) noexcept {
    return r == SnrReference::Innovation ? "innovation" : "channel_power";
}

namespace detail {

template <typename E>
std::optional<E> parse_enum(const std::string& text, std::initializer_list<E> values) {
    for (E v : values) {
        if (text == to_string(v)) {
            return v;
        }
    }
    return std::nullopt;
}

} // namespace detail

inline std::optional<ExperimentKind> parse_experiment_kind(const std::string& s) {
    return detail::parse_enum(s, {ExperimentKind::CoeffNmseVsT, ExperimentKind::InstantTrackNmse,
                                  ExperimentKind::TrackNmseVsSnr, ExperimentKind::TrackNmseVsN,
                                  ExperimentKind::Custom});
}

inline std::optional<Protocol> parse_protocol(const std::string& s) {
    return detail::parse_enum(s, {Protocol::CoeffNmse, Protocol::Track, Protocol::InstantTrack});
}

inline std::optional<Variant> parse_variant(const std::string& s) {
    return detail::parse_enum(s, {Variant::Genie, Variant::ProposedBiased, Variant::ProposedUnbiased,
                                  Variant::TimeBased, Variant::TimeBasedBiased});
}

inline std::optional<SnrReference> parse_snr_reference(const std::string& s) {
    return detail::parse_enum(s, {SnrReference::Innovation, SnrReference::ChannelPower});
}

/// Observation-noise variance that realizes `snr_db` under the chosen reference.
inline double noise_variance_for_snr(const ARParams& ar, double snr_db, SnrReference reference) {
    double signal = ar.innovation_variance();
    if (reference == SnrReference::ChannelPower) {
        signal *= theoretical_acov(ar, 0).values[0].real();
    }
    return signal * std::pow(10.0, -snr_db / 10.0);
}

struct GridPoint {
    std::size_t n_rx = 0;
    std::size_t horizon = 0;
    double snr_db = 0.0;

    /// c = N_r / T.
    double aspect_ratio() const noexcept { return static_cast<double>(n_rx) / static_cast<double>(horizon); }

    bool operator==(const GridPoint&) const = default;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Custom;
    Protocol protocol = Protocol::CoeffNmse;
    ARParams ar{{1.8, -0.9}, 1.0};
    std::vector<GridPoint> grid;
    std::size_t trials = 1;
    std::uint64_t master_seed = 42;
    std::vector<Variant> variants;
    std::string output_path;
    SnrReference snr_reference = SnrReference::Innovation;

    void validate() const {
        if (trials == 0) {
            throw ConfigError("trials must be at least 1");
        }
        if (grid.empty()) {
            throw ConfigError("grid must not be empty");
        }
        if (variants.empty()) {
            throw ConfigError("at least one variant is required");
        }
        if (ar.order() == 0) {
            throw ConfigError("AR order must be at least 1");
        }
        for (const auto& g : grid) {
            if (g.n_rx == 0 || g.horizon == 0) {
                throw ConfigError("grid dimensions must be positive");
            }
            if (g.horizon <= ar.order() + 1) {
                throw ConfigError("horizon " + std::to_string(g.horizon) + " is too short for AR order " +
                                  std::to_string(ar.order()));
            }
            if (experiment != ExperimentKind::Custom && g.n_rx != g.horizon) {
                throw ConfigError(std::string("preset ") + to_string(experiment) + " requires N_r = T on every grid point");
            }
            if (!std::isfinite(g.snr_db)) {
                throw ConfigError("SNR must be finite");
            }
        }
    }
};

inline constexpr std::size_t kCoeffTrialsDefault = 500;
inline constexpr std::size_t kTrackTrialsDefault = 200;

inline ExperimentConfig preset(ExperimentKind kind) {
    ExperimentConfig c;
    c.experiment = kind;
    const std::vector<Variant> tracking{Variant::Genie, Variant::ProposedBiased, Variant::ProposedUnbiased,
                                        Variant::TimeBased};
    switch (kind) {
    case ExperimentKind::CoeffNmseVsT:
        c.protocol = Protocol::CoeffNmse;
        for (std::size_t n : {16, 32, 64, 128}) {
            c.grid.push_back({n, n, 0.0});
        }
        c.trials = kCoeffTrialsDefault;
        c.variants = {Variant::ProposedBiased, Variant::ProposedUnbiased, Variant::TimeBased};
        break;
    case ExperimentKind::InstantTrackNmse:
        c.protocol = Protocol::InstantTrack;
        c.grid = {{64, 64, 0.0}};
        c.trials = kTrackTrialsDefault;
        c.variants = tracking;
        break;
    case ExperimentKind::TrackNmseVsSnr:
        c.protocol = Protocol::Track;
        for (double snr : {-10.0, -5.0, 0.0, 5.0, 10.0}) {
            c.grid.push_back({64, 64, snr});
        }
        c.trials = kTrackTrialsDefault;
        c.variants = tracking;
        break;
    case ExperimentKind::TrackNmseVsN:
        c.protocol = Protocol::Track;
        for (std::size_t n : {16, 32, 64, 128}) {
            c.grid.push_back({n, n, -5.0});
        }
        c.trials = kTrackTrialsDefault;
        c.variants = tracking;
        break;
    case ExperimentKind::Custom:
        throw ConfigError("custom experiments need a config file");
    }
    return c;
}

struct TrialRecord {
    ExperimentKind experiment = ExperimentKind::Custom;
    std::size_t grid_index = 0;
    GridPoint point;
    std::size_t trial = 0;
    Variant variant = Variant::Genie;
    std::string metric;
    double value = 0.0;
    bool failed = false;
    /// Position of the metric within its variant, used for a stable sort order.
    std::size_t metric_index = 0;
};

namespace detail {

inline std::uint64_t trial_seed(std::uint64_t master, const GridPoint& g, std::size_t trial) {
    // The SNR is left out so every SNR point of a sweep sees the same channel and
    // the same standardized noise draw.
    return derive_seed(master, {g.n_rx, g.horizon, static_cast<std::uint64_t>(trial)});
}

inline std::size_t variant_rank(const ExperimentConfig& c, Variant v) {
    return static_cast<std::size_t>(std::find(c.variants.begin(), c.variants.end(), v) - c.variants.begin());
}

struct RecordSink {
    const ExperimentConfig& config;
    std::size_t grid_index;
    std::size_t trial;
    std::vector<TrialRecord>& out;

    void add(Variant v, std::size_t metric_index, std::string metric, double value, bool failed = false) {
        out.push_back({config.experiment, grid_index, config.grid[grid_index], trial, v, std::move(metric),
                       failed ? std::numeric_limits<double>::quiet_NaN() : value, failed, metric_index});
    }
};

// nmse, nmse_a1..nmse_ap, sqerr_a1..sqerr_ap, imag_norm
inline std::vector<std::string> coeff_metric_names(std::size_t order) {
    std::vector<std::string> names{"nmse"};
    for (std::size_t i = 1; i <= order; ++i) {
        names.push_back("nmse_a" + std::to_string(i));
    }
    for (std::size_t i = 1; i <= order; ++i) {
        names.push_back("sqerr_a" + std::to_string(i));
    }
    names.emplace_back("imag_norm");
    return names;
}

// nmse_t1..nmse_tT, nmse_mean (average over instants), psd_min_eig
inline std::vector<std::string> instant_metric_names(std::size_t horizon) {
    std::vector<std::string> names;
    for (std::size_t t = 1; t <= horizon; ++t) {
        names.push_back("nmse_t" + std::to_string(t));
    }
    names.emplace_back("nmse_mean");
    names.emplace_back("psd_min_eig");
    return names;
}

inline const std::vector<std::string>& track_metric_names() {
    static const std::vector<std::string> names{"nmse", "psd_min_eig", "stationary_prior"};
    return names;
}

inline ARCoeffEstimate estimate_variant(Variant v, const ObservationSet& obs, std::size_t order, double sigma_x2,
                                        double sigma_w2) {
    switch (v) {
    case Variant::ProposedBiased: return estimate_ar(obs, order, AcovVariant::Biased, sigma_x2, sigma_w2);
    case Variant::ProposedUnbiased: return estimate_ar(obs, order, AcovVariant::Unbiased, sigma_x2, sigma_w2);
    case Variant::TimeBased:
        return estimate_ar_time_based(obs, order, AcovVariant::Unbiased, sigma_x2, sigma_w2, 0);
    case Variant::TimeBasedBiased:
        return estimate_ar_time_based(obs, order, AcovVariant::Biased, sigma_x2, sigma_w2, 0);
    case Variant::Genie: break;
    }
    throw InvalidArgument("genie has no estimator");
}

inline CoeffSource coeff_source(Variant v) {
    switch (v) {
    case Variant::Genie: return CoeffSource::Genie;
    case Variant::ProposedBiased: return CoeffSource::ProposedBiased;
    case Variant::ProposedUnbiased: return CoeffSource::ProposedUnbiased;
    case Variant::TimeBased:
    case Variant::TimeBasedBiased: return CoeffSource::TimeBased;
    }
    return CoeffSource::Genie;
}

} // namespace detail

/// One trial at one grid point: a single channel and noise draw shared by every variant.
/// Estimator failures become failure-flagged records.
inline std::vector<TrialRecord> run_trial(const ExperimentConfig& config, std::size_t grid_index, std::size_t trial) {
    const GridPoint& g = config.grid.at(grid_index);
    const ARParams& ar = config.ar;
    const std::size_t p = ar.order();
    const double sigma_x2 = ar.innovation_variance();
    const double sigma_w2 = noise_variance_for_snr(ar, g.snr_db, config.snr_reference);

    const std::uint64_t seed = detail::trial_seed(config.master_seed, g, trial);
    const auto channel = generate_channel(ar, g.n_rx, g.horizon, derive_seed(seed, {1}));
    const std::uint64_t noise_seed = derive_seed(seed, {2});

    std::vector<TrialRecord> records;
    detail::RecordSink sink{config, grid_index, trial, records};

    switch (config.protocol) {
    case Protocol::CoeffNmse: {
        const auto obs = observe(channel, sigma_w2, noise_seed);
        const auto names = detail::coeff_metric_names(p);
        for (Variant v : config.variants) {
            try {
                ARCoeffEstimate est;
                if (v == Variant::Genie) {
                    est.coeffs.assign(ar.coeffs().begin(), ar.coeffs().end());
                } else {
                    est = detail::estimate_variant(v, obs, p, sigma_x2, sigma_w2);
                }
                const auto nmse = nmse_coeffs(est, ar);
                sink.add(v, 0, names[0], nmse.aggregate);
                for (std::size_t i = 0; i < p; ++i) {
                    sink.add(v, 1 + i, names[1 + i], nmse.per_coeff[i]);
                }
                for (std::size_t i = 0; i < p; ++i) {
                    sink.add(v, 1 + p + i, names[1 + p + i], std::norm(est.coeffs[i] - ar.coeffs()[i]));
                }
                sink.add(v, 1 + 2 * p, names[1 + 2 * p], est.imag_norm());
            } catch (const Error&) {
                for (std::size_t i = 0; i < names.size(); ++i) {
                    sink.add(v, i, names[i], 0.0, true);
                }
            }
        }
        break;
    }
    case Protocol::Track: {
        const auto pilots = PilotSequence::qpsk(g.horizon, seed);
        const ComplexMatrix y = received_signal(channel, pilots, sigma_w2, noise_seed);
        const auto obs = derotate(y, pilots, sigma_w2);
        const auto& names = detail::track_metric_names();
        for (Variant v : config.variants) {
            try {
                std::vector<double> coeffs;
                if (v == Variant::Genie) {
                    coeffs.assign(ar.coeffs().begin(), ar.coeffs().end());
                } else {
                    coeffs = detail::estimate_variant(v, obs, p, sigma_x2, sigma_w2).real_coeffs();
                }
                const auto result =
                    track_channel(y, pilots, coeffs, detail::coeff_source(v), sigma_x2, sigma_w2, &channel.matrix);
                sink.add(v, 0, names[0], nmse_channel(result.estimates, channel.matrix));
                sink.add(v, 1, names[1], result.min_eig_ratio);
                sink.add(v, 2, names[2], result.stationary_prior ? 1.0 : 0.0);
            } catch (const Error&) {
                for (std::size_t i = 0; i < names.size(); ++i) {
                    sink.add(v, i, names[i], 0.0, true);
                }
            }
        }
        break;
    }
    case Protocol::InstantTrack: {
        const auto pilots = PilotSequence::qpsk(g.horizon, seed);
        const ComplexMatrix y = received_signal(channel, pilots, sigma_w2, noise_seed);
        const auto names = detail::instant_metric_names(g.horizon);
        for (Variant v : config.variants) {
            CoeffProvider provider;
            if (v == Variant::Genie) {
                provider = [&](const ObservationSet&) {
                    return std::vector<double>(ar.coeffs().begin(), ar.coeffs().end());
                };
            } else {
                provider = [&, v](const ObservationSet& prefix) {
                    return detail::estimate_variant(v, prefix, p, sigma_x2, sigma_w2).real_coeffs();
                };
            }
            try {
                const auto result = track_instantaneous(y, pilots, provider, p + 2, detail::coeff_source(v), sigma_x2,
                                                        sigma_w2, &channel.matrix);
                const auto& per = result.per_instant_nmse;
                for (std::size_t t = 0; t < g.horizon; ++t) {
                    sink.add(v, t, names[t], per[t]);
                }
                const double mean = std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
                sink.add(v, g.horizon, names[g.horizon], mean);
                sink.add(v, g.horizon + 1, names[g.horizon + 1], result.min_eig_ratio);
            } catch (const Error&) {
                for (std::size_t i = 0; i < names.size(); ++i) {
                    sink.add(v, i, names[i], 0.0, true);
                }
            }
        }
        break;
    }
    }
    return records;
}

/// Runs every (grid point, trial) pair on `threads` workers. The returned records are
/// sorted by (grid point, trial, variant, metric), independent of scheduling.
inline std::vector<TrialRecord> run_records(const ExperimentConfig& config, unsigned threads = 1) {
    config.validate();
    const std::size_t n_items = config.grid.size() * config.trials;
    std::vector<std::vector<TrialRecord>> slots(n_items);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < n_items; i = next++) {
            try {
                slots[i] = run_trial(config, i / config.trials, i % config.trials);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    threads = std::max(1U, threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }

    std::vector<TrialRecord> records;
    for (auto& s : slots) {
        records.insert(records.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    std::stable_sort(records.begin(), records.end(), [&](const TrialRecord& a, const TrialRecord& b) {
        const auto key = [&](const TrialRecord& r) {
            return std::tuple(r.grid_index, r.trial, detail::variant_rank(config, r.variant), r.metric_index);
        };
        return key(a) < key(b);
    });
    return records;
}

struct AggregateRow {
    ExperimentKind experiment = ExperimentKind::Custom;
    std::size_t grid_index = 0;
    GridPoint point;
    Variant variant = Variant::Genie;
    std::string metric;
    std::size_t metric_index = 0;
    double mean = 0.0;
    double median = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    std::size_t n_trials = 0;
    std::size_t n_failed = 0;
};

/// Linear interpolation between order statistics; `sorted` must be ascending.
inline double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Summary statistics over the non-failed trials of each (grid point, variant, metric).
inline std::vector<AggregateRow> aggregate(const ExperimentConfig& config, const std::vector<TrialRecord>& records) {
    using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
    std::map<Key, std::pair<AggregateRow, std::vector<double>>> groups;
    for (const auto& r : records) {
        const Key key{r.grid_index, detail::variant_rank(config, r.variant), r.metric_index};
        auto& [row, values] = groups[key];
        if (row.n_trials == 0) {
            row.experiment = r.experiment;
            row.grid_index = r.grid_index;
            row.point = r.point;
            row.variant = r.variant;
            row.metric = r.metric;
            row.metric_index = r.metric_index;
        }
        ++row.n_trials;
        if (r.failed || std::isnan(r.value)) {
            ++row.n_failed;
        } else {
            values.push_back(r.value);
        }
    }
    std::vector<AggregateRow> out;
    out.reserve(groups.size());
    for (auto& [key, entry] : groups) {
        auto& [row, values] = entry;
        std::sort(values.begin(), values.end());
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.mean = values.empty() ? nan : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        row.median = quantile(values, 0.5);
        row.q10 = quantile(values, 0.1);
        row.q90 = quantile(values, 0.9);
        out.push_back(std::move(row));
    }
    return out;
}

inline constexpr const char* kTrialCsvHeader = "experiment,n_rx,horizon,snr_db,trial,variant,metric,value,failed";
inline constexpr const char* kAggregateCsvHeader =
    "experiment,n_rx,horizon,snr_db,variant,metric,mean,median,q10,q90,n_trials,n_failed";

/// Nine significant digits.
inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void write_trial_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
    os << kTrialCsvHeader << '\n';
    for (const auto& r : records) {
        os << to_string(r.experiment) << ',' << r.point.n_rx << ',' << r.point.horizon << ','
           << format_number(r.point.snr_db) << ',' << r.trial << ',' << to_string(r.variant) << ',' << r.metric << ','
           << format_number(r.value) << ',' << (r.failed ? 1 : 0) << '\n';
    }
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
    os << kAggregateCsvHeader << '\n';
    for (const auto& r : rows) {
        os << to_string(r.experiment) << ',' << r.point.n_rx << ',' << r.point.horizon << ','
           << format_number(r.point.snr_db) << ',' << to_string(r.variant) << ',' << r.metric << ','
           << format_number(r.mean) << ',' << format_number(r.median) << ',' << format_number(r.q10) << ','
           << format_number(r.q90) << ',' << r.n_trials << ',' << r.n_failed << '\n';
    }
}

/// results/fig1.csv -> results/fig1_aggregate.csv
inline std::string aggregate_path(const std::string& trial_path) {
    std::filesystem::path p(trial_path);
    const std::string stem = p.stem().string();
    const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
    return (p.parent_path() / (stem + "_aggregate" + ext)).string();
}

namespace detail {

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
    const std::filesystem::path fp(path);
    if (fp.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(fp.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + fp.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    writer(os);
    os.flush();
    if (!os) {
        throw IoError("failed writing " + path);
    }
}

} // namespace detail

/// Headline metric of a protocol: the one the summary table shows.
inline std::string headline_metric(const ExperimentConfig& config, const GridPoint& g) {
    return config.protocol == Protocol::InstantTrack ? "nmse_t" + std::to_string(g.horizon) : "nmse";
}

inline void print_summary(std::ostream& os, const ExperimentConfig& config, const std::vector<AggregateRow>& rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %5s %7s %7s  %-18s %-10s %12s %12s %7s\n", "exp", "n_rx", "horizon",
                  "snr_db", "variant", "metric", "mean", "median", "failed");
    os << line;
    for (const auto& r : rows) {
        if (r.metric != headline_metric(config, r.point)) {
            continue;
        }
        std::snprintf(line, sizeof line, "%-8s %5zu %7zu %7.1f  %-18s %-10s %12.4e %12.4e %3zu/%-3zu\n",
                      to_string(r.experiment), r.point.n_rx, r.point.horizon, r.point.snr_db, to_string(r.variant),
                      r.metric.c_str(), r.mean, r.median, r.n_failed, r.n_trials);
        os << line;
    }
}

struct ExperimentResult {
    std::vector<TrialRecord> records;
    std::vector<AggregateRow> aggregates;
};

/// Runs the experiment, writes the trial and aggregate CSVs when an output path is
/// set, and prints the summary table to `summary`.
inline ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads, std::ostream* summary = nullptr) {
    ExperimentResult result;
    result.records = run_records(config, threads);
    result.aggregates = aggregate(config, result.records);
    if (!config.output_path.empty()) {
        detail::write_file(config.output_path, [&](std::ostream& os) { write_trial_csv(os, result.records); });
        detail::write_file(aggregate_path(config.output_path),
                           [&](std::ostream& os) { write_aggregate_csv(os, result.aggregates); });
    }
    if (summary) {
        print_summary(*summary, config, result.aggregates);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Config files: one `key = value` per line, `#` starts a comment.
//
//   experiment          fig1 | fig2 | fig3 | fig4 | custom (required, first applied)
//   protocol            coeff_nmse | track | instant_track (required for custom)
//   coeffs              comma-separated real AR coefficients, e.g. 1.8, -0.9
//   innovation_variance positive real
//   grid                comma-separated NxT@snr_db points, e.g. 64x64@0, 32x32@-5
//   trials              positive integer
//   seed                unsigned 64-bit integer
//   variants            comma-separated: genie, proposed-biased, proposed-unbiased,
//                       time-based, time-based-biased
//   output              trial-level CSV path
//   snr_reference       innovation | channel_power
//
// Presets supply defaults that the remaining keys override.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + s + "' is not a number");
    }
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    try {
        if (s.empty() || s[0] == '-') {
            throw std::invalid_argument(s);
        }
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + s + "' is not an unsigned integer");
    }
}

inline GridPoint parse_grid_point(const std::string& s) {
    const auto x = s.find('x');
    const auto at = s.find('@');
    if (x == std::string::npos || at == std::string::npos || at < x) {
        throw ConfigError("grid point '" + s + "' is not of the form NxT@snr_db");
    }
    GridPoint g;
    g.n_rx = parse_u64(trim(s.substr(0, x)), "grid");
    g.horizon = parse_u64(trim(s.substr(x + 1, at - x - 1)), "grid");
    g.snr_db = parse_double(trim(s.substr(at + 1)), "grid");
    return g;
}

} // namespace detail

inline ExperimentConfig parse_config(std::istream& is) {
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        static const std::vector<std::string> known{"experiment", "protocol", "coeffs",  "innovation_variance",
                                                    "grid",       "trials",   "seed",    "variants",
                                                    "output",     "snr_reference"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (!entries.emplace(key, value).second) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }

    const auto exp_it = entries.find("experiment");
    if (exp_it == entries.end()) {
        throw ConfigError("missing required key 'experiment'");
    }
    const auto kind = parse_experiment_kind(exp_it->second);
    if (!kind) {
        throw ConfigError("unknown experiment '" + exp_it->second + "'");
    }
    ExperimentConfig c;
    if (*kind == ExperimentKind::Custom) {
        if (!entries.count("protocol")) {
            throw ConfigError("custom experiments need a 'protocol' key");
        }
        c.experiment = ExperimentKind::Custom;
    } else {
        c = preset(*kind);
    }

    std::optional<std::vector<double>> coeffs;
    std::optional<double> variance;
    for (const auto& [key, value] : entries) {
        if (key == "experiment") {
            continue;
        } else if (key == "protocol") {
            const auto p = parse_protocol(value);
            if (!p) {
                throw ConfigError("unknown protocol '" + value + "'");
            }
            c.protocol = *p;
        } else if (key == "coeffs") {
            coeffs.emplace();
            for (const auto& item : detail::split_list(value)) {
                coeffs->push_back(detail::parse_double(item, key));
            }
        } else if (key == "innovation_variance") {
            variance = detail::parse_double(value, key);
        } else if (key == "grid") {
            c.grid.clear();
            for (const auto& item : detail::split_list(value)) {
                c.grid.push_back(detail::parse_grid_point(item));
            }
        } else if (key == "trials") {
            c.trials = detail::parse_u64(value, key);
        } else if (key == "seed") {
            c.master_seed = detail::parse_u64(value, key);
        } else if (key == "variants") {
            c.variants.clear();
            for (const auto& item : detail::split_list(value)) {
                const auto v = parse_variant(item);
                if (!v) {
                    throw ConfigError("unknown variant '" + item + "'");
                }
                c.variants.push_back(*v);
            }
        } else if (key == "output") {
            c.output_path = value;
        } else if (key == "snr_reference") {
            const auto r = parse_snr_reference(value);
            if (!r) {
                throw ConfigError("unknown snr_reference '" + value + "'");
            }
            c.snr_reference = *r;
        }
    }
    if (coeffs || variance) {
        try {
            c.ar = ARParams(coeffs.value_or(std::vector<double>(c.ar.coeffs().begin(), c.ar.coeffs().end())),
                            variance.value_or(c.ar.innovation_variance()));
        } catch (const Error& e) {
            throw ConfigError(std::string("invalid AR model: ") + e.what());
        }
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config file " + path);
    }
    return parse_config(is);
}

} // namespace arfade
