#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "bfs/errors.hpp"
#include "bfs/io.hpp"
#include "bfs/lcf.hpp"
#include "bfs/network.hpp"
#include "bfs/parallel.hpp"
#include "bfs/resample.hpp"
#include "bfs/rng.hpp"
#include "bfs/spectrum.hpp"

namespace bfs {

inline double rmse(const std::vector<double>& predicted, const std::vector<double>& truth) {
    if (predicted.empty() || predicted.size() != truth.size())
        throw domain_error("RMSE needs two equal-length, non-empty lists");
    double ss = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - truth[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(predicted.size()));
}

// Random test ensembles: linewidth and peak position drawn uniformly, one
// noise realization per member, all reproducible from the seed.
struct EnsembleSpec {
    int count = 2000;
    double linewidth_min_mhz = 10.0;
    double linewidth_max_mhz = 60.0;
    double edge_margin_low_mhz = 15.6;   // keep peaks inside the usable window
    double edge_margin_high_mhz = 15.4;
    std::uint64_t seed = 7;
};

struct RmseCurve {
    std::vector<double> abscissa;
    std::vector<double> rmse_fnn_mhz;
    std::vector<double> rmse_lcf_mhz;
    int ensemble_size = 0;
};

namespace detail {

struct DrawnSpectrum {
    Spectrum noisy;
    double truth_bfs_mhz = 0.0;
};

inline DrawnSpectrum draw_member(const EnsembleSpec& ens, const FrequencyGrid& grid,
                                 double snr_db, std::size_t abscissa_idx, std::size_t member_idx) {
    std::mt19937_64 eng(mix_seed(ens.seed, abscissa_idx, member_idx));
    const double span = grid.span();
    LorentzianParams p;
    p.gain = 1.0;
    p.linewidth_mhz = ens.linewidth_min_mhz +
                      uniform01(eng) * (ens.linewidth_max_mhz - ens.linewidth_min_mhz);
    p.bfs_mhz = ens.edge_margin_low_mhz +
                uniform01(eng) * (span - ens.edge_margin_low_mhz - ens.edge_margin_high_mhz);

    DrawnSpectrum d;
    d.truth_bfs_mhz = p.bfs_mhz;
    d.noisy = add_noise(synth_spectrum(p, grid),
                        NoiseSpec{snr_db, mix_seed(ens.seed, abscissa_idx, member_idx, 0xA0, 0)});
    return d;
}

// Same fixed-linewidth variant for the linewidth sweep.
inline DrawnSpectrum draw_member_fixed_lw(const EnsembleSpec& ens, const FrequencyGrid& grid,
                                          double linewidth_mhz, double snr_db,
                                          std::size_t abscissa_idx, std::size_t member_idx) {
    std::mt19937_64 eng(mix_seed(ens.seed, abscissa_idx, member_idx));
    const double span = grid.span();
    LorentzianParams p;
    p.gain = 1.0;
    p.linewidth_mhz = linewidth_mhz;
    p.bfs_mhz = ens.edge_margin_low_mhz +
                uniform01(eng) * (span - ens.edge_margin_low_mhz - ens.edge_margin_high_mhz);

    DrawnSpectrum d;
    d.truth_bfs_mhz = p.bfs_mhz;
    d.noisy = add_noise(synth_spectrum(p, grid),
                        NoiseSpec{snr_db, mix_seed(ens.seed, abscissa_idx, member_idx, 0xA0, 0)});
    return d;
}

template <typename DrawFn>
void run_point(const Network& net, const FitConfig& fit_cfg, int count, int workers,
               DrawFn&& draw, double* rmse_fnn, double* rmse_lcf) {
    std::vector<double> pred_fnn(static_cast<std::size_t>(count));
    std::vector<double> pred_lcf(static_cast<std::size_t>(count));
    std::vector<double> truth(static_cast<std::size_t>(count));

    parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const DrawnSpectrum d = draw(i);
            const Spectrum ready = prepare_input(d.noisy);
            truth[i] = d.truth_bfs_mhz;
            pred_fnn[i] = predict_bfs(net, ready);
            pred_lcf[i] = fit_bfs(ready, fit_cfg);
        }
    });

    *rmse_fnn = rmse(pred_fnn, truth);
    *rmse_lcf = rmse(pred_lcf, truth);
}

} // namespace detail

inline RmseCurve rmse_vs_snr(const Network& net, const FitConfig& fit_cfg = {},
                             const EnsembleSpec& ens = {}, double snr_min_db = 16.0,
                             double snr_max_db = 46.0, double snr_step_db = 1.0, int workers = 1) {
    RmseCurve curve;
    curve.ensemble_size = ens.count;
    const FrequencyGrid grid{0.0, 1.0, kTrainedWindowPoints};
    std::size_t ai = 0;
    for (double snr = snr_min_db; snr <= snr_max_db + 1e-9; snr += snr_step_db, ++ai) {
        double rf = 0.0, rl = 0.0;
        detail::run_point(net, fit_cfg, ens.count, workers,
                          [&](std::size_t i) { return detail::draw_member(ens, grid, snr, ai, i); },
                          &rf, &rl);
        curve.abscissa.push_back(snr);
        curve.rmse_fnn_mhz.push_back(rf);
        curve.rmse_lcf_mhz.push_back(rl);
    }
    return curve;
}

inline RmseCurve rmse_vs_linewidth(const Network& net, const FitConfig& fit_cfg = {},
                                   const EnsembleSpec& ens = {}, double lw_min_mhz = 10.0,
                                   double lw_max_mhz = 60.0, double lw_step_mhz = 1.0,
                                   double snr_db = 16.0, int workers = 1) {
    RmseCurve curve;
    curve.ensemble_size = ens.count;
    const FrequencyGrid grid{0.0, 1.0, kTrainedWindowPoints};
    std::size_t ai = 0;
    for (double lw = lw_min_mhz; lw <= lw_max_mhz + 1e-9; lw += lw_step_mhz, ++ai) {
        double rf = 0.0, rl = 0.0;
        detail::run_point(net, fit_cfg, ens.count, workers,
                          [&](std::size_t i) {
                              return detail::draw_member_fixed_lw(ens, grid, lw, snr_db, ai, i);
                          },
                          &rf, &rl);
        curve.abscissa.push_back(lw);
        curve.rmse_fnn_mhz.push_back(rf);
        curve.rmse_lcf_mhz.push_back(rl);
    }
    return curve;
}

inline RmseCurve rmse_vs_step(const Network& net, const FitConfig& fit_cfg = {},
                              const EnsembleSpec& ens = {}, double snr_db = 16.0, int workers = 1) {
    RmseCurve curve;
    curve.ensemble_size = ens.count;
    for (int step = 1; step <= 10; ++step) {
        const double range = min_scan_range(step);
        const FrequencyGrid grid{0.0, static_cast<double>(step),
                                 static_cast<int>(std::llround(range)) / step + 1};
        double rf = 0.0, rl = 0.0;
        detail::run_point(net, fit_cfg, ens.count, workers,
                          [&](std::size_t i) {
                              return detail::draw_member(ens, grid, snr_db,
                                                         static_cast<std::size_t>(step), i);
                          },
                          &rf, &rl);
        curve.abscissa.push_back(step);
        curve.rmse_fnn_mhz.push_back(rf);
        curve.rmse_lcf_mhz.push_back(rl);
    }
    return curve;
}

inline void save_rmse_curve_csv(const RmseCurve& curve, const std::string& path,
                                const std::string& abscissa_label) {
    auto out = open_output(path, std::ios::out);
    out << "# ensemble_size=" << curve.ensemble_size << "\n";
    out << abscissa_label << ",rmse_fnn_mhz,rmse_lcf_mhz\n";
    char buf[128];
    for (std::size_t i = 0; i < curve.abscissa.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", curve.abscissa[i],
                      curve.rmse_fnn_mhz[i], curve.rmse_lcf_mhz[i]);
        out << buf;
    }
    if (!out) throw data_error("failed writing RMSE curve: " + path);
}

// Wall-clock comparison of the two retrieval paths over a fixed corpus per
// scanning step. The corpus is hashed before each timed pass so the "both
// methods see identical bits" guarantee is checked, not assumed.
struct TimingReport {
    std::vector<int> steps;
    std::vector<double> seconds_lcf_1t;
    std::vector<double> seconds_lcf_mt;
    std::vector<double> seconds_fnn_1t;
    std::vector<double> ratio_lcf1_fnn1;
    std::vector<double> ratio_lcfmt_fnn1;
    std::vector<std::uint64_t> corpus_hash;
    std::vector<int> corpus_scale;   // >1 when the corpus was enlarged to beat timer resolution
    int n_spectra = 0;
    int worker_count = 0;
    std::string machine;
};

namespace detail {

inline std::uint64_t hash_corpus(const std::vector<Spectrum>& corpus) {
    Fnv1a h;
    for (const auto& s : corpus) {
        h.update_f64(s.grid.start_mhz);
        h.update_f64(s.grid.step_mhz);
        h.update_u64(static_cast<std::uint64_t>(s.grid.count));
        h.update_f64s(s.gains.data(), s.gains.size());
    }
    return h.digest();
}

} // namespace detail

inline TimingReport timing_ratios(const Network& net, const FitConfig& fit_cfg = {},
                                  int n_spectra = 10000, int workers = 16,
                                  const EnsembleSpec& base_ens = {}, double snr_db = 16.0) {
    using clock = std::chrono::steady_clock;
    TimingReport rep;
    rep.n_spectra = n_spectra;
    rep.worker_count = workers;
    rep.machine = "hw_threads=" + std::to_string(std::thread::hardware_concurrency()) +
                  " compiler=" + std::string(__VERSION__);

    for (int step = 1; step <= 10; ++step) {
        const double range = min_scan_range(step);
        const FrequencyGrid grid{0.0, static_cast<double>(step),
                                 static_cast<int>(std::llround(range)) / step + 1};

        int scale = 1;
        double t_lcf1 = 0.0, t_lcfmt = 0.0, t_fnn1 = 0.0;
        std::uint64_t corpus_hash = 0;
        for (;;) {
            const std::size_t n = static_cast<std::size_t>(n_spectra) * static_cast<std::size_t>(scale);
            std::vector<Spectrum> corpus(n);
            std::vector<double> sink_lcf(n), sink_fnn(n);
            for (std::size_t i = 0; i < n; ++i)
                corpus[i] = detail::draw_member(base_ens, grid, snr_db,
                                                static_cast<std::size_t>(step), i % static_cast<std::size_t>(n_spectra))
                                .noisy;

            // Warm-up outside the timed sections.
            (void)fit_bfs(prepare_input(corpus[0]), fit_cfg);
            (void)predict_bfs(net, prepare_input(corpus[0]));

            corpus_hash = detail::hash_corpus(corpus);
            auto t0 = clock::now();
            for (std::size_t i = 0; i < n; ++i) sink_lcf[i] = fit_bfs(prepare_input(corpus[i]), fit_cfg);
            t_lcf1 = std::chrono::duration<double>(clock::now() - t0).count();

            if (detail::hash_corpus(corpus) != corpus_hash)
                throw error("timing corpus changed between passes");
            t0 = clock::now();
            parallel_for(n, workers, [&](std::size_t i0, std::size_t i1) {
                for (std::size_t i = i0; i < i1; ++i) sink_lcf[i] = fit_bfs(prepare_input(corpus[i]), fit_cfg);
            });
            t_lcfmt = std::chrono::duration<double>(clock::now() - t0).count();

            if (detail::hash_corpus(corpus) != corpus_hash)
                throw error("timing corpus changed between passes");
            t0 = clock::now();
            for (std::size_t i = 0; i < n; ++i) sink_fnn[i] = predict_bfs(net, prepare_input(corpus[i]));
            t_fnn1 = std::chrono::duration<double>(clock::now() - t0).count();

            // Guard against a timer-resolution-limited measurement.
            if ((t_lcf1 > 0.02 && t_lcfmt > 0.02 && t_fnn1 > 0.02) || scale >= 64) break;
            scale *= 2;
        }

        rep.steps.push_back(step);
        rep.seconds_lcf_1t.push_back(t_lcf1);
        rep.seconds_lcf_mt.push_back(t_lcfmt);
        rep.seconds_fnn_1t.push_back(t_fnn1);
        rep.ratio_lcf1_fnn1.push_back(t_lcf1 / t_fnn1);
        rep.ratio_lcfmt_fnn1.push_back(t_lcfmt / t_fnn1);
        rep.corpus_hash.push_back(corpus_hash);
        rep.corpus_scale.push_back(scale);
    }
    return rep;
}

inline void save_timing_report_csv(const TimingReport& rep, const std::string& path) {
    auto out = open_output(path, std::ios::out);
    out << "# n_spectra=" << rep.n_spectra << " workers=" << rep.worker_count
        << " machine=" << rep.machine << "\n";
    out << "step_mhz,seconds_lcf_1t,seconds_lcf_" << rep.worker_count
        << "t,seconds_fnn_1t,ratio_lcf1_fnn1,ratio_lcf" << rep.worker_count
        << "_fnn1,corpus_hash,corpus_scale\n";
    char buf[256];
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.3f,%.3f,%s,%d\n", rep.steps[i],
                      rep.seconds_lcf_1t[i], rep.seconds_lcf_mt[i], rep.seconds_fnn_1t[i],
                      rep.ratio_lcf1_fnn1[i], rep.ratio_lcfmt_fnn1[i],
                      hash_to_hex(rep.corpus_hash[i]).c_str(), rep.corpus_scale[i]);
        out << buf;
    }
    if (!out) throw data_error("failed writing timing report: " + path);
}

} // namespace bfs
