#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bfs/bfs.hpp"

namespace bfscli {

// Exit classes: 0 success, 2 usage/config, 3 data, 4 numerical.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

namespace detail {

inline std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += fmt_f64(v[i]);
    }
    return s;
}

// Accepts "a,b,c" or "start:end:step" numeric lists.
inline std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        double start = 0, end = 0, step = 1;
        if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &end, &step) != 3 || !(step > 0))
            throw bfs::config_error("cannot parse range '" + text + "' (want start:end:step)");
        for (double v = start; v <= end + 1e-9; v += step) out.push_back(v);
    } else {
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t comma = text.find(',', pos);
            if (comma == std::string::npos) comma = text.size();
            out.push_back(std::stod(text.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    if (out.empty()) throw bfs::config_error("empty numeric list '" + text + "'");
    return out;
}

inline std::vector<int> parse_layout(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_double_list(text)) out.push_back(static_cast<int>(std::llround(v)));
    return out;
}

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Every artifact-producing run records the fully resolved invocation plus
// input/output content hashes, so a run can be replayed and checked.
class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> resolved_args)
        : command_(std::move(command)), args_(std::move(resolved_args)) {}

    void add_input(const std::string& path) { inputs_[path] = bfs::hash_to_hex(bfs::hash_file(path)); }
    void add_output(const std::string& path) { outputs_[path] = bfs::hash_to_hex(bfs::hash_file(path)); }

    void write(const std::string& path) const {
        nlohmann::json j;
        j["tool"] = "bfskit";
        j["version"] = bfs::kVersion;
        j["command"] = command_;
        j["resolved_args"] = args_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["machine"]["hw_threads"] = std::thread::hardware_concurrency();
        j["timestamp_utc"] = iso_timestamp();
        auto out = bfs::open_output(path, std::ios::out);
        out << j.dump(2) << "\n";
        if (!out) throw bfs::data_error("failed writing manifest: " + path);
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
};

inline std::string default_manifest_path(const std::string& out_path) {
    return out_path + ".manifest.json";
}

inline bfs::KmRange parse_km_range(const std::string& text) {
    double a = 0, b = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf", &a, &b) != 2 || !(b > a))
        throw bfs::config_error("cannot parse km range '" + text + "' (want start:end)");
    return {a, b};
}

} // namespace detail

// ---------------------------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"BGS -> BFS retrieval toolkit: synthetic Brillouin gain spectra, "
                 "feedforward-network and Lorentzian-fit frequency retrieval, "
                 "resampling, trace simulation and benchmarks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read defaults from a TOML-like key=value file");

    int workers = 1;
    app.add_option("--workers", workers, "Worker threads for parallel sections")->capture_default_str();

    // --- gen-data -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Generate a training or test corpus");
    struct {
        double scan_range = 156.0, step = 1.0;
        std::string snrs = "16,26,36", linewidths = "10:60:1", offsets;
        int realizations = 20;
        std::uint64_t seed = 1;
        bool paper_defaults = false, desk_defaults = false, noiseless = false, test_set = false;
        std::string out, manifest;
    } g;
    gen->add_flag("--paper-defaults", g.paper_defaults, "Full-scale corpus (385,560 columns)");
    gen->add_flag("--desk-defaults", g.desk_defaults, "Reduced corpus (4,284 columns)");
    gen->add_option("--scan-range", g.scan_range, "Scan range in MHz")->capture_default_str();
    gen->add_option("--step", g.step, "Scan step in MHz")->capture_default_str();
    gen->add_option("--snrs", g.snrs, "SNR list in dB (comma or start:end:step)")->capture_default_str();
    gen->add_option("--linewidths", g.linewidths, "Linewidth list in MHz")->capture_default_str();
    gen->add_option("--offsets", g.offsets, "Peak offset list in MHz (default 15.6:140.6:1)");
    gen->add_option("--realizations", g.realizations, "Noise realizations per SNR")->capture_default_str();
    gen->add_option("--seed", g.seed, "Base seed")->capture_default_str();
    gen->add_flag("--noiseless", g.noiseless, "Skip noise injection (ideal spectra)");
    gen->add_flag("--test-set", g.test_set, "Generate the disjoint-seed test corpus (16 dB only)");
    gen->add_option("--out", g.out, "Output dataset file")->required();
    gen->add_option("--manifest", g.manifest, "Manifest path (default <out>.manifest.json)");

    // --- train ------------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Train the feedforward network");
    struct {
        std::string data, test, algo = "lm", layout = "157,40,15,1", out, log, manifest;
        int iters = 30, patience = 5;
        double eta = 0.01;
        std::uint64_t seed = 1;
        bool no_bias = false;
    } t;
    tr->add_option("--data", t.data, "Training dataset (.bgsd)")->required();
    tr->add_option("--test", t.test, "Test dataset (.bgsd)")->required();
    tr->add_option("--algo", t.algo, "lm or sd")->capture_default_str();
    tr->add_option("--layout", t.layout, "Layer widths, e.g. 157,40,15,1")->capture_default_str();
    tr->add_option("--iters", t.iters, "Max iterations")->capture_default_str();
    tr->add_option("--eta", t.eta, "Steepest-descent learning rate")->capture_default_str();
    tr->add_option("--patience", t.patience, "Early-stop patience on test MSE (0 disables)")->capture_default_str();
    tr->add_option("--seed", t.seed, "Weight-init seed")->capture_default_str();
    tr->add_flag("--no-bias", t.no_bias, "Paper-exact mode without bias terms");
    tr->add_option("--out", t.out, "Output model file")->required();
    tr->add_option("--log", t.log, "Per-iteration CSV log");
    tr->add_option("--manifest", t.manifest, "Manifest path (default <out>.manifest.json)");

    // --- eval -------------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset");
    struct {
        std::string model, data, out;
    } e;
    ev->add_option("--model", e.model, "Model file")->required();
    ev->add_option("--data", e.data, "Dataset file")->required();
    ev->add_option("--out", e.out, "Optional CSV output");

    // --- fit --------------------------------------------------------------------
    auto* ft = app.add_subcommand("fit", "Lorentzian curve fit of one spectrum");
    struct {
        std::string in, report, manifest;
        int max_iters = 200;
        double tol = 1e-10;
        bool offset = false;
    } f;
    ft->add_option("--in", f.in, "Spectrum CSV")->required();
    ft->add_option("--report", f.report, "Fit report CSV");
    ft->add_option("--max-iters", f.max_iters, "Iteration cap")->capture_default_str();
    ft->add_option("--tol", f.tol, "Relative R^2 improvement tolerance")->capture_default_str();
    ft->add_flag("--offset", f.offset, "Fit an extra constant baseline term");
    ft->add_option("--manifest", f.manifest, "Manifest path");

    // --- resample -----------------------------------------------------------------
    auto* rs = app.add_subcommand("resample", "Interpolate a coarse scan onto the 1 MHz grid");
    struct {
        std::string in, out, manifest;
        int step = 0;
        bool window = false;
    } r;
    rs->add_option("--in", r.in, "Spectrum CSV")->required();
    rs->add_option("--step", r.step, "Expected scanning step of the input (MHz)")->required();
    rs->add_flag("--window", r.window, "Also cut the peak-centered 157-point window");
    rs->add_option("--out", r.out, "Output CSV")->required();
    rs->add_option("--manifest", r.manifest, "Manifest path");

    // --- simulate-trace -------------------------------------------------------------
    auto* st = app.add_subcommand("simulate-trace", "Simulate a position-resolved acquisition");
    struct {
        std::string profile, out, manifest;
        int step = 1;
        double range = 0.0;  // 0 = minimum for the step
        bool heated = false;
        std::uint64_t seed = 1;
    } s;
    st->add_option("--profile", s.profile, "Fiber profile (TOML-like)")->required();
    st->add_option("--step", s.step, "Scanning step in MHz")->capture_default_str();
    st->add_option("--range", s.range, "Scanning range in MHz (default: minimum for the step)");
    st->add_flag("--heated", s.heated, "Apply the profile's heated segments");
    st->add_option("--seed", s.seed, "Noise seed")->capture_default_str();
    st->add_option("--out", s.out, "Output trace file")->required();
    st->add_option("--manifest", s.manifest, "Manifest path");

    // --- analyze -------------------------------------------------------------------
    auto* an = app.add_subcommand("analyze", "Retrieve BFS profiles from a trace pair and report");
    struct {
        std::string before, after, model, profile, report, region, manifest;
    } a;
    an->add_option("--trace-before", a.before, "Trace before heating")->required();
    an->add_option("--trace-after", a.after, "Trace after heating")->required();
    an->add_option("--model", a.model, "FNN model file")->required();
    an->add_option("--profile", a.profile, "Fiber profile (for heated segments and C_T)")->required();
    an->add_option("--region", a.region, "Unheated km range for the uncertainty, e.g. 1:20")->required();
    an->add_option("--report", a.report, "Report output directory")->required();
    an->add_option("--manifest", a.manifest, "Manifest path");

    // --- bench ---------------------------------------------------------------------
    auto* be = app.add_subcommand("bench", "Accuracy and timing comparisons");
    be->require_subcommand(1);
    struct {
        std::string model, out, manifest;
        int count = 2000, n_timing = 10000, timing_workers = 16;
        double snr = 16.0;
        std::uint64_t seed = 7;
    } b;
    auto add_bench_common = [&](CLI::App* sub, bool timing) {
        sub->add_option("--model", b.model, "FNN model file")->required();
        sub->add_option("--out", b.out, "Output CSV")->required();
        sub->add_option("--seed", b.seed, "Ensemble seed")->capture_default_str();
        sub->add_option("--manifest", b.manifest, "Manifest path");
        if (timing) {
            sub->add_option("--n", b.n_timing, "Spectra per step")->capture_default_str();
            sub->add_option("--timing-workers", b.timing_workers, "Worker count for the multi-thread pass")
                ->capture_default_str();
        } else {
            sub->add_option("--count", b.count, "Ensemble size per point")->capture_default_str();
            sub->add_option("--snr", b.snr, "SNR in dB (linewidth/step sweeps)")->capture_default_str();
        }
    };
    auto* be_snr = be->add_subcommand("rmse-snr", "RMSE vs SNR, both methods");
    auto* be_lw = be->add_subcommand("rmse-linewidth", "RMSE vs linewidth, both methods");
    auto* be_step = be->add_subcommand("rmse-step", "RMSE vs scanning step, both methods");
    auto* be_tim = be->add_subcommand("timing", "LCF/FNN wall-clock ratios per step");
    add_bench_common(be_snr, false);
    add_bench_common(be_lw, false);
    add_bench_common(be_step, false);
    add_bench_common(be_tim, true);

    // --- infer ---------------------------------------------------------------------
    auto* in = app.add_subcommand("infer", "Retrieve the BFS of one spectrum with a trained model");
    struct {
        std::string model, in_csv, manifest;
    } i;
    in->add_option("--model", i.model, "Model file")->required();
    in->add_option("--in", i.in_csv, "Spectrum CSV")->required();
    in->add_option("--manifest", i.manifest, "Optional manifest path");

    // ---------------------------------------------------------------------------

    std::vector<const char*> argv;
    argv.push_back("bfskit");
    for (const auto& s2 : args) argv.push_back(s2.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& ex) {
        std::puts(app.help().c_str());
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        std::fprintf(stderr, "usage error: %s\nRun 'bfskit --help' for usage.\n", ex.what());
        return kExitUsage;
    }

    try {
        if (*gen) {
            bfs::GridSpec spec;
            if (g.paper_defaults) {
                spec = bfs::GridSpec::paper_defaults(g.seed);
            } else if (g.desk_defaults) {
                spec = bfs::GridSpec::desk_defaults(g.seed);
            } else {
                spec.scan_range_mhz = g.scan_range;
                spec.step_mhz = g.step;
                spec.base_seed = g.seed;
                spec.realizations_per_snr = g.realizations;
                spec.linewidths_mhz = detail::parse_double_list(g.linewidths);
                const std::string offsets = g.offsets.empty() ? "15.6:140.6:1" : g.offsets;
                for (double o : detail::parse_double_list(offsets))
                    spec.bfs_fractions.push_back(o / spec.scan_range_mhz);
                spec.snrs_db = detail::parse_double_list(g.snrs);
            }
            spec.noiseless = g.noiseless;

            const bfs::Dataset d = g.test_set ? bfs::generate_test_set(spec, workers)
                                              : bfs::generate_training_set(spec, workers);
            bfs::save_dataset(d, g.out);
            std::printf("wrote %s: %d x %zu, hash %s\n", g.out.c_str(), d.meta.grid_count(),
                        d.columns(), bfs::hash_to_hex(d.content_hash()).c_str());

            std::vector<std::string> resolved = {"gen-data",
                                                 "--scan-range", detail::fmt_f64(spec.scan_range_mhz),
                                                 "--step", detail::fmt_f64(spec.step_mhz),
                                                 "--snrs", detail::fmt_list(g.test_set ? std::vector<double>{16.0} : spec.snrs_db),
                                                 "--linewidths", detail::fmt_list(spec.linewidths_mhz),
                                                 "--offsets", detail::fmt_list([&] {
                                                     std::vector<double> o;
                                                     for (double fr : spec.bfs_fractions) o.push_back(fr * spec.scan_range_mhz);
                                                     return o;
                                                 }()),
                                                 "--realizations", std::to_string(spec.realizations_per_snr),
                                                 "--seed", std::to_string(spec.base_seed),
                                                 "--out", g.out};
            if (spec.noiseless) resolved.push_back("--noiseless");
            if (g.test_set) resolved.push_back("--test-set");
            detail::Manifest m("gen-data", resolved);
            m.add_output(g.out);
            m.write(g.manifest.empty() ? detail::default_manifest_path(g.out) : g.manifest);
            return kExitOk;
        }

        if (*tr) {
            const bfs::Dataset train = bfs::load_dataset(t.data);
            const bfs::Dataset test = bfs::load_dataset(t.test);

            bfs::NetworkLayout layout{detail::parse_layout(t.layout)};
            bfs::Network net = bfs::init_network(layout, t.seed, !t.no_bias);
            net.scan_range_mhz = train.meta.scan_range_mhz;
            net.train_step_mhz = train.meta.step_mhz;
            {
                bfs::Fnv1a h;
                h.update_u64(train.content_hash());
                h.update_u64(test.content_hash());
                h.update_u64(t.seed);
                net.provenance_hash = h.digest();
            }

            bfs::TrainConfig cfg;
            cfg.algorithm = (t.algo == "sd") ? bfs::TrainAlgorithm::steepest_descent
                                             : bfs::TrainAlgorithm::levenberg_marquardt;
            if (t.algo != "sd" && t.algo != "lm")
                throw bfs::config_error("unknown training algorithm '" + t.algo + "' (want lm or sd)");
            cfg.max_iterations = t.iters;
            cfg.eta = t.eta;
            cfg.seed = t.seed;
            cfg.early_stop_patience = t.patience;
            cfg.workers = workers;

            auto [trained, log] = (cfg.algorithm == bfs::TrainAlgorithm::levenberg_marquardt)
                                      ? bfs::train_lm(std::move(net), train, test, cfg)
                                      : bfs::train_steepest_descent(std::move(net), train, test, cfg);
            bfs::save_model(trained, t.out);
            if (!t.log.empty())
                bfs::save_train_log_csv(log, t.log, cfg.algorithm == bfs::TrainAlgorithm::levenberg_marquardt);
            std::printf("trained %d iterations: train MSE %.3e, test MSE %.3e%s\n",
                        log.records.empty() ? 0 : log.records.back().iteration,
                        log.final_train_mse(), log.final_test_mse(),
                        log.early_stopped ? " (early stop)" : "");

            std::vector<std::string> resolved = {"train", "--data", t.data, "--test", t.test,
                                                 "--algo", t.algo, "--layout", t.layout,
                                                 "--iters", std::to_string(t.iters),
                                                 "--eta", detail::fmt_f64(t.eta),
                                                 "--patience", std::to_string(t.patience),
                                                 "--seed", std::to_string(t.seed),
                                                 "--out", t.out};
            if (t.no_bias) resolved.push_back("--no-bias");
            if (!t.log.empty()) {
                resolved.push_back("--log");
                resolved.push_back(t.log);
            }
            detail::Manifest m("train", resolved);
            m.add_input(t.data);
            m.add_input(t.test);
            m.add_output(t.out);
            if (!t.log.empty()) m.add_output(t.log);
            m.write(t.manifest.empty() ? detail::default_manifest_path(t.out) : t.manifest);
            return kExitOk;
        }

        if (*ev) {
            const bfs::Network net = bfs::load_model(e.model);
            const bfs::Dataset d = bfs::load_dataset(e.data);
            const double mse = bfs::batch_mse(net, d, workers);
            double ss = 0.0;
            {
                bfs::detail::NetWorkspace ws(net);
                for (std::size_t c = 0; c < d.columns(); ++c) {
                    const double y = bfs::detail::forward_into(net, ws, d.inputs.col(static_cast<Eigen::Index>(c)).data());
                    const double err = (y - d.targets(static_cast<Eigen::Index>(c))) * net.scan_range_mhz;
                    ss += err * err;
                }
            }
            const double rmse_mhz = std::sqrt(ss / static_cast<double>(d.columns()));
            std::printf("mse %.6e rmse_mhz %.6f over %zu spectra\n", mse, rmse_mhz, d.columns());
            if (!e.out.empty()) {
                auto out = bfs::open_output(e.out, std::ios::out);
                out << "mse,rmse_mhz,n\n" << detail::fmt_f64(mse) << ',' << detail::fmt_f64(rmse_mhz)
                    << ',' << d.columns() << "\n";
            }
            return kExitOk;
        }

        if (*ft) {
            const bfs::Spectrum s2 = bfs::load_spectrum_csv(f.in);
            bfs::FitConfig cfg;
            cfg.max_iterations = f.max_iters;
            cfg.tolerance = f.tol;
            cfg.fit_offset = f.offset;
            const bfs::FitResult res = bfs::fit_lorentzian(s2, cfg);
            std::printf("bfs_mhz %.6f gain %.6g linewidth_mhz %.6f r2 %.6e iterations %d converged %d\n",
                        res.params.bfs_mhz, res.params.gain, res.params.linewidth_mhz, res.r_squared,
                        res.iterations, res.converged ? 1 : 0);
            if (!f.report.empty()) {
                auto out = bfs::open_output(f.report, std::ios::out);
                out << "gain,bfs_mhz,linewidth_mhz,offset,r_squared,iterations,converged\n";
                out << detail::fmt_f64(res.params.gain) << ',' << detail::fmt_f64(res.params.bfs_mhz)
                    << ',' << detail::fmt_f64(res.params.linewidth_mhz) << ',' << detail::fmt_f64(res.offset)
                    << ',' << detail::fmt_f64(res.r_squared) << ',' << res.iterations << ','
                    << (res.converged ? 1 : 0) << "\n";
                detail::Manifest m("fit", {"fit", "--in", f.in, "--report", f.report,
                                           "--max-iters", std::to_string(f.max_iters),
                                           "--tol", detail::fmt_f64(f.tol)});
                m.add_input(f.in);
                m.add_output(f.report);
                m.write(f.manifest.empty() ? detail::default_manifest_path(f.report) : f.manifest);
            }
            return kExitOk;
        }

        if (*rs) {
            const bfs::Spectrum s2 = bfs::load_spectrum_csv(r.in);
            const int actual = static_cast<int>(std::llround(s2.grid.step_mhz));
            if (actual != r.step || std::abs(s2.grid.step_mhz - actual) > 1e-9)
                throw bfs::data_error("input step " + std::to_string(s2.grid.step_mhz) +
                                      " MHz does not match --step " + std::to_string(r.step));
            bfs::Spectrum out_s = bfs::linear_interpolate_to_1mhz(s2);
            if (r.window) out_s = bfs::select_window(out_s);
            bfs::save_spectrum_csv(out_s, r.out);
            std::printf("wrote %s: %d points at %.0f MHz\n", r.out.c_str(), out_s.grid.count,
                        out_s.grid.step_mhz);
            std::vector<std::string> resolved = {"resample", "--in", r.in, "--step",
                                                 std::to_string(r.step), "--out", r.out};
            if (r.window) resolved.push_back("--window");
            detail::Manifest m("resample", resolved);
            m.add_input(r.in);
            m.add_output(r.out);
            m.write(r.manifest.empty() ? detail::default_manifest_path(r.out) : r.manifest);
            return kExitOk;
        }

        if (*st) {
            const bfs::FiberProfile profile = bfs::load_fiber_profile(s.profile);
            bfs::ScanConfig scan;
            scan.step_mhz = s.step;
            scan.range_mhz = (s.range > 0.0) ? s.range : bfs::min_scan_range(s.step);
            const bfs::TraceMeasurement trace = bfs::simulate_trace(profile, scan, s.heated, s.seed, workers);
            bfs::save_trace(trace, s.out);
            std::printf("wrote %s: %zu positions x %d frequencies\n", s.out.c_str(),
                        trace.positions_km.size(), trace.freq_count());
            std::vector<std::string> resolved = {"simulate-trace", "--profile", s.profile,
                                                 "--step", std::to_string(s.step),
                                                 "--range", detail::fmt_f64(scan.range_mhz),
                                                 "--seed", std::to_string(s.seed),
                                                 "--out", s.out};
            if (s.heated) resolved.push_back("--heated");
            detail::Manifest m("simulate-trace", resolved);
            m.add_input(s.profile);
            m.add_output(s.out);
            m.write(s.manifest.empty() ? detail::default_manifest_path(s.out) : s.manifest);
            return kExitOk;
        }

        if (*an) {
            const bfs::TraceMeasurement before = bfs::load_trace(a.before);
            const bfs::TraceMeasurement after = bfs::load_trace(a.after);
            const bfs::Network net = bfs::load_model(a.model);
            const bfs::FiberProfile profile = bfs::load_fiber_profile(a.profile);
            const bfs::KmRange region = detail::parse_km_range(a.region);
            if (profile.heated_segments.empty())
                throw bfs::config_error("analyze needs a profile with at least one heated segment");
            const double c_t = profile.heated_segments.front().c_t_mhz_per_c;

            const bfs::FitConfig fit_cfg;
            const auto before_lcf = bfs::retrieve_bfs_profile_lcf(before, fit_cfg, workers);
            const auto before_fnn = bfs::retrieve_bfs_profile_fnn(before, net, workers);
            const auto after_lcf = bfs::retrieve_bfs_profile_lcf(after, fit_cfg, workers);
            const auto after_fnn = bfs::retrieve_bfs_profile_fnn(after, net, workers);
            const auto diff_lcf = bfs::frequency_difference(before_lcf, after_lcf);
            const auto diff_fnn = bfs::frequency_difference(before_fnn, after_fnn);

            const double unc_lcf = bfs::measurement_uncertainty(before.positions_km, diff_lcf, region,
                                                                profile.heated_segments, c_t);
            const double unc_fnn = bfs::measurement_uncertainty(before.positions_km, diff_fnn, region,
                                                                profile.heated_segments, c_t);

            const auto& zone = profile.heated_segments.front();
            double zsum_lcf = 0.0, zsum_fnn = 0.0;
            int zcount = 0;
            for (std::size_t k = 0; k < before.positions_km.size(); ++k) {
                const double z = before.positions_km[k];
                if (z < zone.start_km || z > zone.end_km) continue;
                if (std::isnan(diff_lcf[k]) || std::isnan(diff_fnn[k])) continue;
                zsum_lcf += diff_lcf[k];
                zsum_fnn += diff_fnn[k];
                ++zcount;
            }
            const double dt_lcf = zcount ? bfs::delta_bfs_to_delta_temp(zsum_lcf / zcount, c_t) : 0.0;
            const double dt_fnn = zcount ? bfs::delta_bfs_to_delta_temp(zsum_fnn / zcount, c_t) : 0.0;

            namespace fs = std::filesystem;
            fs::create_directories(a.report);
            const std::string profiles_csv = (fs::path(a.report) / "bfs_profiles.csv").string();
            const std::string diff_csv = (fs::path(a.report) / "freq_difference.csv").string();
            const std::string perkm_bfs_csv = (fs::path(a.report) / "perkm_bfs_deviation.csv").string();
            const std::string perkm_diff_csv = (fs::path(a.report) / "perkm_diff_deviation.csv").string();
            const std::string summary_csv = (fs::path(a.report) / "summary.csv").string();

            {
                auto out = bfs::open_output(profiles_csv, std::ios::out);
                out << "position_km,before_lcf_mhz,before_fnn_mhz,after_lcf_mhz,after_fnn_mhz\n";
                for (std::size_t k = 0; k < before.positions_km.size(); ++k)
                    out << detail::fmt_f64(before.positions_km[k]) << ',' << detail::fmt_f64(before_lcf.bfs_mhz[k])
                        << ',' << detail::fmt_f64(before_fnn.bfs_mhz[k]) << ',' << detail::fmt_f64(after_lcf.bfs_mhz[k])
                        << ',' << detail::fmt_f64(after_fnn.bfs_mhz[k]) << "\n";
            }
            {
                auto out = bfs::open_output(diff_csv, std::ios::out);
                out << "position_km,diff_lcf_mhz,diff_fnn_mhz\n";
                for (std::size_t k = 0; k < before.positions_km.size(); ++k)
                    out << detail::fmt_f64(before.positions_km[k]) << ',' << detail::fmt_f64(diff_lcf[k])
                        << ',' << detail::fmt_f64(diff_fnn[k]) << "\n";
            }
            auto write_bins = [](const std::string& path, const std::vector<bfs::BinDeviation>& bins) {
                auto out = bfs::open_output(path, std::ios::out);
                out << "bin_km,deviation_mhz,count\n";
                for (const auto& bin : bins)
                    out << detail::fmt_f64(bin.bin_start_km) << ',' << detail::fmt_f64(bin.mean_abs_dev_mhz)
                        << ',' << bin.count << "\n";
            };
            write_bins(perkm_bfs_csv, bfs::per_km_mean_deviation(before_fnn.bfs_mhz, before_lcf.bfs_mhz,
                                                                 before.positions_km));
            write_bins(perkm_diff_csv, bfs::per_km_mean_deviation(diff_fnn, diff_lcf, before.positions_km));
            {
                auto out = bfs::open_output(summary_csv, std::ios::out);
                out << "uncertainty_lcf_c,uncertainty_fnn_c,delta_temp_lcf_c,delta_temp_fnn_c,c_t_mhz_per_c\n";
                out << detail::fmt_f64(unc_lcf) << ',' << detail::fmt_f64(unc_fnn) << ','
                    << detail::fmt_f64(dt_lcf) << ',' << detail::fmt_f64(dt_fnn) << ','
                    << detail::fmt_f64(c_t) << "\n";
            }
            std::printf("uncertainty: LCF +/-%.3f C, FNN +/-%.3f C; heated-zone dT: LCF %.2f C, FNN %.2f C\n",
                        unc_lcf, unc_fnn, dt_lcf, dt_fnn);

            detail::Manifest m("analyze", {"analyze", "--trace-before", a.before, "--trace-after", a.after,
                                           "--model", a.model, "--profile", a.profile,
                                           "--region", a.region, "--report", a.report});
            m.add_input(a.before);
            m.add_input(a.after);
            m.add_input(a.model);
            m.add_input(a.profile);
            m.add_output(profiles_csv);
            m.add_output(diff_csv);
            m.add_output(perkm_bfs_csv);
            m.add_output(perkm_diff_csv);
            m.add_output(summary_csv);
            m.write(a.manifest.empty() ? (fs::path(a.report) / "manifest.json").string() : a.manifest);
            return kExitOk;
        }

        if (*be) {
            const bfs::Network net = bfs::load_model(b.model);
            bfs::EnsembleSpec ens;
            ens.count = b.count;
            ens.seed = b.seed;
            const bfs::FitConfig fit_cfg;
            std::string which;
            if (be_snr->parsed()) {
                which = "rmse-snr";
                const auto curve = bfs::rmse_vs_snr(net, fit_cfg, ens, 16.0, 46.0, 1.0, workers);
                bfs::save_rmse_curve_csv(curve, b.out, "snr_db");
            } else if (be_lw->parsed()) {
                which = "rmse-linewidth";
                const auto curve = bfs::rmse_vs_linewidth(net, fit_cfg, ens, 10.0, 60.0, 1.0, b.snr, workers);
                bfs::save_rmse_curve_csv(curve, b.out, "linewidth_mhz");
            } else if (be_step->parsed()) {
                which = "rmse-step";
                const auto curve = bfs::rmse_vs_step(net, fit_cfg, ens, b.snr, workers);
                bfs::save_rmse_curve_csv(curve, b.out, "step_mhz");
            } else {
                which = "timing";
                const auto rep = bfs::timing_ratios(net, fit_cfg, b.n_timing, b.timing_workers, ens);
                bfs::save_timing_report_csv(rep, b.out);
            }
            std::printf("wrote %s\n", b.out.c_str());
            std::vector<std::string> resolved = {"bench", which, "--model", b.model, "--out", b.out,
                                                 "--seed", std::to_string(b.seed)};
            if (which == "timing") {
                resolved.insert(resolved.end(), {"--n", std::to_string(b.n_timing), "--timing-workers",
                                                 std::to_string(b.timing_workers)});
            } else {
                resolved.insert(resolved.end(), {"--count", std::to_string(b.count), "--snr",
                                                 detail::fmt_f64(b.snr)});
            }
            detail::Manifest m("bench " + which, resolved);
            m.add_input(b.model);
            m.add_output(b.out);
            m.write(b.manifest.empty() ? detail::default_manifest_path(b.out) : b.manifest);
            return kExitOk;
        }

        if (*in) {
            const bfs::Network net = bfs::load_model(i.model);
            bfs::Spectrum s2 = bfs::load_spectrum_csv(i.in_csv);
            if (s2.grid.count != net.input_size() ||
                std::abs(s2.grid.step_mhz - net.train_step_mhz) > 1e-9)
                s2 = bfs::prepare_input(s2);
            std::printf("%.6f\n", bfs::predict_bfs(net, s2));
            if (!i.manifest.empty()) {
                detail::Manifest m("infer", {"infer", "--model", i.model, "--in", i.in_csv});
                m.add_input(i.model);
                m.add_input(i.in_csv);
                m.write(i.manifest);
            }
            return kExitOk;
        }
    } catch (const bfs::config_error& ex) {
        std::fprintf(stderr, "configuration error: %s\n", ex.what());
        return kExitUsage;
    } catch (const bfs::data_error& ex) {
        std::fprintf(stderr, "data error: %s\n", ex.what());
        return kExitData;
    } catch (const bfs::training_diverged_error& ex) {
        std::fprintf(stderr, "numerical error: %s\n", ex.what());
        return kExitNumerical;
    } catch (const bfs::error& ex) {
        std::fprintf(stderr, "numerical error: %s\n", ex.what());
        return kExitNumerical;
    }
    return kExitOk;
}

} // namespace bfscli
