#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfs/errors.hpp"
#include "bfs/io.hpp"
#include "bfs/kvconfig.hpp"
#include "bfs/lcf.hpp"
#include "bfs/network.hpp"
#include "bfs/parallel.hpp"
#include "bfs/resample.hpp"
#include "bfs/rng.hpp"
#include "bfs/spectrum.hpp"

namespace bfs {

struct HeatedSegment {
    double start_km = 0.0;
    double end_km = 0.0;
    double delta_temp_c = 0.0;
    double c_t_mhz_per_c = 1.3;
};

struct SnrSegment {
    double start_km = 0.0;
    double end_km = 0.0;
    double snr_db = 20.0;
};

// Position-dependent description of a simulated sensing fiber. BFS values are
// offsets within the scan window; SNR may vary along the fiber either through
// explicit segments or the uniform default.
struct FiberProfile {
    double length_km = 23.95;
    double spatial_step_m = 10.0;
    double base_bfs_mhz = 78.0;
    double bfs_slope_mhz_per_km = 0.0;
    double linewidth_mhz = 30.0;
    double gain = 1.0;
    double snr_db = 23.5;
    std::vector<SnrSegment> snr_segments;
    std::vector<HeatedSegment> heated_segments;

    void validate() const {
        if (!(length_km > 0.0)) throw domain_error("fiber length must be > 0");
        if (!(spatial_step_m > 0.0)) throw domain_error("spatial step must be > 0");
        if (!(linewidth_mhz > 0.0) || !(gain > 0.0)) throw domain_error("linewidth and gain must be > 0");
        for (const auto& seg : heated_segments) {
            if (!(seg.start_km >= 0.0 && seg.end_km <= length_km && seg.start_km < seg.end_km))
                throw domain_error("heated segment lies outside the fiber");
            if (!(seg.c_t_mhz_per_c > 0.0)) throw domain_error("temperature coefficient must be > 0");
        }
        for (const auto& seg : snr_segments)
            if (!(seg.start_km >= 0.0 && seg.end_km <= length_km && seg.start_km < seg.end_km))
                throw domain_error("SNR segment lies outside the fiber");
    }

    double bfs_at(double z_km, bool heated) const {
        double v = base_bfs_mhz + bfs_slope_mhz_per_km * z_km;
        if (heated)
            for (const auto& seg : heated_segments)
                if (z_km >= seg.start_km && z_km <= seg.end_km)
                    v += seg.delta_temp_c * seg.c_t_mhz_per_c;
        return v;
    }

    double snr_at(double z_km) const {
        for (const auto& seg : snr_segments)
            if (z_km >= seg.start_km && z_km <= seg.end_km) return seg.snr_db;
        return snr_db;
    }
};

inline FiberProfile load_fiber_profile(const std::string& path) {
    const KvConfig cfg = KvConfig::parse_file(path);
    FiberProfile p;
    p.length_km = cfg.number("length_km");
    p.spatial_step_m = cfg.number_or("spatial_step_m", p.spatial_step_m);
    p.base_bfs_mhz = cfg.number_or("base_bfs_mhz", p.base_bfs_mhz);
    p.bfs_slope_mhz_per_km = cfg.number_or("bfs_slope_mhz_per_km", 0.0);
    p.linewidth_mhz = cfg.number_or("linewidth_mhz", p.linewidth_mhz);
    p.gain = cfg.number_or("gain", p.gain);
    p.snr_db = cfg.number_or("snr_db", p.snr_db);
    if (cfg.has("snr_segments")) {
        for (const auto& row : cfg.number_rows("snr_segments")) {
            if (row.size() != 3) throw data_error("snr_segments rows must be [start_km, end_km, snr_db]");
            p.snr_segments.push_back({row[0], row[1], row[2]});
        }
    }
    if (cfg.has("heated_segments")) {
        for (const auto& row : cfg.number_rows("heated_segments")) {
            if (row.size() != 4)
                throw data_error("heated_segments rows must be [start_km, end_km, delta_temp_c, c_t_mhz_per_c]");
            p.heated_segments.push_back({row[0], row[1], row[2], row[3]});
        }
    }
    p.validate();
    return p;
}

// A full simulated acquisition: one gain spectrum per fiber position.
struct TraceMeasurement {
    std::vector<double> positions_km;
    ScanConfig scan;
    Eigen::MatrixXd gains;  // rows = positions, cols = frequency samples
    std::uint64_t seed = 0;

    int freq_count() const { return static_cast<int>(std::llround(scan.range_mhz / scan.step_mhz)) + 1; }

    Spectrum spectrum_at(std::size_t row) const {
        Spectrum s;
        s.grid = FrequencyGrid{0.0, static_cast<double>(scan.step_mhz), freq_count()};
        s.gains.resize(static_cast<std::size_t>(s.grid.count));
        for (int c = 0; c < s.grid.count; ++c)
            s.gains[static_cast<std::size_t>(c)] = gains(static_cast<Eigen::Index>(row), c);
        return s;
    }
};

inline TraceMeasurement simulate_trace(const FiberProfile& profile, const ScanConfig& scan,
                                       bool heated, std::uint64_t seed, int workers = 1) {
    profile.validate();
    scan.validate();

    TraceMeasurement t;
    t.scan = scan;
    t.seed = seed;
    const std::size_t n_pos =
        static_cast<std::size_t>(std::floor(profile.length_km * 1000.0 / profile.spatial_step_m + 1e-9)) + 1;
    t.positions_km.resize(n_pos);
    for (std::size_t i = 0; i < n_pos; ++i)
        t.positions_km[i] = static_cast<double>(i) * profile.spatial_step_m / 1000.0;

    const int nf = t.freq_count();
    t.gains.resize(static_cast<Eigen::Index>(n_pos), nf);
    const FrequencyGrid grid{0.0, static_cast<double>(scan.step_mhz), nf};

    parallel_for(n_pos, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double z = t.positions_km[i];
            LorentzianParams p{profile.gain, profile.bfs_at(z, heated), profile.linewidth_mhz};
            Spectrum s = synth_spectrum(p, grid);
            s = add_noise(s, NoiseSpec{profile.snr_at(z), mix_seed(seed, i)});
            for (int c = 0; c < nf; ++c) t.gains(static_cast<Eigen::Index>(i), c) = s.gains[static_cast<std::size_t>(c)];
        }
    });
    return t;
}

// Per-position BFS profile; failed positions become NaN gaps rather than
// aborting the whole trace.
struct BfsProfile {
    std::vector<double> positions_km;
    std::vector<double> bfs_mhz;
    int gap_count = 0;
};

namespace detail {

template <typename RetrieveFn>
BfsProfile retrieve_profile(const TraceMeasurement& t, int workers, RetrieveFn&& fn) {
    BfsProfile out;
    out.positions_km = t.positions_km;
    out.bfs_mhz.assign(t.positions_km.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<unsigned char> failed(t.positions_km.size(), 0);

    parallel_for(t.positions_km.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                out.bfs_mhz[i] = fn(t.spectrum_at(i));
            } catch (const error&) {
                failed[i] = 1;
            }
        }
    });
    for (unsigned char f : failed) out.gap_count += f;
    return out;
}

} // namespace detail

inline BfsProfile retrieve_bfs_profile_fnn(const TraceMeasurement& t, const Network& net, int workers = 1) {
    return detail::retrieve_profile(t, workers, [&](const Spectrum& s) {
        return predict_bfs(net, prepare_input(s));
    });
}

inline BfsProfile retrieve_bfs_profile_lcf(const TraceMeasurement& t, const FitConfig& cfg = {},
                                           int workers = 1) {
    return detail::retrieve_profile(t, workers, [&](const Spectrum& s) {
        return fit_bfs(prepare_input(s), cfg);
    });
}

inline std::vector<double> frequency_difference(const BfsProfile& before, const BfsProfile& after) {
    if (before.bfs_mhz.size() != after.bfs_mhz.size())
        throw dimension_error("before/after profiles have different lengths");
    std::vector<double> diff(before.bfs_mhz.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = after.bfs_mhz[i] - before.bfs_mhz[i];
    return diff;
}

struct KmRange {
    double start_km = 0.0;
    double end_km = 0.0;
};

// Standard deviation of the before/after frequency difference over an
// unheated stretch, converted to degrees C.
inline double measurement_uncertainty(const std::vector<double>& positions_km,
                                      const std::vector<double>& diff_mhz, const KmRange& region,
                                      const std::vector<HeatedSegment>& heated_segments,
                                      double c_t_mhz_per_c) {
    if (positions_km.size() != diff_mhz.size())
        throw dimension_error("position and difference vectors have different lengths");
    if (!(c_t_mhz_per_c > 0.0)) throw domain_error("temperature coefficient must be > 0");
    for (const auto& seg : heated_segments)
        if (region.end_km >= seg.start_km && region.start_km <= seg.end_km)
            throw domain_error("uncertainty region overlaps a heated segment");

    std::vector<double> vals;
    for (std::size_t i = 0; i < positions_km.size(); ++i) {
        if (positions_km[i] < region.start_km || positions_km[i] > region.end_km) continue;
        if (std::isnan(diff_mhz[i])) continue;
        vals.push_back(diff_mhz[i]);
    }
    if (vals.size() < 30) throw domain_error("uncertainty region holds fewer than 30 usable positions");

    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
    return sd / c_t_mhz_per_c;
}

struct BinDeviation {
    double bin_start_km = 0.0;
    double mean_abs_dev_mhz = 0.0;
    int count = 0;
};

// Mean absolute difference between two profiles, binned along the fiber.
// Bins with no usable positions are omitted rather than reported as zero.
inline std::vector<BinDeviation> per_km_mean_deviation(const std::vector<double>& a,
                                                       const std::vector<double>& b,
                                                       const std::vector<double>& positions_km,
                                                       double bin_km = 1.0) {
    if (a.size() != b.size() || a.size() != positions_km.size())
        throw dimension_error("profiles and positions have different lengths");
    if (!(bin_km > 0.0)) throw domain_error("bin width must be > 0");
    for (std::size_t i = 1; i < positions_km.size(); ++i)
        if (positions_km[i] < positions_km[i - 1]) throw domain_error("positions must be sorted");

    const std::size_t n_bins =
        positions_km.empty() ? 0 : static_cast<std::size_t>(std::floor(positions_km.back() / bin_km)) + 1;
    std::vector<double> sums(n_bins, 0.0);
    std::vector<int> counts(n_bins, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (std::isnan(d)) continue;
        std::size_t bin = static_cast<std::size_t>(std::floor(positions_km[i] / bin_km));
        if (bin >= n_bins) bin = n_bins - 1;
        sums[bin] += d;
        counts[bin] += 1;
    }

    std::vector<BinDeviation> out;
    for (std::size_t bin = 0; bin < n_bins; ++bin)
        if (counts[bin] > 0)
            out.push_back({static_cast<double>(bin) * bin_km, sums[bin] / counts[bin], counts[bin]});
    return out;
}

// --- trace container ----------------------------------------------------------
// "BGSTRACE", u32 positions, u32 frequency samples, u32 step, f64 range,
// u64 seed, f64 positions, row-major f64 gain matrix. Little-endian.

inline constexpr char kTraceMagic[9] = "BGSTRACE";

inline void save_trace(const TraceMeasurement& t, const std::string& path) {
    auto out = open_output(path);
    write_magic(out, kTraceMagic);
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(t.positions_km.size()));
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(t.gains.cols()));
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(t.scan.step_mhz));
    le_write<double>(out, t.scan.range_mhz);
    le_write<std::uint64_t>(out, t.seed);
    le_write_f64s(out, t.positions_km.data(), t.positions_km.size());
    for (Eigen::Index r = 0; r < t.gains.rows(); ++r)
        for (Eigen::Index c = 0; c < t.gains.cols(); ++c) le_write<double>(out, t.gains(r, c));
    if (!out) throw data_error("failed writing trace: " + path);
}

inline TraceMeasurement load_trace(const std::string& path) {
    auto in = open_input(path);
    check_magic(in, kTraceMagic, "BGS trace");
    const auto n_pos = le_read<std::uint32_t>(in, "position count");
    const auto n_freq = le_read<std::uint32_t>(in, "frequency count");

    TraceMeasurement t;
    t.scan.step_mhz = static_cast<int>(le_read<std::uint32_t>(in, "scan step"));
    t.scan.range_mhz = le_read<double>(in, "scan range");
    t.seed = le_read<std::uint64_t>(in, "seed");
    if (n_freq != static_cast<std::uint32_t>(t.freq_count()))
        throw dimension_error("trace frequency count disagrees with its scan metadata");

    t.positions_km.resize(n_pos);
    le_read_f64s(in, t.positions_km.data(), t.positions_km.size(), "positions");
    t.gains.resize(static_cast<Eigen::Index>(n_pos), static_cast<Eigen::Index>(n_freq));
    for (Eigen::Index r = 0; r < t.gains.rows(); ++r)
        for (Eigen::Index c = 0; c < t.gains.cols(); ++c)
            t.gains(r, c) = le_read<double>(in, "gain matrix");
    return t;
}

} // namespace bfs
