#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfs/errors.hpp"
#include "bfs/io.hpp"
#include "bfs/parallel.hpp"
#include "bfs/rng.hpp"
#include "bfs/spectrum.hpp"

namespace bfs {

// Corpus layout: one column per (linewidth, BFS position, SNR, noise
// realization) tuple. The default grid is 51 linewidths x 126 positions x
// 3 SNRs x 20 realizations = 385,560 columns of 157 samples.
struct GridSpec {
    double scan_range_mhz = 156.0;
    double step_mhz = 1.0;
    std::vector<double> linewidths_mhz;
    std::vector<double> bfs_fractions;   // peak position as a fraction of the scan range, each in (0,1)
    std::vector<double> snrs_db;
    int realizations_per_snr = 20;
    std::uint64_t base_seed = 1;
    bool noiseless = false;             // skip noise injection (the "ideal BGS" corpus)

    int grid_count() const {
        return static_cast<int>(std::llround(scan_range_mhz / step_mhz)) + 1;
    }

    std::size_t total_columns() const {
        return linewidths_mhz.size() * bfs_fractions.size() * snrs_db.size() *
               static_cast<std::size_t>(realizations_per_snr);
    }

    void validate() const {
        if (!(scan_range_mhz > 0.0) || !(step_mhz > 0.0)) throw domain_error("scan range and step must be > 0");
        const double k = scan_range_mhz / step_mhz;
        if (std::abs(k - std::llround(k)) > 1e-9) throw domain_error("scan range must be an integer multiple of the step");
        if (linewidths_mhz.empty()) throw domain_error("linewidth list is empty");
        if (bfs_fractions.empty()) throw domain_error("BFS position list is empty");
        if (snrs_db.empty()) throw domain_error("SNR list is empty");
        if (realizations_per_snr < 1) throw domain_error("need at least one noise realization");
        for (double lw : linewidths_mhz)
            if (!(lw > 0.0)) throw domain_error("linewidths must be > 0");
        for (double f : bfs_fractions)
            if (!(f > 0.0 && f < 1.0)) throw domain_error("BFS fractions must lie in (0,1)");
    }

    // Full-scale profile: linewidths 10..60 MHz step 1; peak positions from 10%
    // of the window upward in 1 MHz steps, 126 of them; SNRs 16/26/36 dB;
    // 20 noise realizations each.
    static GridSpec paper_defaults(std::uint64_t seed = 1) {
        GridSpec g;
        g.base_seed = seed;
        for (int i = 0; i <= 50; ++i) g.linewidths_mhz.push_back(10.0 + i);
        for (int i = 0; i < 126; ++i) g.bfs_fractions.push_back((15.6 + i) / g.scan_range_mhz);
        g.snrs_db = {16.0, 26.0, 36.0};
        g.realizations_per_snr = 20;
        return g;
    }

    // Reduced profile for fast runs: 17 linewidths x 42 positions x 3 SNRs x 2
    // realizations = 4,284 columns.
    static GridSpec desk_defaults(std::uint64_t seed = 1) {
        GridSpec g;
        g.base_seed = seed;
        for (int i = 0; i < 17; ++i) g.linewidths_mhz.push_back(10.0 + 50.0 * i / 16.0);
        for (int i = 0; i < 42; ++i) g.bfs_fractions.push_back((15.6 + 125.0 * i / 41.0) / g.scan_range_mhz);
        g.snrs_db = {16.0, 26.0, 36.0};
        g.realizations_per_snr = 2;
        return g;
    }
};

struct Dataset {
    Eigen::MatrixXd inputs;   // grid_count rows, one normalized spectrum per column
    Eigen::VectorXd targets;  // normalized BFS (fraction of the scan range), one per column
    GridSpec meta;

    std::size_t columns() const { return static_cast<std::size_t>(inputs.cols()); }

    std::uint64_t content_hash() const {
        Fnv1a h;
        h.update_u64(static_cast<std::uint64_t>(inputs.rows()));
        h.update_u64(static_cast<std::uint64_t>(inputs.cols()));
        h.update_f64s(inputs.data(), static_cast<std::size_t>(inputs.size()));
        h.update_f64s(targets.data(), static_cast<std::size_t>(targets.size()));
        return h.digest();
    }
};

namespace detail {

// Per-column seeds are derived from the base seed and the tuple indices, never
// from the generation order, so parallel generation is reproducible.
inline std::uint64_t column_seed(std::uint64_t base, std::size_t li, std::size_t fi,
                                 std::size_t si, std::size_t ri) {
    return mix_seed(base, li, fi, si, ri);
}

inline Dataset generate_grid(const GridSpec& spec, int workers) {
    spec.validate();
    const int rows = spec.grid_count();
    const std::size_t cols = spec.total_columns();
    const std::size_t nf = spec.bfs_fractions.size();
    const std::size_t ns = spec.snrs_db.size();
    const std::size_t nr = static_cast<std::size_t>(spec.realizations_per_snr);

    Dataset d;
    d.meta = spec;
    d.inputs.resize(rows, static_cast<Eigen::Index>(cols));
    d.targets.resize(static_cast<Eigen::Index>(cols));

    const FrequencyGrid grid{0.0, spec.step_mhz, rows};

    parallel_for(cols, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            // Lexicographic order: linewidth, position, SNR, realization.
            const std::size_t ri = c % nr;
            const std::size_t si = (c / nr) % ns;
            const std::size_t fi = (c / (nr * ns)) % nf;
            const std::size_t li = c / (nr * ns * nf);

            LorentzianParams p;
            p.gain = 1.0;
            p.linewidth_mhz = spec.linewidths_mhz[li];
            p.bfs_mhz = spec.bfs_fractions[fi] * spec.scan_range_mhz;

            Spectrum s = synth_spectrum(p, grid);
            if (!spec.noiseless) {
                NoiseSpec noise{spec.snrs_db[si], column_seed(spec.base_seed, li, fi, si, ri)};
                s = add_noise(s, noise);
            }
            s = normalize_spectrum(s);

            for (int r = 0; r < rows; ++r)
                d.inputs(r, static_cast<Eigen::Index>(c)) = s.gains[static_cast<std::size_t>(r)];
            d.targets(static_cast<Eigen::Index>(c)) = spec.bfs_fractions[fi];
        }
    });
    return d;
}

} // namespace detail

inline Dataset generate_training_set(const GridSpec& spec, int workers = 1) {
    return detail::generate_grid(spec, workers);
}

// The test corpus keeps the grid but defaults to 16 dB only, and draws its
// noise from a seed stream disjoint from the training stream.
inline constexpr std::uint64_t kTestSeedTag = 0x5445535453455431ULL; // "TESTSET1"

inline Dataset generate_test_set(const GridSpec& train_spec, int workers = 1,
                                 std::vector<double> snrs_db = {16.0},
                                 std::uint64_t test_base_seed = 0) {
    GridSpec spec = train_spec;
    spec.snrs_db = std::move(snrs_db);
    spec.base_seed = test_base_seed ? test_base_seed : (train_spec.base_seed ^ kTestSeedTag);
    if (spec.base_seed == train_spec.base_seed)
        throw config_error("test seed stream collides with the training stream");
    return detail::generate_grid(spec, workers);
}

inline double denormalize_target(double h, double scan_range_mhz, bool strict = true) {
    if (h < 0.0 || h > 1.0) {
        if (strict) throw domain_error("normalized BFS outside [0,1]");
        std::fprintf(stderr, "warning: normalized BFS %.6g outside [0,1], passing through\n", h);
    }
    return h * scan_range_mhz;
}

// --- binary container ---------------------------------------------------------
// "BGSDSET1", u32 rows, u32 cols, u64 base_seed, grid metadata (scalars, flag
// byte, then length-prefixed f64 lists), inputs column-major f64, targets f64.
// All little-endian.

inline constexpr char kDatasetMagic[9] = "BGSDSET1";

namespace detail {

inline void write_f64_list(std::ostream& out, const std::vector<double>& v) {
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
    le_write_f64s(out, v.data(), v.size());
}

inline std::vector<double> read_f64_list(std::istream& in, const char* what) {
    const auto n = le_read<std::uint32_t>(in, what);
    std::vector<double> v(n);
    le_read_f64s(in, v.data(), v.size(), what);
    return v;
}

} // namespace detail

inline void save_dataset(const Dataset& d, const std::string& path) {
    auto out = open_output(path);
    write_magic(out, kDatasetMagic);
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(d.inputs.rows()));
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(d.inputs.cols()));
    le_write<std::uint64_t>(out, d.meta.base_seed);
    le_write<double>(out, d.meta.scan_range_mhz);
    le_write<double>(out, d.meta.step_mhz);
    le_write<std::uint8_t>(out, d.meta.noiseless ? 1 : 0);
    detail::write_f64_list(out, d.meta.linewidths_mhz);
    detail::write_f64_list(out, d.meta.bfs_fractions);
    detail::write_f64_list(out, d.meta.snrs_db);
    le_write<std::uint32_t>(out, static_cast<std::uint32_t>(d.meta.realizations_per_snr));
    le_write_f64s(out, d.inputs.data(), static_cast<std::size_t>(d.inputs.size()));
    le_write_f64s(out, d.targets.data(), static_cast<std::size_t>(d.targets.size()));
    if (!out) throw data_error("failed writing dataset: " + path);
}

inline Dataset load_dataset(const std::string& path) {
    auto in = open_input(path);
    check_magic(in, kDatasetMagic, "BGS dataset");
    const auto rows = le_read<std::uint32_t>(in, "row count");
    const auto cols = le_read<std::uint32_t>(in, "column count");

    Dataset d;
    d.meta.base_seed = le_read<std::uint64_t>(in, "base seed");
    d.meta.scan_range_mhz = le_read<double>(in, "scan range");
    d.meta.step_mhz = le_read<double>(in, "step");
    d.meta.noiseless = le_read<std::uint8_t>(in, "noise flag") != 0;
    d.meta.linewidths_mhz = detail::read_f64_list(in, "linewidth list");
    d.meta.bfs_fractions = detail::read_f64_list(in, "BFS position list");
    d.meta.snrs_db = detail::read_f64_list(in, "SNR list");
    d.meta.realizations_per_snr = static_cast<int>(le_read<std::uint32_t>(in, "realization count"));

    if (rows != static_cast<std::uint32_t>(d.meta.grid_count()))
        throw dimension_error("dataset row count disagrees with its grid metadata");
    if (cols != d.meta.total_columns())
        throw dimension_error("dataset column count disagrees with its grid metadata");

    d.inputs.resize(rows, cols);
    d.targets.resize(cols);
    le_read_f64s(in, d.inputs.data(), static_cast<std::size_t>(d.inputs.size()), "input matrix");
    le_read_f64s(in, d.targets.data(), static_cast<std::size_t>(d.targets.size()), "target vector");
    return d;
}

// Deterministic split into (kept, held-out) parts; ceil(N*(1-f)) columns stay
// in the first part and the column/target pairing is preserved.
inline std::pair<Dataset, Dataset> shuffle_split(const Dataset& d, double validation_fraction,
                                                 std::uint64_t seed) {
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw domain_error("validation fraction must lie in [0,1)");
    const std::size_t n = d.columns();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    // Fisher-Yates with an explicitly specified engine; std::shuffle's draw
    // sequence is implementation-defined.
    std::mt19937_64 eng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(eng() % i);
        std::swap(perm[i - 1], perm[j]);
    }

    const std::size_t n_train = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n) * (1.0 - validation_fraction)));

    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset part;
        part.meta = d.meta;
        part.inputs.resize(d.inputs.rows(), static_cast<Eigen::Index>(end - begin));
        part.targets.resize(static_cast<Eigen::Index>(end - begin));
        for (std::size_t k = begin; k < end; ++k) {
            part.inputs.col(static_cast<Eigen::Index>(k - begin)) =
                d.inputs.col(static_cast<Eigen::Index>(perm[k]));
            part.targets(static_cast<Eigen::Index>(k - begin)) =
                d.targets(static_cast<Eigen::Index>(perm[k]));
        }
        return part;
    };

    return {take(0, n_train), take(n_train, n)};
}

} // namespace bfs
