#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "bfs/errors.hpp"
#include "bfs/io.hpp"
#include "bfs/rng.hpp"

namespace bfs {

// Uniform frequency axis of a scanned gain spectrum. Frequencies are offsets
// within the scan window, in MHz; a 156 MHz range at 1 MHz step has 157 points.
struct FrequencyGrid {
    double start_mhz = 0.0;
    double step_mhz = 1.0;
    int count = 0;

    double span() const { return step_mhz * (count - 1); }
    double freq(int i) const { return start_mhz + step_mhz * i; }

    void validate() const {
        if (!(step_mhz > 0.0)) throw domain_error("frequency grid step must be > 0");
        if (count < 2) throw domain_error("frequency grid needs at least 2 samples");
        if (!std::isfinite(start_mhz)) throw domain_error("frequency grid start must be finite");
    }

    bool operator==(const FrequencyGrid&) const = default;
};

// One local Brillouin gain spectrum's Lorentzian shape: peak gain, peak
// frequency (the BFS, as an offset on the grid's axis) and FWHM linewidth.
struct LorentzianParams {
    double gain = 1.0;
    double bfs_mhz = 0.0;
    double linewidth_mhz = 30.0;

    void validate() const {
        if (!(gain > 0.0) || !std::isfinite(gain)) throw domain_error("peak gain must be positive and finite");
        if (!(linewidth_mhz > 0.0) || !std::isfinite(linewidth_mhz)) throw domain_error("linewidth must be positive and finite");
        if (!std::isfinite(bfs_mhz)) throw domain_error("BFS must be finite");
    }
};

struct Spectrum {
    FrequencyGrid grid;
    std::vector<double> gains;

    void validate() const {
        grid.validate();
        if (gains.size() != static_cast<std::size_t>(grid.count))
            throw dimension_error("spectrum sample count does not match its grid");
        for (double g : gains)
            if (!std::isfinite(g)) throw domain_error("spectrum contains non-finite samples");
    }
};

struct NoiseSpec {
    double snr_db = 16.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!std::isfinite(snr_db)) throw domain_error("SNR must be finite");
    }
};

// Half-open index range [begin, end).
struct IndexRange {
    int begin = 0;
    int end = 0;
    int size() const { return end - begin; }
};

inline double lorentzian_gain(const LorentzianParams& p, double v_mhz) {
    p.validate();
    if (!std::isfinite(v_mhz)) throw domain_error("frequency must be finite");
    const double d = 2.0 * (v_mhz - p.bfs_mhz) / p.linewidth_mhz;
    return p.gain / (1.0 + d * d);
}

inline Spectrum synth_spectrum(const LorentzianParams& p, const FrequencyGrid& grid) {
    p.validate();
    grid.validate();
    Spectrum s;
    s.grid = grid;
    s.gains.resize(static_cast<std::size_t>(grid.count));
    for (int i = 0; i < grid.count; ++i)
        s.gains[static_cast<std::size_t>(i)] = lorentzian_gain(p, grid.freq(i));
    return s;
}

// Additive white Gaussian noise with sigma = peak / 10^(snr_db/20), the
// amplitude SNR convention. Samples may go negative; nothing is clipped.
inline Spectrum add_noise(const Spectrum& s, const NoiseSpec& noise) {
    s.validate();
    noise.validate();
    const double peak = *std::max_element(s.gains.begin(), s.gains.end());
    if (!(peak > 0.0)) throw domain_error("add_noise requires a positive spectrum peak");
    const double sigma = peak / std::pow(10.0, noise.snr_db / 20.0);
    GaussianStream gauss(noise.seed);
    Spectrum out = s;
    for (double& g : out.gains) g += sigma * gauss.next();
    return out;
}

// Centered moving average; the window shrinks symmetrically near the edges.
inline std::vector<double> moving_average(const std::vector<double>& y, int window = 5) {
    const int n = static_cast<int>(y.size());
    const int half = window / 2;
    std::vector<double> out(y.size());
    for (int i = 0; i < n; ++i) {
        const int radius = std::min({half, i, n - 1 - i});
        double sum = 0.0;
        for (int j = i - radius; j <= i + radius; ++j) sum += y[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = sum / (2 * radius + 1);
    }
    return out;
}

// Peak geometry read off the 5-point smoothed spectrum: argmax, baseline from
// the lowest decile, and the full width where the smoothed curve crosses half
// of (max - baseline). Width is clamped to [grid step, span].
struct PeakEstimate {
    int peak_index = 0;
    double peak_freq_mhz = 0.0;
    double peak_value = 0.0;    // smoothed maximum
    double baseline = 0.0;
    double fwhm_mhz = 0.0;
    bool width_clamped = false;
};

inline PeakEstimate estimate_peak(const Spectrum& s) {
    s.validate();
    const std::vector<double> sm = moving_average(s.gains, 5);
    const auto max_it = std::max_element(sm.begin(), sm.end());
    const auto min_it = std::min_element(sm.begin(), sm.end());
    // Relative threshold: smoothing leaves last-ulp wobble on constant input.
    const double scale = std::max(std::abs(*max_it), std::abs(*min_it));
    if (!(*max_it - *min_it > 1e-12 * scale))
        throw degenerate_input_error("flat spectrum: no peak to locate");

    PeakEstimate pe;
    pe.peak_index = static_cast<int>(max_it - sm.begin());
    pe.peak_freq_mhz = s.grid.freq(pe.peak_index);
    pe.peak_value = *max_it;

    std::vector<double> sorted = sm;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t decile = std::max<std::size_t>(1, sorted.size() / 10);
    pe.baseline = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(decile), 0.0) /
                  static_cast<double>(decile);

    const double half_level = pe.baseline + 0.5 * (pe.peak_value - pe.baseline);
    const int n = static_cast<int>(sm.size());

    // Walk outwards from the peak to the first half-level crossings, with
    // sub-sample linear interpolation. A missing crossing hits the grid edge.
    double left = s.grid.freq(0);
    for (int i = pe.peak_index; i > 0; --i) {
        if (sm[static_cast<std::size_t>(i - 1)] <= half_level && sm[static_cast<std::size_t>(i)] > half_level) {
            const double t = (half_level - sm[static_cast<std::size_t>(i - 1)]) /
                             (sm[static_cast<std::size_t>(i)] - sm[static_cast<std::size_t>(i - 1)]);
            left = s.grid.freq(i - 1) + t * s.grid.step_mhz;
            break;
        }
    }
    double right = s.grid.freq(n - 1);
    for (int i = pe.peak_index; i < n - 1; ++i) {
        if (sm[static_cast<std::size_t>(i + 1)] <= half_level && sm[static_cast<std::size_t>(i)] > half_level) {
            const double t = (sm[static_cast<std::size_t>(i)] - half_level) /
                             (sm[static_cast<std::size_t>(i)] - sm[static_cast<std::size_t>(i + 1)]);
            right = s.grid.freq(i) + t * s.grid.step_mhz;
            break;
        }
    }

    const double raw = right - left;
    pe.fwhm_mhz = std::clamp(raw, s.grid.step_mhz, s.grid.span());
    pe.width_clamped = (pe.fwhm_mhz != raw);
    return pe;
}

// SNR in dB from the smoothed peak amplitude and the sample standard deviation
// over a signal-free region.
inline double estimate_snr(const Spectrum& s, const IndexRange& noise_floor_region) {
    s.validate();
    if (noise_floor_region.begin < 0 || noise_floor_region.end > s.grid.count ||
        noise_floor_region.size() < 8)
        throw domain_error("SNR noise-floor region must hold at least 8 in-range samples");

    const PeakEstimate pe = estimate_peak(s);
    const double lo = s.grid.freq(noise_floor_region.begin);
    const double hi = s.grid.freq(noise_floor_region.end - 1);
    if (hi >= pe.peak_freq_mhz - pe.fwhm_mhz && lo <= pe.peak_freq_mhz + pe.fwhm_mhz)
        throw warning_error("SNR region overlaps the detected peak +/- one linewidth");

    double mean = 0.0;
    for (int i = noise_floor_region.begin; i < noise_floor_region.end; ++i)
        mean += s.gains[static_cast<std::size_t>(i)];
    mean /= noise_floor_region.size();
    double ss = 0.0;
    for (int i = noise_floor_region.begin; i < noise_floor_region.end; ++i) {
        const double d = s.gains[static_cast<std::size_t>(i)] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / (noise_floor_region.size() - 1));
    if (!(sd > 0.0)) throw domain_error("SNR undefined: zero-variance noise-floor region");
    return 20.0 * std::log10(pe.peak_value / sd);
}

// Affine min-max map onto [0, 1]. The minimum lands exactly on 0 and the
// maximum exactly on 1, which makes the map idempotent bit-for-bit.
inline Spectrum normalize_spectrum(const Spectrum& s) {
    s.validate();
    const auto [min_it, max_it] = std::minmax_element(s.gains.begin(), s.gains.end());
    const double lo = *min_it, hi = *max_it;
    if (!(hi > lo)) throw degenerate_input_error("cannot normalize a constant spectrum");
    Spectrum out;
    out.grid = s.grid;
    out.gains.resize(s.gains.size());
    const double inv = hi - lo;
    for (std::size_t i = 0; i < s.gains.size(); ++i) out.gains[i] = (s.gains[i] - lo) / inv;
    return out;
}

inline double delta_bfs_to_delta_temp(double delta_bfs_mhz, double c_t_mhz_per_c) {
    if (!(c_t_mhz_per_c > 0.0)) throw domain_error("temperature coefficient must be > 0");
    return delta_bfs_mhz / c_t_mhz_per_c;
}

// --- CSV serialization -------------------------------------------------------
// Two columns (frequency_mhz, gain) with a header line. %.17g keeps the round
// trip exact in double precision.

inline void save_spectrum_csv(const Spectrum& s, const std::string& path) {
    s.validate();
    auto out = open_output(path, std::ios::out);
    out << "frequency_mhz,gain\n";
    char buf[64];
    for (int i = 0; i < s.grid.count; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", s.grid.freq(i));
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", s.gains[static_cast<std::size_t>(i)]);
        out << buf << '\n';
    }
    if (!out) throw data_error("failed writing spectrum CSV: " + path);
}

inline Spectrum load_spectrum_csv(const std::string& path) {
    auto in = open_input(path, std::ios::in);
    std::string line;
    if (!std::getline(in, line)) throw truncated_file_error("empty spectrum CSV: " + path);

    std::vector<double> freqs, gains;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double f = 0.0, g = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &f, &g) != 2)
            throw data_error("malformed spectrum CSV row in " + path + ": " + line);
        freqs.push_back(f);
        gains.push_back(g);
    }
    if (freqs.size() < 2) throw truncated_file_error("spectrum CSV has fewer than 2 samples: " + path);

    Spectrum s;
    s.grid.start_mhz = freqs.front();
    s.grid.count = static_cast<int>(freqs.size());
    s.grid.step_mhz = (freqs.back() - freqs.front()) / (s.grid.count - 1);
    const double tol = 1e-9 * std::max(1.0, std::abs(freqs.back() - freqs.front()));
    for (int i = 0; i < s.grid.count; ++i)
        if (std::abs(freqs[static_cast<std::size_t>(i)] - s.grid.freq(i)) > tol)
            throw data_error("spectrum CSV frequency axis is not uniformly spaced: " + path);
    s.gains = std::move(gains);
    s.validate();
    return s;
}

} // namespace bfs
