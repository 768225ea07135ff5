#pragma once

#include <algorithm>
#include <cmath>

#include "bfs/errors.hpp"
#include "bfs/spectrum.hpp"

namespace bfs {

inline constexpr double kTrainedWindowMhz = 156.0;
inline constexpr int kTrainedWindowPoints = 157;

struct ScanConfig {
    int step_mhz = 1;       // integer scanning step, 1..10
    double range_mhz = 156.0;

    void validate() const;
};

// Smallest scanning range usable at a given step: the range must cover the
// trained 156 MHz window and be an integer multiple of the step.
inline double min_scan_range(int step_mhz) {
    if (step_mhz < 1 || step_mhz > 10) throw domain_error("scanning step must be an integer in 1..10");
    const int k = (static_cast<int>(kTrainedWindowMhz) + step_mhz - 1) / step_mhz;
    return static_cast<double>(k * step_mhz);
}

inline void ScanConfig::validate() const {
    if (step_mhz < 1 || step_mhz > 10) throw domain_error("scanning step must be an integer in 1..10");
    const double k = range_mhz / step_mhz;
    if (std::abs(k - std::llround(k)) > 1e-9)
        throw domain_error("scanning range must be an integer multiple of the step");
    if (range_mhz < min_scan_range(step_mhz) - 1e-9)
        throw domain_error("scanning range below the minimum for this step");
}

// Reshape a coarser scan onto a 1 MHz grid over the same span. Output points
// that coincide with input samples copy them bitwise; everything in between is
// linear. No extrapolation ever happens.
inline Spectrum linear_interpolate_to_1mhz(const Spectrum& s) {
    s.validate();
    const double step_d = s.grid.step_mhz;
    const int step = static_cast<int>(std::llround(step_d));
    if (std::abs(step_d - step) > 1e-9 || step < 1 || step > 10)
        throw domain_error("interpolation expects an integer scanning step in 1..10");
    if (s.grid.span() < kTrainedWindowMhz - 1e-9)
        throw domain_error("scanning range below 156 MHz cannot feed the trained network");

    if (step == 1) return s;

    Spectrum out;
    out.grid = FrequencyGrid{s.grid.start_mhz, 1.0, static_cast<int>(std::llround(s.grid.span())) + 1};
    out.gains.resize(static_cast<std::size_t>(out.grid.count));
    for (int j = 0; j < out.grid.count; ++j) {
        const int i = j / step;
        const int rem = j % step;
        if (rem == 0) {
            out.gains[static_cast<std::size_t>(j)] = s.gains[static_cast<std::size_t>(i)];
        } else {
            const double t = static_cast<double>(rem) / step;
            out.gains[static_cast<std::size_t>(j)] =
                (1.0 - t) * s.gains[static_cast<std::size_t>(i)] +
                t * s.gains[static_cast<std::size_t>(i) + 1];
        }
    }
    return out;
}

// 157-point slice of a 1 MHz spectrum centered on the smoothed power peak,
// clamped to stay inside the spectrum. For even window lengths the center
// rounds left.
inline Spectrum select_window(const Spectrum& s, int window_points = kTrainedWindowPoints) {
    s.validate();
    if (std::abs(s.grid.step_mhz - 1.0) > 1e-9)
        throw domain_error("window selection expects a 1 MHz grid; interpolate first");
    if (window_points < 2) throw domain_error("window needs at least 2 points");
    if (s.grid.count < window_points)
        throw domain_error("spectrum shorter than the requested window");
    if (s.grid.count == window_points) return s;

    const PeakEstimate pe = estimate_peak(s);
    const int half = (window_points - 1) / 2;
    const int start = std::clamp(pe.peak_index - half, 0, s.grid.count - window_points);

    Spectrum out;
    out.grid = FrequencyGrid{s.grid.freq(start), 1.0, window_points};
    out.gains.assign(s.gains.begin() + start, s.gains.begin() + start + window_points);
    return out;
}

// Full input adapter: interpolate to 1 MHz, then cut the trained window. The
// result's grid start carries the window offset, so a predicted in-window BFS
// is already on the original spectrum's frequency axis.
inline Spectrum prepare_input(const Spectrum& s) {
    return select_window(linear_interpolate_to_1mhz(s), kTrainedWindowPoints);
}

} // namespace bfs
