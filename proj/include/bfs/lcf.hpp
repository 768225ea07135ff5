#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bfs/errors.hpp"
#include "bfs/spectrum.hpp"

namespace bfs {

struct FitConfig {
    int max_iterations = 200;
    double tolerance = 1e-10;    // relative R^2 improvement below which the fit stops
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 10.0;
    double lambda_max = 1e12;
    bool fit_offset = false;     // add a constant baseline term to the model

    void validate() const {
        if (max_iterations < 1) throw domain_error("fit needs at least one iteration");
        if (!(tolerance > 0.0)) throw domain_error("fit tolerance must be > 0");
        if (!(lambda0 > 0.0) || !(lambda_up > 1.0) || !(lambda_down > 1.0))
            throw domain_error("damping controls must be positive (up/down factors > 1)");
    }
};

struct FitResult {
    LorentzianParams params;
    double offset = 0.0;         // fitted baseline, 0 unless fit_offset
    double r_squared = 0.0;      // residual sum of squares at the solution
    int iterations = 0;
    bool converged = false;
    bool bounds_hit = false;     // some step was projected back into the parameter box
};

// Starting point read off the smoothed spectrum: peak position, peak height
// above the lowest-decile baseline, and the half-maximum width.
inline LorentzianParams initial_guess(const Spectrum& s) {
    s.validate();
    if (s.grid.count < 5) throw domain_error("initial guess needs at least 5 samples");
    const PeakEstimate pe = estimate_peak(s);
    LorentzianParams p;
    p.bfs_mhz = pe.peak_freq_mhz;
    p.gain = pe.peak_value - pe.baseline;
    p.linewidth_mhz = pe.fwhm_mhz;
    return p;
}

inline double residual_r2(const LorentzianParams& p, const Spectrum& s) {
    s.validate();
    p.validate();
    double sum = 0.0;
    for (int i = 0; i < s.grid.count; ++i) {
        const double d = lorentzian_gain(p, s.grid.freq(i)) - s.gains[static_cast<std::size_t>(i)];
        sum += d * d;
    }
    return sum;
}

namespace detail {

struct LcfBounds {
    double gain_min, v_min, v_max, w_min, w_max;
};

inline LcfBounds lcf_bounds(const FrequencyGrid& grid) {
    const double span = grid.span();
    return {1e-12,
            grid.start_mhz - 0.5 * span, grid.start_mhz + 1.5 * span,
            grid.step_mhz, span};
}

// theta = (gain, v_B, linewidth[, offset]); returns true if clamping occurred.
inline bool project_into_bounds(double* theta, const LcfBounds& b) {
    bool hit = false;
    auto clamp_one = [&](double& x, double lo, double hi) {
        const double c = std::clamp(x, lo, hi);
        if (c != x) { x = c; hit = true; }
    };
    clamp_one(theta[0], b.gain_min, std::numeric_limits<double>::infinity());
    clamp_one(theta[1], b.v_min, b.v_max);
    clamp_one(theta[2], b.w_min, b.w_max);
    return hit;
}

inline double lcf_r2(const double* theta, bool with_offset, const Spectrum& s) {
    const double gain = theta[0], vb = theta[1], w = theta[2];
    const double c = with_offset ? theta[3] : 0.0;
    double sum = 0.0;
    for (int i = 0; i < s.grid.count; ++i) {
        const double d = 2.0 * (s.grid.freq(i) - vb) / w;
        const double r = gain / (1.0 + d * d) + c - s.gains[static_cast<std::size_t>(i)];
        sum += r * r;
    }
    return sum;
}

} // namespace detail

// Damped Gauss-Newton (Levenberg-Marquardt) minimization of the squared
// residual over (G_B, v_B, linewidth) with analytic derivatives, starting
// from an explicit parameter set. Steps that leave the parameter box are
// projected back in, not rejected.
inline FitResult fit_lorentzian_from(const Spectrum& s, const LorentzianParams& guess,
                                     const FitConfig& cfg = {}) {
    s.validate();
    cfg.validate();
    guess.validate();
    const detail::LcfBounds bounds = detail::lcf_bounds(s.grid);
    const int np = cfg.fit_offset ? 4 : 3;

    double theta[4] = {guess.gain, guess.bfs_mhz, guess.linewidth_mhz, 0.0};
    FitResult res;
    res.bounds_hit = detail::project_into_bounds(theta, bounds);

    using Mat4 = Eigen::Matrix<double, 4, 4>;
    using Vec4 = Eigen::Matrix<double, 4, 1>;

    double r2 = detail::lcf_r2(theta, cfg.fit_offset, s);
    double lambda = cfg.lambda0;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        res.iterations = iter;

        // Accumulate J^T J and J^T r over the grid.
        Mat4 jtj = Mat4::Zero();
        Vec4 jtr = Vec4::Zero();
        const double gain = theta[0], vb = theta[1], w = theta[2];
        const double c = cfg.fit_offset ? theta[3] : 0.0;
        for (int i = 0; i < s.grid.count; ++i) {
            const double d = 2.0 * (s.grid.freq(i) - vb) / w;
            const double denom = 1.0 + d * d;
            const double model = gain / denom + c;
            const double resid = model - s.gains[static_cast<std::size_t>(i)];
            double j[4];
            j[0] = 1.0 / denom;
            j[1] = 4.0 * gain * d / (w * denom * denom);
            j[2] = 2.0 * gain * d * d / (w * denom * denom);
            j[3] = 1.0;
            for (int a = 0; a < np; ++a) {
                for (int b = a; b < np; ++b) jtj(a, b) += j[a] * j[b];
                jtr(a) += j[a] * resid;
            }
        }
        for (int a = 0; a < np; ++a)
            for (int b = 0; b < a; ++b) jtj(a, b) = jtj(b, a);

        // Inner damping loop: retry the solve with larger lambda until the
        // step reduces R^2 (or the damping cap stalls the fit).
        bool accepted = false;
        while (true) {
            Mat4 damped = jtj;
            for (int a = 0; a < np; ++a) damped(a, a) += lambda * jtj(a, a);

            Eigen::Matrix<double, 4, 1> delta = Vec4::Zero();
            delta.head(np) = damped.topLeftCorner(np, np).ldlt().solve(-jtr.head(np));
            const bool solve_ok = delta.head(np).allFinite();

            double cand[4] = {theta[0] + delta(0), theta[1] + delta(1),
                              theta[2] + delta(2), theta[3] + delta(3)};
            bool clamped = false;
            if (solve_ok) clamped = detail::project_into_bounds(cand, bounds);

            const double r2_new = solve_ok ? detail::lcf_r2(cand, cfg.fit_offset, s)
                                           : std::numeric_limits<double>::infinity();
            if (solve_ok && r2_new <= r2) {
                const double improvement = r2 - r2_new;
                std::copy(cand, cand + 4, theta);
                res.bounds_hit = res.bounds_hit || clamped;
                lambda = std::max(lambda / cfg.lambda_down, 1e-15);
                accepted = true;
                if (improvement <= cfg.tolerance * std::max(r2, 1e-300)) res.converged = true;
                r2 = r2_new;
                break;
            }
            lambda *= cfg.lambda_up;
            if (lambda > cfg.lambda_max) break;
        }

        if (!accepted) {
            // Damping cap reached without an acceptable step: the fit is at a
            // stationary point within numerical resolution.
            res.converged = true;
            break;
        }
        if (res.converged) break;
    }

    res.params.gain = theta[0];
    res.params.bfs_mhz = theta[1];
    res.params.linewidth_mhz = theta[2];
    res.offset = cfg.fit_offset ? theta[3] : 0.0;
    res.r_squared = r2;
    return res;
}

// Convenience entry point seeded by the automatic initial guess.
inline FitResult fit_lorentzian(const Spectrum& s, const FitConfig& cfg = {}) {
    return fit_lorentzian_from(s, initial_guess(s), cfg);
}

inline double fit_bfs(const Spectrum& s, const FitConfig& cfg = {}) {
    return fit_lorentzian(s, cfg).params.bfs_mhz;
}

} // namespace bfs
