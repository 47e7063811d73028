// SPDX-License-Identifier: Apache-2.0
#pragma once

// Simulated power amplifier and the iterative learning control (ILC) loop
// that produces DPD training labels.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "gmp.hpp"
#include "rng.hpp"

namespace bwlasso {

/// A PA described by its own GMP, followed by an optional envelope clip.
struct PaModel {
    CoefficientVector coefficients;
    cplx smallsignal_gain{1.0, 0.0};
    std::optional<double> saturation_level;
};

inline CVector pa_forward(const CVector& input, const PaModel& pa) {
    CVector y = apply_model(input, pa.coefficients);
    if (pa.saturation_level) {
        const double sat = *pa.saturation_level;
        for (Eigen::Index n = 0; n < y.size(); ++n) {
            const double mag = std::abs(y[n]);
            if (mag > sat) y[n] *= sat / mag;
        }
    }
    return y;
}

inline IqSignal pa_forward(const IqSignal& input, const PaModel& pa) {
    return input.with_samples(pa_forward(input.samples(), pa));
}

/// Seeded draw of PA coefficients over `structure`.
///
/// Lag-0 aligned kernels follow the Taylor series of the smooth limiter
/// x / sqrt(1 + |x / A|^2), i.e. 1, -1/(2A^2), 3/(8A^4), -5/(16A^6), ...,
/// with the nonlinear ones rotated by `am_pm_rad`. Nonlinear kernels with
/// order k <= memory_max_order whose deepest sample l (+m) is within
/// memory_depth get
///   memory_scale * |series_k| * memory_decay^l * u
/// with u a random unit phasor. The linear response is memoryless and all
/// other kernels are zero.
///
/// One complex Gaussian is drawn per kernel in canonical order whether or
/// not it is used, so the stream only depends on the structure.
struct PaDrawParams {
    std::uint64_t seed = 1;
    cplx smallsignal_gain{1.0, 0.0};
    double compression_amplitude = 1.0;
    double am_pm_rad = 0.0;
    double memory_scale = 1.0;
    double memory_decay = 0.8;
    int memory_depth = 4;
    int memory_max_order = 4;
    std::optional<double> saturation_level;

    void validate() const {
        if (!(compression_amplitude > 0.0)) throw ConfigError("pa draw: compression amplitude must be positive");
        if (!(memory_scale >= 0.0)) throw ConfigError("pa draw: memory scale must be >= 0");
        if (!(memory_decay >= 0.0)) throw ConfigError("pa draw: memory decay must be >= 0");
        if (memory_depth < 0 || memory_max_order < 0) throw ConfigError("pa draw: memory depth and order must be >= 0");
        if (smallsignal_gain == cplx{0.0, 0.0}) throw ConfigError("pa draw: small-signal gain must be nonzero");
        if (saturation_level && !(*saturation_level > 0.0)) throw ConfigError("pa draw: saturation level must be positive");
    }
};

/// Series coefficient of |x|^k in x / sqrt(1 + |x|^2 / A^2): binom(-1/2, k/2) / A^k.
inline double limiter_series(int k, double amplitude) {
    double c = 1.0;
    for (int n = 1; n <= k / 2; ++n) c *= (0.5 - n) / n;  // binom(-1/2, n) recurrence
    return c / std::pow(amplitude, k);
}

inline PaModel draw_pa_model(const GmpStructure& structure, const PaDrawParams& params) {
    params.validate();
    PaModel pa{CoefficientVector(structure), params.smallsignal_gain, params.saturation_level};
    Rng rng(params.seed);
    const cplx rotation = std::polar(1.0, params.am_pm_rad);
    for (Eigen::Index j = 0; j < pa.coefficients.size(); ++j) {
        const auto& d = pa.coefficients.columns()[static_cast<std::size_t>(j)];
        const cplx z = rng.complex_gaussian();
        const cplx phasor = z / std::abs(z);
        const double series = limiter_series(d.k, params.compression_amplitude);
        cplx c{0.0, 0.0};
        if (d.branch == Branch::Aligned && d.l == 0) {
            c = d.k == 0 ? cplx{1.0, 0.0} : series * rotation;
        } else if (d.k > 0 && d.k <= params.memory_max_order && d.deepest_sample() <= params.memory_depth) {
            c = params.memory_scale * std::abs(series) * std::pow(params.memory_decay, d.l) * phasor;
        }
        pa.coefficients.values()[j] = c * params.smallsignal_gain;
    }
    return pa;
}

// ---------------------------------------------------------------------------
// PA preset files: the coefficient-file format plus
//   pa.smallsignal_gain = <re> <im>
//   pa.saturation_level = <value> | none

inline std::string format_pa_preset(const PaModel& pa, const std::vector<std::string>& header_comment = {}) {
    std::vector<std::pair<std::string, std::string>> extra{
        {"pa.smallsignal_gain",
         text::format_double(pa.smallsignal_gain.real()) + " " + text::format_double(pa.smallsignal_gain.imag())},
        {"pa.saturation_level", pa.saturation_level ? text::format_double(*pa.saturation_level) : "none"},
    };
    return format_coefficients(pa.coefficients, header_comment, extra);
}

inline PaModel parse_pa_preset(const std::string& content, const std::string& source) {
    auto file = parse_coefficients(content, source);
    PaModel pa{std::move(file.coeffs), {1.0, 0.0}, std::nullopt};
    bool have_gain = false;
    for (const auto& e : file.extra) {
        const auto ctx = text::where(source, e);
        if (e.key == "pa.smallsignal_gain") {
            const auto tok = text::split_ws(e.value);
            if (tok.size() != 2) throw FormatError(ctx + ": expected '<re> <im>'");
            pa.smallsignal_gain = {text::parse_double(tok[0], ctx), text::parse_double(tok[1], ctx)};
            if (pa.smallsignal_gain == cplx{0.0, 0.0}) throw FormatError(ctx + ": gain must be nonzero");
            have_gain = true;
        } else if (e.key == "pa.saturation_level") {
            if (e.value != "none") {
                const double sat = text::parse_double(e.value, ctx);
                if (!(sat > 0.0)) throw FormatError(ctx + ": saturation level must be positive");
                pa.saturation_level = sat;
            }
        } else {
            throw FormatError(ctx + ": unknown key");
        }
    }
    if (!have_gain) throw FormatError(source + ": missing 'pa.smallsignal_gain'");
    return pa;
}

inline PaModel read_pa_preset(const std::filesystem::path& path) {
    return parse_pa_preset(read_text_file(path), path.string());
}

inline void write_pa_preset(const PaModel& pa, const std::filesystem::path& path,
                            const std::vector<std::string>& header_comment = {}) {
    write_text_file(path, format_pa_preset(pa, header_comment));
}

/// Adds circular complex Gaussian noise at `level_db` relative to the mean
/// power of `y`.
inline void add_noise(CVector& y, double level_db, Rng& rng) {
    if (y.size() == 0) return;
    const double power = y.squaredNorm() / static_cast<double>(y.size());
    const double sigma = std::sqrt(power * std::pow(10.0, level_db / 10.0));
    for (Eigen::Index n = 0; n < y.size(); ++n) y[n] += sigma * rng.complex_gaussian();
}

inline void add_noise(CVector& y, double level_db, std::uint64_t seed) {
    Rng rng(seed);
    add_noise(y, level_db, rng);
}

// ---------------------------------------------------------------------------
// Iterative learning control

struct IlcConfig {
    int iterations = 30;
    double learning_rate = 0.5;
    /// Linearization target. Unset means the PA's small-signal gain.
    std::optional<cplx> target_gain;
    /// Additive complex Gaussian noise on each PA observation, in dB
    /// relative to the observed output power. Unset means noiseless.
    std::optional<double> measurement_noise_db;
    std::uint64_t noise_seed = 1;
    /// An iteration counts as an increase only when the error rises by more
    /// than this. Zero is the strict rule; with measurement noise the error
    /// jitters around its floor and needs some slack.
    double divergence_margin_db = 0.0;

    void validate() const {
        if (iterations < 1) throw ConfigError("ilc: iterations must be >= 1");
        if (!(learning_rate >= 0.0 && learning_rate <= 1.0))
            throw ConfigError("ilc: learning rate must lie in [0, 1]");
        if (target_gain && *target_gain == cplx{0.0, 0.0}) throw ConfigError("ilc: target gain must be nonzero");
        if (!(divergence_margin_db >= 0.0)) throw ConfigError("ilc: divergence margin must be >= 0");
    }
};

struct IlcResult {
    IqSignal label;
    /// nmse_db(pa(x_i) / G, s) for x_0 = s, x_1, ..., x_iterations.
    std::vector<double> error_db;
};

/// Proportional ILC: x_{i+1} = x_i + mu (s - pa(x_i) / G), starting from
/// x_0 = s. Aborts with DivergenceError when the error grows three times in
/// a row.
inline IlcResult ilc_learn(const IqSignal& stimulus, const PaModel& pa, const IlcConfig& config) {
    config.validate();
    const cplx gain = config.target_gain.value_or(pa.smallsignal_gain);
    const CVector& s = stimulus.samples();
    std::optional<Rng> noise;
    if (config.measurement_noise_db) noise.emplace(config.noise_seed);

    auto observe = [&](const CVector& x) {
        CVector y = pa_forward(x, pa);
        if (noise) add_noise(y, *config.measurement_noise_db, *noise);
        return CVector(y / gain);
    };

    CVector x = s;
    std::vector<double> errors;
    int rising = 0;
    for (int i = 0;; ++i) {
        const CVector y = observe(x);
        const double err = nmse_db(y, s);
        if (!std::isfinite(err)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "ilc: PA output became non-finite at iteration %d; reduce the learning rate mu=%g",
                          i, config.learning_rate);
            throw DivergenceError(buf);
        }
        if (!errors.empty() && err > errors.back() + config.divergence_margin_db) {
            if (++rising >= 3) {
                char buf[160];
                std::snprintf(buf, sizeof buf,
                              "ilc: error increased for 3 consecutive iterations (%.2f dB at iteration %d); "
                              "reduce the learning rate mu=%g",
                              err, i, config.learning_rate);
                throw DivergenceError(buf);
            }
        } else {
            rising = 0;
        }
        errors.push_back(err);
        if (i == config.iterations) break;
        x += config.learning_rate * (s - y);
    }
    return {stimulus.with_samples(std::move(x)), std::move(errors)};
}

}  // namespace bwlasso
