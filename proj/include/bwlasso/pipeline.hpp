// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment configuration and the two end-to-end experiments:
//   exp1: BCD convergence trace, per-iteration kernel maps, full-LS baseline
//         and a standard Lasso matched to the block-weighted kernel count;
//   exp2: validation EVM of no-DPD, full LS, standard Lasso and
//         block-weighted Lasso (each non-refined and LS-refined).

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pa_sim.hpp"
#include "solver.hpp"

namespace bwlasso {

struct DpdStructureConfig {
    int memory_depth = 9;
    int max_order = 7;
    int lagging_depth = 1;
    bool include_leading = false;
    int leading_depth = 0;
    BoundaryMode boundary = BoundaryMode::ZeroPad;

    GmpStructure structure() const {
        return full_structure(memory_depth, max_order, lagging_depth, include_leading, leading_depth);
    }
};

struct StandardLassoConfig {
    /// Unset: bisection on log(lambda) to match the block-weighted kernel
    /// count.
    std::optional<double> lambda;
    /// Numerical-zero clamp only; the support is governed by lambda.
    double zero_threshold = 1e-3;
    int max_bisection_steps = 20;
};

struct ExperimentConfig {
    OfdmConfig signal;
    std::filesystem::path pa_preset = "pa_preset.coef";
    /// ILC observation noise lives in ilc.measurement_noise_db; its seed is
    /// derived from `seed`.
    IlcConfig ilc;
    /// Additive noise on the validation captures of experiment 2, in dB
    /// relative to the captured power (a receiver noise floor). Every method
    /// sees the same noise realization.
    std::optional<double> capture_noise_db;
    DpdStructureConfig dpd;
    std::optional<RegularizationSchedule> schedule;  // unset: default_schedule
    BcdConfig bcd;
    StandardLassoConfig standard_lasso;
    std::filesystem::path output_dir = "out";
    /// Seeds the validation signal and the measurement noise.
    std::uint64_t seed = 2;

    RegularizationSchedule resolved_schedule() const {
        return schedule ? *schedule : default_schedule(dpd.structure());
    }

    OfdmConfig validation_signal() const {
        OfdmConfig v = signal;
        v.seed = seed;
        return v;
    }

    void validate() const {
        signal.validate();
        ilc.validate();
        bcd.validate();
        const auto structure = dpd.structure();
        structure.validate();
        resolved_schedule().validate_for(structure.orders());
        if (standard_lasso.lambda && !(*standard_lasso.lambda > 0.0))
            throw ConfigError("standard_lasso.lambda must be positive or 'matched'");
        if (!(standard_lasso.zero_threshold >= 0.0)) throw ConfigError("standard_lasso.zero_threshold must be >= 0");
        if (standard_lasso.max_bisection_steps < 1) throw ConfigError("standard_lasso.max_bisection_steps must be >= 1");
        if (signal.seed == seed) throw ConfigError("experiment.seed must differ from signal.seed (validation needs a fresh signal)");
    }
};

// ---------------------------------------------------------------------------
// Config files
//
// One `section.key = value` per line, '#' comments. Unknown keys are
// rejected. Relative pa.preset paths resolve against the config file's
// directory; output.dir resolves against the working directory.

namespace detail {

inline std::string boundary_name(BoundaryMode m) { return m == BoundaryMode::ZeroPad ? "zero-pad" : "discard-warmup"; }

inline std::string optional_db(const std::optional<double>& v) { return v ? text::format_double(*v) : "none"; }

}  // namespace detail

/// Canonical text form. Parsing it back yields an identical config, and its
/// hash tags every output file.
inline std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream o;
    auto kv = [&o](const std::string& k, const std::string& v) { o << k << " = " << v << '\n'; };
    auto num = [](double v) { return text::format_double(v); };
    kv("signal.n_subcarriers", std::to_string(c.signal.n_subcarriers));
    kv("signal.n_active", std::to_string(c.signal.n_active));
    kv("signal.n_symbols", std::to_string(c.signal.n_symbols));
    kv("signal.oversampling", std::to_string(c.signal.oversampling_factor));
    kv("signal.constellation", to_string(c.signal.constellation));
    kv("signal.seed", std::to_string(c.signal.seed));
    kv("signal.target_rms", num(c.signal.target_rms));
    kv("signal.sample_rate_hz", num(c.signal.sample_rate_hz));
    kv("pa.preset", c.pa_preset.generic_string());
    kv("ilc.iterations", std::to_string(c.ilc.iterations));
    kv("ilc.learning_rate", num(c.ilc.learning_rate));
    kv("ilc.target_gain", c.ilc.target_gain ? num(c.ilc.target_gain->real()) + " " + num(c.ilc.target_gain->imag()) : "preset");
    kv("ilc.measurement_noise_db", detail::optional_db(c.ilc.measurement_noise_db));
    kv("ilc.divergence_margin_db", num(c.ilc.divergence_margin_db));
    kv("dpd.memory_depth", std::to_string(c.dpd.memory_depth));
    kv("dpd.max_order", std::to_string(c.dpd.max_order));
    kv("dpd.lagging_depth", std::to_string(c.dpd.lagging_depth));
    kv("dpd.include_leading", c.dpd.include_leading ? "true" : "false");
    kv("dpd.leading_depth", std::to_string(c.dpd.leading_depth));
    kv("dpd.boundary", detail::boundary_name(c.dpd.boundary));
    kv("schedule.mode", c.schedule ? "custom" : "default");
    if (c.schedule) {
        for (const auto& [k, v] : c.schedule->lambda_by_order) kv("schedule.lambda." + std::to_string(k), num(v));
        for (const auto& [k, v] : c.schedule->threshold_by_order) kv("schedule.threshold." + std::to_string(k), num(v));
    }
    kv("bcd.outer_iterations", std::to_string(c.bcd.outer_iterations));
    kv("bcd.inner_ridge_iterations", std::to_string(c.bcd.inner_ridge_iterations));
    kv("bcd.inner_tolerance", num(c.bcd.inner_tolerance));
    kv("bcd.keep_best_iterate", c.bcd.keep_best_iterate ? "true" : "false");
    kv("bcd.ridge_epsilon", num(c.bcd.ridge_epsilon));
    kv("bcd.warm_start", c.bcd.warm_start ? "true" : "false");
    kv("standard_lasso.lambda", c.standard_lasso.lambda ? num(*c.standard_lasso.lambda) : "matched");
    kv("standard_lasso.zero_threshold", num(c.standard_lasso.zero_threshold));
    kv("standard_lasso.max_bisection_steps", std::to_string(c.standard_lasso.max_bisection_steps));
    kv("validation.capture_noise_db", detail::optional_db(c.capture_noise_db));
    kv("output.dir", c.output_dir.generic_string());
    kv("experiment.seed", std::to_string(c.seed));
    return o.str();
}

inline std::string config_hash(const ExperimentConfig& c) { return text::hex64(text::fnv1a(serialize_config(c))); }

/// Applies one `key = value` setting. Throws ConfigError for unknown keys
/// and FormatError for malformed values.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value, const std::string& ctx) {
    using text::parse_bool;
    using text::parse_double;
    auto integer = [&](const std::string& v) { return text::parse_int<int>(v, ctx); };
    auto u64 = [&](const std::string& v) { return text::parse_int<std::uint64_t>(v, ctx); };
    auto opt_db = [&](const std::string& v) -> std::optional<double> {
        if (v == "none") return std::nullopt;
        return parse_double(v, ctx);
    };

    if (key == "signal.n_subcarriers") c.signal.n_subcarriers = integer(value);
    else if (key == "signal.n_active") c.signal.n_active = integer(value);
    else if (key == "signal.n_symbols") c.signal.n_symbols = integer(value);
    else if (key == "signal.oversampling") c.signal.oversampling_factor = integer(value);
    else if (key == "signal.constellation") {
        try {
            c.signal.constellation = constellation_from_string(value);
        } catch (const ConfigError& e) {
            throw FormatError(ctx + ": " + e.what());
        }
    }
    else if (key == "signal.seed") c.signal.seed = u64(value);
    else if (key == "signal.target_rms") c.signal.target_rms = parse_double(value, ctx);
    else if (key == "signal.sample_rate_hz") c.signal.sample_rate_hz = parse_double(value, ctx);
    else if (key == "pa.preset") c.pa_preset = value;
    else if (key == "ilc.iterations") c.ilc.iterations = integer(value);
    else if (key == "ilc.learning_rate") c.ilc.learning_rate = parse_double(value, ctx);
    else if (key == "ilc.target_gain") {
        if (value == "preset") {
            c.ilc.target_gain.reset();
        } else {
            const auto tok = text::split_ws(value);
            if (tok.size() != 2) throw FormatError(ctx + ": expected 'preset' or '<re> <im>'");
            c.ilc.target_gain = cplx{parse_double(tok[0], ctx), parse_double(tok[1], ctx)};
        }
    }
    else if (key == "ilc.measurement_noise_db") c.ilc.measurement_noise_db = opt_db(value);
    else if (key == "ilc.divergence_margin_db") c.ilc.divergence_margin_db = parse_double(value, ctx);
    else if (key == "dpd.memory_depth") c.dpd.memory_depth = integer(value);
    else if (key == "dpd.max_order") c.dpd.max_order = integer(value);
    else if (key == "dpd.lagging_depth") c.dpd.lagging_depth = integer(value);
    else if (key == "dpd.include_leading") c.dpd.include_leading = parse_bool(value, ctx);
    else if (key == "dpd.leading_depth") c.dpd.leading_depth = integer(value);
    else if (key == "dpd.boundary") {
        if (value == "zero-pad") c.dpd.boundary = BoundaryMode::ZeroPad;
        else if (value == "discard-warmup") c.dpd.boundary = BoundaryMode::DiscardWarmup;
        else throw FormatError(ctx + ": expected zero-pad or discard-warmup");
    }
    else if (key == "schedule.mode") {
        if (value == "default") c.schedule.reset();
        else if (value == "custom") {
            if (!c.schedule) c.schedule.emplace();
        } else {
            throw FormatError(ctx + ": expected default or custom");
        }
    }
    else if (key.rfind("schedule.lambda.", 0) == 0 || key.rfind("schedule.threshold.", 0) == 0) {
        const bool is_lambda = key.rfind("schedule.lambda.", 0) == 0;
        const auto order = text::parse_int<int>(key.substr(is_lambda ? 16 : 19), ctx);
        if (order < 0 || order % 2 != 0) throw ConfigError(ctx + ": order index must be an even k >= 0");
        if (!c.schedule) c.schedule.emplace();
        (is_lambda ? c.schedule->lambda_by_order : c.schedule->threshold_by_order)[order] = parse_double(value, ctx);
    }
    else if (key == "bcd.outer_iterations") c.bcd.outer_iterations = integer(value);
    else if (key == "bcd.inner_ridge_iterations") c.bcd.inner_ridge_iterations = integer(value);
    else if (key == "bcd.inner_tolerance") c.bcd.inner_tolerance = parse_double(value, ctx);
    else if (key == "bcd.keep_best_iterate") c.bcd.keep_best_iterate = parse_bool(value, ctx);
    else if (key == "bcd.ridge_epsilon") c.bcd.ridge_epsilon = parse_double(value, ctx);
    else if (key == "bcd.warm_start") c.bcd.warm_start = parse_bool(value, ctx);
    else if (key == "standard_lasso.lambda") {
        if (value == "matched") c.standard_lasso.lambda.reset();
        else c.standard_lasso.lambda = parse_double(value, ctx);
    }
    else if (key == "standard_lasso.zero_threshold") c.standard_lasso.zero_threshold = parse_double(value, ctx);
    else if (key == "standard_lasso.max_bisection_steps") c.standard_lasso.max_bisection_steps = integer(value);
    else if (key == "validation.capture_noise_db") c.capture_noise_db = opt_db(value);
    else if (key == "output.dir") c.output_dir = value;
    else if (key == "experiment.seed") c.seed = u64(value);
    else throw ConfigError(ctx + ": unknown key '" + key + "'");
}

/// Parses config text. `base_dir` anchors a relative pa.preset.
inline ExperimentConfig parse_config(const std::string& content, const std::string& source,
                                     const std::filesystem::path& base_dir = {}) {
    ExperimentConfig c;
    bool schedule_mode_seen = false;
    bool custom = false;
    std::set<std::string> seen;
    for (const auto& e : text::parse_entries(content, source)) {
        const auto ctx = text::where(source, e);
        if (!seen.insert(e.key).second) throw FormatError(ctx + ": duplicate key");
        if (e.key == "schedule.mode") {
            schedule_mode_seen = true;
            custom = e.value == "custom";
        }
        apply_setting(c, e.key, e.value, ctx);
    }
    if (c.schedule && schedule_mode_seen && !custom)
        throw ConfigError(source + ": schedule.lambda/threshold entries require schedule.mode = custom");
    if (c.pa_preset.is_relative() && !base_dir.empty()) c.pa_preset = base_dir / c.pa_preset;
    return c;
}

inline ExperimentConfig read_config(const std::filesystem::path& path) {
    return parse_config(read_text_file(path), path.string(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Shared training stage

struct MatchedLasso {
    double lambda = 0.0;
    CoefficientVector coeffs;
    std::size_t target_count = 0;
    /// True when the count lies within 10% of the target (or lambda was
    /// fixed by the config).
    bool matched = false;
    int steps = 0;
};

/// Bisection on log(lambda) for a standard Lasso whose kernel count is
/// within +-10% of `target`. Keeps the closest count seen; ties go to the
/// earlier step.
inline MatchedLasso match_standard_lasso(const KernelMatrix& S, const CVector& x, std::size_t target,
                                         const StandardLassoConfig& cfg, const BcdConfig& bcd) {
    const CVector xr = S.target_rows(x);
    const double lambda_max = 2.0 * (S.data().adjoint() * xr).cwiseAbs().maxCoeff();
    MatchedLasso best{0.0, CoefficientVector(S.structure()), target, false, 0};
    if (!(lambda_max > 0.0)) return best;
    double lo = std::log(lambda_max * 1e-12);
    double hi = std::log(lambda_max);
    const double tolerance = 0.1 * static_cast<double>(target);
    double best_gap = std::numeric_limits<double>::infinity();
    for (int step = 1; step <= cfg.max_bisection_steps; ++step) {
        const double mid = 0.5 * (lo + hi);
        auto w = lasso_iterated_ridge(S, x, std::exp(mid), cfg.zero_threshold, bcd);
        const auto count = kernel_count(w);
        const double gap = std::abs(static_cast<double>(count) - static_cast<double>(target));
        if (gap < best_gap) {
            best_gap = gap;
            best.lambda = std::exp(mid);
            best.coeffs = std::move(w);
            best.steps = step;
        }
        if (gap <= tolerance) break;
        if (count > target) lo = mid;
        else hi = mid;
    }
    best.matched = best_gap <= tolerance;
    return best;
}

/// Everything both experiments derive from the training signal.
struct TrainingStage {
    IqSignal stimulus;
    PaModel pa;
    IlcResult ilc;
    KernelMatrix S;
    CoefficientVector ls_full;
    BcdResult bwlasso;
    MatchedLasso lasso;
    RegularizationSchedule schedule;
};

namespace detail {
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

inline IlcConfig ilc_config_for(const ExperimentConfig& c) {
    IlcConfig ilc = c.ilc;
    ilc.noise_seed = detail::derived_seed(c.seed, 1);
    return ilc;
}

inline TrainingStage run_training(const ExperimentConfig& c) {
    c.validate();
    auto stimulus = generate_ofdm(c.signal);
    auto pa = read_pa_preset(c.pa_preset);
    auto ilc = ilc_learn(stimulus, pa, ilc_config_for(c));
    auto S = build_kernel_matrix(stimulus, c.dpd.structure(), c.dpd.boundary);
    const CVector& x = ilc.label.samples();
    auto ls_full = least_squares(S, x);
    auto schedule = c.resolved_schedule();
    auto bw = block_weighted_lasso(S, x, schedule, c.bcd);

    MatchedLasso lasso{0.0, CoefficientVector(S.structure()), kernel_count(bw.coeffs), true, 0};
    if (c.standard_lasso.lambda) {
        lasso.lambda = *c.standard_lasso.lambda;
        lasso.coeffs = lasso_iterated_ridge(S, x, lasso.lambda, c.standard_lasso.zero_threshold, c.bcd);
    } else {
        lasso = match_standard_lasso(S, x, kernel_count(bw.coeffs), c.standard_lasso, c.bcd);
    }
    return {std::move(stimulus), std::move(pa), std::move(ilc), std::move(S), std::move(ls_full), std::move(bw),
            std::move(lasso), std::move(schedule)};
}

// ---------------------------------------------------------------------------
// Outputs

/// Named output files, written together so a failed run leaves nothing
/// behind.
struct OutputSet {
    std::vector<std::pair<std::string, std::string>> files;

    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }

    const std::string& get(const std::string& name) const {
        for (const auto& [n, c] : files)
            if (n == name) return c;
        throw std::out_of_range("no output named " + name);
    }

    void write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        std::vector<std::filesystem::path> written;
        try {
            for (const auto& [name, content] : files) {
                const auto tmp = dir / (name + ".partial");
                write_text_file(tmp, content);
                written.push_back(tmp);
            }
            for (const auto& [name, _] : files) std::filesystem::rename(dir / (name + ".partial"), dir / name);
        } catch (...) {
            std::error_code ec;
            for (const auto& p : written) std::filesystem::remove(p, ec);
            throw;
        }
    }
};

inline std::string header_line(const ExperimentConfig& c) { return "# config-hash: " + config_hash(c) + "\n"; }

inline std::string coefficient_file(const ExperimentConfig& c, const CoefficientVector& w, const std::string& what) {
    return format_coefficients(w, {"config-hash: " + config_hash(c), what});
}

// ---------------------------------------------------------------------------
// Experiment 1

struct KernelMap {
    std::string label;  // "bwlasso-iter-<r>" or "lasso-matched"
    CoefficientVector coeffs;
};

struct Experiment1Result {
    FitTrace trace;
    std::vector<KernelMap> kernel_maps;
    double ls_full_nmse_db = 0.0;
    std::size_t total_kernels = 0;
    CoefficientVector bwlasso;
    int selected_iteration = 0;
    MatchedLasso lasso;
    double ilc_error_db = 0.0;
    OutputSet outputs;
};

inline std::string format_kernel_maps(const std::vector<KernelMap>& maps) {
    std::ostringstream out;
    out << "map,branch,k,l,m,magnitude\n";
    for (const auto& m : maps) {
        for (Eigen::Index j = 0; j < m.coeffs.size(); ++j) {
            const auto& d = m.coeffs.columns()[static_cast<std::size_t>(j)];
            out << m.label << ',' << to_string(d.branch) << ',' << d.k << ',' << d.l << ',' << d.m << ','
                << text::format_double(std::abs(m.coeffs[j])) << '\n';
        }
    }
    return out.str();
}

inline Experiment1Result run_experiment1(const ExperimentConfig& c) {
    auto t = run_training(c);
    const CVector x = t.S.target_rows(t.ilc.label.samples());

    Experiment1Result r{t.bwlasso.trace, {}, nmse_db(t.S.data() * t.ls_full.values(), x),
                        static_cast<std::size_t>(t.S.cols()), t.bwlasso.coeffs, t.bwlasso.selected_iteration,
                        t.lasso, t.ilc.error_db.back(), {}};
    for (const auto& rec : r.trace.records)
        r.kernel_maps.push_back({"bwlasso-iter-" + std::to_string(rec.iteration), CoefficientVector(t.S.structure(), rec.coefficients)});
    r.kernel_maps.push_back({"lasso-matched", t.lasso.coeffs});

    const auto head = header_line(c);
    r.outputs.add("exp1_trace.csv", head + format_trace_csv(r.trace));
    r.outputs.add("exp1_kernel_maps.csv", head + format_kernel_maps(r.kernel_maps));

    std::ostringstream summary;
    summary << head << "quantity,value\n";
    summary << "ilc_error_db," << text::format_double(r.ilc_error_db) << '\n';
    summary << "total_kernels," << r.total_kernels << '\n';
    summary << "ls_full_nmse_db," << text::format_double(r.ls_full_nmse_db) << '\n';
    summary << "bwlasso_selected_iteration," << r.selected_iteration << '\n';
    summary << "bwlasso_nmse_db," << text::format_double(r.trace.records[static_cast<std::size_t>(r.selected_iteration - 1)].nmse_db) << '\n';
    summary << "bwlasso_kernel_count," << kernel_count(r.bwlasso) << '\n';
    summary << "bwlasso_depth," << effective_memory_depth(r.bwlasso) << '\n';
    summary << "bwlasso_max_lag," << max_lag(r.bwlasso) << '\n';
    summary << "bwlasso_rejected_updates," << r.trace.rejected_updates << '\n';
    summary << "lasso_lambda," << text::format_double(r.lasso.lambda) << '\n';
    summary << "lasso_matched," << (r.lasso.matched ? "true" : "false") << '\n';
    summary << "lasso_kernel_count," << kernel_count(r.lasso.coeffs) << '\n';
    summary << "lasso_depth," << effective_memory_depth(r.lasso.coeffs) << '\n';
    summary << "lasso_max_lag," << max_lag(r.lasso.coeffs) << '\n';
    summary << "lasso_nmse_db," << text::format_double(nmse_db(t.S.data() * r.lasso.coeffs.values(), x)) << '\n';
    r.outputs.add("exp1_summary.csv", summary.str());

    r.outputs.add("exp1_ls_full.coef", coefficient_file(c, t.ls_full, "full-structure least squares"));
    r.outputs.add("exp1_bwlasso.coef", coefficient_file(c, r.bwlasso, "block-weighted lasso, selected iterate"));
    r.outputs.add("exp1_lasso.coef", coefficient_file(c, r.lasso.coeffs, "standard lasso, matched kernel count"));
    return r;
}

// ---------------------------------------------------------------------------
// Experiment 2

struct ComparisonRow {
    std::string method;
    double evm_db = 0.0;
    double nmse_db = 0.0;
    std::size_t kernel_count = 0;
    int effective_memory_depth = -1;
    CoefficientVector coeffs;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    double ilc_error_db = 0.0;

    const ComparisonRow& row(const std::string& method) const {
        for (const auto& r : rows)
            if (r.method == method) return r;
        throw std::out_of_range("no row for method " + method);
    }
};

inline std::string format_report_csv(const ComparisonReport& rep) {
    std::ostringstream out;
    out << "method,evm_db,nmse_db,kernel_count,effective_memory_depth\n";
    for (const auto& r : rep.rows)
        out << r.method << ',' << text::format_double(r.evm_db) << ',' << text::format_double(r.nmse_db) << ','
            << r.kernel_count << ',' << r.effective_memory_depth << '\n';
    return out.str();
}

struct Experiment2Result {
    ComparisonReport report;
    OutputSet outputs;
};

/// PA output plus, when `noise_db` is set, complex Gaussian noise at that
/// level relative to the output power.
inline CVector capture(const CVector& signal, const PaModel& pa, const std::optional<double>& noise_db,
                       std::uint64_t noise_seed) {
    CVector y = pa_forward(signal, pa);
    if (noise_db) add_noise(y, *noise_db, noise_seed);
    return y;
}

inline Experiment2Result run_experiment2(const ExperimentConfig& c) {
    auto t = run_training(c);
    const auto validation = generate_ofdm(c.validation_signal());
    const CVector& sv = validation.samples();
    const cplx gain = c.ilc.target_gain.value_or(t.pa.smallsignal_gain);

    // Identity predistorter for the no-DPD row.
    GmpStructure identity_structure;
    identity_structure.aligned_orders = {0};
    identity_structure.aligned_lags = {0};
    CoefficientVector identity(identity_structure);
    identity.values()[0] = 1.0;

    auto refine = [&](const CoefficientVector& w) {
        const auto support = w.support();
        if (support.empty()) return w;
        return ls_refine(t.S, t.ilc.label.samples(), support);
    };

    const std::vector<std::pair<std::string, CoefficientVector>> methods{
        {"no-dpd", identity},
        {"ls-full", t.ls_full},
        {"lasso-nr", t.lasso.coeffs},
        {"lasso-r", refine(t.lasso.coeffs)},
        {"bwlasso-nr", t.bwlasso.coeffs},
        {"bwlasso-r", refine(t.bwlasso.coeffs)},
    };

    Experiment2Result result;
    result.report.ilc_error_db = t.ilc.error_db.back();
    const auto noise_seed = detail::derived_seed(c.seed, 2);
    for (const auto& [name, w] : methods) {
        const CVector predistorted = apply_model(sv, w);
        const CVector y = capture(predistorted, t.pa, c.capture_noise_db, noise_seed);
        const CVector normalized = y / gain;
        const auto metrics = evm_db(normalized, sv);
        result.report.rows.push_back(
            {name, metrics.evm_db, metrics.nmse_db, kernel_count(w), effective_memory_depth(w), w});
    }

    const auto head = header_line(c);
    result.outputs.add("exp2_report.csv", head + format_report_csv(result.report));
    for (const auto& row : result.report.rows)
        result.outputs.add("exp2_" + row.method + ".coef", coefficient_file(c, row.coeffs, row.method));
    return result;
}

}  // namespace bwlasso
