// SPDX-License-Identifier: Apache-2.0
//
// bwlasso: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or format
// error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bwlasso/bwlasso.hpp"

namespace {

using namespace bwlasso;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Options shared by every subcommand that reads an experiment config.
struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;

    void attach(CLI::App* app, bool required = true) {
        auto* opt = app->add_option("-c,--config", path, "Experiment config file");
        if (required) opt->required();
        app->add_option("--set", overrides, "Override a config entry, KEY=VALUE (repeatable)");
    }

    ExperimentConfig load() const {
        ExperimentConfig c = path.empty() ? ExperimentConfig{} : read_config(path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
            const std::string key{text::trim(kv.substr(0, eq))};
            const std::string value{text::trim(kv.substr(eq + 1))};
            apply_setting(c, key, value, "--set " + key);
        }
        return c;
    }
};

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

/// Deepest subcommand that was selected on the command line.
CLI::App* active_app(CLI::App* app) {
    for (auto* sub : app->get_subcommands()) return active_app(sub);
    return app;
}

/// "did you mean" hint for the first unexpected argument, if any option
/// name is close enough.
std::string suggestion(CLI::App* app, const std::vector<std::string>& extras) {
    const auto flag = std::find_if(extras.begin(), extras.end(), [](const std::string& a) { return a.rfind("-", 0) == 0; });
    if (flag == extras.end()) return {};
    std::string given = *flag;
    const auto eq = given.find('=');
    if (eq != std::string::npos) given.resize(eq);
    given.erase(0, given.find_first_not_of('-'));
    std::string best;
    std::size_t best_d = 3;  // suggest only near misses
    for (const auto* opt : app->get_options()) {
        for (const auto& name : opt->get_lnames()) {
            const auto d = edit_distance(given, name);
            if (d < best_d) best_d = d, best = "--" + name;
        }
    }
    return best.empty() ? std::string{} : "did you mean '" + best + "'?";
}

void write_outputs(const OutputSet& outputs, const fs::path& dir) {
    outputs.write(dir);
    for (const auto& [name, _] : outputs.files) std::cout << (dir / name).string() << '\n';
}

std::string format_metrics(const MetricReport& m, const CoefficientVector* model) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "evm_db=%.4f nmse_db=%.4f gain_re=%.6f gain_im=%.6f", m.evm_db, m.nmse_db,
                  m.aligned_gain.real(), m.aligned_gain.imag());
    std::string line = buf;
    if (model)
        line += " kernel_count=" + std::to_string(kernel_count(*model)) +
                " depth=" + std::to_string(effective_memory_depth(*model));
    return line;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Block-weighted Lasso for sparse GMP digital predistortion"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    // gen-signal
    auto* gen = app.add_subcommand("gen-signal", "Generate the OFDM training (or validation) signal");
    ConfigArgs gen_cfg;
    gen_cfg.attach(gen);
    std::string gen_out;
    bool gen_validation = false;
    gen->add_option("-o,--out", gen_out, "Output IQ file")->required();
    gen->add_flag("--validation", gen_validation, "Use experiment.seed instead of signal.seed");

    // sim-pa
    auto* sim = app.add_subcommand("sim-pa", "Pass an IQ file through the configured PA preset");
    ConfigArgs sim_cfg;
    sim_cfg.attach(sim);
    std::string sim_in, sim_out;
    sim->add_option("-i,--in", sim_in, "Input IQ file")->required();
    sim->add_option("-o,--out", sim_out, "Output IQ file")->required();

    // ilc
    auto* ilc = app.add_subcommand("ilc", "Learn the DPD training label by iterative learning control");
    ConfigArgs ilc_cfg;
    ilc_cfg.attach(ilc);
    std::string ilc_in, ilc_out, ilc_csv;
    ilc->add_option("-i,--in", ilc_in, "Stimulus IQ file")->required();
    ilc->add_option("-o,--out", ilc_out, "Label IQ file")->required();
    ilc->add_option("--error-csv", ilc_csv, "Write the per-iteration error to this CSV");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a GMP DPD model");
    fit->require_subcommand(1);
    struct FitArgs {
        ConfigArgs cfg;
        std::string input, target, out, trace;
        double lambda = 0.0;
        double zero_threshold = -1.0;
    };
    FitArgs fa;
    auto fit_common = [&fa](CLI::App* sub) {
        fa.cfg.attach(sub);
        sub->add_option("-i,--input", fa.input, "Stimulus IQ file (model input)")->required();
        sub->add_option("-t,--target", fa.target, "Label IQ file (model output)")->required();
        sub->add_option("-o,--out", fa.out, "Output coefficient file")->required();
    };
    auto* fit_ls = fit->add_subcommand("ls", "Least squares over the full structure");
    fit_common(fit_ls);
    auto* fit_lasso = fit->add_subcommand("lasso", "Standard Lasso with one lambda");
    fit_common(fit_lasso);
    fit_lasso->add_option("--lambda", fa.lambda, "Regularization weight")->required()->check(CLI::PositiveNumber);
    fit_lasso->add_option("--zero-threshold", fa.zero_threshold,
                          "Clamp |w| below this to zero (default: standard_lasso.zero_threshold)");
    auto* fit_bw = fit->add_subcommand("bwlasso", "Block-weighted Lasso by block coordinate descent");
    fit_common(fit_bw);
    fit_bw->add_option("--trace", fa.trace, "Write the per-iteration trace CSV here");

    // refine
    auto* refine = app.add_subcommand("refine", "Least-squares refit on a model's support");
    ConfigArgs ref_cfg;
    ref_cfg.attach(refine);
    std::string ref_model, ref_input, ref_target, ref_out;
    refine->add_option("-m,--model", ref_model, "Sparse coefficient file")->required();
    refine->add_option("-i,--input", ref_input, "Stimulus IQ file")->required();
    refine->add_option("-t,--target", ref_target, "Label IQ file")->required();
    refine->add_option("-o,--out", ref_out, "Output coefficient file")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Apply a model and report EVM/NMSE against a reference");
    std::string ev_model, ev_signal, ev_reference, ev_pa;
    evaluate->add_option("-m,--model", ev_model, "Coefficient file")->required();
    evaluate->add_option("-s,--signal", ev_signal, "Input IQ file")->required();
    evaluate->add_option("-r,--reference", ev_reference, "Reference IQ file")->required();
    evaluate->add_option("--pa", ev_pa, "Pass the model output through this PA preset (normalized by its gain)");

    // exp1 / exp2
    auto* exp1 = app.add_subcommand("exp1", "Experiment 1: BCD trace, kernel maps, matched standard Lasso");
    ConfigArgs e1_cfg;
    e1_cfg.attach(exp1);
    std::string e1_out;
    exp1->add_option("-o,--out", e1_out, "Output directory (default: output.dir)");
    auto* exp2 = app.add_subcommand("exp2", "Experiment 2: validation EVM comparison");
    ConfigArgs e2_cfg;
    e2_cfg.attach(exp2);
    std::string e2_out;
    exp2->add_option("-o,--out", e2_out, "Output directory (default: output.dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ExtrasError& e) {
        const int rc = app.exit(e);
        const auto hint = suggestion(active_app(&app), active_app(&app)->remaining());
        if (!hint.empty()) std::cerr << hint << '\n';
        return rc == 0 ? 0 : kExitUsage;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen) {
            const auto c = gen_cfg.load();
            c.signal.validate();
            const auto s = generate_ofdm(gen_validation ? c.validation_signal() : c.signal);
            write_iq(s, gen_out);
            std::printf("wrote %s: %td samples, rms %.6g\n", gen_out.c_str(), s.size(), s.rms());
        } else if (*sim) {
            const auto c = sim_cfg.load();
            const auto pa = read_pa_preset(c.pa_preset);
            write_iq(pa_forward(read_iq(sim_in), pa), sim_out);
        } else if (*ilc) {
            const auto c = ilc_cfg.load();
            const auto pa = read_pa_preset(c.pa_preset);
            const auto result = ilc_learn(read_iq(ilc_in), pa, ilc_config_for(c));
            write_iq(result.label, ilc_out);
            if (!ilc_csv.empty()) {
                std::string csv = header_line(c) + "iteration,error_db\n";
                for (std::size_t i = 0; i < result.error_db.size(); ++i)
                    csv += std::to_string(i) + "," + text::format_double(result.error_db[i]) + "\n";
                write_text_file(ilc_csv, csv);
            }
            std::printf("ilc: %d iterations, final error %.2f dB\n", c.ilc.iterations, result.error_db.back());
        } else if (*fit) {
            const auto c = fa.cfg.load();
            const auto structure = c.dpd.structure();
            // Schedule problems are usage errors; surface them before any work.
            if (*fit_bw) c.resolved_schedule().validate_for(structure.orders());
            const auto input = read_iq(fa.input);
            const auto target = read_iq(fa.target);
            const auto S = build_kernel_matrix(input, structure, c.dpd.boundary);
            CoefficientVector w(structure);
            std::string what;
            if (*fit_ls) {
                w = least_squares(S, target.samples());
                what = "least squares";
            } else if (*fit_lasso) {
                const double tau = fa.zero_threshold >= 0.0 ? fa.zero_threshold : c.standard_lasso.zero_threshold;
                w = lasso_iterated_ridge(S, target.samples(), fa.lambda, tau, c.bcd);
                what = "standard lasso, lambda=" + text::format_double(fa.lambda);
            } else {
                const auto result = block_weighted_lasso(S, target.samples(), c.resolved_schedule(), c.bcd);
                w = result.coeffs;
                what = "block-weighted lasso, iteration " + std::to_string(result.selected_iteration);
                if (!fa.trace.empty()) write_text_file(fa.trace, header_line(c) + format_trace_csv(result.trace));
            }
            write_text_file(fa.out, coefficient_file(c, w, what));
            const CVector xr = S.target_rows(target.samples());
            std::printf("%s: kernel_count=%zu depth=%d nmse_db=%.4f\n", what.c_str(), kernel_count(w),
                        effective_memory_depth(w), nmse_db(S.data() * w.values(), xr));
        } else if (*refine) {
            const auto c = ref_cfg.load();
            const auto model = read_coefficients(ref_model);
            const auto input = read_iq(ref_input);
            const auto target = read_iq(ref_target);
            const auto S = build_kernel_matrix(input, model.structure(), c.dpd.boundary);
            const auto w = ls_refine(S, target.samples(), model.support());
            write_text_file(ref_out, coefficient_file(c, w, "least-squares refit on the support of " + ref_model));
            std::printf("refined: kernel_count=%zu depth=%d\n", kernel_count(w), effective_memory_depth(w));
        } else if (*evaluate) {
            const auto model = read_coefficients(ev_model);
            const auto signal = read_iq(ev_signal);
            const auto reference = read_iq(ev_reference);
            CVector out = apply_model(signal.samples(), model);
            if (!ev_pa.empty()) {
                const auto pa = read_pa_preset(ev_pa);
                out = pa_forward(out, pa) / pa.smallsignal_gain;
            }
            std::cout << format_metrics(evm_db(out, reference.samples()), &model) << '\n';
        } else if (*exp1) {
            const auto c = e1_cfg.load();
            const auto r = run_experiment1(c);
            write_outputs(r.outputs, e1_out.empty() ? c.output_dir : fs::path(e1_out));
        } else if (*exp2) {
            const auto c = e2_cfg.load();
            const auto r = run_experiment2(c);
            write_outputs(r.outputs, e2_out.empty() ? c.output_dir : fs::path(e2_out));
            std::cout << format_report_csv(r.report);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
