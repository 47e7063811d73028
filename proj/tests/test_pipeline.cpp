// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "bwlasso/pipeline.hpp"

using namespace bwlasso;

namespace {

const std::filesystem::path kSource = BWLASSO_SOURCE_DIR;

std::filesystem::path tmp_dir(const std::string& name) {
    const auto dir = std::filesystem::path(BWLASSO_TEST_TMP) / "pipeline" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// A scaled-down desk run: 2048 samples, 30 kernels.
ExperimentConfig small_config() {
    ExperimentConfig c = read_config(kSource / "configs" / "desk.cfg");
    c.signal.n_symbols = 8;
    c.dpd.memory_depth = 5;
    c.dpd.max_order = 5;
    return c;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST(Config, DeskParsesAndValidates) {
    const auto c = read_config(kSource / "configs" / "desk.cfg");
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.dpd.structure(), full_structure(9, 7, 1));
    EXPECT_EQ(c.signal.length(), 16384u);
    EXPECT_TRUE(std::filesystem::exists(c.pa_preset));
    EXPECT_EQ(c.capture_noise_db, -43.0);
    EXPECT_FALSE(c.schedule.has_value());
    EXPECT_EQ(c.resolved_schedule(), default_schedule(full_structure(9, 7, 1)));
}

TEST(Config, SerializeRoundTrip) {
    auto c = small_config();
    c.schedule = uniform_schedule({0, 2, 4}, 3e-4, 0.05);
    c.standard_lasso.lambda = 0.01;
    c.ilc.target_gain = cplx{0.8, -0.2};
    c.dpd.include_leading = true;
    c.dpd.leading_depth = 2;
    c.dpd.boundary = BoundaryMode::DiscardWarmup;
    const std::string text = serialize_config(c);
    const auto back = parse_config(text, "mem");
    EXPECT_EQ(serialize_config(back), text);
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(back.schedule, c.schedule);
    EXPECT_EQ(back.dpd.structure(), c.dpd.structure());
}

TEST(Config, HashTracksContent) {
    const auto a = small_config();
    auto b = a;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.bcd.outer_iterations = 11;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config("dpd.depth = 3\n", "mem"), ConfigError);
    try {
        parse_config("dpd.depth = 3\n", "mem");
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("unknown key 'dpd.depth'"), std::string::npos);
    }
    EXPECT_THROW(parse_config("dpd.max_order = 5\ndpd.max_order = 7\n", "mem"), FormatError);
    EXPECT_THROW(parse_config("dpd.max_order = five\n", "mem"), FormatError);
    EXPECT_THROW(parse_config("dpd.boundary = wrap\n", "mem"), FormatError);
    EXPECT_THROW(parse_config("schedule.mode = default\nschedule.lambda.0 = 1\n", "mem"), ConfigError);
    EXPECT_THROW(parse_config("schedule.lambda.3 = 1\n", "mem"), ConfigError);

    auto c = parse_config("schedule.mode = custom\nschedule.lambda.0 = 1e-4\nschedule.threshold.0 = 0.1\n", "mem");
    try {
        c.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("k=2"), std::string::npos);
    }
    c = small_config();
    c.seed = c.signal.seed;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(read_config(kSource / "configs" / "missing.cfg"), IoError);
}

TEST(MatchedLasso, CountWithinTenPercent) {
    const auto c = small_config();
    const auto t = run_training(c);
    for (std::size_t target : {5u, 10u, 20u}) {
        const auto m = match_standard_lasso(t.S, t.ilc.label.samples(), target, c.standard_lasso, c.bcd);
        EXPECT_TRUE(m.matched) << target;
        EXPECT_LE(std::abs(static_cast<double>(kernel_count(m.coeffs)) - static_cast<double>(target)),
                  0.1 * static_cast<double>(target));
        EXPECT_GT(m.lambda, 0.0);
        // The reported coefficients are a Lasso solution for the reported lambda.
        const auto again = lasso_iterated_ridge(t.S, t.ilc.label.samples(), m.lambda, c.standard_lasso.zero_threshold, c.bcd);
        EXPECT_TRUE(again == m.coeffs);
    }
}

TEST(Experiment1, OutputsAreConsistent) {
    const auto c = small_config();
    const auto r = run_experiment1(c);
    const auto head = header_line(c);

    const auto trace = lines(r.outputs.get("exp1_trace.csv"));
    ASSERT_EQ(trace.size(), 2u + static_cast<std::size_t>(c.bcd.outer_iterations));
    EXPECT_EQ(trace[0] + "\n", head);
    EXPECT_EQ(trace[1], "iteration,nmse_db,kernel_count,depth,max_lag");

    const auto maps = lines(r.outputs.get("exp1_kernel_maps.csv"));
    EXPECT_EQ(maps.size(), 2u + r.total_kernels * (static_cast<std::size_t>(c.bcd.outer_iterations) + 1));
    EXPECT_EQ(r.total_kernels, kernel_count(c.dpd.structure()));

    const auto bw = parse_coefficients(r.outputs.get("exp1_bwlasso.coef"), "bw").coeffs;
    EXPECT_TRUE(bw == r.bwlasso);
    const auto& selected = r.trace.records[static_cast<std::size_t>(r.selected_iteration - 1)];
    EXPECT_EQ(kernel_count(bw), selected.kernel_count);
    EXPECT_EQ(effective_memory_depth(bw), selected.effective_memory_depth);

    const std::string summary = r.outputs.get("exp1_summary.csv");
    EXPECT_NE(summary.find("bwlasso_kernel_count," + std::to_string(kernel_count(bw)) + "\n"), std::string::npos);
    EXPECT_NE(summary.find("total_kernels,30\n"), std::string::npos);
    for (const auto& [name, content] : r.outputs.files) EXPECT_EQ(content.find("# config-hash: "), 0u) << name;
}

TEST(Experiment2, ReportMatchesCoefficientFiles) {
    const auto c = small_config();
    const auto r = run_experiment2(c);
    const auto& rep = r.report;
    ASSERT_EQ(rep.rows.size(), 6u);
    EXPECT_EQ(rep.row("no-dpd").kernel_count, 1u);
    EXPECT_EQ(rep.row("no-dpd").effective_memory_depth, 0);
    EXPECT_EQ(rep.row("ls-full").kernel_count, 30u);

    // Refinement keeps the support.
    EXPECT_EQ(rep.row("bwlasso-r").coeffs.support(), rep.row("bwlasso-nr").coeffs.support());
    EXPECT_EQ(rep.row("lasso-r").coeffs.support(), rep.row("lasso-nr").coeffs.support());

    const auto csv = lines(r.outputs.get("exp2_report.csv"));
    ASSERT_EQ(csv.size(), 8u);
    EXPECT_EQ(csv[1], "method,evm_db,nmse_db,kernel_count,effective_memory_depth");
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& row = rep.rows[i];
        const auto file = parse_coefficients(r.outputs.get("exp2_" + row.method + ".coef"), row.method).coeffs;
        EXPECT_EQ(kernel_count(file), row.kernel_count) << row.method;
        EXPECT_EQ(effective_memory_depth(file), row.effective_memory_depth) << row.method;
        EXPECT_EQ(csv[i + 2].rfind(row.method + ",", 0), 0u);
    }

    // Any DPD beats none.
    for (const auto& row : rep.rows)
        if (row.method != "no-dpd") {
            EXPECT_LT(row.evm_db, rep.row("no-dpd").evm_db - 5.0) << row.method;
        }
}

TEST(Experiment2, NoDpdRowMatchesDirectCapture) {
    auto c = small_config();
    c.capture_noise_db.reset();
    const auto r = run_experiment2(c);
    const auto sv = generate_ofdm(c.validation_signal()).samples();
    const auto pa = read_pa_preset(c.pa_preset);
    const auto m = evm_db(CVector(pa_forward(sv, pa) / pa.smallsignal_gain), sv);
    EXPECT_DOUBLE_EQ(r.report.row("no-dpd").evm_db, m.evm_db);
    EXPECT_DOUBLE_EQ(r.report.row("no-dpd").nmse_db, m.nmse_db);
}

TEST(Experiments, Deterministic) {
    const auto c = small_config();
    const auto a = run_experiment2(c);
    const auto b = run_experiment2(c);
    ASSERT_EQ(a.outputs.files.size(), b.outputs.files.size());
    for (std::size_t i = 0; i < a.outputs.files.size(); ++i) EXPECT_EQ(a.outputs.files[i], b.outputs.files[i]);

    auto other = c;
    other.seed = 99;
    EXPECT_NE(run_experiment2(other).outputs.get("exp2_report.csv"), a.outputs.get("exp2_report.csv"));
}

TEST(Outputs, WriteIsAllOrNothing) {
    const auto dir = tmp_dir("atomic");
    OutputSet set;
    set.add("a.csv", "one\n");
    set.add("b.csv", "two\n");
    // A directory in the way of the second temporary file makes it unwritable.
    std::filesystem::create_directories(dir / "b.csv.partial");
    EXPECT_THROW(set.write(dir), IoError);
    EXPECT_FALSE(std::filesystem::exists(dir / "a.csv"));
    EXPECT_FALSE(std::filesystem::exists(dir / "a.csv.partial"));
    EXPECT_FALSE(std::filesystem::exists(dir / "b.csv"));

    std::filesystem::remove_all(dir / "b.csv.partial");
    set.write(dir);
    EXPECT_EQ(read_text_file(dir / "a.csv"), "one\n");
    EXPECT_EQ(read_text_file(dir / "b.csv"), "two\n");
}

TEST(Outputs, FailedRunWritesNothing) {
    auto c = small_config();
    c.ilc.learning_rate = 1.0;
    c.ilc.target_gain = cplx{0.3, 0.0};
    const auto dir = tmp_dir("failed");
    EXPECT_THROW(run_experiment1(c).outputs.write(dir), DivergenceError);
    EXPECT_TRUE(std::filesystem::is_empty(dir));
}
