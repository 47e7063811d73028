// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "bwlasso/signal.hpp"

using namespace bwlasso;

namespace {

// Direct O(n^2) DFT, independent of the FFT used by the generator.
std::vector<cplx> naive_dft(const CVector& x) {
    const auto n = static_cast<std::size_t>(x.size());
    std::vector<cplx> X(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t)
            acc += x[static_cast<Eigen::Index>(t)] *
                   std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
        X[k] = acc;
    }
    return X;
}

std::vector<unsigned char> le_bytes(const void* p, std::size_t n) {
    std::vector<unsigned char> out(n);
    std::memcpy(out.data(), p, n);  // test host is little-endian
    return out;
}

std::filesystem::path tmp_dir() {
    const std::filesystem::path dir = std::filesystem::path(BWLASSO_TEST_TMP) / "signal";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Rng, RawStreamIsStandardMt19937_64) {
    // The standard fixes the 10000th output of a default-seeded mt19937_64.
    Rng rng(5489u);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next();
    EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, UniformMapping) {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t w = b.next();
        const double u = a.uniform();
        EXPECT_EQ(u, static_cast<double>(w >> 11) / 9007199254740992.0);
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Rng, ComplexGaussianHasUnitPower) {
    Rng rng(3);
    double power = 0.0;
    cplx mean{0.0, 0.0};
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const cplx z = rng.complex_gaussian();
        power += std::norm(z);
        mean += z;
    }
    EXPECT_NEAR(power / n, 1.0, 0.01);
    EXPECT_NEAR(std::abs(mean / static_cast<double>(n)), 0.0, 0.01);
}

TEST(IqSignal, RejectsEmptyNonFiniteAndBadRate) {
    EXPECT_THROW(IqSignal(CVector(0), 1.0), DimensionError);
    CVector bad(2);
    bad << cplx{1.0, 0.0}, cplx{std::nan(""), 0.0};
    EXPECT_THROW(IqSignal(bad, 1.0), DegenerateInputError);
    EXPECT_THROW(IqSignal(CVector::Ones(2), 0.0), ConfigError);
    EXPECT_THROW(IqSignal(CVector::Ones(2), -1.0), ConfigError);
}

TEST(Ofdm, LengthRateAndRms) {
    OfdmConfig c;
    c.n_symbols = 8;
    c.target_rms = 0.3;
    const auto s = generate_ofdm(c);
    EXPECT_EQ(static_cast<std::size_t>(s.size()), c.length());
    EXPECT_EQ(s.size(), 64 * 4 * 8);
    EXPECT_DOUBLE_EQ(s.sample_rate_hz(), 320e6);
    EXPECT_NEAR(s.rms(), 0.3, 1e-12);
}

TEST(Ofdm, EnergyOnlyInActiveBins) {
    OfdmConfig c;
    c.n_subcarriers = 16;
    c.n_active = 10;
    c.oversampling_factor = 2;
    c.n_symbols = 3;
    c.constellation = Constellation::QAM16;
    const auto s = generate_ofdm(c);
    const auto bins = active_bins(c);
    ASSERT_EQ(bins.size(), 10u);
    // +1..+5 and -1..-5 in a 32-point FFT.
    EXPECT_EQ(bins, (std::vector<int>{1, 2, 3, 4, 5, 27, 28, 29, 30, 31}));

    const int fft = 32;
    for (int sym = 0; sym < c.n_symbols; ++sym) {
        const CVector block = s.samples().segment(sym * fft, fft);
        const auto X = naive_dft(block);
        double active = 0.0, idle = 0.0;
        for (int k = 0; k < fft; ++k) {
            const bool on = std::find(bins.begin(), bins.end(), k) != bins.end();
            (on ? active : idle) += std::norm(X[static_cast<std::size_t>(k)]);
        }
        EXPECT_GT(active, 0.0);
        EXPECT_LT(idle, 1e-24 * active);
    }
}

TEST(Ofdm, QpskSubcarriersHaveConstantModulus) {
    OfdmConfig c;
    c.n_subcarriers = 8;
    c.n_active = 6;
    c.oversampling_factor = 1;
    c.n_symbols = 4;
    c.constellation = Constellation::QPSK;
    const auto s = generate_ofdm(c);
    const auto X = naive_dft(s.samples().segment(0, 8));
    const auto bins = active_bins(c);
    const double ref = std::abs(X[static_cast<std::size_t>(bins[0])]);
    for (int b : bins) EXPECT_NEAR(std::abs(X[static_cast<std::size_t>(b)]), ref, 1e-12 * ref);
}

TEST(Ofdm, DeterministicPerSeed) {
    OfdmConfig c;
    c.n_symbols = 4;
    const auto a = generate_ofdm(c);
    const auto b = generate_ofdm(c);
    EXPECT_TRUE(a == b);
    c.seed = 2;
    const auto d = generate_ofdm(c);
    EXPECT_FALSE(a == d);
}

TEST(Ofdm, ConfigValidation) {
    OfdmConfig c;
    c.n_active = 64;
    EXPECT_THROW(generate_ofdm(c), ConfigError);
    c = OfdmConfig{};
    c.target_rms = 0.0;
    EXPECT_THROW(generate_ofdm(c), ConfigError);
    EXPECT_THROW(constellation_from_string("qam256"), ConfigError);
    EXPECT_EQ(constellation_from_string(to_string(Constellation::QAM16)), Constellation::QAM16);
}

TEST(Metrics, NmseAndEvmBasics) {
    CVector ref(4);
    ref << cplx{1, 0}, cplx{0, 1}, cplx{-1, 0}, cplx{0, -1};
    EXPECT_EQ(nmse_db(ref, ref), kDbFloor);
    EXPECT_NEAR(nmse_db(CVector::Zero(4), ref), 0.0, 1e-15);
    EXPECT_NEAR(nmse_db(CVector(2.0 * ref), ref), 0.0, 1e-15);
    EXPECT_NEAR(nmse_db(CVector(1.1 * ref), ref), -20.0, 1e-12);

    // A pure complex gain is invisible to EVM but not to NMSE.
    const cplx g{0.5, -0.7};
    const auto m = evm_db(CVector(g * ref), ref);
    EXPECT_EQ(m.evm_db, kDbFloor);
    EXPECT_NEAR(std::abs(m.aligned_gain - g), 0.0, 1e-15);
    EXPECT_GT(m.nmse_db, -10.0);
}

TEST(Metrics, EvmMatchesClosedForm) {
    // received = g (ref + e) with e orthogonal to ref: the aligned gain is g
    // and EVM is |e|^2 / |ref|^2 exactly.
    CVector ref(4), e(4);
    ref << cplx{1, 0}, cplx{1, 0}, cplx{1, 0}, cplx{1, 0};
    e << cplx{0.01, 0}, cplx{-0.01, 0}, cplx{0, 0.02}, cplx{0, -0.02};
    const cplx g{2.0, 1.0};
    const auto m = evm_db(CVector(g * (ref + e)), ref);
    EXPECT_NEAR(std::abs(m.aligned_gain - g), 0.0, 1e-14);
    EXPECT_NEAR(m.evm_db, 10.0 * std::log10(e.squaredNorm() / ref.squaredNorm()), 1e-10);
}

TEST(Metrics, Errors) {
    CVector ref = CVector::Ones(3);
    EXPECT_THROW(nmse_db(CVector::Ones(2), ref), DimensionError);
    EXPECT_THROW(nmse_db(ref, CVector::Zero(3)), DegenerateInputError);
    EXPECT_THROW(evm_db(CVector::Zero(3), ref), DegenerateInputError);
    CVector orth(2), r2(2);
    orth << cplx{1, 0}, cplx{-1, 0};
    r2 << cplx{1, 0}, cplx{1, 0};
    EXPECT_THROW(evm_db(orth, r2), DegenerateInputError);
}

TEST(Metrics, NanIsNotAPerfectMatch) {
    EXPECT_TRUE(std::isnan(clamp_db(std::nan(""))));
    EXPECT_EQ(clamp_db(0.0), kDbFloor);
    EXPECT_EQ(clamp_db(1e-40), kDbFloor);
    EXPECT_TRUE(std::isinf(clamp_db(INFINITY)));
}

TEST(IqFile, LayoutMatchesHandBuiltBytes) {
    CVector x(2);
    x << cplx{1.5, -2.0}, cplx{0.25, 3.0};
    const IqSignal s(x, 1e6);

    std::vector<unsigned char> expected{'I', 'Q', 'F', '1'};
    auto append = [&](auto v) {
        const auto b = le_bytes(&v, sizeof v);
        expected.insert(expected.end(), b.begin(), b.end());
    };
    append(std::uint32_t{1});
    append(std::uint64_t{2});
    append(1e6);
    append(1.5);
    append(-2.0);
    append(0.25);
    append(3.0);
    EXPECT_EQ(encode_iq(s), expected);
    EXPECT_TRUE(decode_iq(expected) == s);
}

TEST(IqFile, RoundTripIsBitExact) {
    OfdmConfig c;
    c.n_symbols = 2;
    const auto s = generate_ofdm(c);
    const auto path = tmp_dir() / "roundtrip.iq";
    write_iq(s, path);
    const auto r = read_iq(path);
    ASSERT_EQ(r.size(), s.size());
    EXPECT_EQ(std::memcmp(r.samples().data(), s.samples().data(), sizeof(cplx) * static_cast<std::size_t>(s.size())), 0);
    EXPECT_EQ(r.sample_rate_hz(), s.sample_rate_hz());
}

TEST(IqFile, MalformedInputsReportOffsets) {
    const IqSignal s(CVector::Ones(3), 1.0);
    const auto good = encode_iq(s);

    auto expect_offset = [](const std::vector<unsigned char>& bytes, std::size_t offset, const char* what) {
        try {
            decode_iq(bytes);
            ADD_FAILURE() << "no error for " << what;
        } catch (const FormatError& e) {
            EXPECT_EQ(e.offset(), offset) << what << ": " << e.what();
            EXPECT_EQ(e.exit_code(), 2);
        }
    };

    expect_offset(std::vector<unsigned char>(good.begin(), good.begin() + 10), 10, "truncated header");
    auto bad = good;
    bad[0] = 'X';
    expect_offset(bad, 0, "bad magic");
    bad = good;
    bad[4] = 2;
    expect_offset(bad, 4, "version");
    bad = good;
    std::memset(bad.data() + 8, 0, 8);
    expect_offset(bad, 8, "zero count");
    bad = good;
    const double neg = -1.0;
    std::memcpy(bad.data() + 16, &neg, 8);
    expect_offset(bad, 16, "negative rate");
    expect_offset(std::vector<unsigned char>(good.begin(), good.end() - 1), good.size() - 1, "truncated payload");
    bad = good;
    bad.push_back(0);
    expect_offset(bad, good.size(), "trailing byte");
    bad = good;
    const double inf = INFINITY;
    std::memcpy(bad.data() + 24 + 16, &inf, 8);
    expect_offset(bad, 24 + 16, "non-finite sample");
}

TEST(IqFile, MissingFileIsIoError) {
    EXPECT_THROW(read_iq(tmp_dir() / "does-not-exist.iq"), IoError);
    EXPECT_THROW(write_iq(IqSignal(CVector::Ones(1), 1.0), tmp_dir() / "no" / "such" / "dir.iq"), IoError);
}
