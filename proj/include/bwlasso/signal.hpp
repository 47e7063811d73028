// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "error.hpp"
#include "rng.hpp"

namespace bwlasso {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Lowest value any dB metric reports; stands in for an exact match.
inline constexpr double kDbFloor = -300.0;

/// Complex baseband samples plus their sample rate. Always non-empty and
/// finite.
class IqSignal {
public:
    IqSignal(CVector samples, double sample_rate_hz)
        : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
        if (samples_.size() < 1) throw DimensionError("IqSignal: signal must contain at least one sample");
        if (!(std::isfinite(sample_rate_hz_) && sample_rate_hz_ > 0.0))
            throw ConfigError("IqSignal: sample rate must be positive and finite");
        for (Eigen::Index n = 0; n < samples_.size(); ++n) {
            if (!std::isfinite(samples_[n].real()) || !std::isfinite(samples_[n].imag()))
                throw DegenerateInputError("IqSignal: non-finite sample at index " + std::to_string(n));
        }
    }

    const CVector& samples() const noexcept { return samples_; }
    double sample_rate_hz() const noexcept { return sample_rate_hz_; }
    Eigen::Index size() const noexcept { return samples_.size(); }
    cplx operator[](Eigen::Index n) const { return samples_[n]; }

    double rms() const { return std::sqrt(samples_.squaredNorm() / static_cast<double>(samples_.size())); }

    /// Same sample rate, new samples.
    IqSignal with_samples(CVector samples) const { return IqSignal(std::move(samples), sample_rate_hz_); }

    IqSignal scaled(cplx c) const { return with_samples(samples_ * c); }

    friend bool operator==(const IqSignal& a, const IqSignal& b) {
        return a.sample_rate_hz_ == b.sample_rate_hz_ && a.samples_.size() == b.samples_.size() &&
               a.samples_ == b.samples_;
    }

private:
    CVector samples_;
    double sample_rate_hz_;
};

// ---------------------------------------------------------------------------
// OFDM test signals

enum class Constellation { QPSK, QAM16, QAM64 };

inline std::string to_string(Constellation c) {
    switch (c) {
        case Constellation::QPSK: return "qpsk";
        case Constellation::QAM16: return "qam16";
        case Constellation::QAM64: return "qam64";
    }
    return "?";
}

inline Constellation constellation_from_string(const std::string& s) {
    if (s == "qpsk") return Constellation::QPSK;
    if (s == "qam16") return Constellation::QAM16;
    if (s == "qam64") return Constellation::QAM64;
    throw ConfigError("unknown constellation '" + s + "' (expected qpsk, qam16 or qam64)");
}

struct OfdmConfig {
    int n_subcarriers = 64;
    int n_active = 52;
    int n_symbols = 256;
    int oversampling_factor = 4;
    Constellation constellation = Constellation::QAM64;
    std::uint64_t seed = 1;
    double target_rms = 1.0;
    double sample_rate_hz = 80e6;  // rate before oversampling

    void validate() const {
        if (n_subcarriers < 2) throw ConfigError("ofdm: n_subcarriers must be >= 2");
        if (n_active < 1) throw ConfigError("ofdm: n_active must be >= 1");
        if (n_active >= n_subcarriers)
            throw ConfigError("ofdm: n_active (" + std::to_string(n_active) + ") must be below n_subcarriers (" +
                              std::to_string(n_subcarriers) + ") to leave a guard band");
        if (n_symbols < 1) throw ConfigError("ofdm: n_symbols must be >= 1");
        if (oversampling_factor < 1) throw ConfigError("ofdm: oversampling_factor must be >= 1");
        if (!(target_rms > 0.0 && std::isfinite(target_rms))) throw ConfigError("ofdm: target_rms must be positive");
        if (!(sample_rate_hz > 0.0 && std::isfinite(sample_rate_hz)))
            throw ConfigError("ofdm: sample_rate_hz must be positive");
    }

    std::size_t length() const {
        return static_cast<std::size_t>(n_subcarriers) * static_cast<std::size_t>(oversampling_factor) *
               static_cast<std::size_t>(n_symbols);
    }
};

namespace detail {

// Square grid with unit average energy. Gray mapping is irrelevant here.
inline cplx constellation_point(Constellation c, std::uint64_t index) {
    int side = 2;
    switch (c) {
        case Constellation::QPSK: side = 2; break;
        case Constellation::QAM16: side = 4; break;
        case Constellation::QAM64: side = 8; break;
    }
    const int i = static_cast<int>(index % static_cast<std::uint64_t>(side));
    const int q = static_cast<int>(index / static_cast<std::uint64_t>(side));
    const double scale = std::sqrt(2.0 * (side * side - 1) / 3.0);
    return {(2.0 * i - (side - 1)) / scale, (2.0 * q - (side - 1)) / scale};
}

inline std::uint64_t constellation_order(Constellation c) {
    switch (c) {
        case Constellation::QPSK: return 4;
        case Constellation::QAM16: return 16;
        case Constellation::QAM64: return 64;
    }
    return 4;
}

}  // namespace detail

/// FFT bin indices (in an FFT of size n_subcarriers * oversampling) that carry
/// data. DC is left empty; bins +1..+ceil(A/2) and -1..-floor(A/2) are used.
inline std::vector<int> active_bins(const OfdmConfig& config) {
    config.validate();
    const int fft_size = config.n_subcarriers * config.oversampling_factor;
    const int positive = (config.n_active + 1) / 2;
    const int negative = config.n_active / 2;
    std::vector<int> bins;
    bins.reserve(static_cast<std::size_t>(config.n_active));
    for (int k = 1; k <= positive; ++k) bins.push_back(k);
    for (int k = 1; k <= negative; ++k) bins.push_back(fft_size - k);
    std::sort(bins.begin(), bins.end());
    return bins;
}

/// Random-data OFDM. Each symbol is an IFFT of size n_subcarriers *
/// oversampling with only the active bins populated, so oversampling is pure
/// zero-padding in frequency. No cyclic prefix or pilots. The result is
/// scaled to exactly `target_rms`.
inline IqSignal generate_ofdm(const OfdmConfig& config) {
    config.validate();
    const int fft_size = config.n_subcarriers * config.oversampling_factor;
    const auto bins = active_bins(config);
    const auto order = detail::constellation_order(config.constellation);

    Rng rng(config.seed);
    Eigen::FFT<double> fft;
    std::vector<cplx> spectrum(static_cast<std::size_t>(fft_size));
    std::vector<cplx> symbol(static_cast<std::size_t>(fft_size));
    CVector out(static_cast<Eigen::Index>(config.length()));

    Eigen::Index pos = 0;
    for (int s = 0; s < config.n_symbols; ++s) {
        std::fill(spectrum.begin(), spectrum.end(), cplx{0.0, 0.0});
        for (int bin : bins)
            spectrum[static_cast<std::size_t>(bin)] = detail::constellation_point(config.constellation, rng.below(order));
        fft.inv(symbol, spectrum);
        for (const cplx& v : symbol) out[pos++] = v;
    }

    const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(out.size()));
    out *= config.target_rms / rms;
    return IqSignal(std::move(out), config.sample_rate_hz * config.oversampling_factor);
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricReport {
    double nmse_db = 0.0;
    double evm_db = 0.0;
    cplx aligned_gain{1.0, 0.0};
};

/// 10 log10(ratio), floored at kDbFloor. NaN passes through so a blown-up
/// signal never reads as a perfect match.
inline double clamp_db(double ratio) {
    if (std::isnan(ratio)) return ratio;
    if (!(ratio > 0.0)) return kDbFloor;
    return std::max(kDbFloor, 10.0 * std::log10(ratio));
}

namespace detail {
inline void check_pair(const CVector& a, const CVector& ref, const char* op) {
    if (a.size() != ref.size())
        throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                             std::to_string(ref.size()) + ")");
    if (ref.squaredNorm() == 0.0) throw DegenerateInputError(std::string(op) + ": reference signal is all zero");
}
}  // namespace detail

/// 10 log10(sum |ref - est|^2 / sum |ref|^2), floored at kDbFloor.
inline double nmse_db(const CVector& estimate, const CVector& reference) {
    detail::check_pair(estimate, reference, "nmse_db");
    return clamp_db((reference - estimate).squaredNorm() / reference.squaredNorm());
}

inline double nmse_db(const IqSignal& estimate, const IqSignal& reference) {
    return nmse_db(estimate.samples(), reference.samples());
}

/// Data-aided EVM after removing the least-squares complex gain
/// g = ref^H rec / ref^H ref. Also reports the raw NMSE of `received`.
inline MetricReport evm_db(const CVector& received, const CVector& reference) {
    detail::check_pair(received, reference, "evm_db");
    const cplx gain = reference.dot(received) / reference.squaredNorm();
    if (gain == cplx{0.0, 0.0} || !std::isfinite(std::abs(gain)))
        throw DegenerateInputError("evm_db: received signal is orthogonal to the reference (zero aligned gain)");
    MetricReport report;
    report.aligned_gain = gain;
    report.evm_db = clamp_db((received / gain - reference).squaredNorm() / reference.squaredNorm());
    report.nmse_db = clamp_db((reference - received).squaredNorm() / reference.squaredNorm());
    return report;
}

inline MetricReport evm_db(const IqSignal& received, const IqSignal& reference) {
    return evm_db(received.samples(), reference.samples());
}

// ---------------------------------------------------------------------------
// IQ files
//
// Little-endian. Header (24 bytes): "IQF1", u32 version = 1, u64 sample
// count, f64 sample rate. Payload: count records of (f64 I, f64 Q).

namespace iqfile {
inline constexpr std::array<char, 4> kMagic{'I', 'Q', 'F', '1'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;
inline constexpr std::size_t kRecordBytes = 16;

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

template <typename T>
T get_le(const std::vector<unsigned char>& in, std::size_t offset) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}
}  // namespace iqfile

inline std::vector<unsigned char> encode_iq(const IqSignal& signal) {
    std::vector<unsigned char> out;
    out.reserve(iqfile::kHeaderBytes + iqfile::kRecordBytes * static_cast<std::size_t>(signal.size()));
    out.insert(out.end(), iqfile::kMagic.begin(), iqfile::kMagic.end());
    iqfile::put_le<std::uint32_t>(out, iqfile::kVersion);
    iqfile::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(signal.size()));
    iqfile::put_le<double>(out, signal.sample_rate_hz());
    for (Eigen::Index n = 0; n < signal.size(); ++n) {
        iqfile::put_le<double>(out, signal[n].real());
        iqfile::put_le<double>(out, signal[n].imag());
    }
    return out;
}

inline IqSignal decode_iq(const std::vector<unsigned char>& bytes) {
    using iqfile::kHeaderBytes;
    using iqfile::kRecordBytes;
    if (bytes.size() < kHeaderBytes) throw FormatError("IQ file: truncated header", bytes.size());
    if (!std::equal(iqfile::kMagic.begin(), iqfile::kMagic.end(), bytes.begin(),
                    [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; }))
        throw FormatError("IQ file: bad magic (expected \"IQF1\")", 0);
    const auto version = iqfile::get_le<std::uint32_t>(bytes, 4);
    if (version != iqfile::kVersion)
        throw FormatError("IQ file: unsupported version " + std::to_string(version), 4);
    const auto count = iqfile::get_le<std::uint64_t>(bytes, 8);
    if (count == 0) throw FormatError("IQ file: sample count is zero", 8);
    const double rate = iqfile::get_le<double>(bytes, 16);
    if (!(std::isfinite(rate) && rate > 0.0)) throw FormatError("IQ file: sample rate must be positive", 16);

    const std::size_t payload = bytes.size() - kHeaderBytes;
    if (count > payload / kRecordBytes)
        throw FormatError("IQ file: truncated payload, header declares " + std::to_string(count) + " samples but only " +
                              std::to_string(payload / kRecordBytes) + " present",
                          bytes.size());
    const std::size_t expected_end = kHeaderBytes + kRecordBytes * static_cast<std::size_t>(count);
    if (bytes.size() != expected_end)
        throw FormatError("IQ file: length field mismatch, " + std::to_string(bytes.size() - expected_end) +
                              " trailing bytes",
                          expected_end);

    CVector samples(static_cast<Eigen::Index>(count));
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t off = kHeaderBytes + kRecordBytes * n;
        const double re = iqfile::get_le<double>(bytes, off);
        const double im = iqfile::get_le<double>(bytes, off + 8);
        if (!std::isfinite(re) || !std::isfinite(im)) throw FormatError("IQ file: non-finite sample", off);
        samples[static_cast<Eigen::Index>(n)] = {re, im};
    }
    return IqSignal(std::move(samples), rate);
}

inline void write_iq(const IqSignal& signal, const std::filesystem::path& path) {
    const auto bytes = encode_iq(signal);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline IqSignal read_iq(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_iq(bytes);
}

}  // namespace bwlasso
