// SPDX-License-Identifier: Apache-2.0
#pragma once

// Generalized memory polynomial (GMP) structures, kernel matrices and
// coefficient vectors.
//
// A GMP maps an input s to
//
//   sum_{k,l}   a_kl  s(n-l) |s(n-l)|^k                      (aligned)
// + sum_{k,l,m} b_klm s(n-l) |s(n-l-m)|^k                    (lagging)
// + sum_{k,l,m} c_klm s(n-l) |s(n-l+m)|^k                    (leading)
//
// with k even, so every kernel has odd polynomial order k+1. Samples outside
// [0, N) are zero unless the matrix is built with BoundaryMode::DiscardWarmup.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "signal.hpp"
#include "text.hpp"

namespace bwlasso {

enum class Branch { Aligned, Lagging, Leading };

inline std::string to_string(Branch b) {
    switch (b) {
        case Branch::Aligned: return "aligned";
        case Branch::Lagging: return "lagging";
        case Branch::Leading: return "leading";
    }
    return "?";
}

inline Branch branch_from_string(const std::string& s) {
    if (s == "aligned") return Branch::Aligned;
    if (s == "lagging") return Branch::Lagging;
    if (s == "leading") return Branch::Leading;
    throw FormatError("unknown kernel branch '" + s + "'");
}

/// One GMP basis function. `m` is 0 for aligned kernels.
struct KernelDescriptor {
    Branch branch = Branch::Aligned;
    int k = 0;
    int l = 0;
    int m = 0;

    int polynomial_order() const noexcept { return k + 1; }

    /// Deepest past sample the kernel reads, relative to n.
    int deepest_sample() const noexcept { return branch == Branch::Lagging ? l + m : l; }

    auto operator<=>(const KernelDescriptor&) const = default;
};

inline std::string to_string(const KernelDescriptor& d) {
    std::string out = to_string(d.branch) + "(k=" + std::to_string(d.k) + ",l=" + std::to_string(d.l);
    if (d.branch != Branch::Aligned) out += ",m=" + std::to_string(d.m);
    return out + ")";
}

/// Index sets of a GMP. A cross branch with an empty cross-lag set is absent.
struct GmpStructure {
    std::vector<int> aligned_orders;
    std::vector<int> aligned_lags;
    std::vector<int> lagging_orders;
    std::vector<int> lagging_lags;
    std::vector<int> lagging_cross;
    std::vector<int> leading_orders;
    std::vector<int> leading_lags;
    std::vector<int> leading_cross;

    bool has_lagging() const noexcept { return !lagging_cross.empty(); }
    bool has_leading() const noexcept { return !leading_cross.empty(); }

    void validate() const {
        auto check = [](const std::vector<int>& v, const char* name, int min_value, bool even) {
            if (!std::is_sorted(v.begin(), v.end()) || std::adjacent_find(v.begin(), v.end()) != v.end())
                throw ConfigError(std::string("gmp structure: ") + name + " must be sorted without duplicates");
            for (int x : v) {
                if (x < min_value)
                    throw ConfigError(std::string("gmp structure: ") + name + " contains " + std::to_string(x) +
                                      " (minimum " + std::to_string(min_value) + ")");
                if (even && x % 2 != 0)
                    throw ConfigError(std::string("gmp structure: ") + name + " contains odd order index " +
                                      std::to_string(x) + " (only even k, i.e. odd polynomial orders, are allowed)");
            }
        };
        check(aligned_orders, "aligned_orders", 0, true);
        check(aligned_lags, "aligned_lags", 0, false);
        check(lagging_orders, "lagging_orders", 0, true);
        check(lagging_lags, "lagging_lags", 0, false);
        check(lagging_cross, "lagging_cross", 1, false);
        check(leading_orders, "leading_orders", 0, true);
        check(leading_lags, "leading_lags", 0, false);
        check(leading_cross, "leading_cross", 1, false);
    }

    /// Every even k appearing in a present branch, ascending.
    std::vector<int> orders() const {
        std::set<int> ks(aligned_orders.begin(), aligned_orders.end());
        if (has_lagging()) ks.insert(lagging_orders.begin(), lagging_orders.end());
        if (has_leading()) ks.insert(leading_orders.begin(), leading_orders.end());
        return {ks.begin(), ks.end()};
    }

    bool operator==(const GmpStructure&) const = default;
};

/// Number of kernels: |Ka||La| + |Kb||Lb||Mb| + |Kc||Lc||Mc|.
inline std::size_t kernel_count(const GmpStructure& s) {
    return s.aligned_orders.size() * s.aligned_lags.size() +
           s.lagging_orders.size() * s.lagging_lags.size() * s.lagging_cross.size() +
           s.leading_orders.size() * s.leading_lags.size() * s.leading_cross.size();
}

/// Kernels in canonical column order: aligned by (k, l), then lagging by
/// (k, l, m), then leading by (k, l, m).
inline std::vector<KernelDescriptor> descriptors(const GmpStructure& s) {
    std::vector<KernelDescriptor> out;
    out.reserve(kernel_count(s));
    for (int k : s.aligned_orders)
        for (int l : s.aligned_lags) out.push_back({Branch::Aligned, k, l, 0});
    for (int k : s.lagging_orders)
        for (int l : s.lagging_lags)
            for (int m : s.lagging_cross) out.push_back({Branch::Lagging, k, l, m});
    for (int k : s.leading_orders)
        for (int l : s.leading_lags)
            for (int m : s.leading_cross) out.push_back({Branch::Leading, k, l, m});
    return out;
}

/// Full GMP up to memory depth L, odd polynomial order K and lagging depth
/// Mb. Cross branches start at k = 2: a k = 0 cross kernel is the aligned
/// linear kernel of the same lag, so including it would only duplicate
/// columns.
inline GmpStructure full_structure(int memory_depth, int max_order, int lagging_depth, bool include_leading = false,
                                   int leading_depth = 0) {
    if (memory_depth < 0) throw ConfigError("full_structure: memory depth L must be >= 0");
    if (max_order < 1 || max_order % 2 == 0)
        throw ConfigError("full_structure: polynomial order K must be odd and >= 1 (got " + std::to_string(max_order) +
                          ")");
    if (lagging_depth < 0) throw ConfigError("full_structure: lagging depth Mb must be >= 0");
    if (include_leading && leading_depth < 0) throw ConfigError("full_structure: leading depth Mc must be >= 0");

    GmpStructure s;
    for (int l = 0; l <= memory_depth; ++l) s.aligned_lags.push_back(l);
    for (int k = 0; k <= max_order - 1; k += 2) s.aligned_orders.push_back(k);
    for (int m = 1; m <= lagging_depth; ++m) s.lagging_cross.push_back(m);
    if (include_leading)
        for (int m = 1; m <= leading_depth; ++m) s.leading_cross.push_back(m);

    std::vector<int> cross_orders;
    for (int k = 2; k <= max_order - 1; k += 2) cross_orders.push_back(k);
    if (s.has_lagging()) {
        s.lagging_orders = cross_orders;
        s.lagging_lags = s.aligned_lags;
    }
    if (s.has_leading()) {
        s.leading_orders = cross_orders;
        s.leading_lags = s.aligned_lags;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Kernel matrix

enum class BoundaryMode {
    ZeroPad,        // s(i) = 0 outside [0, N); one row per input sample
    DiscardWarmup,  // drop rows that would read outside [0, N)
};

/// The N x P regression matrix of a structure evaluated on a signal.
class KernelMatrix {
public:
    KernelMatrix(CMatrix data, GmpStructure structure, Eigen::Index source_length, Eigen::Index first_row)
        : data_(std::move(data)),
          structure_(std::move(structure)),
          columns_(descriptors(structure_)),
          source_length_(source_length),
          first_row_(first_row) {}

    const CMatrix& data() const noexcept { return data_; }
    const GmpStructure& structure() const noexcept { return structure_; }
    const std::vector<KernelDescriptor>& columns() const noexcept { return columns_; }
    Eigen::Index rows() const noexcept { return data_.rows(); }
    Eigen::Index cols() const noexcept { return data_.cols(); }
    Eigen::Index source_length() const noexcept { return source_length_; }

    /// Index of the source sample that row 0 corresponds to. Non-zero only
    /// for BoundaryMode::DiscardWarmup.
    Eigen::Index first_row() const noexcept { return first_row_; }

    /// The slice of a target signal that lines up with the matrix rows.
    CVector target_rows(const CVector& target) const {
        if (target.size() != source_length_)
            throw DimensionError("kernel matrix: target length " + std::to_string(target.size()) +
                                 " does not match source length " + std::to_string(source_length_));
        return target.segment(first_row_, rows());
    }

private:
    CMatrix data_;
    GmpStructure structure_;
    std::vector<KernelDescriptor> columns_;
    Eigen::Index source_length_;
    Eigen::Index first_row_;
};

namespace detail {

inline int max_reach_back(const GmpStructure& s) {
    int depth = 0;
    for (const auto& d : descriptors(s)) depth = std::max(depth, d.deepest_sample());
    return depth;
}

inline int max_reach_ahead(const GmpStructure& s) {
    int ahead = 0;
    for (const auto& d : descriptors(s))
        if (d.branch == Branch::Leading) ahead = std::max(ahead, d.m - d.l);
    return ahead;
}

/// |s(i)|^k for every i, one row per order present.
class EnvelopeTable {
public:
    EnvelopeTable(const CVector& s, const std::vector<int>& orders) {
        Eigen::VectorXd mag = s.cwiseAbs();
        for (int k : orders) {
            Eigen::VectorXd env(s.size());
            for (Eigen::Index n = 0; n < s.size(); ++n) env[n] = std::pow(mag[n], k);
            table_.emplace(k, std::move(env));
        }
    }
    const Eigen::VectorXd& operator()(int k) const { return table_.at(k); }

private:
    std::map<int, Eigen::VectorXd> table_;
};

inline Eigen::Index envelope_index(const KernelDescriptor& d, Eigen::Index n) {
    switch (d.branch) {
        case Branch::Aligned: return n - d.l;
        case Branch::Lagging: return n - d.l - d.m;
        case Branch::Leading: return n - d.l + d.m;
    }
    return n;
}

inline cplx kernel_value(const CVector& s, const EnvelopeTable& env, const KernelDescriptor& d, Eigen::Index n) {
    const Eigen::Index N = s.size();
    const Eigen::Index i = n - d.l;
    const Eigen::Index e = envelope_index(d, n);
    if (i < 0 || i >= N || e < 0 || e >= N) return {0.0, 0.0};
    return s[i] * env(d.k)[e];
}

}  // namespace detail

inline KernelMatrix build_kernel_matrix(const CVector& signal, const GmpStructure& structure,
                                        BoundaryMode mode = BoundaryMode::ZeroPad) {
    structure.validate();
    const Eigen::Index N = signal.size();
    if (N < 1) throw DimensionError("build_kernel_matrix: empty signal");

    Eigen::Index first = 0;
    Eigen::Index last = N;  // exclusive
    if (mode == BoundaryMode::DiscardWarmup) {
        first = detail::max_reach_back(structure);
        last = N - detail::max_reach_ahead(structure);
        if (last <= first)
            throw DimensionError("build_kernel_matrix: signal of length " + std::to_string(N) +
                                 " is shorter than the structure's memory span");
    }

    const auto cols = descriptors(structure);
    const detail::EnvelopeTable env(signal, structure.orders());
    CMatrix data(last - first, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        for (Eigen::Index n = first; n < last; ++n) data(n - first, col) = detail::kernel_value(signal, env, cols[j], n);
    }
    return KernelMatrix(std::move(data), structure, N, first);
}

inline KernelMatrix build_kernel_matrix(const IqSignal& signal, const GmpStructure& structure,
                                        BoundaryMode mode = BoundaryMode::ZeroPad) {
    return build_kernel_matrix(signal.samples(), structure, mode);
}

// ---------------------------------------------------------------------------
// Coefficients

/// Complex kernel coefficients in the canonical column order of a structure.
class CoefficientVector {
public:
    explicit CoefficientVector(GmpStructure structure)
        : structure_(std::move(structure)), columns_(descriptors(structure_)) {
        structure_.validate();
        values_ = CVector::Zero(static_cast<Eigen::Index>(columns_.size()));
    }

    CoefficientVector(GmpStructure structure, CVector values) : CoefficientVector(std::move(structure)) {
        if (values.size() != values_.size())
            throw DimensionError("coefficient vector: " + std::to_string(values.size()) + " values for " +
                                 std::to_string(values_.size()) + " kernels");
        values_ = std::move(values);
    }

    const GmpStructure& structure() const noexcept { return structure_; }
    const std::vector<KernelDescriptor>& columns() const noexcept { return columns_; }
    const CVector& values() const noexcept { return values_; }
    CVector& values() noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }

    cplx operator[](Eigen::Index j) const { return values_[j]; }

    /// Column index of a descriptor, if the structure contains it.
    std::optional<Eigen::Index> index_of(const KernelDescriptor& d) const {
        const auto it = std::lower_bound(columns_.begin(), columns_.end(), d, canonical_less);
        if (it == columns_.end() || *it != d) return std::nullopt;
        return static_cast<Eigen::Index>(it - columns_.begin());
    }

    std::vector<Eigen::Index> support(double threshold = 0.0) const {
        std::vector<Eigen::Index> out;
        for (Eigen::Index j = 0; j < values_.size(); ++j)
            if (std::abs(values_[j]) > threshold) out.push_back(j);
        return out;
    }

    bool operator==(const CoefficientVector& o) const {
        return structure_ == o.structure_ && values_.size() == o.values_.size() && values_ == o.values_;
    }

private:
    // Branch-major ordering matches the enum order, so the default
    // lexicographic comparison is the canonical one.
    static bool canonical_less(const KernelDescriptor& a, const KernelDescriptor& b) { return a < b; }

    GmpStructure structure_;
    std::vector<KernelDescriptor> columns_;
    CVector values_;
};

/// Number of coefficients with modulus above `threshold`.
inline std::size_t kernel_count(const CoefficientVector& coeffs, double threshold = 0.0) {
    return coeffs.support(threshold).size();
}

/// Deepest past sample touched by kernels with |w| > threshold: l for
/// aligned and leading kernels, l + m for lagging ones. -1 if none.
inline int effective_memory_depth(const CoefficientVector& coeffs, double threshold = 0.0) {
    int depth = -1;
    for (auto j : coeffs.support(threshold)) depth = std::max(depth, coeffs.columns()[j].deepest_sample());
    return depth;
}

/// Largest lag index l among kernels with |w| > threshold. -1 if none.
inline int max_lag(const CoefficientVector& coeffs, double threshold = 0.0) {
    int lag = -1;
    for (auto j : coeffs.support(threshold)) lag = std::max(lag, coeffs.columns()[j].l);
    return lag;
}

/// Evaluates the model sample by sample without materializing the kernel
/// matrix. Zero coefficients are skipped.
inline CVector apply_model(const CVector& signal, const CoefficientVector& coeffs) {
    if (signal.size() < 1) throw DimensionError("apply_model: empty signal");
    const auto active = coeffs.support(0.0);
    std::vector<int> orders;
    for (auto j : active) orders.push_back(coeffs.columns()[j].k);
    std::sort(orders.begin(), orders.end());
    orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
    const detail::EnvelopeTable env(signal, orders);

    CVector out = CVector::Zero(signal.size());
    for (Eigen::Index n = 0; n < signal.size(); ++n) {
        cplx acc{0.0, 0.0};
        for (auto j : active) acc += coeffs[j] * detail::kernel_value(signal, env, coeffs.columns()[j], n);
        out[n] = acc;
    }
    return out;
}

inline IqSignal apply_model(const IqSignal& signal, const CoefficientVector& coeffs) {
    return signal.with_samples(apply_model(signal.samples(), coeffs));
}

// ---------------------------------------------------------------------------
// Coefficient files
//
//   # comment
//   format = gmp-coefficients 1
//   structure.aligned_orders = 0 2 4
//   ...                                  (all eight index sets, may be empty)
//   kernel = <branch> <k> <l> <m|-> <re> <im>
//
// Kernels not listed are zero. Extra header keys (e.g. PA parameters) are
// passed back to the caller through `extra`.

namespace coeffile {
inline constexpr const char* kFormat = "gmp-coefficients 1";

inline const std::vector<std::pair<std::string, std::vector<int> GmpStructure::*>>& structure_fields() {
    static const std::vector<std::pair<std::string, std::vector<int> GmpStructure::*>> fields{
        {"structure.aligned_orders", &GmpStructure::aligned_orders},
        {"structure.aligned_lags", &GmpStructure::aligned_lags},
        {"structure.lagging_orders", &GmpStructure::lagging_orders},
        {"structure.lagging_lags", &GmpStructure::lagging_lags},
        {"structure.lagging_cross", &GmpStructure::lagging_cross},
        {"structure.leading_orders", &GmpStructure::leading_orders},
        {"structure.leading_lags", &GmpStructure::leading_lags},
        {"structure.leading_cross", &GmpStructure::leading_cross},
    };
    return fields;
}
}  // namespace coeffile

struct CoefficientFile {
    CoefficientVector coeffs;
    std::vector<text::Entry> extra;  // header keys outside the core format
};

/// Serializes coefficients. `header_comment` lines are emitted first, each
/// prefixed with "# "; `extra` entries follow the structure block.
inline std::string format_coefficients(const CoefficientVector& coeffs, const std::vector<std::string>& header_comment = {},
                                       const std::vector<std::pair<std::string, std::string>>& extra = {},
                                       bool omit_zero = true) {
    std::ostringstream out;
    for (const auto& c : header_comment) out << "# " << c << '\n';
    out << "format = " << coeffile::kFormat << '\n';
    for (const auto& [key, member] : coeffile::structure_fields())
        out << key << " = " << text::join_ints(coeffs.structure().*member) << '\n';
    for (const auto& [key, value] : extra) out << key << " = " << value << '\n';
    for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
        if (omit_zero && coeffs[j] == cplx{0.0, 0.0}) continue;
        const auto& d = coeffs.columns()[static_cast<std::size_t>(j)];
        out << "kernel = " << to_string(d.branch) << ' ' << d.k << ' ' << d.l << ' '
            << (d.branch == Branch::Aligned ? std::string("-") : std::to_string(d.m)) << ' '
            << text::format_double(coeffs[j].real()) << ' ' << text::format_double(coeffs[j].imag()) << '\n';
    }
    return out.str();
}

inline CoefficientFile parse_coefficients(const std::string& content, const std::string& source) {
    const auto entries = text::parse_entries(content, source);
    GmpStructure structure;
    std::set<std::string> seen;
    bool have_format = false;
    std::vector<text::Entry> kernels;
    std::vector<text::Entry> extra;
    for (const auto& e : entries) {
        if (e.key == "kernel") {
            kernels.push_back(e);
            continue;
        }
        if (!seen.insert(e.key).second) throw FormatError(text::where(source, e) + ": duplicate key");
        if (e.key == "format") {
            if (e.value != coeffile::kFormat)
                throw FormatError(text::where(source, e) + ": unsupported format '" + e.value + "'");
            have_format = true;
            continue;
        }
        bool matched = false;
        for (const auto& [key, member] : coeffile::structure_fields()) {
            if (e.key == key) {
                structure.*member = text::parse_int_list(e.value, text::where(source, e));
                matched = true;
            }
        }
        if (!matched) extra.push_back(e);
    }
    if (!have_format) throw FormatError(source + ": missing 'format = " + std::string(coeffile::kFormat) + "'");
    for (const auto& [key, member] : coeffile::structure_fields())
        if (!seen.count(key)) throw FormatError(source + ": missing '" + key + "'");
    try {
        structure.validate();
    } catch (const ConfigError& err) {
        throw FormatError(source + ": " + err.what());
    }

    CoefficientVector coeffs(structure);
    std::vector<bool> assigned(static_cast<std::size_t>(coeffs.size()), false);
    for (const auto& e : kernels) {
        const auto ctx = text::where(source, e);
        const auto tok = text::split_ws(e.value);
        if (tok.size() != 6) throw FormatError(ctx + ": expected '<branch> <k> <l> <m|-> <re> <im>'");
        KernelDescriptor d;
        try {
            d.branch = branch_from_string(tok[0]);
        } catch (const FormatError&) {
            throw FormatError(ctx + ": unknown branch '" + tok[0] + "'");
        }
        d.k = text::parse_int<int>(tok[1], ctx);
        d.l = text::parse_int<int>(tok[2], ctx);
        if (d.branch == Branch::Aligned) {
            if (tok[3] != "-") throw FormatError(ctx + ": aligned kernels take '-' for m");
        } else {
            d.m = text::parse_int<int>(tok[3], ctx);
        }
        const auto idx = coeffs.index_of(d);
        if (!idx) throw FormatError(ctx + ": kernel " + to_string(d) + " is not part of the declared structure");
        if (assigned[static_cast<std::size_t>(*idx)]) throw FormatError(ctx + ": kernel " + to_string(d) + " listed twice");
        assigned[static_cast<std::size_t>(*idx)] = true;
        coeffs.values()[*idx] = {text::parse_double(tok[4], ctx), text::parse_double(tok[5], ctx)};
    }
    return {std::move(coeffs), std::move(extra)};
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Reads a coefficient file, rejecting any header key outside the core
/// format.
inline CoefficientVector read_coefficients(const std::filesystem::path& path) {
    auto file = parse_coefficients(read_text_file(path), path.string());
    if (!file.extra.empty())
        throw FormatError(text::where(path.string(), file.extra.front()) + ": unknown key");
    return std::move(file.coeffs);
}

inline void write_coefficients(const CoefficientVector& coeffs, const std::filesystem::path& path,
                               const std::vector<std::string>& header_comment = {}) {
    write_text_file(path, format_coefficients(coeffs, header_comment));
}

}  // namespace bwlasso
