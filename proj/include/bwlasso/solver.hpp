// SPDX-License-Identifier: Apache-2.0
#pragma once

// Least squares, ridge, l1-regularized regression by iterated ridge, and the
// block-weighted Lasso solved by block coordinate descent (BCD).
//
// All problems are complex-valued and unnormalized:
//
//   standard Lasso:        min ||x - S w||^2 + lambda * sum_j |w_j|
//   block-weighted Lasso:  min ||x - S w||^2 + sum_k lambda_k * sum_{j in block k} |w_j|
//
// where block k holds every kernel whose envelope power is k (polynomial
// order k+1), across all GMP branches.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gmp.hpp"

namespace bwlasso {

/// Normal matrices whose (column-equilibrated) condition number exceeds this
/// are rejected as rank deficient.
inline constexpr double kMaxConditionNumber = 1e12;

/// Per-order regularization weights lambda_k and zero thresholds tau_k.
struct RegularizationSchedule {
    std::map<int, double> lambda_by_order;
    std::map<int, double> threshold_by_order;

    double lambda(int k) const {
        const auto it = lambda_by_order.find(k);
        if (it == lambda_by_order.end())
            throw ConfigError("regularization schedule has no lambda for order index k=" + std::to_string(k) +
                              " (polynomial order " + std::to_string(k + 1) + ")");
        return it->second;
    }

    double threshold(int k) const {
        const auto it = threshold_by_order.find(k);
        if (it == threshold_by_order.end())
            throw ConfigError("regularization schedule has no zero threshold for order index k=" + std::to_string(k) +
                              " (polynomial order " + std::to_string(k + 1) + ")");
        return it->second;
    }

    /// Throws ConfigError naming the first order of `orders` that is missing
    /// or has an invalid value.
    void validate_for(const std::vector<int>& orders) const {
        for (int k : orders) {
            if (!(lambda(k) > 0.0)) throw ConfigError("lambda for k=" + std::to_string(k) + " must be positive");
            if (!(threshold(k) >= 0.0))
                throw ConfigError("zero threshold for k=" + std::to_string(k) + " must be non-negative");
        }
    }

    bool operator==(const RegularizationSchedule&) const = default;
};

/// Weights that grow with polynomial order: lambda_0 = 1e-4, times 1.35 per
/// order step up to k = 8, then times 2 up to k = 14. The zero threshold
/// starts at 0.17 and follows the same ratios. Covers the orders of
/// `structure`, which must lie in {0, 2, ..., 14}.
inline RegularizationSchedule default_schedule(const GmpStructure& structure) {
    constexpr int kMaxTabulated = 14;
    RegularizationSchedule schedule;
    const auto orders = structure.orders();
    for (int k : orders)
        if (k > kMaxTabulated)
            throw ConfigError("default schedule is tabulated up to k=14 (order 15); structure uses k=" +
                              std::to_string(k) + ", supply a custom schedule");
    double lambda = 1e-4;
    double tau = 0.17;
    for (int k = 0; k <= kMaxTabulated; k += 2) {
        if (k > 0) {
            const double ratio = k <= 8 ? 1.35 : 2.0;
            lambda *= ratio;
            tau *= ratio;
        }
        if (std::find(orders.begin(), orders.end(), k) != orders.end()) {
            schedule.lambda_by_order[k] = lambda;
            schedule.threshold_by_order[k] = tau;
        }
    }
    return schedule;
}

/// The same lambda and threshold for every order in `orders`.
inline RegularizationSchedule uniform_schedule(const std::vector<int>& orders, double lambda, double threshold) {
    RegularizationSchedule s;
    for (int k : orders) {
        s.lambda_by_order[k] = lambda;
        s.threshold_by_order[k] = threshold;
    }
    return s;
}

struct BcdConfig {
    int outer_iterations = 10;
    int inner_ridge_iterations = 50;
    double inner_tolerance = 1e-8;
    bool keep_best_iterate = true;
    double ridge_epsilon = 1e-8;
    /// Start each block's inner solve from its previous value instead of
    /// from the uniform-weight ridge.
    bool warm_start = true;

    void validate() const {
        if (outer_iterations < 1) throw ConfigError("bcd: outer_iterations must be >= 1");
        if (inner_ridge_iterations < 1) throw ConfigError("bcd: inner_ridge_iterations must be >= 1");
        if (!(inner_tolerance > 0.0)) throw ConfigError("bcd: inner_tolerance must be positive");
        if (!(ridge_epsilon > 0.0)) throw ConfigError("bcd: ridge_epsilon must be positive");
    }
};

// ---------------------------------------------------------------------------
// Dense kernels

namespace detail {

inline std::string describe(const GmpStructure& s) {
    std::ostringstream out;
    out << "aligned K={" << text::join_ints(s.aligned_orders) << "} L={" << text::join_ints(s.aligned_lags) << "}";
    if (s.has_lagging())
        out << ", lagging K={" << text::join_ints(s.lagging_orders) << "} L={" << text::join_ints(s.lagging_lags)
            << "} M={" << text::join_ints(s.lagging_cross) << "}";
    if (s.has_leading())
        out << ", leading K={" << text::join_ints(s.leading_orders) << "} L={" << text::join_ints(s.leading_lags)
            << "} M={" << text::join_ints(s.leading_cross) << "}";
    return out.str();
}

/// Solves M z = rhs for Hermitian positive definite M after symmetric
/// diagonal equilibration.
inline CVector solve_hpd(const CMatrix& M, const CVector& rhs) {
    const Eigen::VectorXd scale = M.diagonal().real().cwiseSqrt().cwiseInverse();
    const CMatrix scaled = scale.asDiagonal() * M * scale.asDiagonal();
    Eigen::LLT<CMatrix> llt(scaled);
    if (llt.info() != Eigen::Success) throw NumericalError("normal-equation matrix is not positive definite");
    return scale.asDiagonal() * llt.solve(scale.asDiagonal() * rhs);
}

/// Condition number of the Gram matrix after unit-diagonal scaling.
inline double equilibrated_condition(const CMatrix& gram) {
    const Eigen::VectorXd diag = gram.diagonal().real();
    if ((diag.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
    const CMatrix scaled = scale.asDiagonal() * gram * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(scaled, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

inline CVector least_squares_gram(const CMatrix& gram, const CVector& rhs, const std::string& context) {
    if (gram.rows() == 0) return CVector(0);
    const double cond = equilibrated_condition(gram);
    if (!(cond <= kMaxConditionNumber)) {
        std::ostringstream msg;
        msg << "least squares: normal matrix is numerically singular (condition estimate " << cond << " > "
            << kMaxConditionNumber << ")";
        if (!context.empty()) msg << " for " << context;
        throw RankDeficiencyError(msg.str());
    }
    return solve_hpd(gram, rhs);
}

inline CMatrix select_columns(const CMatrix& S, const std::vector<Eigen::Index>& cols) {
    CMatrix out(S.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = S.col(cols[i]);
    return out;
}

inline CMatrix select(const CMatrix& G, const std::vector<Eigen::Index>& idx) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    CMatrix out(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) out(a, b) = G(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    return out;
}

/// Iterated ridge regression for the l1 problem on precomputed normal
/// equations G = S^H S, b = S^H x.
///
/// Each step solves (G_AA + diag(d)) w_A = b_A over the active set A with
/// d_j = lambda / (2 max(|w_j|, eps)), the quadratic majorizer of
/// lambda |w_j| at the current iterate. Coefficients below `zero_threshold`
/// are set to zero and leave A for the rest of the call. On exit,
/// coefficients at or below eps are zeroed as well. `start`, when non-empty,
/// seeds the first weights; its zero entries get the cold-start weight
/// lambda / 2.
inline CVector iterated_ridge(const CMatrix& G, const CVector& b, double lambda, double zero_threshold,
                              const BcdConfig& config, const CVector& start = CVector()) {
    if (!(lambda > 0.0)) throw ConfigError("lasso: lambda must be positive (got " + std::to_string(lambda) + ")");
    if (!(zero_threshold >= 0.0)) throw ConfigError("lasso: zero threshold must be non-negative");
    const Eigen::Index P = G.rows();
    CVector w = CVector::Zero(P);
    if (P == 0) return w;

    std::vector<Eigen::Index> active(static_cast<std::size_t>(P));
    for (Eigen::Index j = 0; j < P; ++j) active[static_cast<std::size_t>(j)] = j;

    Eigen::VectorXd d = Eigen::VectorXd::Constant(P, lambda / 2.0);
    if (start.size() == P) {
        for (Eigen::Index j = 0; j < P; ++j)
            if (start[j] != cplx{0.0, 0.0}) d[j] = lambda / (2.0 * std::max(std::abs(start[j]), config.ridge_epsilon));
        w = start;
    }

    for (int it = 0; it < config.inner_ridge_iterations; ++it) {
        const auto n = static_cast<Eigen::Index>(active.size());
        CMatrix M = select(G, active);
        CVector rhs(n);
        for (Eigen::Index a = 0; a < n; ++a) {
            const auto j = active[static_cast<std::size_t>(a)];
            M(a, a) += d[j];
            rhs[a] = b[j];
        }
        const CVector sol = solve_hpd(M, rhs);

        CVector next = CVector::Zero(P);
        std::vector<Eigen::Index> still_active;
        still_active.reserve(active.size());
        for (Eigen::Index a = 0; a < n; ++a) {
            const auto j = active[static_cast<std::size_t>(a)];
            if (std::abs(sol[a]) < zero_threshold) continue;
            next[j] = sol[a];
            still_active.push_back(j);
        }
        const double change = (next - w).cwiseAbs().maxCoeff();
        w = std::move(next);
        active = std::move(still_active);
        if (active.empty() || change < config.inner_tolerance) break;
        for (auto j : active) d[j] = lambda / (2.0 * std::max(std::abs(w[j]), config.ridge_epsilon));
    }

    for (Eigen::Index j = 0; j < P; ++j)
        if (std::abs(w[j]) <= config.ridge_epsilon) w[j] = 0.0;
    return w;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public solvers on plain matrices

/// argmin ||x - S w||^2 through the normal equations. Throws
/// RankDeficiencyError when S^H S is numerically singular.
inline CVector least_squares(const CMatrix& S, const CVector& x, const std::string& context = {}) {
    if (S.rows() != x.size())
        throw DimensionError("least squares: matrix has " + std::to_string(S.rows()) + " rows, target has " +
                             std::to_string(x.size()));
    const CMatrix gram = S.adjoint() * S;
    return detail::least_squares_gram(gram, S.adjoint() * x, context);
}

/// argmin ||x - S w||^2 + sum_j d_j |w_j|^2 for strictly positive d.
inline CVector ridge(const CMatrix& S, const CVector& x, const Eigen::VectorXd& weights) {
    if (S.rows() != x.size()) throw DimensionError("ridge: matrix/target row mismatch");
    if (weights.size() != S.cols()) throw DimensionError("ridge: one weight per column required");
    if (!(weights.array() > 0.0).all()) throw ConfigError("ridge: weights must be strictly positive");
    CMatrix M = S.adjoint() * S;
    M.diagonal() += weights.cast<cplx>();
    return detail::solve_hpd(M, S.adjoint() * x);
}

/// Standard Lasso by iterated ridge regression.
inline CVector lasso_iterated_ridge(const CMatrix& S, const CVector& x, double lambda, double zero_threshold,
                                    const BcdConfig& config) {
    if (S.rows() != x.size()) throw DimensionError("lasso: matrix/target row mismatch");
    const CMatrix gram = S.adjoint() * S;
    return detail::iterated_ridge(gram, S.adjoint() * x, lambda, zero_threshold, config);
}

/// ||x - S w||^2 + sum_j lambda_j |w_j|.
inline double weighted_lasso_objective(const CMatrix& S, const CVector& x, const CVector& w,
                                       const Eigen::VectorXd& lambda_per_column) {
    return (x - S * w).squaredNorm() + lambda_per_column.dot(w.cwiseAbs());
}

struct KktReport {
    double max_violation_active = 0.0;
    double max_violation_inactive = 0.0;
};

/// Optimality certificate for the (weighted) Lasso with residual r = x - Sw:
/// active j need 2 S_j^H r = lambda_j w_j / |w_j|; inactive j need
/// 2 |S_j^H r| <= lambda_j.
inline KktReport kkt_check(const CMatrix& S, const CVector& x, const CVector& w, const Eigen::VectorXd& lambda_per_column) {
    const CVector corr = S.adjoint() * (x - S * w);
    KktReport report;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (w[j] != cplx{0.0, 0.0}) {
            const double v = std::abs(2.0 * corr[j] - lambda_per_column[j] * w[j] / std::abs(w[j]));
            report.max_violation_active = std::max(report.max_violation_active, v);
        } else {
            const double v = std::max(0.0, 2.0 * std::abs(corr[j]) - lambda_per_column[j]);
            report.max_violation_inactive = std::max(report.max_violation_inactive, v);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Kernel-matrix front ends

inline Eigen::VectorXd lambda_per_column(const KernelMatrix& S, const RegularizationSchedule& schedule) {
    Eigen::VectorXd out(S.cols());
    for (Eigen::Index j = 0; j < S.cols(); ++j) out[j] = schedule.lambda(S.columns()[static_cast<std::size_t>(j)].k);
    return out;
}

inline CoefficientVector least_squares(const KernelMatrix& S, const CVector& x) {
    return CoefficientVector(S.structure(), least_squares(S.data(), S.target_rows(x), "structure " + detail::describe(S.structure())));
}

inline CoefficientVector lasso_iterated_ridge(const KernelMatrix& S, const CVector& x, double lambda,
                                              double zero_threshold, const BcdConfig& config) {
    return CoefficientVector(S.structure(), lasso_iterated_ridge(S.data(), S.target_rows(x), lambda, zero_threshold, config));
}

inline KktReport kkt_check(const KernelMatrix& S, const CVector& x, const CoefficientVector& w,
                           const RegularizationSchedule& schedule) {
    return kkt_check(S.data(), S.target_rows(x), w.values(), lambda_per_column(S, schedule));
}

/// Least squares restricted to `support`; every other coefficient is exactly
/// zero.
inline CoefficientVector ls_refine(const KernelMatrix& S, const CVector& x, const std::vector<Eigen::Index>& support) {
    if (support.empty()) throw ConfigError("ls_refine: support is empty");
    for (auto j : support)
        if (j < 0 || j >= S.cols()) throw ConfigError("ls_refine: support index " + std::to_string(j) + " out of range");
    std::string context = "refined support of structure " + detail::describe(S.structure()) + " {";
    for (std::size_t i = 0; i < support.size(); ++i)
        context += (i ? " " : "") + to_string(S.columns()[static_cast<std::size_t>(support[i])]);
    context += "}";
    const CVector sub = least_squares(detail::select_columns(S.data(), support), S.target_rows(x), context);
    CoefficientVector out(S.structure());
    for (std::size_t i = 0; i < support.size(); ++i) out.values()[support[i]] = sub[static_cast<Eigen::Index>(i)];
    return out;
}

// ---------------------------------------------------------------------------
// Block-weighted Lasso by block coordinate descent

struct FitTraceRecord {
    int iteration = 0;  // 1-based outer iteration
    double nmse_db = 0.0;
    std::size_t kernel_count = 0;
    int effective_memory_depth = -1;
    int max_lag = -1;
    double objective = 0.0;
    std::map<int, double> lambda_by_order;
    CVector coefficients;
};

struct FitTrace {
    std::vector<FitTraceRecord> records;
    /// Objective before any update, then after every block update.
    std::vector<double> block_objectives;
    /// Block updates rejected because they would have raised the objective.
    int rejected_updates = 0;
};

/// CSV rendering: iteration,nmse_db,kernel_count,depth,max_lag.
inline std::string format_trace_csv(const FitTrace& trace) {
    std::ostringstream out;
    out << "iteration,nmse_db,kernel_count,depth,max_lag\n";
    for (const auto& r : trace.records)
        out << r.iteration << ',' << text::format_double(r.nmse_db) << ',' << r.kernel_count << ','
            << r.effective_memory_depth << ',' << r.max_lag << '\n';
    return out.str();
}

struct BcdResult {
    CoefficientVector coeffs;
    FitTrace trace;
    int selected_iteration = 0;  // 1-based
};

/// Column indices of each order block, ascending in k.
inline std::map<int, std::vector<Eigen::Index>> order_blocks(const KernelMatrix& S) {
    std::map<int, std::vector<Eigen::Index>> blocks;
    for (Eigen::Index j = 0; j < S.cols(); ++j) blocks[S.columns()[static_cast<std::size_t>(j)].k].push_back(j);
    return blocks;
}

/// Cyclic BCD over polynomial-order blocks. Each outer iteration visits the
/// blocks in ascending k; a block update forms the residual of every other
/// block and re-solves that block's Lasso with its own lambda_k and tau_k.
/// Updates that would raise the overall objective are discarded.
inline BcdResult block_weighted_lasso(const KernelMatrix& S, const CVector& x_full, const RegularizationSchedule& schedule,
                                      const BcdConfig& config) {
    config.validate();
    schedule.validate_for(S.structure().orders());
    const CVector x = S.target_rows(x_full);
    const auto blocks = order_blocks(S);
    const Eigen::VectorXd lambdas = lambda_per_column(S, schedule);

    struct Block {
        int k;
        std::vector<Eigen::Index> cols;
        CMatrix S;
        CMatrix gram;
        CVector w;
    };
    std::vector<Block> state;
    for (const auto& [k, cols] : blocks) {
        Block b{k, cols, detail::select_columns(S.data(), cols), CMatrix(), CVector()};
        b.gram = b.S.adjoint() * b.S;
        b.w = CVector::Zero(static_cast<Eigen::Index>(cols.size()));
        state.push_back(std::move(b));
    }

    auto assemble = [&] {
        CVector w = CVector::Zero(S.cols());
        for (const auto& b : state)
            for (std::size_t i = 0; i < b.cols.size(); ++i) w[b.cols[i]] = b.w[static_cast<Eigen::Index>(i)];
        return w;
    };
    auto objective = [&](const CVector& w) { return weighted_lasso_objective(S.data(), x, w, lambdas); };

    BcdResult result{CoefficientVector(S.structure()), FitTrace{}, 0};
    CVector w = assemble();
    double current = objective(w);
    result.trace.block_objectives.push_back(current);

    for (int r = 1; r <= config.outer_iterations; ++r) {
        for (auto& blk : state) {
            // Residual of the other blocks: x - sum_{g != k} S_g w_g.
            CVector residual = x;
            for (const auto& other : state) {
                if (&other == &blk || other.w.isZero(0.0)) continue;
                residual -= other.S * other.w;
            }
            const CVector start = config.warm_start ? blk.w : CVector();
            CVector candidate = detail::iterated_ridge(blk.gram, blk.S.adjoint() * residual, schedule.lambda(blk.k),
                                                       schedule.threshold(blk.k), config, start);

            CVector trial = w;
            for (std::size_t i = 0; i < blk.cols.size(); ++i) trial[blk.cols[i]] = candidate[static_cast<Eigen::Index>(i)];
            const double value = objective(trial);
            if (value <= current) {
                blk.w = std::move(candidate);
                w = std::move(trial);
                current = value;
            } else {
                ++result.trace.rejected_updates;
            }
            result.trace.block_objectives.push_back(current);
        }

        CoefficientVector iterate(S.structure(), w);
        FitTraceRecord rec;
        rec.iteration = r;
        rec.nmse_db = (x.squaredNorm() > 0.0) ? nmse_db(S.data() * w, x) : kDbFloor;
        rec.kernel_count = kernel_count(iterate);
        rec.effective_memory_depth = effective_memory_depth(iterate);
        rec.max_lag = max_lag(iterate);
        rec.objective = current;
        for (const auto& blk : state) rec.lambda_by_order[blk.k] = schedule.lambda(blk.k);
        rec.coefficients = w;
        result.trace.records.push_back(std::move(rec));
    }

    std::size_t pick = result.trace.records.size() - 1;
    if (config.keep_best_iterate) {
        pick = 0;
        for (std::size_t i = 1; i < result.trace.records.size(); ++i)
            if (result.trace.records[i].nmse_db < result.trace.records[pick].nmse_db) pick = i;
    }
    result.coeffs.values() = result.trace.records[pick].coefficients;
    result.selected_iteration = result.trace.records[pick].iteration;
    return result;
}

}  // namespace bwlasso
