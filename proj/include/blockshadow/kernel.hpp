// Copyright 2026 The blockshadow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "blockshadow/mitigation.hpp"
#include "blockshadow/noise.hpp"
#include "blockshadow/shadow.hpp"
#include "blockshadow/stats.hpp"
#include "blockshadow/statevector.hpp"

namespace blockshadow {

/// Per-block snapshots (2^k+1) u^dag|b><b|u - I of one shot of a record.
inline std::vector<CMatrix> block_snapshots(const ShadowRecord &rec, const BlockLayout &layout, std::size_t shot = 0) {
    if (shot >= rec.bitstrings.size()) throw ValidationError("block_snapshots: shot index out of range");
    const Eigen::Index dim = Eigen::Index{1} << layout.k();
    std::vector<CMatrix> out;
    out.reserve(static_cast<std::size_t>(layout.num_blocks()));
    for (int r = 0; r < layout.num_blocks(); ++r) {
        const CMatrix u = rec.unitary.block(r).dense();
        const CVector v = u.adjoint().col(static_cast<Eigen::Index>(layout.extract(rec.bitstrings[shot], r)));
        out.push_back(static_cast<double>(dim + 1) * v * v.adjoint() - CMatrix::Identity(dim, dim));
    }
    return out;
}

/// Per-block snapshots averaged over every shot of a record.
inline std::vector<CMatrix> averaged_block_snapshots(const ShadowRecord &rec, const BlockLayout &layout) {
    if (rec.bitstrings.empty()) throw DataError("averaged_block_snapshots: record has no shots");
    std::vector<CMatrix> acc = block_snapshots(rec, layout, 0);
    for (std::size_t s = 1; s < rec.bitstrings.size(); ++s) {
        auto next = block_snapshots(rec, layout, s);
        for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += next[r];
    }
    for (auto &m : acc) m /= static_cast<double>(rec.bitstrings.size());
    return acc;
}

/// Snapshots of a dataset flattened for fast Hilbert-Schmidt products:
/// entry [t] holds every block's matrix as interleaved real/imaginary parts.
struct SnapshotSet {
    BlockLayout layout;
    std::vector<std::vector<Eigen::VectorXd>> records;

    std::size_t size() const { return records.size(); }

    /// Tr(A_t[r] B_s[r]) for Hermitian blocks.
    static double overlap(const Eigen::VectorXd &a, const Eigen::VectorXd &b) { return a.dot(b); }
};

inline Eigen::VectorXd flatten_hermitian(const CMatrix &m) {
    Eigen::VectorXd out(2 * m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        out(2 * i) = m.data()[i].real();
        out(2 * i + 1) = m.data()[i].imag();
    }
    return out;
}

inline SnapshotSet snapshot_set(const ShadowDataset &ds, bool averaged) {
    SnapshotSet out{ds.layout(), {}};
    out.records.reserve(ds.records.size());
    for (const auto &rec : ds.records) {
        auto blocks = averaged ? averaged_block_snapshots(rec, out.layout) : block_snapshots(rec, out.layout);
        std::vector<Eigen::VectorXd> flat;
        for (const auto &b : blocks) flat.push_back(flatten_hermitian(b));
        out.records.push_back(std::move(flat));
    }
    return out;
}

struct KernelParams {
    double tau = 1.0;
    double gamma = 1.0;
    /// Optional per-block gamma; overrides `gamma` when non-empty.
    std::vector<double> block_gamma;
    /// Use snapshots averaged over the shots of each record.
    bool averaged = false;
    /// Kernel-matrix diagonals skip coincident record pairs (see self_kernel_distinct).
    bool distinct_self_pairs = true;

    static KernelParams defaults(int k) {
        KernelParams p;
        p.gamma = k == 1 ? 1.0 : 0.25;
        return p;
    }

    double gamma_of(int r) const { return block_gamma.empty() ? gamma : block_gamma[static_cast<std::size_t>(r)]; }
};

namespace detail {

inline double kernel_from_sets(const SnapshotSet &a, const SnapshotSet &b, const KernelParams &p, bool skip_coincident) {
    require_dims(a.layout == b.layout, "shadow_kernel: layouts differ");
    if (a.records.empty() || b.records.empty()) throw DataError("shadow_kernel: empty snapshot set");
    const int nb = a.layout.num_blocks();
    if (!p.block_gamma.empty() && static_cast<int>(p.block_gamma.size()) != nb) {
        throw DimensionError("shadow_kernel: block_gamma needs one entry per block");
    }
    if (skip_coincident && a.size() < 2) throw DataError("shadow_kernel: self-kernel without coincident pairs needs 2 records");
    CompensatedSum outer;
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t s = 0; s < b.size(); ++s) {
            if (skip_coincident && s == t) continue;
            double inner = 0.0;
            for (int r = 0; r < nb; ++r) inner += p.gamma_of(r) * SnapshotSet::overlap(a.records[t][r], b.records[s][r]);
            outer.add(std::exp(inner / nb));
        }
    }
    const double pairs = static_cast<double>(a.size() * b.size() - (skip_coincident ? a.size() : 0));
    const double value = std::exp(p.tau * outer.value() / pairs);
    if (!std::isfinite(value)) throw NumericalError("shadow_kernel: kernel overflows; lower tau or gamma");
    return value;
}

}  // namespace detail

/// exp(tau / (T_A T_B) * sum_{t,t'} exp(sum_i gamma_i Tr(rho_i^t sigma_i^t') / (n/k))).
inline double shadow_kernel(const SnapshotSet &a, const SnapshotSet &b, const KernelParams &p) {
    return detail::kernel_from_sets(a, b, p, false);
}

/// Self-kernel of one data set averaged over distinct records t != t' only, so
/// the deterministic Tr(S^2) terms do not inflate it.
inline double self_kernel_distinct(const SnapshotSet &a, const KernelParams &p) {
    return detail::kernel_from_sets(a, a, p, true);
}

inline double shadow_kernel(const ShadowDataset &a, const ShadowDataset &b, const KernelParams &p) {
    require_dims(a.layout() == b.layout(), "shadow_kernel: layouts differ");
    return shadow_kernel(snapshot_set(a, p.averaged), snapshot_set(b, p.averaged), p);
}

struct KernelMatrix {
    Eigen::MatrixXd values;
    KernelParams params;
    int k = 0;
    std::size_t records = 0;
};

inline KernelMatrix kernel_matrix(std::span<const SnapshotSet> sets, const KernelParams &p, int threads = 0) {
    if (sets.empty()) throw ValidationError("kernel_matrix: no data points");
    const auto m = static_cast<Eigen::Index>(sets.size());
    KernelMatrix out{Eigen::MatrixXd(m, m), p, sets.front().layout.k(), sets.front().size()};
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i; j < m; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), threads, [&](std::size_t q) {
        auto [i, j] = pairs[q];
        out.values(i, j) = out.values(j, i) = (i == j && p.distinct_self_pairs) ? self_kernel_distinct(sets[i], p)
                                                                             : shadow_kernel(sets[i], sets[j], p);
    });
    return out;
}

struct PCAResult {
    Eigen::VectorXd eigenvalues;   ///< descending
    Eigen::MatrixXd projections;   ///< row = data point, column = component
    double centered_trace = 0.0;
};

/// Kernel PCA: double-center, diagonalize, project. Each component's sign
/// makes its largest-magnitude projection positive.
inline PCAResult kernel_pca(const Eigen::MatrixXd &k, int components) {
    const Eigen::Index m = k.rows();
    if (m < 2 || k.cols() != m) throw ValidationError("kernel_pca: need a square matrix with at least 2 points");
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw ValidationError("kernel_pca: matrix is not symmetric");
    if (components < 1 || components > m) throw ValidationError("kernel_pca: bad component count");
    const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / m);
    Eigen::MatrixXd c = h * k * h;
    c = (c + c.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    PCAResult out;
    out.centered_trace = c.trace();
    out.eigenvalues.resize(components);
    out.projections.resize(m, components);
    for (int j = 0; j < components; ++j) {
        const Eigen::Index col = m - 1 - j;
        const double lambda = es.eigenvalues()(col);
        out.eigenvalues(j) = lambda;
        Eigen::VectorXd v = es.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        out.projections.col(j) = std::sqrt(std::max(lambda, 0.0)) * v;
    }
    return out;
}

/// Offset beta with Tr(Mt^-1 A Mt^-1 B) = alpha^2 Tr(M^-1 A M^-1 B) + beta for
/// trace-one blocks, where Mt^-1 amplifies the traceless part by alpha more than M^-1.
inline double em_kernel_beta(double alpha, int k) {
    const double d = static_cast<double>(1 << k);
    const double c = (alpha * (d + 1.0) - 1.0) / d;
    return alpha * alpha * (d + 2.0) - 2.0 * alpha * (d + 1.0) * c + c * c * d;
}

/// Mitigated inverse channel on one block: alpha (D+1) (A - Tr A I/D) + Tr A I/D.
inline CMatrix mitigated_inverse(const CMatrix &a, double alpha, int k) {
    const Eigen::Index dim = Eigen::Index{1} << k;
    const CMatrix mixed = a.trace() / static_cast<double>(dim) * CMatrix::Identity(dim, dim);
    return alpha * static_cast<double>(dim + 1) * (a - mixed) + mixed;
}

struct EmKernelParams {
    double gamma = 0.0;
    double tau = 0.0;
    double beta = 0.0;
};

/// Hyperparameters under which the raw kernel equals the error-mitigated one.
inline EmKernelParams em_kernel_params(double gamma, double tau, double alpha, int k) {
    if (!(alpha >= 1.0)) throw ValidationError("em_kernel_params: alpha must be >= 1");
    const double beta = em_kernel_beta(alpha, k);
    return {gamma * alpha * alpha, tau * std::exp(gamma * beta), beta};
}

inline KernelParams em_kernel_params(const KernelParams &p, double alpha, int k) {
    if (!p.block_gamma.empty()) throw UnsupportedError("em_kernel_params: per-block gamma needs uniform blocks");
    auto e = em_kernel_params(p.gamma, p.tau, alpha, k);
    KernelParams out = p;
    out.gamma = e.gamma;
    out.tau = e.tau;
    return out;
}

/// Block-averaged single-block amplification of a calibration report, for
/// kernels that assume the same noise on every block.
inline double uniform_block_alpha(const CalibrationReport &report) {
    double sum = 0.0;
    for (int r = 0; r < report.layout.num_blocks(); ++r) sum += report.alpha(std::uint64_t{1} << r);
    return sum / report.layout.num_blocks();
}

struct TanhFit {
    double a = 0.0;
    double b = 1.0;
    double c = 0.0;
    double w0 = 0.0;
    double residual_norm = 0.0;

    double operator()(double w) const { return a * std::tanh((w - w0) / b) + c; }
    /// Largest slope of the fitted curve, attained at w0.
    double peak_derivative() const { return std::abs(a / b); }
};

namespace detail {

struct TanhFunctor : Eigen::DenseFunctor<double> {
    TanhFunctor(std::vector<double> w, std::vector<double> y, double floor, double lo, double hi)
        : Eigen::DenseFunctor<double>(4, static_cast<int>(w.size())),
          x(std::move(w)),
          target(std::move(y)),
          min_width(floor),
          w_lo(lo),
          w_hi(hi) {}

    std::vector<double> x, target;
    double min_width, w_lo, w_hi;

    // Parameters: a, q, c, s with width b = min_width + q^2 and the centre
    // w0 = w_lo + (w_hi - w_lo)(1 + tanh s)/2 kept inside the grid.
    double width(const Eigen::VectorXd &p) const { return min_width + p(1) * p(1); }
    double centre(const Eigen::VectorXd &p) const { return w_lo + (w_hi - w_lo) * (1.0 + std::tanh(p(3))) / 2.0; }
    double centre_param(double w0) const {
        return std::atanh(std::clamp(2.0 * (w0 - w_lo) / (w_hi - w_lo) - 1.0, -0.99, 0.99));
    }

    int operator()(const Eigen::VectorXd &p, Eigen::VectorXd &fvec) const {
        const double b = width(p), w0 = centre(p);
        for (int i = 0; i < values(); ++i) fvec(i) = p(0) * std::tanh((x[i] - w0) / b) + p(2) - target[i];
        return 0;
    }
    int df(const Eigen::VectorXd &p, Eigen::MatrixXd &jac) const {
        const double b = width(p), w0 = centre(p);
        const double ts = std::tanh(p(3)), dw0 = (w_hi - w_lo) * (1.0 - ts * ts) / 2.0;
        for (int i = 0; i < values(); ++i) {
            const double u = (x[i] - w0) / b;
            const double t = std::tanh(u), sech2 = 1.0 - t * t;
            jac(i, 0) = t;
            jac(i, 1) = -p(0) * sech2 * u / b * 2.0 * p(1);
            jac(i, 2) = 1.0;
            jac(i, 3) = -p(0) * sech2 / b * dw0;
        }
        return 0;
    }
};

}  // namespace detail

/// Least-squares fit of a tanh step, restarted over several widths. The width
/// is held at or above `min_width` (default: the smallest grid spacing, below
/// which the grid cannot resolve a step) and the centre inside the grid.
inline TanhFit fit_tanh(std::span<const double> w, std::span<const double> y, std::optional<double> min_width = {}) {
    if (w.size() != y.size()) throw DimensionError("fit_tanh: size mismatch");
    if (w.size() < 4) throw ValidationError("fit_tanh: need at least 4 points");
    const auto [wmin_it, wmax_it] = std::minmax_element(w.begin(), w.end());
    const double wmin = *wmin_it, wmax = *wmax_it, span_w = wmax - wmin;
    if (!(span_w > 0.0)) throw ValidationError("fit_tanh: degenerate abscissa");
    std::vector<double> sorted(w.begin(), w.end());
    std::sort(sorted.begin(), sorted.end());
    double spacing = span_w;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i] > sorted[i - 1]) spacing = std::min(spacing, sorted[i] - sorted[i - 1]);
    }
    const double floor = min_width.value_or(spacing);
    if (!(floor >= 0.0)) throw ValidationError("fit_tanh: negative minimum width");

    const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
    const double mid = (*ymin_it + *ymax_it) / 2.0, half = (*ymax_it - *ymin_it) / 2.0;
    // Start the centre where the data first crosses its midpoint.
    double w_cross = (wmin + wmax) / 2.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        if ((y[i] - mid) * (y[i + 1] - mid) <= 0.0) {
            w_cross = (w[i] + w[i + 1]) / 2.0;
            break;
        }
    }
    const double slope_sign = y.back() >= y.front() ? 1.0 : -1.0;

    detail::TanhFunctor fn({w.begin(), w.end()}, {y.begin(), y.end()}, floor, wmin, wmax);
    std::optional<TanhFit> best;
    for (double frac : {0.02, 0.05, 0.1, 0.2, 0.4, 0.8}) {
        for (double centre : {w_cross, (wmin + wmax) / 2.0}) {
            Eigen::VectorXd p(4);
            p << slope_sign * std::max(half, 1e-12), std::sqrt(std::max(frac * span_w - floor, 1e-3 * span_w)), mid,
                fn.centre_param(centre);
            Eigen::LevenbergMarquardt<detail::TanhFunctor> lm(fn);
            lm.setMaxfev(2000);
            lm.minimize(p);
            if (!p.allFinite() || fn.width(p) == 0.0) continue;
            Eigen::VectorXd res(fn.values());
            fn(p, res);
            TanhFit f{p(0), fn.width(p), p(2), fn.centre(p), res.norm()};
            if (!best || f.residual_norm < best->residual_norm) best = f;
        }
    }
    if (best) return *best;
    throw NumericalError("fit_tanh: no fit converged");
}

struct PhaseScanConfig {
    int n = 8;
    int k = 2;
    double v = 1.0;
    int records = 30;
    /// Shots per record; the default kernel averages their snapshots.
    int shots = 80;
    EnsembleKind ensemble = EnsembleKind::clifford_full;
    KernelParams kernel = [] {
        auto p = KernelParams::defaults(2);
        p.averaged = true;
        return p;
    }();
    const NoiseModel *noise = nullptr;
    /// Amplification for error-mitigated kernels; 1 means raw.
    double alpha = 1.0;
    std::uint64_t seed = 0;
    int bootstrap = 20;
    std::uint64_t bootstrap_seed = 0xb5;
    int threads = 0;
};

struct PhaseScanResult {
    std::vector<double> w;
    std::vector<double> pc1;
    std::vector<double> pc1_stderr;
    TanhFit fit;
    double w0_stderr = 0.0;
    Eigen::MatrixXd kernel;
};

namespace detail {

/// PC1 oriented to increase with w and rescaled to [-1, 1].
inline std::vector<double> normalized_pc1(const Eigen::MatrixXd &k, std::span<const double> w) {
    const PCAResult pca = kernel_pca(k, 1);
    std::vector<double> y(pca.projections.rows());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = pca.projections(static_cast<Eigen::Index>(i), 0);
    const double wbar = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    double corr = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) corr += (w[i] - wbar) * y[i];
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw NumericalError("phase_scan: first principal component is flat");
    const double low = *lo;
    for (auto &x : y) {
        x = 2.0 * (x - low) / range - 1.0;
        if (corr < 0) x = -x;
    }
    return y;
}

inline SnapshotSet resample(const SnapshotSet &s, Rng &rng) {
    std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
    SnapshotSet out{s.layout, {}};
    out.records.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out.records.push_back(s.records[pick(rng)]);
    return out;
}

}  // namespace detail

/// SSH ground states along w (v fixed) -> shadows -> kernel PCA -> tanh fit of PC1.
/// Record-level bootstrap gives the PC1 and w0 standard errors.
inline PhaseScanResult phase_scan(std::span<const double> w_grid, const PhaseScanConfig &cfg) {
    if (w_grid.size() < 4) throw ValidationError("phase_scan: need at least 4 grid points");
    if (cfg.records < 2) throw ValidationError("phase_scan: need at least 2 records per point");
    const EnsembleSpec spec{cfg.ensemble, BlockLayout(cfg.n, cfg.k)};
    const KernelParams params = cfg.alpha == 1.0 ? cfg.kernel : em_kernel_params(cfg.kernel, cfg.alpha, cfg.k);

    std::vector<SnapshotSet> sets(w_grid.size());
    parallel_for(w_grid.size(), cfg.threads, [&](std::size_t i) {
        AcquireOptions ao;
        ao.seed = substream(cfg.seed, i, 0x55)();
        ao.noise = cfg.noise;
        ao.threads = 1;
        auto ds = acquire(ssh_ground_state(cfg.n, cfg.v, w_grid[i]), spec, cfg.records, cfg.shots, ao);
        sets[i] = snapshot_set(ds, params.averaged);
    });

    PhaseScanResult out;
    out.w.assign(w_grid.begin(), w_grid.end());
    out.kernel = kernel_matrix(sets, params, cfg.threads).values;
    out.pc1 = detail::normalized_pc1(out.kernel, w_grid);
    out.fit = fit_tanh(w_grid, out.pc1);
    out.pc1_stderr.assign(w_grid.size(), 0.0);

    if (cfg.bootstrap > 1) {
        std::vector<std::vector<double>> pc1_samples(w_grid.size());
        std::vector<double> w0_samples;
        for (int b = 0; b < cfg.bootstrap; ++b) {
            Rng rng = substream(cfg.bootstrap_seed, static_cast<std::uint64_t>(b), 0xb0);
            std::vector<SnapshotSet> boot;
            for (const auto &s : sets) boot.push_back(detail::resample(s, rng));
            try {
                auto y = detail::normalized_pc1(kernel_matrix(boot, params, cfg.threads).values, w_grid);
                for (std::size_t i = 0; i < y.size(); ++i) pc1_samples[i].push_back(y[i]);
                w0_samples.push_back(fit_tanh(w_grid, y).w0);
            } catch (const NumericalError &) {
                // A degenerate resample carries no information about the spread.
            }
        }
        auto sd = [](const std::vector<double> &v) { return v.size() > 1 ? std::sqrt(sample_variance(v)) : 0.0; };
        for (std::size_t i = 0; i < w_grid.size(); ++i) out.pc1_stderr[i] = sd(pc1_samples[i]);
        out.w0_stderr = sd(w0_samples);
    }
    return out;
}

}  // namespace blockshadow
