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
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "blockshadow/ensemble.hpp"
#include "blockshadow/stats.hpp"
#include "blockshadow/statevector.hpp"

namespace blockshadow {

/// Shadow norm of a single Pauli string, (2^k+1)^{w_k(P)}.
inline double shadow_norm_pauli(const PauliString &p, const BlockLayout &layout) {
    return std::pow(static_cast<double>(layout.block_dim() + 1), block_weight(p, layout));
}

/// Local Pauli index on one block: x | z << k.
inline int local_index(std::uint64_t x, std::uint64_t z, int k) { return static_cast<int>(x | (z << k)); }

/// Counts of ensemble members mapping both P and Q to signed Z-strings, indexed
/// [P * 4^k + Q] over local indices, plus the member count.
struct JointZCounts {
    int k = 0;
    std::uint64_t members = 0;
    std::vector<std::uint64_t> counts;
};

inline JointZCounts joint_z_counts(std::span<const CliffordTableau> members, int k) {
    const int dim2 = 1 << (2 * k);
    JointZCounts out{k, members.size(), std::vector<std::uint64_t>(static_cast<std::size_t>(dim2) * dim2, 0)};
    std::vector<char> ztype(dim2);
    for (const auto &u : members) {
        for (int p = 0; p < dim2; ++p) {
            std::uint64_t x, z;
            int s;
            u.conjugate_masks(p & low_mask(k), p >> k, x, z, s);
            ztype[p] = x == 0;
        }
        for (int p = 0; p < dim2; ++p) {
            if (!ztype[p]) continue;
            for (int q = 0; q < dim2; ++q) out.counts[static_cast<std::size_t>(p) * dim2 + q] += ztype[q];
        }
    }
    return out;
}

/// Closed-form per-block f value for a uniform Clifford block of dimension D.
inline double f_block_formula(int p, int q, int k) {
    const double d = 1 << k;
    if (p == 0 || q == 0) return 1.0;
    const auto lo = low_mask(k);
    if (!commutes_masks(p & lo, static_cast<std::uint64_t>(p) >> k, q & lo, static_cast<std::uint64_t>(q) >> k)) return 0.0;
    if (p == q) return d + 1.0;
    return 2.0 * (d + 1.0) / (d + 2.0);
}

/// 4^k x 4^k table of per-block f values, row-major [p * 4^k + q].
/// Clifford-full uses the closed form; finite ensembles are enumerated.
inline std::vector<double> block_f_table(EnsembleKind kind, int k) {
    const int dim2 = 1 << (2 * k);
    std::vector<double> t(static_cast<std::size_t>(dim2) * dim2);
    if (kind == EnsembleKind::haar_dense) throw UnsupportedError("f(P,Q) needs a Clifford-type ensemble");
    if (kind == EnsembleKind::clifford_full) {
        for (int p = 0; p < dim2; ++p)
            for (int q = 0; q < dim2; ++q) t[static_cast<std::size_t>(p) * dim2 + q] = f_block_formula(p, q, k);
        return t;
    }
    const auto members = ensemble_members(kind, k);
    const JointZCounts c = joint_z_counts(members, k);
    const double m = 1.0 / ((1 << k) + 1.0);
    for (int p = 0; p < dim2; ++p) {
        for (int q = 0; q < dim2; ++q) {
            const double mp = p == 0 ? 1.0 : m, mq = q == 0 ? 1.0 : m;
            t[static_cast<std::size_t>(p) * dim2 + q] =
                static_cast<double>(c.counts[static_cast<std::size_t>(p) * dim2 + q]) / members.size() / (mp * mq);
        }
    }
    return t;
}

/// f(P,Q) = Pr_U[UPU^dag, UQU^dag both Z-type] / (m_P m_Q), as a product over blocks.
inline double f_pq(const PauliString &p, const PauliString &q, const EnsembleSpec &spec) {
    const BlockLayout &lay = spec.layout;
    require_dims(p.n() == lay.n() && q.n() == lay.n(), "f_pq: size mismatch");
    const int k = lay.k();
    const int dim2 = 1 << (2 * k);
    std::vector<double> table;
    if (spec.kind != EnsembleKind::clifford_full) table = block_f_table(spec.kind, k);
    double f = 1.0;
    for (int r = 0; r < lay.num_blocks(); ++r) {
        int a = local_index(lay.extract(p.x(), r), lay.extract(p.z(), r), k);
        int b = local_index(lay.extract(q.x(), r), lay.extract(q.z(), r), k);
        f *= table.empty() ? f_block_formula(a, b, k) : table[static_cast<std::size_t>(a) * dim2 + b];
        if (f == 0.0) break;
    }
    return f;
}

struct UsefulSums {
    double sum_m_inv = 0.0;   ///< sum over P of 1/m_P
    double sum_f_diag = 0.0;  ///< sum over P of f(P, I)
    double sum_f_all = 0.0;   ///< sum over all pairs of f(P, Q)
};

inline UsefulSums useful_sums(int n, int k) {
    BlockLayout lay(n, k);
    const double d = lay.block_dim();
    const double nb = lay.num_blocks();
    const double commuting_distinct = (d * d - 1) * (d * d / 2 - 2);
    const double per_block_all =
        1.0 + 2.0 * (d * d - 1) + (d * d - 1) * (d + 1) + commuting_distinct * 2.0 * (d + 1) / (d + 2);
    UsefulSums s;
    s.sum_m_inv = std::pow(std::pow(8.0, k) + std::pow(4.0, k) - std::pow(2.0, k), nb);
    s.sum_f_diag = std::pow(d * d, nb);
    s.sum_f_all = std::pow(per_block_all, nb);
    return s;
}

/// Exact variance of the multi-shot Pauli estimator.
inline double variance_pauli_multishot(const PauliString &p, double tr_p, std::size_t n_u, std::size_t n_s,
                                       const BlockLayout &layout) {
    if (std::abs(tr_p) > 1.0 + 1e-12) throw ValidationError("variance_pauli_multishot: |Tr(rho P)| > 1");
    if (n_u == 0 || n_s == 0) throw ValidationError("variance_pauli_multishot: counts must be positive");
    const double minv = shadow_norm_pauli(p, layout);
    const double ns = static_cast<double>(n_s);
    return (minv / ns + (ns - 1.0) / ns * minv * tr_p * tr_p - tr_p * tr_p) / static_cast<double>(n_u);
}

// ---------------------------------------------------------------------------
// Pauli-coefficient tables and the V sums.
// ---------------------------------------------------------------------------

/// Values indexed by the blocked Pauli index: block r occupies bits [2kr, 2k(r+1)),
/// laid out as x | z << k. XOR of two indices is the index of the product.
class PauliTable {
   public:
    PauliTable() = default;
    explicit PauliTable(BlockLayout layout) : layout_(layout), values_(std::size_t{1} << (2 * layout.n()), 0.0) {
        if (layout.n() > 8) throw UnsupportedError("Pauli tables are limited to n <= 8");
    }

    const BlockLayout &layout() const { return layout_; }
    std::size_t size() const { return values_.size(); }
    double &operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const { return values_; }

    std::uint64_t x_of(std::size_t idx) const { return split(idx).first; }
    std::uint64_t z_of(std::size_t idx) const { return split(idx).second; }

    std::size_t index_of(std::uint64_t x, std::uint64_t z) const {
        std::size_t idx = 0;
        const int k = layout_.k();
        for (int r = 0; r < layout_.num_blocks(); ++r) {
            idx |= static_cast<std::size_t>(local_index(layout_.extract(x, r), layout_.extract(z, r), k)) << (2 * k * r);
        }
        return idx;
    }

    std::pair<std::uint64_t, std::uint64_t> split(std::size_t idx) const {
        const int k = layout_.k();
        std::uint64_t x = 0, z = 0;
        for (int r = 0; r < layout_.num_blocks(); ++r) {
            std::uint64_t l = (idx >> (2 * k * r)) & low_mask(2 * k);
            x |= (l & low_mask(k)) << (k * r);
            z |= (l >> k) << (k * r);
        }
        return {x, z};
    }

    int local(std::size_t idx, int r) const {
        const int k = layout_.k();
        return static_cast<int>((idx >> (2 * k * r)) & low_mask(2 * k));
    }

   private:
    BlockLayout layout_;
    std::vector<double> values_;
};

namespace detail {

/// <j^x| R |j> phase pieces: R|j> = i^{|x&z|} (-1)^{|z&j|} |j^x>.
inline cplx pauli_phase(std::uint64_t x, std::uint64_t z, std::uint64_t j) {
    static const cplx kUnit[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    int e = popcount(x & z) + 2 * (popcount(z & j) & 1);
    return kUnit[e & 3];
}

}  // namespace detail

/// Tr(rho R) for every unsigned Pauli R of a pure state.
inline PauliTable pauli_table(const StateVector &psi, const BlockLayout &layout) {
    require_dims(psi.n() == layout.n(), "pauli_table: layout does not match state");
    PauliTable t(layout);
    const CVector &a = psi.amplitudes();
    const std::uint64_t dim = std::uint64_t{1} << psi.n();
    for (std::size_t idx = 0; idx < t.size(); ++idx) {
        auto [x, z] = t.split(idx);
        cplx acc = 0.0;
        for (std::uint64_t j = 0; j < dim; ++j) acc += std::conj(a(static_cast<Eigen::Index>(j ^ x))) * detail::pauli_phase(x, z, j) * a(static_cast<Eigen::Index>(j));
        t[idx] = acc.real();
    }
    return t;
}

/// Tr(rho R) for every unsigned Pauli R of a density matrix.
inline PauliTable pauli_table(const CMatrix &rho, const BlockLayout &layout) {
    const std::uint64_t dim = std::uint64_t{1} << layout.n();
    require_dims(rho.rows() == static_cast<Eigen::Index>(dim) && rho.cols() == rho.rows(), "pauli_table: bad matrix");
    PauliTable t(layout);
    for (std::size_t idx = 0; idx < t.size(); ++idx) {
        auto [x, z] = t.split(idx);
        cplx acc = 0.0;
        for (std::uint64_t j = 0; j < dim; ++j) acc += rho(static_cast<Eigen::Index>(j ^ x), static_cast<Eigen::Index>(j)) * detail::pauli_phase(x, z, j);
        t[idx] = acc.real();
    }
    return t;
}

/// Coefficients alpha_P of an observable sum, in table layout.
inline PauliTable coefficient_table(const ObservableSum &o, const BlockLayout &layout) {
    require_dims(o.n() == layout.n(), "coefficient_table: size mismatch");
    PauliTable t(layout);
    for (const auto &term : o.terms()) t[t.index_of(term.pauli.x(), term.pauli.z())] += term.coeff;
    return t;
}

/// alpha_P = Tr(Psi P) / 2^n for the projector onto a pure state.
inline PauliTable coefficient_table(const StateVector &psi, const BlockLayout &layout) {
    PauliTable t = pauli_table(psi, layout);
    const double d = std::ldexp(1.0, layout.n());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] /= d;
    return t;
}

struct VarianceModel {
    double V1 = 0.0;
    double V2 = 0.0;
    double V3 = 0.0;
    int n = 0;
    int k = 0;
};

namespace detail {

/// a^T (F tensor ... tensor F) b with F a per-block table.
inline double kron_quadratic_form(const PauliTable &a, const PauliTable &b, const std::vector<double> &f) {
    const BlockLayout &lay = a.layout();
    const int k = lay.k();
    const std::size_t dim2 = std::size_t{1} << (2 * k);
    std::vector<double> v(b.values().begin(), b.values().end()), w(v.size());
    for (int r = 0; r < lay.num_blocks(); ++r) {
        const std::size_t stride = std::size_t{1} << (2 * k * r);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t digit = (i / stride) % dim2;
            const std::size_t base = i - digit * stride;
            double acc = 0.0;
            for (std::size_t q = 0; q < dim2; ++q) acc += f[digit * dim2 + q] * v[base + q * stride];
            w[i] = acc;
        }
        std::swap(v, w);
    }
    CompensatedSum s;
    for (std::size_t i = 0; i < v.size(); ++i) s.add(a[i] * v[i]);
    return s.value();
}

}  // namespace detail

/// Exact V1, V2, V3 for coefficients alpha (observable O) and state table t = Tr(rho R).
inline VarianceModel compute_V123(const PauliTable &alpha, const PauliTable &trho, EnsembleKind kind, int threads = 0) {
    const BlockLayout &lay = trho.layout();
    require_dims(alpha.layout() == lay, "compute_V123: table layouts differ");
    if (lay.n() > 7) throw UnsupportedError("compute_V123: exact sums are limited to n <= 7; fit from data instead");
    const int k = lay.k();
    const int nb = lay.num_blocks();
    const std::size_t dim2 = std::size_t{1} << (2 * k);
    const std::vector<double> f = block_f_table(kind, k);
    const double d2 = std::ldexp(1.0, 2 * lay.n());

    VarianceModel out;
    out.n = lay.n();
    out.k = k;

    PauliTable at(lay);
    for (std::size_t i = 0; i < at.size(); ++i) at[i] = alpha[i] * trho[i];
    out.V1 = detail::kron_quadratic_form(at, at, f);

    // V3 via R = PQ: per-block g(r) = sum_p f(p, p^r).
    std::vector<double> g(dim2, 0.0);
    for (std::size_t r = 0; r < dim2; ++r)
        for (std::size_t p = 0; p < dim2; ++p) g[r] += f[p * dim2 + (p ^ r)];
    CompensatedSum v3;
    for (std::size_t i = 0; i < trho.size(); ++i) {
        if (trho[i] == 0.0) continue;
        double gi = 1.0;
        for (int r = 0; r < nb; ++r) gi *= g[trho.local(i, r)];
        v3.add(trho[i] * trho[i] * gi);
    }
    out.V3 = v3.value() / d2;

    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        if (alpha[i] != 0.0) support.push_back(i);
    std::vector<std::uint64_t> xs(support.size()), zs(support.size());
    for (std::size_t s = 0; s < support.size(); ++s) std::tie(xs[s], zs[s]) = alpha.split(support[s]);
    std::vector<double> partial(support.size(), 0.0);
    parallel_for(support.size(), threads, [&](std::size_t a) {
        const std::size_t pi = support[a];
        CompensatedSum acc;
        for (std::size_t b = 0; b < support.size(); ++b) {
            const std::size_t qi = support[b];
            double fv = 1.0;
            for (int r = 0; r < nb && fv != 0.0; ++r) fv *= f[alpha.local(pi, r) * dim2 + alpha.local(qi, r)];
            if (fv == 0.0) continue;
            // Every block commutes here, so PQ = (+-1) R with R = P xor Q.
            const int e = product_phase(xs[a], zs[a], xs[b], zs[b]);
            const double sign = (((e % 4) + 4) % 4) == 0 ? 1.0 : -1.0;
            acc.add(alpha[pi] * alpha[qi] * sign * trho[pi ^ qi] * fv);
        }
        partial[a] = acc.value();
    });
    CompensatedSum v2;
    for (double p : partial) v2.add(p);
    out.V2 = v2.value();
    return out;
}

inline VarianceModel compute_V123(const ObservableSum &o, const StateVector &rho, const BlockLayout &layout,
                                  EnsembleKind kind = EnsembleKind::clifford_full, int threads = 0) {
    return compute_V123(coefficient_table(o, layout), pauli_table(rho, layout), kind, threads);
}

/// Fidelity-type sums for target projector Psi; with Psi = rho these are the purity sums.
inline VarianceModel compute_V123(const StateVector &psi, const StateVector &rho, const BlockLayout &layout,
                                  EnsembleKind kind = EnsembleKind::clifford_full, int threads = 0) {
    return compute_V123(coefficient_table(psi, layout), pauli_table(rho, layout), kind, threads);
}

/// Second moment of the overlap of two snapshots from independent unitaries:
/// sum over P,Q of Tr(rho PQ)^2 f(P,Q)^2 / D^2.
inline double independent_overlap_second_moment(const PauliTable &trho, EnsembleKind kind = EnsembleKind::clifford_full) {
    const BlockLayout &lay = trho.layout();
    const int k = lay.k();
    const std::size_t dim2 = std::size_t{1} << (2 * k);
    const std::vector<double> f = block_f_table(kind, k);
    std::vector<double> g(dim2, 0.0);
    for (std::size_t r = 0; r < dim2; ++r)
        for (std::size_t p = 0; p < dim2; ++p) g[r] += f[p * dim2 + (p ^ r)] * f[p * dim2 + (p ^ r)];
    CompensatedSum s;
    for (std::size_t i = 0; i < trho.size(); ++i) {
        double gi = 1.0;
        for (int r = 0; r < lay.num_blocks(); ++r) gi *= g[trho.local(i, r)];
        s.add(trho[i] * trho[i] * gi);
    }
    return s.value() / std::ldexp(1.0, 2 * lay.n());
}

// ---------------------------------------------------------------------------
// Variance assemblies.
// ---------------------------------------------------------------------------

inline double variance_fidelity(double V1, double V2, double F, std::size_t n_u, std::size_t n_s) {
    if (n_u == 0 || n_s == 0) throw ValidationError("variance_fidelity: counts must be positive");
    const double ns = static_cast<double>(n_s);
    return (V2 / ns + (ns - 1.0) * V1 / ns - F * F) / static_cast<double>(n_u);
}

struct PurityVariance {
    double exact = 0.0;
    double bound = 0.0;
};

/// Pair-overlap weights of the within-unitary U-statistic: disjoint pairs,
/// pairs sharing one shot, identical pairs.
struct PairOverlapWeights {
    double disjoint, shared_one, identical;
};

inline PairOverlapWeights pair_overlap_weights(std::size_t n_s) {
    const double n = static_cast<double>(n_s);
    const double pairs = n * (n - 1.0);
    return {(n - 2.0) * (n - 3.0) / pairs, 4.0 * (n - 2.0) / pairs, 2.0 / pairs};
}

inline PurityVariance variance_purity(double V1, double V2, double V3, std::size_t n_u, std::size_t n_s, double p2) {
    if (n_u == 0 || n_s < 2) throw ValidationError("variance_purity: need N_U >= 1 and N_S >= 2");
    const auto w = pair_overlap_weights(n_s);
    const double ns = static_cast<double>(n_s);
    const double nu = static_cast<double>(n_u);
    PurityVariance out;
    out.exact = (w.disjoint * V1 + w.shared_one * V2 + w.identical * V3 - p2 * p2) / nu;
    out.bound = (2.0 / ((ns - 1.0) * (ns - 1.0)) * V3 + 4.0 / ns * V2 + V1 - p2 * p2) / nu;
    return out;
}

/// Variance of the CRM Pauli estimator with N_rho and N_sigma shots per unitary
/// on datasets that share their unitaries.
inline double variance_crm(double m_p, double tr_rho_p, double tr_sigma_p, std::size_t n_rho, std::size_t n_sigma,
                           std::size_t n_u) {
    if (n_rho == 0 || n_sigma == 0 || n_u == 0) throw ValidationError("variance_crm: counts must be positive");
    const double nr = static_cast<double>(n_rho), ns = static_cast<double>(n_sigma);
    const double a = tr_rho_p, b = tr_sigma_p;
    const double second = (1.0 / m_p) * (1.0 / nr + (nr - 1.0) * a * a / nr + 1.0 / ns + (ns - 1.0) * b * b / ns - 2.0 * a * b);
    return (second - (a - b) * (a - b)) / static_cast<double>(n_u);
}

/// Upper bound on the variance of the distributed inner-product estimator from
/// the purity-type sums of both states.
inline double variance_inner_product_bound(const VarianceModel &rho, const VarianceModel &sigma, double overlap,
                                           std::size_t n_u, std::size_t n_s) {
    const double ns = static_cast<double>(n_s);
    const double t11 = std::sqrt(rho.V1 * sigma.V1), t33 = std::sqrt(rho.V3 * sigma.V3);
    const double t13 = std::sqrt(rho.V1 * sigma.V3) + std::sqrt(rho.V3 * sigma.V1);
    return (t33 / (ns * ns) + (ns - 1.0) / (ns * ns) * t13 + std::pow((ns - 1.0) / ns, 2) * t11 - overlap * overlap) /
           static_cast<double>(n_u);
}

// ---------------------------------------------------------------------------
// Bounds.
// ---------------------------------------------------------------------------

struct BoundReport {
    std::string quantity;
    double value = 0.0;
    std::string formula;
    std::map<std::string, double> inputs;
};

/// alpha = n / (k 2^k).
inline double packing_ratio(int n, int k) { return static_cast<double>(n) / (k * std::ldexp(1.0, k)); }

struct FidelityNormReport {
    double bound = 0.0;          ///< 3^{n/k} e^{alpha/3}
    double product_exact = 0.0;  ///< block-product pure state, rho = Psi
};

inline FidelityNormReport worst_case_fidelity_norm(int n, int k) {
    BlockLayout lay(n, k);
    const double d = lay.block_dim();
    const double nb = lay.num_blocks();
    const double bracket = (d + 1.0) / (d + 2.0) * (3.0 - 5.0 / d + 2.0 / (d * d)) + 2.0 / d - 1.0 / (d * d);
    return {std::pow(3.0, nb) * std::exp(packing_ratio(n, k) / 3.0), std::pow(bracket, nb)};
}

/// Bound on sum_{P,Q} Tr(rho PQ)^2 f(P,Q) / D^2 for any state.
inline BoundReport v3_bound(int n, int k) {
    BlockLayout lay(n, k);
    return {"V3", std::pow(lay.block_dim() + 3.0, lay.num_blocks()), "v3_worst_case", {{"n", n}, {"k", k}}};
}

/// Bound on the variance of the overlap of two independent snapshots.
inline BoundReport independent_overlap_bound(int n, int k) {
    BlockLayout lay(n, k);
    return {"Var(Tr(rho1 rho2))", std::pow(lay.block_dim() + 1.0, 2.0 * lay.num_blocks()), "independent_overlap",
            {{"n", n}, {"k", k}}};
}

struct PuritySampleComplexity {
    double T = 0.0;                 ///< max(3^{n/k}/eps^2, 2^n/eps)
    double alpha = 0.0;             ///< n / (k 2^k)
    double T_with_constants = 0.0;  ///< smallest T making the variance bound at most eps^2
    double shadow_term = 0.0;
    double overlap_term = 0.0;
};

inline PuritySampleComplexity purity_sample_complexity(int n, int k, double eps) {
    if (eps <= 0) throw ValidationError("purity_sample_complexity: eps must be positive");
    BlockLayout lay(n, k);
    const double nb = lay.num_blocks();
    PuritySampleComplexity out;
    out.alpha = packing_ratio(n, k);
    out.T = std::max(std::pow(3.0, nb) / (eps * eps), std::ldexp(1.0, n) / eps);
    out.shadow_term = 8.0 * std::exp(out.alpha / 3.0) * std::pow(3.0, nb) / (eps * eps);
    out.overlap_term = 2.0 * std::exp(out.alpha) * std::pow(lay.block_dim() + 1.0, nb) / eps;
    out.T_with_constants = std::max(out.shadow_term, out.overlap_term);
    return out;
}

/// Exact variance of the all-pairs purity estimator over T snapshots with
/// independent unitaries, given Var(Tr(rho rho_hat)) and Var(Tr(rho1 rho2)).
inline double variance_purity_single_shot(double var_shadow, double var_overlap, double T) {
    return (4.0 * (T - 2.0) * var_shadow + 2.0 * var_overlap) / (T * (T - 1.0));
}

struct BernsteinReport {
    double R = 0.0;
    double sigma2_bound = 0.0;
    double tail = 0.0;             ///< failure probability at T (when given)
    double T_for_delta = 0.0;      ///< T making the tail equal delta
    std::vector<BoundReport> bounds;
};

/// Matrix-Bernstein bookkeeping for a contiguous region of r qubits.
inline BernsteinReport bernstein_bound(int r, int k, double eps, std::optional<double> T = std::nullopt,
                                       double delta = 0.05) {
    if (k < 1 || r % k != 0) throw ValidationError("bernstein_bound: k must divide r");
    if (eps <= 0 || delta <= 0 || delta >= 1) throw ValidationError("bernstein_bound: need eps > 0, 0 < delta < 1");
    BernsteinReport out;
    out.R = std::ldexp(1.0, k) + 1.0;
    out.sigma2_bound = std::pow(std::ldexp(1.0, k + 1) - 1.0, r / k);
    const double scale = 8.0 * std::ldexp(1.0, 2 * r) * out.sigma2_bound / (3.0 * eps * eps);
    const double dr = std::ldexp(1.0, r);
    out.T_for_delta = scale * std::log(2.0 * dr / delta);
    if (T) out.tail = std::min(1.0, 2.0 * dr * std::exp(-*T / scale));
    out.bounds.push_back({"sigma^2", out.sigma2_bound, "bernstein_second_moment", {{"r", r}, {"k", k}}});
    out.bounds.push_back({"T", out.T_for_delta, "bernstein_trace_norm", {{"r", r}, {"k", k}, {"eps", eps}, {"delta", delta}}});
    return out;
}

/// E[X^2] for the region snapshot X = tensor((D+1) u^dag|b><b|u - I) on a
/// state of the region. Per block the map is A -> (D-1) A + D Tr_block(A) I.
inline CMatrix bernstein_second_moment(const CMatrix &rho, int k) {
    const Eigen::Index dim = rho.rows();
    const int r = std::countr_zero(static_cast<std::uint64_t>(dim));
    BlockLayout lay(r, k);
    const Eigen::Index bd = lay.block_dim();
    const double d = static_cast<double>(bd);
    CMatrix cur = rho;
    for (int blk = 0; blk < lay.num_blocks(); ++blk) {
        const std::uint64_t mask = lay.block_mask(blk);
        CMatrix traced = CMatrix::Zero(dim, dim);
        // Tr over this block, re-embedded as identity on it.
        for (Eigen::Index i = 0; i < dim; ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (((i ^ j) & static_cast<Eigen::Index>(mask)) != 0) continue;
                cplx acc = 0.0;
                const Eigen::Index io = i & ~static_cast<Eigen::Index>(mask), jo = j & ~static_cast<Eigen::Index>(mask);
                for (Eigen::Index b = 0; b < bd; ++b) {
                    const Eigen::Index off = b << lay.block_first(blk);
                    acc += cur(io | off, jo | off);
                }
                traced(i, j) = acc;
            }
        }
        cur = (d - 1.0) * cur + d * traced;
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Fitting V from empirical standard deviations.
// ---------------------------------------------------------------------------

enum class FitMode { fidelity, purity };

struct CurvePoint {
    std::size_t n_s;
    double stddev;
};

struct VFit {
    double V1 = 0.0;
    double V2 = 0.0;
    double V3 = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
};

namespace detail {

inline std::array<double, 3> variance_weights(FitMode mode, std::size_t n_s) {
    const double ns = static_cast<double>(n_s);
    if (mode == FitMode::fidelity) return {(ns - 1.0) / ns, 1.0 / ns, 0.0};
    const auto w = pair_overlap_weights(n_s);
    return {w.disjoint, w.shared_one, w.identical};
}

struct VFunctor : Eigen::DenseFunctor<double> {
    VFunctor(int params, std::vector<std::array<double, 3>> weights, std::vector<double> targets)
        : Eigen::DenseFunctor<double>(params, static_cast<int>(targets.size())),
          w(std::move(weights)),
          target(std::move(targets)) {}

    std::vector<std::array<double, 3>> w;
    std::vector<double> target;  // N_U * std^2 + mean^2

    // V_i = theta_i^2 keeps every fitted sum non-negative.
    int operator()(const Eigen::VectorXd &th, Eigen::VectorXd &fvec) const {
        for (int i = 0; i < values(); ++i) {
            double model = 0.0;
            for (int j = 0; j < inputs(); ++j) model += w[i][j] * th(j) * th(j);
            fvec(i) = (model - target[i]) / target[i];
        }
        return 0;
    }
    int df(const Eigen::VectorXd &th, Eigen::MatrixXd &jac) const {
        for (int i = 0; i < values(); ++i)
            for (int j = 0; j < inputs(); ++j) jac(i, j) = 2.0 * w[i][j] * th(j) / target[i];
        return 0;
    }
};

}  // namespace detail

/// Least-squares fit of V sums to a curve of estimator standard deviations
/// versus N_S at fixed N_U. `mean` is the known target value (fidelity or purity).
inline VFit fit_V_from_std(std::span<const CurvePoint> curve, std::size_t n_u, FitMode mode, double mean) {
    std::vector<std::size_t> distinct;
    for (const auto &p : curve) distinct.push_back(p.n_s);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4) throw ValidationError("fit_V_from_std: need at least 4 distinct N_S values");
    if (mode == FitMode::purity && distinct.front() < 2) throw ValidationError("fit_V_from_std: purity needs N_S >= 2");
    const bool flat = std::all_of(curve.begin(), curve.end(),
                                  [&](const CurvePoint &p) { return std::abs(p.stddev - curve.front().stddev) <= 1e-14 * std::abs(p.stddev); });
    if (flat) throw DataError("fit_V_from_std: degenerate curve (all standard deviations equal)");

    std::vector<std::array<double, 3>> weights;
    std::vector<double> targets;
    for (const auto &p : curve) {
        weights.push_back(detail::variance_weights(mode, p.n_s));
        targets.push_back(static_cast<double>(n_u) * p.stddev * p.stddev + mean * mean);
    }
    detail::VFunctor fn(mode == FitMode::fidelity ? 2 : 3, std::move(weights), std::move(targets));
    const int params = fn.inputs();
    // Start from the unconstrained linear solution, clipped to positive values.
    Eigen::MatrixXd a(fn.values(), params);
    Eigen::VectorXd b(fn.values());
    for (int i = 0; i < fn.values(); ++i) {
        for (int j = 0; j < params; ++j) a(i, j) = fn.w[i][j] / fn.target[i];
        b(i) = 1.0;
    }
    Eigen::VectorXd lin = a.colPivHouseholderQr().solve(b);
    Eigen::VectorXd th(params);
    const double scale = *std::max_element(fn.target.begin(), fn.target.end());
    for (int j = 0; j < params; ++j) th(j) = std::sqrt(std::max(lin(j), 1e-6 * scale));

    Eigen::LevenbergMarquardt<detail::VFunctor> lm(fn);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    lm.setGtol(0.0);
    lm.setMaxfev(2000);
    lm.minimize(th);

    VFit out;
    out.V1 = th(0) * th(0);
    out.V2 = th(1) * th(1);
    if (params == 3) out.V3 = th(2) * th(2);
    Eigen::VectorXd res(fn.values());
    fn(th, res);
    out.residual_norm = res.norm();
    out.iterations = static_cast<int>(lm.iterations());
    return out;
}

}  // namespace blockshadow
