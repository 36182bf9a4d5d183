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

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockshadow/ensemble.hpp"
#include "blockshadow/noise.hpp"
#include "blockshadow/stats.hpp"
#include "blockshadow/statevector.hpp"

namespace blockshadow {

/// Per-block shadow channel A -> (A + Tr(A) I) / (2^k + 1).
inline CMatrix shadow_channel_forward(const CMatrix &a, int k) {
    const Eigen::Index dim = Eigen::Index{1} << k;
    require_dims(a.rows() == dim && a.cols() == dim, "shadow channel: operator size does not match k");
    return (a + a.trace() * CMatrix::Identity(dim, dim)) / static_cast<double>(dim + 1);
}

/// Inverse of the per-block shadow channel: (2^k + 1) A - Tr(A) I.
inline CMatrix shadow_channel_inverse(const CMatrix &a, int k) {
    const Eigen::Index dim = Eigen::Index{1} << k;
    require_dims(a.rows() == dim && a.cols() == dim, "shadow channel: operator size does not match k");
    return static_cast<double>(dim + 1) * a - a.trace() * CMatrix::Identity(dim, dim);
}

struct ShadowRecord {
    LayeredBlockUnitary unitary;
    std::vector<std::uint64_t> bitstrings;

    friend bool operator==(const ShadowRecord &, const ShadowRecord &) = default;
};

struct DatasetMeta {
    int n = 0;
    int k = 0;
    EnsembleKind ensemble = EnsembleKind::clifford_full;
    std::uint64_t seed = 0;
    std::uint64_t shot_seed = 0;
    std::string noise_tag = "noiseless";
    int num_unitaries = 0;
    int shots = 0;

    friend bool operator==(const DatasetMeta &, const DatasetMeta &) = default;
};

struct ShadowDataset {
    DatasetMeta meta;
    std::vector<ShadowRecord> records;

    BlockLayout layout() const { return BlockLayout(meta.n, meta.k); }
    EnsembleSpec spec() const { return EnsembleSpec{meta.ensemble, layout()}; }
    friend bool operator==(const ShadowDataset &, const ShadowDataset &) = default;
};

struct AcquireOptions {
    std::uint64_t seed = 0;
    /// Seed of the Born-sampling streams; defaults to `seed`. Two datasets that
    /// share `seed` share their unitaries, and need different shot seeds to have
    /// independent outcomes.
    std::optional<std::uint64_t> shot_seed;
    const NoiseModel *noise = nullptr;
    int threads = 0;
};

namespace detail {

inline constexpr std::uint64_t kUnitarySalt = 0x756e69;
inline constexpr std::uint64_t kShotSalt = 0x73686f74;

/// Unitary factors of record i: one layer, or one per noise layer under model2.
inline std::vector<LayeredBlockUnitary> record_layers(const EnsembleSpec &spec, const AcquireOptions &opt,
                                                      std::size_t i) {
    Rng rng = substream(opt.seed, i, kUnitarySalt);
    const int count = (opt.noise && opt.noise->kind == NoiseKind::model2) ? opt.noise->layer_count() : 1;
    std::vector<LayeredBlockUnitary> layers;
    for (int l = 0; l < count; ++l) layers.push_back(sample_layered(spec, rng));
    return layers;
}

inline DatasetMeta make_meta(const EnsembleSpec &spec, int num_unitaries, int shots, const AcquireOptions &opt) {
    if (num_unitaries < 1 || shots < 1) throw ValidationError("acquire: N_U and N_S must be positive");
    if (opt.noise) {
        opt.noise->validate(spec.layout);
        if (opt.noise->kind == NoiseKind::model2 && spec.kind != EnsembleKind::clifford_full) {
            throw UnsupportedError("model2 noise is defined for the full Clifford ensemble");
        }
    }
    DatasetMeta m;
    m.n = spec.layout.n();
    m.k = spec.k();
    m.ensemble = spec.kind;
    m.seed = opt.seed;
    m.shot_seed = opt.shot_seed.value_or(opt.seed);
    m.noise_tag = opt.noise ? (opt.noise->tag.empty() ? "custom" : opt.noise->tag) : "noiseless";
    m.num_unitaries = num_unitaries;
    m.shots = shots;
    return m;
}

}  // namespace detail

/// Randomized-measurement data for psi: N_U unitaries, N_S Born samples each.
/// Record i depends only on (seed, i), so the output is independent of `threads`.
inline ShadowDataset acquire(const StateVector &psi, const EnsembleSpec &spec, int num_unitaries, int shots,
                             const AcquireOptions &opt = {}) {
    require_dims(psi.n() == spec.layout.n(), "acquire: state size does not match ensemble layout");
    ShadowDataset ds{detail::make_meta(spec, num_unitaries, shots, opt), {}};
    ds.records.resize(static_cast<std::size_t>(num_unitaries));
    parallel_for(ds.records.size(), opt.threads, [&](std::size_t i) {
        auto layers = detail::record_layers(spec, opt, i);
        LayeredBlockUnitary u = compose_layers(layers);
        std::vector<double> cdf = born_cdf(apply_block_unitary(psi, u).amplitudes());
        Rng rng = substream(ds.meta.shot_seed, i, detail::kShotSalt);
        ShadowRecord &rec = ds.records[i];
        rec.bitstrings.resize(static_cast<std::size_t>(shots));
        for (auto &b : rec.bitstrings) {
            b = sample_from_cdf(cdf, rng);
            if (opt.noise) b ^= sample_flip_mask(*opt.noise, layers, spec.layout, rng);
        }
        rec.unitary = std::move(u);
    });
    return ds;
}

/// Data for the maximally mixed state: every measurement outcome is uniform.
inline ShadowDataset acquire_maximally_mixed(const EnsembleSpec &spec, int num_unitaries, int shots,
                                             const AcquireOptions &opt = {}) {
    ShadowDataset ds{detail::make_meta(spec, num_unitaries, shots, opt), {}};
    ds.records.resize(static_cast<std::size_t>(num_unitaries));
    const std::uint64_t mask = low_mask(spec.layout.n());
    parallel_for(ds.records.size(), opt.threads, [&](std::size_t i) {
        auto layers = detail::record_layers(spec, opt, i);
        Rng rng = substream(ds.meta.shot_seed, i, detail::kShotSalt);
        ShadowRecord &rec = ds.records[i];
        for (int s = 0; s < shots; ++s) rec.bitstrings.push_back(rng() & mask);
        rec.unitary = compose_layers(layers);
    });
    return ds;
}

namespace detail {

/// Per-block diagonal of u Q u^dagger for every block of a record.
/// Entry [r][b] = <b| u_r Q_r u_r^dagger |b>; empty list for identity blocks.
struct PauliRecordTables {
    double prefactor = 1.0;  // sign of P times the Clifford image signs
    bool zero = false;       // some Clifford image is not Z-type
    std::uint64_t z_mask = 0;
    std::vector<std::pair<int, Eigen::VectorXd>> dense_blocks;
};

inline PauliRecordTables pauli_tables(const LayeredBlockUnitary &u, const PauliString &p) {
    const BlockLayout &lay = u.layout();
    PauliRecordTables t;
    t.prefactor = p.sign();
    for (int r = 0; r < lay.num_blocks(); ++r) {
        std::uint64_t px = lay.extract(p.x(), r), pz = lay.extract(p.z(), r);
        if ((px | pz) == 0) continue;
        const BlockUnitary &b = u.block(r);
        t.prefactor *= lay.block_dim() + 1;
        if (b.is_tableau()) {
            std::uint64_t x, z;
            int s;
            b.tableau().conjugate_masks(px, pz, x, z, s);
            if (x != 0) {
                t.zero = true;
                return t;
            }
            t.prefactor *= s;
            t.z_mask |= z << lay.block_first(r);
        } else {
            const CMatrix m = b.dense();
            CMatrix q = m * pauli_matrix(PauliString(lay.k(), px, pz)) * m.adjoint();
            t.dense_blocks.emplace_back(r, q.diagonal().real());
        }
    }
    return t;
}

/// Tr(P rho_hat) for one outcome, given the record tables.
inline double pauli_snapshot_value(const PauliRecordTables &t, const BlockLayout &lay, std::uint64_t b) {
    if (t.zero) return 0.0;
    double v = (popcount(t.z_mask & b) & 1) ? -t.prefactor : t.prefactor;
    for (const auto &[r, diag] : t.dense_blocks) v *= diag(static_cast<Eigen::Index>(lay.extract(b, r)));
    return v;
}

/// Mean over the record's shots of Tr(P rho_hat).
inline double record_pauli_mean(const ShadowRecord &rec, const PauliString &p) {
    if (p.is_identity_up_to_phase()) return p.sign();
    PauliRecordTables t = pauli_tables(rec.unitary, p);
    if (t.zero) return 0.0;
    CompensatedSum s;
    for (std::uint64_t b : rec.bitstrings) s.add(pauli_snapshot_value(t, rec.unitary.layout(), b));
    return s.value() / static_cast<double>(rec.bitstrings.size());
}

inline double record_observable_mean(const ShadowRecord &rec, const ObservableSum &o) {
    CompensatedSum s;
    for (const auto &term : o.terms()) s.add(term.coeff * record_pauli_mean(rec, term.pauli));
    return s.value();
}

/// Per-record values of a functional, computed in parallel.
template <class Fn>
std::vector<double> per_record(std::size_t count, int threads, Fn &&fn) {
    std::vector<double> out(count);
    parallel_for(count, threads, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

}  // namespace detail

/// Unbiased estimate of Tr(rho P) with per-record bootstrap stderr.
inline Estimate estimate_pauli(const ShadowDataset &ds, const PauliString &p, const EstimatorOptions &opt = {}) {
    require_dims(p.n() == ds.meta.n, "estimate_pauli: Pauli size does not match dataset");
    if (!p.is_hermitian()) throw ValidationError("estimate_pauli: Pauli must be Hermitian");
    return summarize(detail::per_record(ds.records.size(), opt.threads,
                                        [&](std::size_t i) { return detail::record_pauli_mean(ds.records[i], p); }),
                     opt);
}

/// Unbiased estimate of Tr(rho O), all terms evaluated on the same snapshots.
inline Estimate estimate_observable(const ShadowDataset &ds, const ObservableSum &o, const EstimatorOptions &opt = {}) {
    require_dims(o.n() == ds.meta.n, "estimate_observable: observable size does not match dataset");
    return summarize(detail::per_record(ds.records.size(), opt.threads,
                                        [&](std::size_t i) { return detail::record_observable_mean(ds.records[i], o); }),
                     opt);
}

namespace detail {

/// Applies the per-block map G = (D+1) I - J (J all-ones) to a probability vector.
inline void apply_snapshot_transform(std::vector<double> &p, const BlockLayout &lay) {
    const std::uint64_t dim = p.size(), bd = static_cast<std::uint64_t>(lay.block_dim());
    std::vector<double> local(bd);
    for (int r = 0; r < lay.num_blocks(); ++r) {
        const int first = lay.block_first(r);
        const std::uint64_t mask = lay.block_mask(r);
        for (std::uint64_t base = 0; base < dim; ++base) {
            if (base & mask) continue;
            double total = 0.0;
            for (std::uint64_t j = 0; j < bd; ++j) {
                local[j] = p[base | (j << first)];
                total += local[j];
            }
            for (std::uint64_t j = 0; j < bd; ++j) p[base | (j << first)] = static_cast<double>(bd + 1) * local[j] - total;
        }
    }
}

/// Tr(Psi rho_hat) for every outcome b of one record: T[b] = sum_s |<s|U|Psi>|^2 prod_r ((D+1) delta - 1).
inline std::vector<double> fidelity_table(const LayeredBlockUnitary &u, const StateVector &target) {
    CVector phi = apply_block_unitary(target, u).amplitudes();
    std::vector<double> t(static_cast<std::size_t>(phi.size()));
    for (Eigen::Index i = 0; i < phi.size(); ++i) t[static_cast<std::size_t>(i)] = std::norm(phi(i));
    apply_snapshot_transform(t, u.layout());
    return t;
}

/// prod over the selected blocks of ((D+1) delta(b_r, c_r) - 1).
inline double pair_value(std::uint64_t b, std::uint64_t c, const BlockLayout &lay, std::uint64_t block_set) {
    const double d1 = lay.block_dim() + 1;
    double v = 1.0;
    for (int r = 0; r < lay.num_blocks(); ++r) {
        if (!((block_set >> r) & 1U)) continue;
        v *= lay.extract(b ^ c, r) == 0 ? d1 - 1.0 : -1.0;
    }
    return v;
}

}  // namespace detail

/// Unbiased estimate of <Psi|rho|Psi> for a pure target Psi.
inline Estimate estimate_fidelity(const ShadowDataset &ds, const StateVector &target, const EstimatorOptions &opt = {}) {
    require_dims(target.n() == ds.meta.n, "estimate_fidelity: target size does not match dataset");
    return summarize(detail::per_record(ds.records.size(), opt.threads,
                                        [&](std::size_t i) {
                                            const ShadowRecord &rec = ds.records[i];
                                            std::vector<double> t = detail::fidelity_table(rec.unitary, target);
                                            CompensatedSum s;
                                            for (std::uint64_t b : rec.bitstrings) s.add(t[b]);
                                            return s.value() / static_cast<double>(rec.bitstrings.size());
                                        }),
                     opt);
}

/// All blocks selected.
inline std::uint64_t all_blocks(const BlockLayout &lay) { return low_mask(lay.num_blocks()); }

/// Unbiased estimate of Tr(rho_A^2), A the union of the blocks in `block_set`
/// (default: the whole system), from distinct shot pairs of each record.
inline Estimate estimate_purity(const ShadowDataset &ds, const EstimatorOptions &opt = {},
                                std::optional<std::uint64_t> block_set = std::nullopt) {
    if (ds.meta.shots < 2) throw ValidationError("estimate_purity: needs at least two shots per unitary");
    const BlockLayout lay = ds.layout();
    const std::uint64_t set = block_set.value_or(all_blocks(lay));
    return summarize(detail::per_record(ds.records.size(), opt.threads,
                                        [&](std::size_t i) {
                                            const auto &bs = ds.records[i].bitstrings;
                                            CompensatedSum s;
                                            for (std::size_t a = 0; a < bs.size(); ++a) {
                                                for (std::size_t c = a + 1; c < bs.size(); ++c) {
                                                    s.add(detail::pair_value(bs[a], bs[c], lay, set));
                                                }
                                            }
                                            const double pairs = 0.5 * double(bs.size()) * double(bs.size() - 1);
                                            return s.value() / pairs;
                                        }),
                     opt);
}

/// Unbiased estimate of Tr(rho sigma) from two datasets measured with the same unitaries.
inline Estimate estimate_inner_product(const ShadowDataset &ds_rho, const ShadowDataset &ds_sigma,
                                       const EstimatorOptions &opt = {}) {
    require_dims(ds_rho.meta.n == ds_sigma.meta.n && ds_rho.meta.k == ds_sigma.meta.k,
                 "estimate_inner_product: layouts differ");
    if (ds_rho.records.size() != ds_sigma.records.size()) {
        throw DataError("estimate_inner_product: datasets have different unitary counts");
    }
    for (std::size_t i = 0; i < ds_rho.records.size(); ++i) {
        if (!(ds_rho.records[i].unitary == ds_sigma.records[i].unitary)) {
            throw DataError("estimate_inner_product: unitary " + std::to_string(i) + " differs between datasets");
        }
    }
    const BlockLayout lay = ds_rho.layout();
    const std::uint64_t set = all_blocks(lay);
    return summarize(detail::per_record(ds_rho.records.size(), opt.threads,
                                        [&](std::size_t i) {
                                            const auto &bs = ds_rho.records[i].bitstrings;
                                            const auto &cs = ds_sigma.records[i].bitstrings;
                                            CompensatedSum s;
                                            for (std::uint64_t b : bs) {
                                                for (std::uint64_t c : cs) s.add(detail::pair_value(b, c, lay, set));
                                            }
                                            return s.value() / (double(bs.size()) * double(cs.size()));
                                        }),
                     opt);
}

enum class CrmMode { old_mode, new_mode };

/// Common-randomized-measurement estimate of Tr(rho O) with a classically known
/// bias state sigma. old_mode subtracts the exact per-unitary expectation of the
/// sigma snapshot (Clifford ensembles only); new_mode subtracts the snapshot
/// estimate from a sigma dataset measured with the same unitaries.
inline Estimate crm_estimate(const ShadowDataset &ds_rho, const StateVector &sigma, CrmMode mode,
                             const ShadowDataset *ds_sigma, const ObservableSum &o, const EstimatorOptions &opt = {}) {
    require_dims(sigma.n() == ds_rho.meta.n && o.n() == ds_rho.meta.n, "crm_estimate: sizes do not match dataset");
    const double exact_sigma = expectation(sigma, o);
    const EnsembleSpec spec = ds_rho.spec();
    if (mode == CrmMode::old_mode) {
        if (!spec.is_clifford()) throw UnsupportedError("crm old mode needs a Clifford ensemble");
        std::vector<double> sigma_p;
        for (const auto &t : o.terms()) sigma_p.push_back(expectation(sigma, t.pauli));
        return summarize(detail::per_record(ds_rho.records.size(), opt.threads,
                                            [&](std::size_t i) {
                                                const ShadowRecord &rec = ds_rho.records[i];
                                                CompensatedSum s;
                                                for (std::size_t j = 0; j < o.terms().size(); ++j) {
                                                    const auto &t = o.terms()[j];
                                                    double raw = detail::record_pauli_mean(rec, t.pauli);
                                                    double shift = indicator(rec.unitary, t.pauli) *
                                                                   sigma_p[j] / m_eigenvalue(t.pauli, spec);
                                                    s.add(t.coeff * (raw - shift));
                                                }
                                                return s.value() + exact_sigma;
                                            }),
                         opt);
    }
    if (ds_sigma == nullptr) throw ValidationError("crm new mode needs a sigma dataset");
    if (ds_sigma->records.size() != ds_rho.records.size()) throw DataError("crm: datasets have different unitary counts");
    for (std::size_t i = 0; i < ds_rho.records.size(); ++i) {
        if (!(ds_rho.records[i].unitary == ds_sigma->records[i].unitary)) {
            throw DataError("crm: unitary " + std::to_string(i) + " differs between datasets");
        }
    }
    return summarize(detail::per_record(ds_rho.records.size(), opt.threads,
                                        [&](std::size_t i) {
                                            return detail::record_observable_mean(ds_rho.records[i], o) -
                                                   detail::record_observable_mean(ds_sigma->records[i], o) +
                                                   exact_sigma;
                                        }),
                     opt);
}

/// Per-unitary expectation of the sigma snapshot on P under the old CRM
/// shortcut: m_P^{-1} Tr(sigma P) 1{U P U^dagger in +-Z}.
inline double crm_sigma_shortcut(const LayeredBlockUnitary &u, const PauliString &p, const StateVector &sigma) {
    EnsembleSpec spec{EnsembleKind::clifford_full, u.layout()};
    return indicator(u, p) * expectation(sigma, p) / m_eigenvalue(p, spec);
}

// ---------------------------------------------------------------------------
// Spectral form factor

/// Number of blocks whose outcome bits are not all zero.
inline int nonzero_blocks(std::uint64_t s, const BlockLayout &lay) {
    int c = 0;
    for (int r = 0; r < lay.num_blocks(); ++r) c += lay.extract(s, r) != 0;
    return c;
}

/// Echo-protocol estimate of |Tr exp(-iHt)|^2 / 4^n from M single-shot runs:
/// prepare U|0>, evolve, undo U, measure s, average (-2^k)^{-|s|_k}.
inline Estimate sff_estimate(const ObservableSum &h, double t, const BlockLayout &layout, int samples,
                             std::uint64_t seed, const EstimatorOptions &opt = {}) {
    require_dims(h.n() == layout.n(), "sff_estimate: Hamiltonian size does not match layout");
    if (layout.n() > 10) throw UnsupportedError("sff_estimate supports n <= 10");
    if (samples < 1) throw ValidationError("sff_estimate: need at least one sample");
    const CMatrix v = evolution_operator(h, t);
    const EnsembleSpec spec{EnsembleKind::clifford_full, layout};
    const double base = -static_cast<double>(layout.block_dim());
    return summarize(detail::per_record(static_cast<std::size_t>(samples), opt.threads,
                                        [&](std::size_t i) {
                                            Rng rng = substream(seed, i, detail::kUnitarySalt);
                                            LayeredBlockUnitary u = sample_layered(spec, rng);
                                            auto mats = block_matrices(u);
                                            CVector psi = apply_block_matrices(StateVector::basis(layout.n()).amplitudes(),
                                                                               layout, mats);
                                            psi = v * psi;
                                            for (auto &m : mats) m.adjointInPlace();
                                            psi = apply_block_matrices(psi, layout, mats);
                                            std::uint64_t s = sample_from_cdf(born_cdf(psi), rng);
                                            return std::pow(base, -nonzero_blocks(s, layout));
                                        }),
                     opt);
}

/// |Tr V|^2 / D^2.
inline double sff_exact(const CMatrix &v) { return std::norm(v.trace()) / static_cast<double>(v.rows() * v.rows()); }

inline double sff_exact(const ObservableSum &h, double t) { return sff_exact(evolution_operator(h, t)); }

/// ||Tr_S V||_F^2 with S the qubits in `traced`.
inline double partial_trace_norm2(const CMatrix &v, std::uint64_t traced, int n) {
    const std::uint64_t dim = std::uint64_t{1} << n;
    const std::uint64_t keep = low_mask(n) & ~traced;
    // Index kept bits compactly so the partial trace is a dense matrix.
    std::vector<int> kept;
    for (int q = 0; q < n; ++q) {
        if ((keep >> q) & 1U) kept.push_back(q);
    }
    auto compact = [&](std::uint64_t i) {
        std::uint64_t c = 0;
        for (std::size_t j = 0; j < kept.size(); ++j) c |= ((i >> kept[j]) & 1U) << j;
        return c;
    };
    const std::uint64_t kd = std::uint64_t{1} << kept.size();
    CMatrix red = CMatrix::Zero(static_cast<Eigen::Index>(kd), static_cast<Eigen::Index>(kd));
    for (std::uint64_t row = 0; row < dim; ++row) {
        const std::uint64_t ts = row & traced;
        for (std::uint64_t col_keep = keep;; col_keep = (col_keep - 1) & keep) {
            const std::uint64_t col = col_keep | ts;
            red(static_cast<Eigen::Index>(compact(row)), static_cast<Eigen::Index>(compact(col))) +=
                v(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
            if (col_keep == 0) break;
        }
    }
    return red.squaredNorm();
}

/// Exact single-sample second moment E[X^2] of the echo estimator for a fixed V,
/// from the two-design twirl of each block.
inline double sff_second_moment(const CMatrix &v, const BlockLayout &layout) {
    const int nb = layout.num_blocks(), n = layout.n();
    const double dk = layout.block_dim();
    const double a = (1.0 / dk) * (1.0 + (dk - 1.0) / (dk * dk));
    const double b = (dk - 1.0) / (dk * dk * dk);
    const std::uint64_t subsets = std::uint64_t{1} << nb;
    auto qubits_of = [&](std::uint64_t set) {
        std::uint64_t q = 0;
        for (int r = 0; r < nb; ++r) {
            if ((set >> r) & 1U) q |= layout.block_mask(r);
        }
        return q;
    };
    std::vector<double> g(subsets);
    for (std::uint64_t s = 0; s < subsets; ++s) {
        g[s] = std::pow(dk, popcount(s)) * partial_trace_norm2(v, qubits_of(s), n);
    }
    // Moebius inversion over the subset lattice.
    std::vector<double> hv = g;
    for (int r = 0; r < nb; ++r) {
        for (std::uint64_t s = 0; s < subsets; ++s) {
            if ((s >> r) & 1U) hv[s] -= hv[s ^ (std::uint64_t{1} << r)];
        }
    }
    CompensatedSum total;
    for (std::uint64_t s = 0; s < subsets; ++s) {
        const int in = popcount(s);
        total.add(hv[s] * std::pow(b, in) * std::pow(a, nb - in));
    }
    return total.value() / static_cast<double>(std::uint64_t{1} << n);
}

/// Exact variance of the M-sample echo estimator for this Hamiltonian and time.
inline double sff_variance_exact(const ObservableSum &h, double t, const BlockLayout &layout, int samples) {
    CMatrix v = evolution_operator(h, t);
    const double k = sff_exact(v);
    return (sff_second_moment(v, layout) - k * k) / samples;
}

/// Variance of the echo estimator averaged over Haar-random evolutions:
/// (2^{-n} (1 + 2^{-k} - 4^{-k})^{n/k} - K^2) / M.
inline double sff_variance_haar_average(const BlockLayout &layout, double k_value, int samples) {
    const double dk = layout.block_dim();
    return (std::pow(2.0, -layout.n()) * std::pow(1.0 + 1.0 / dk - 1.0 / (dk * dk), layout.num_blocks()) -
            k_value * k_value) /
           samples;
}

}  // namespace blockshadow
