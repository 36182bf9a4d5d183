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
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "blockshadow/clifford.hpp"
#include "blockshadow/dense.hpp"

namespace blockshadow {

/// One k-qubit factor of a measurement unitary: a Clifford tableau or a dense matrix.
class BlockUnitary {
   public:
    BlockUnitary() = default;
    explicit BlockUnitary(CliffordTableau t) : op_(std::move(t)) {}
    explicit BlockUnitary(CMatrix m) : op_(std::move(m)) {
        const auto dim = std::get<CMatrix>(op_).rows();
        if (dim != std::get<CMatrix>(op_).cols() || dim < 2 || (dim & (dim - 1)) != 0) {
            throw DimensionError("dense block unitary must be 2^k x 2^k");
        }
        const CMatrix &u = std::get<CMatrix>(op_);
        if (max_abs(u.adjoint() * u - CMatrix::Identity(dim, dim)) > 1e-10) {
            throw ValidationError("dense block is not unitary");
        }
    }

    bool is_tableau() const { return std::holds_alternative<CliffordTableau>(op_); }
    const CliffordTableau &tableau() const { return std::get<CliffordTableau>(op_); }

    int k() const {
        if (is_tableau()) return tableau().k();
        return std::countr_zero(static_cast<std::uint64_t>(std::get<CMatrix>(op_).rows()));
    }

    /// Dense matrix (computed from the tableau when needed).
    CMatrix dense() const { return is_tableau() ? tableau().to_dense() : std::get<CMatrix>(op_); }

    friend bool operator==(const BlockUnitary &a, const BlockUnitary &b) {
        if (a.is_tableau() != b.is_tableau()) return false;
        if (a.is_tableau()) return a.tableau() == b.tableau();
        const auto &ma = std::get<CMatrix>(a.op_);
        const auto &mb = std::get<CMatrix>(b.op_);
        return ma.rows() == mb.rows() && ma == mb;
    }

   private:
    std::variant<CliffordTableau, CMatrix> op_;
};

/// U = tensor product of one BlockUnitary per block of the layout.
class LayeredBlockUnitary {
   public:
    LayeredBlockUnitary() = default;
    LayeredBlockUnitary(BlockLayout layout, std::vector<BlockUnitary> blocks)
        : layout_(layout), blocks_(std::move(blocks)) {
        require_dims(static_cast<int>(blocks_.size()) == layout_.num_blocks(), "layered unitary: wrong block count");
        for (const auto &b : blocks_) require_dims(b.k() == layout_.k(), "layered unitary: block size mismatch");
    }

    static LayeredBlockUnitary identity(const BlockLayout &layout) {
        return LayeredBlockUnitary(
            layout, std::vector<BlockUnitary>(layout.num_blocks(), BlockUnitary(CliffordTableau::identity(layout.k()))));
    }

    const BlockLayout &layout() const { return layout_; }
    const std::vector<BlockUnitary> &blocks() const { return blocks_; }
    const BlockUnitary &block(int r) const { return blocks_[r]; }
    bool all_tableau() const {
        return std::all_of(blocks_.begin(), blocks_.end(), [](const BlockUnitary &b) { return b.is_tableau(); });
    }

    friend bool operator==(const LayeredBlockUnitary &, const LayeredBlockUnitary &) = default;

   private:
    BlockLayout layout_;
    std::vector<BlockUnitary> blocks_;
};

/// Image of P under a layered Clifford: sign and z mask when U P U^dagger is a
/// signed Z-string; `ok` is false otherwise. P's own sign is included.
struct ZImage {
    bool ok = false;
    int sign = 1;
    std::uint64_t z = 0;
};

inline ZImage z_image(const LayeredBlockUnitary &u, const PauliString &p) {
    const BlockLayout &lay = u.layout();
    require_dims(p.n() == lay.n(), "z_image: Pauli size does not match unitary");
    ZImage out;
    out.sign = p.sign();
    for (int r = 0; r < lay.num_blocks(); ++r) {
        std::uint64_t px = lay.extract(p.x(), r), pz = lay.extract(p.z(), r);
        if ((px | pz) == 0) continue;
        const BlockUnitary &b = u.block(r);
        if (!b.is_tableau()) throw UnsupportedError("z_image requires Clifford blocks");
        std::uint64_t x, z;
        int s;
        b.tableau().conjugate_masks(px, pz, x, z, s);
        if (x != 0) return ZImage{};
        out.sign *= s;
        out.z |= z << lay.block_first(r);
    }
    out.ok = true;
    return out;
}

/// U P U^dagger for a layered Clifford, phase included.
inline PauliString conjugate(const LayeredBlockUnitary &u, const PauliString &p) {
    const BlockLayout &lay = u.layout();
    require_dims(p.n() == lay.n(), "conjugate: Pauli size does not match unitary");
    std::uint64_t x = 0, z = 0;
    int phase = p.phase();
    for (int r = 0; r < lay.num_blocks(); ++r) {
        std::uint64_t px = lay.extract(p.x(), r), pz = lay.extract(p.z(), r);
        if ((px | pz) == 0) continue;
        if (!u.block(r).is_tableau()) throw UnsupportedError("conjugate requires Clifford blocks");
        std::uint64_t bx, bz;
        int s;
        u.block(r).tableau().conjugate_masks(px, pz, bx, bz, s);
        x |= bx << lay.block_first(r);
        z |= bz << lay.block_first(r);
        if (s < 0) phase += 2;
    }
    return PauliString(lay.n(), x, z, phase % 4);
}

inline int indicator(const LayeredBlockUnitary &u, const PauliString &p) { return z_image(u, p).ok ? 1 : 0; }

/// Tr(U P U^dagger |b><b|): zero unless the image is a Z-string.
inline int snapshot_weight(const LayeredBlockUnitary &u, const PauliString &p, std::uint64_t b) {
    ZImage img = z_image(u, p);
    if (!img.ok) return 0;
    return (popcount(img.z & b) & 1) ? -img.sign : img.sign;
}

enum class EnsembleKind { clifford_full, mub, stabilizer_basis, haar_dense };

inline std::string to_string(EnsembleKind k) {
    switch (k) {
        case EnsembleKind::clifford_full: return "clifford_full";
        case EnsembleKind::mub: return "mub";
        case EnsembleKind::stabilizer_basis: return "stabilizer_basis";
        case EnsembleKind::haar_dense: return "haar_dense";
    }
    return "unknown";
}

inline EnsembleKind parse_ensemble_kind(const std::string &s) {
    if (s == "clifford_full" || s == "clifford") return EnsembleKind::clifford_full;
    if (s == "mub") return EnsembleKind::mub;
    if (s == "stabilizer_basis" || s == "stabilizer") return EnsembleKind::stabilizer_basis;
    if (s == "haar_dense" || s == "haar") return EnsembleKind::haar_dense;
    throw ValidationError("unknown ensemble '" + s + "'");
}

struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::clifford_full;
    BlockLayout layout;

    int k() const { return layout.k(); }
    bool is_clifford() const { return kind != EnsembleKind::haar_dense; }
};

/// Noiseless channel eigenvalue (2^k+1)^{-w_k(P)} shared by all Clifford-type ensembles.
inline double m_eigenvalue(const PauliString &p, const EnsembleSpec &spec) {
    if (!spec.is_clifford()) throw UnsupportedError("closed-form channel eigenvalue needs a Clifford ensemble");
    return std::pow(static_cast<double>(spec.layout.block_dim() + 1), -block_weight(p, spec.layout));
}

namespace detail {

/// Maximal isotropic subspaces of F_2^{2k} (k <= 3), each as a bitset over the
/// 4^k vectors (bit v set iff v is in the subspace, v = x | z << k).
inline std::vector<std::uint64_t> lagrangian_subspaces(int k) {
    if (k < 1 || k > 3) throw UnsupportedError("Lagrangian enumeration supports k <= 3");
    const std::uint64_t count = std::uint64_t{1} << (2 * k);
    std::vector<std::uint64_t> found;
    std::vector<std::uint64_t> basis;
    auto span_bits = [&]() {
        std::uint64_t bits = 0;
        for (std::uint64_t c = 0; c < (std::uint64_t{1} << basis.size()); ++c) {
            std::uint64_t v = 0;
            for (std::size_t i = 0; i < basis.size(); ++i) {
                if ((c >> i) & 1U) v ^= basis[i];
            }
            bits |= std::uint64_t{1} << v;
        }
        return bits;
    };
    auto recurse = [&](auto &&self, std::uint64_t start) -> void {
        if (static_cast<int>(basis.size()) == k) {
            found.push_back(span_bits());
            return;
        }
        std::uint64_t span = span_bits();
        for (std::uint64_t v = start; v < count; ++v) {
            if ((span >> v) & 1U) continue;
            bool ok = true;
            for (auto b : basis) ok = ok && vec_commute(v, b, k);
            if (!ok) continue;
            basis.push_back(v);
            self(self, v + 1);
            basis.pop_back();
        }
    };
    recurse(recurse, 1);
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    return found;
}

/// Clifford mapping the isotropic subspace `space` onto signed Z-strings, with
/// a chosen basis g_i sent to +Z_i.
inline CliffordTableau tableau_measuring(std::uint64_t space, int k) {
    const std::uint64_t count = std::uint64_t{1} << (2 * k);
    std::vector<std::uint64_t> g;
    std::uint64_t spanned = 1;  // contains the zero vector
    for (std::uint64_t v = 1; v < count && static_cast<int>(g.size()) < k; ++v) {
        if (!((space >> v) & 1U) || ((spanned >> v) & 1U)) continue;
        g.push_back(v);
        std::uint64_t next = spanned;
        for (std::uint64_t w = 0; w < count; ++w) {
            if ((spanned >> w) & 1U) next |= std::uint64_t{1} << (w ^ v);
        }
        spanned = next;
    }
    // Symplectic partners: h_i anticommutes with g_i only, commutes with the other g's and earlier h's.
    std::vector<std::uint64_t> h;
    for (int i = 0; i < k; ++i) {
        bool found = false;
        for (std::uint64_t v = 1; v < count && !found; ++v) {
            bool ok = true;
            for (int j = 0; j < k && ok; ++j) ok = vec_commute(v, g[j], k) == (j != i);
            for (auto hj : h) ok = ok && vec_commute(v, hj, k);
            if (ok) {
                h.push_back(v);
                found = true;
            }
        }
        if (!found) throw NumericalError("no symplectic partner found");
    }
    // V sends X_i -> h_i and Z_i -> g_i; the measuring unitary is V^dagger.
    return tableau_from_vectors(k, h, g, 0).inverse();
}

/// 2^k + 1 pairwise disjoint Lagrangian subspaces covering every nonzero vector.
inline std::vector<std::uint64_t> lagrangian_spread(int k) {
    const auto all = lagrangian_subspaces(k);
    const std::uint64_t count = std::uint64_t{1} << (2 * k);
    const std::uint64_t target = (count == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << count) - 1)) & ~std::uint64_t{1};
    std::vector<std::uint64_t> chosen;
    auto recurse = [&](auto &&self, std::uint64_t covered) -> bool {
        if (covered == target) return true;
        std::uint64_t missing = target & ~covered;
        int v = std::countr_zero(missing);
        for (auto s : all) {
            std::uint64_t nonzero = s & ~std::uint64_t{1};
            if (!((s >> v) & 1U) || (nonzero & covered)) continue;
            chosen.push_back(s);
            if (self(self, covered | nonzero)) return true;
            chosen.pop_back();
        }
        return false;
    };
    if (!recurse(recurse, 0)) throw NumericalError("no mutually unbiased partition found");
    return chosen;
}

}  // namespace detail

/// 2^k + 1 Cliffords whose measurement bases are mutually unbiased (k <= 3).
/// Every non-identity Pauli becomes a Z-string under exactly one member.
inline const std::vector<CliffordTableau> &build_mub_ensemble(int k) {
    static std::mutex mu;
    static std::map<int, std::vector<CliffordTableau>> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(k); it != cache.end()) return it->second;
    std::vector<CliffordTableau> members;
    for (auto s : detail::lagrangian_spread(k)) members.push_back(detail::tableau_measuring(s, k));
    return cache.emplace(k, std::move(members)).first->second;
}

/// One Clifford per sign-free stabilizer basis of k <= 2 qubits.
inline const std::vector<CliffordTableau> &build_stabilizer_basis_ensemble(int k) {
    if (k < 1 || k > 2) throw UnsupportedError("stabilizer-basis ensemble supports k <= 2");
    static std::mutex mu;
    static std::map<int, std::vector<CliffordTableau>> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(k); it != cache.end()) return it->second;
    std::vector<CliffordTableau> members;
    for (auto s : detail::lagrangian_subspaces(k)) members.push_back(detail::tableau_measuring(s, k));
    return cache.emplace(k, std::move(members)).first->second;
}

inline const std::vector<CliffordTableau> &cached_clifford_group(int k) {
    static std::mutex mu;
    static std::map<int, std::vector<CliffordTableau>> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(k); it != cache.end()) return it->second;
    return cache.emplace(k, enumerate_clifford(k)).first->second;
}

/// Haar-random unitary via QR of a complex Gaussian matrix with phase fix.
inline BlockUnitary sample_dense_haar(int k, Rng &rng) {
    if (k < 1 || k > 3) throw UnsupportedError("sample_dense_haar supports k <= 3");
    const Eigen::Index dim = Eigen::Index{1} << k;
    std::normal_distribution<double> gauss(0.0, 1.0);
    CMatrix g(dim, dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
        for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = cplx(gauss(rng), gauss(rng));
    }
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ() * CMatrix::Identity(dim, dim);
    CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < dim; ++i) {
        cplx d = r(i, i);
        q.col(i) *= d / std::abs(d);
    }
    return BlockUnitary(q);
}

/// Finite member list for the enumerable ensembles; empty for the others.
inline std::span<const CliffordTableau> ensemble_members(EnsembleKind kind, int k) {
    switch (kind) {
        case EnsembleKind::mub: return build_mub_ensemble(k);
        case EnsembleKind::stabilizer_basis: return build_stabilizer_basis_ensemble(k);
        default: return {};
    }
}

inline BlockUnitary sample_block(const EnsembleSpec &spec, Rng &rng) {
    switch (spec.kind) {
        case EnsembleKind::clifford_full: return BlockUnitary(sample_clifford(spec.k(), rng));
        case EnsembleKind::haar_dense: return sample_dense_haar(spec.k(), rng);
        default: {
            auto members = ensemble_members(spec.kind, spec.k());
            std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
            return BlockUnitary(members[pick(rng)]);
        }
    }
}

inline LayeredBlockUnitary sample_layered(const EnsembleSpec &spec, Rng &rng) {
    std::vector<BlockUnitary> blocks;
    blocks.reserve(spec.layout.num_blocks());
    for (int r = 0; r < spec.layout.num_blocks(); ++r) blocks.push_back(sample_block(spec, rng));
    return LayeredBlockUnitary(spec.layout, std::move(blocks));
}

/// Blockwise product U V of two Clifford layered unitaries (V first).
inline LayeredBlockUnitary compose(const LayeredBlockUnitary &u, const LayeredBlockUnitary &v) {
    require_dims(u.layout() == v.layout(), "compose: layouts differ");
    std::vector<BlockUnitary> blocks;
    for (int r = 0; r < u.layout().num_blocks(); ++r) {
        if (u.block(r).is_tableau() && v.block(r).is_tableau()) {
            blocks.emplace_back(compose(u.block(r).tableau(), v.block(r).tableau()));
        } else {
            blocks.emplace_back(CMatrix(u.block(r).dense() * v.block(r).dense()));
        }
    }
    return LayeredBlockUnitary(u.layout(), std::move(blocks));
}

}  // namespace blockshadow
