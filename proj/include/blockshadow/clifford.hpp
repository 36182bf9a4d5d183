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

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "blockshadow/dense.hpp"
#include "blockshadow/error.hpp"
#include "blockshadow/pauli.hpp"

namespace blockshadow {

using Rng = std::mt19937_64;

inline constexpr int kMaxTableauQubits = 8;

/// Clifford unitary on k <= 8 qubits, stored as the images of the generators.
///
/// Row i < k is U X_i U^dagger, row k + i is U Z_i U^dagger. A row packs the
/// image's x bits in the low byte and z bits in the high byte; the sign bit
/// of row i lives in bit i of `signs`.
class CliffordTableau {
   public:
    CliffordTableau() = default;

    static CliffordTableau identity(int k) {
        check_k(k);
        CliffordTableau t;
        t.k_ = static_cast<std::uint8_t>(k);
        for (int i = 0; i < k; ++i) {
            t.rows_[i] = pack(std::uint64_t{1} << i, 0);
            t.rows_[k + i] = pack(0, std::uint64_t{1} << i);
        }
        return t;
    }

    /// Builds from explicit generator images (Hermitian, i.e. phase 0 or 2).
    static CliffordTableau from_images(const std::vector<PauliString> &x_images,
                                       const std::vector<PauliString> &z_images) {
        const int k = static_cast<int>(x_images.size());
        check_k(k);
        require_dims(static_cast<int>(z_images.size()) == k, "tableau: image count mismatch");
        CliffordTableau t;
        t.k_ = static_cast<std::uint8_t>(k);
        for (int i = 0; i < 2 * k; ++i) {
            const PauliString &p = i < k ? x_images[i] : z_images[i - k];
            require_dims(p.n() == k, "tableau: image has wrong qubit count");
            if (!p.is_hermitian()) throw ValidationError("tableau: generator image must be Hermitian");
            t.set_row(i, p.x(), p.z(), p.sign() < 0);
        }
        if (!t.is_valid()) throw ValidationError("tableau: images violate the symplectic condition");
        return t;
    }

    int k() const { return k_; }

    /// Generator image as a Pauli string (row i < k: X_i, else Z_{i-k}).
    PauliString row(int i) const {
        return PauliString(k_, rows_[i] & 0xFF, rows_[i] >> 8, ((signs_ >> i) & 1U) ? 2 : 0);
    }
    std::uint16_t row_bits(int i) const { return rows_[i]; }
    bool row_sign(int i) const { return (signs_ >> i) & 1U; }
    std::uint16_t sign_bits() const { return signs_; }

    void set_row(int i, std::uint64_t x, std::uint64_t z, bool negative) {
        rows_[i] = pack(x, z);
        if (negative) {
            signs_ = static_cast<std::uint16_t>(signs_ | (1U << i));
        } else {
            signs_ = static_cast<std::uint16_t>(signs_ & ~(1U << i));
        }
    }

    /// U P U^dagger including the phase.
    PauliString conjugate(const PauliString &p) const {
        require_dims(p.n() == k_, "conjugate: Pauli size does not match tableau");
        std::uint64_t x = 0, z = 0;
        int e = p.phase() + popcount(p.x() & p.z());
        for (int j = 0; j < k_; ++j) {
            if ((p.x() >> j) & 1U) accumulate(j, x, z, e);
            if ((p.z() >> j) & 1U) accumulate(k_ + j, x, z, e);
        }
        return PauliString(k_, x, z, ((e % 4) + 4) % 4);
    }

    /// Image masks of an unsigned Pauli; sign returned as +-1. Hot path for indicators.
    void conjugate_masks(std::uint64_t px, std::uint64_t pz, std::uint64_t &x, std::uint64_t &z, int &sign) const {
        x = 0;
        z = 0;
        int e = popcount(px & pz);
        for (int j = 0; j < k_; ++j) {
            if ((px >> j) & 1U) accumulate(j, x, z, e);
            if ((pz >> j) & 1U) accumulate(k_ + j, x, z, e);
        }
        sign = (((e % 4) + 4) % 4) == 2 ? -1 : 1;
    }

    /// Checks the commutation relations of the generator images.
    bool is_valid() const {
        for (int a = 0; a < 2 * k_; ++a) {
            if ((rows_[a] & 0xFF) == 0 && (rows_[a] >> 8) == 0) return false;
            for (int b = a + 1; b < 2 * k_; ++b) {
                bool should_anticommute = (b == a + k_) && a < k_;
                bool anti = !commutes_masks(rows_[a] & 0xFF, rows_[a] >> 8, rows_[b] & 0xFF, rows_[b] >> 8);
                if (anti != should_anticommute) return false;
            }
        }
        return true;
    }

    /// Tableau of the product U V (V acts first).
    friend CliffordTableau compose(const CliffordTableau &u, const CliffordTableau &v) {
        require_dims(u.k_ == v.k_, "compose: size mismatch");
        CliffordTableau out;
        out.k_ = u.k_;
        for (int i = 0; i < 2 * u.k_; ++i) {
            PauliString img = u.conjugate(v.row(i));
            out.set_row(i, img.x(), img.z(), img.sign() < 0);
        }
        return out;
    }

    CliffordTableau inverse() const {
        CliffordTableau out;
        out.k_ = k_;
        for (int i = 0; i < 2 * k_; ++i) {
            // Generator g; its preimage has X_j coefficient w(g, Z_j image) and Z_j coefficient w(g, X_j image).
            std::uint64_t gx = i < k_ ? (std::uint64_t{1} << i) : 0;
            std::uint64_t gz = i < k_ ? 0 : (std::uint64_t{1} << (i - k_));
            std::uint64_t vx = 0, vz = 0;
            for (int j = 0; j < k_; ++j) {
                if (!commutes_masks(gx, gz, rows_[k_ + j] & 0xFF, rows_[k_ + j] >> 8)) vx |= std::uint64_t{1} << j;
                if (!commutes_masks(gx, gz, rows_[j] & 0xFF, rows_[j] >> 8)) vz |= std::uint64_t{1} << j;
            }
            std::uint64_t ix, iz;
            int s;
            conjugate_masks(vx, vz, ix, iz, s);
            if (ix != gx || iz != gz) throw NumericalError("tableau inverse: not symplectic");
            out.set_row(i, vx, vz, s < 0);
        }
        return out;
    }

    /// Dense 2^k x 2^k matrix, fixed up to a global phase.
    CMatrix to_dense() const {
        const Eigen::Index dim = Eigen::Index{1} << k_;
        CMatrix proj = CMatrix::Identity(dim, dim);
        for (int i = 0; i < k_; ++i) {
            proj = 0.5 * (CMatrix::Identity(dim, dim) + pauli_matrix(row(k_ + i))) * proj;
        }
        Eigen::Index best = 0;
        proj.colwise().squaredNorm().maxCoeff(&best);
        CVector psi0 = proj.col(best);
        psi0.normalize();
        Eigen::Index lead = 0;
        psi0.cwiseAbs().maxCoeff(&lead);
        psi0 *= std::abs(psi0(lead)) / psi0(lead);
        CMatrix u(dim, dim);
        for (Eigen::Index b = 0; b < dim; ++b) {
            CVector col = psi0;
            for (int i = 0; i < k_; ++i) {
                if ((b >> i) & 1) col = apply_pauli(row(i), col);
            }
            u.col(b) = col;
        }
        return u;
    }

    friend bool operator==(const CliffordTableau &a, const CliffordTableau &b) {
        if (a.k_ != b.k_ || a.signs_ != b.signs_) return false;
        for (int i = 0; i < 2 * a.k_; ++i) {
            if (a.rows_[i] != b.rows_[i]) return false;
        }
        return true;
    }

   private:
    static void check_k(int k) {
        if (k < 1 || k > kMaxTableauQubits) throw UnsupportedError("tableau block size must be in [1, 8]");
    }
    static std::uint16_t pack(std::uint64_t x, std::uint64_t z) {
        return static_cast<std::uint16_t>((x & 0xFF) | ((z & 0xFF) << 8));
    }
    void accumulate(int r, std::uint64_t &x, std::uint64_t &z, int &e) const {
        std::uint64_t rx = rows_[r] & 0xFF, rz = rows_[r] >> 8;
        e += product_phase(x, z, rx, rz) + (((signs_ >> r) & 1U) ? 2 : 0);
        x ^= rx;
        z ^= rz;
    }

    std::uint8_t k_ = 0;
    std::uint16_t signs_ = 0;
    std::array<std::uint16_t, 2 * kMaxTableauQubits> rows_{};
};

inline PauliString conjugate(const CliffordTableau &u, const PauliString &p) { return u.conjugate(p); }

/// 1 iff U P U^dagger is a signed Z-string.
inline int indicator(const CliffordTableau &u, const PauliString &p) { return u.conjugate(p).x() == 0 ? 1 : 0; }

namespace gates {

inline CliffordTableau hadamard(int k, int q) {
    CliffordTableau t = CliffordTableau::identity(k);
    t.set_row(q, 0, std::uint64_t{1} << q, false);
    t.set_row(k + q, std::uint64_t{1} << q, 0, false);
    return t;
}

inline CliffordTableau phase(int k, int q) {
    CliffordTableau t = CliffordTableau::identity(k);
    t.set_row(q, std::uint64_t{1} << q, std::uint64_t{1} << q, false);
    return t;
}

inline CliffordTableau cnot(int k, int control, int target) {
    CliffordTableau t = CliffordTableau::identity(k);
    std::uint64_t c = std::uint64_t{1} << control, tb = std::uint64_t{1} << target;
    t.set_row(control, c | tb, 0, false);
    t.set_row(k + target, 0, c | tb, false);
    return t;
}

}  // namespace gates

namespace detail {

inline std::uint64_t vec_x(std::uint64_t v, int k) { return v & low_mask(k); }
inline std::uint64_t vec_z(std::uint64_t v, int k) { return v >> k; }

inline bool vec_commute(std::uint64_t a, std::uint64_t b, int k) {
    return commutes_masks(vec_x(a, k), vec_z(a, k), vec_x(b, k), vec_z(b, k));
}

/// Nonzero 2k-bit vectors commuting with all of `fixed` and (if given) anticommuting with `anti`.
inline std::vector<std::uint64_t> symplectic_candidates(int k, const std::vector<std::uint64_t> &fixed,
                                                        const std::uint64_t *anti) {
    std::vector<std::uint64_t> out;
    const std::uint64_t count = std::uint64_t{1} << (2 * k);
    for (std::uint64_t v = 1; v < count; ++v) {
        bool ok = true;
        for (std::uint64_t f : fixed) {
            if (!vec_commute(v, f, k)) {
                ok = false;
                break;
            }
        }
        if (ok && anti != nullptr) ok = !vec_commute(v, *anti, k);
        if (ok) out.push_back(v);
    }
    return out;
}

inline CliffordTableau tableau_from_vectors(int k, const std::vector<std::uint64_t> &xs,
                                            const std::vector<std::uint64_t> &zs, std::uint32_t signs) {
    CliffordTableau t = CliffordTableau::identity(k);
    for (int i = 0; i < k; ++i) {
        t.set_row(i, vec_x(xs[i], k), vec_z(xs[i], k), (signs >> i) & 1U);
        t.set_row(k + i, vec_x(zs[i], k), vec_z(zs[i], k), (signs >> (k + i)) & 1U);
    }
    return t;
}

}  // namespace detail

/// Uniform element of Cl(k) modulo global phase: generator images chosen row by
/// row from the symplectic complement of the rows fixed so far, then uniform signs.
inline CliffordTableau sample_clifford(int k, Rng &rng) {
    if (k < 1 || k > kMaxTableauQubits) throw UnsupportedError("sample_clifford: k must be in [1, 8]");
    std::vector<std::uint64_t> fixed, xs, zs;
    for (int i = 0; i < k; ++i) {
        auto cx = detail::symplectic_candidates(k, fixed, nullptr);
        std::uint64_t x = cx[std::uniform_int_distribution<std::size_t>(0, cx.size() - 1)(rng)];
        auto cz = detail::symplectic_candidates(k, fixed, &x);
        std::uint64_t z = cz[std::uniform_int_distribution<std::size_t>(0, cz.size() - 1)(rng)];
        xs.push_back(x);
        zs.push_back(z);
        fixed.push_back(x);
        fixed.push_back(z);
    }
    auto signs = static_cast<std::uint32_t>(
        std::uniform_int_distribution<std::uint32_t>(0, (1U << (2 * k)) - 1)(rng));
    return detail::tableau_from_vectors(k, xs, zs, signs);
}

/// |Cl(k)| modulo phases: 2^{k^2 + 2k} prod_j (4^j - 1).
inline std::uint64_t clifford_group_order(int k) {
    std::uint64_t order = std::uint64_t{1} << (k * k + 2 * k);
    for (int j = 1; j <= k; ++j) order *= (std::uint64_t{1} << (2 * j)) - 1;
    return order;
}

/// All elements of Cl(k) for k <= 2, in a fixed order.
inline std::vector<CliffordTableau> enumerate_clifford(int k) {
    if (k < 1 || k > 2) throw UnsupportedError("enumerate_clifford supports k <= 2 only");
    std::vector<CliffordTableau> out;
    out.reserve(clifford_group_order(k));
    std::vector<std::uint64_t> xs(k), zs(k), fixed;
    auto recurse = [&](auto &&self, int i) -> void {
        if (i == k) {
            for (std::uint32_t s = 0; s < (1U << (2 * k)); ++s) out.push_back(detail::tableau_from_vectors(k, xs, zs, s));
            return;
        }
        for (std::uint64_t x : detail::symplectic_candidates(k, fixed, nullptr)) {
            for (std::uint64_t z : detail::symplectic_candidates(k, fixed, &x)) {
                xs[i] = x;
                zs[i] = z;
                fixed.push_back(x);
                fixed.push_back(z);
                self(self, i + 1);
                fixed.resize(fixed.size() - 2);
            }
        }
    };
    recurse(recurse, 0);
    return out;
}

}  // namespace blockshadow
