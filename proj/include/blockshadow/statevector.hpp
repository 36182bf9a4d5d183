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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "blockshadow/dense.hpp"
#include "blockshadow/ensemble.hpp"
#include "blockshadow/pauli.hpp"

namespace blockshadow {

inline constexpr int kMaxStateQubits = 14;

/// Normalized pure state on n <= 14 qubits; amplitude index bit q is qubit q.
class StateVector {
   public:
    StateVector() = default;
    StateVector(int n, CVector amplitudes) : n_(n), amps_(std::move(amplitudes)) {
        if (n < 1 || n > kMaxStateQubits) throw UnsupportedError("state vectors support 1 <= n <= 14");
        require_dims(amps_.size() == (Eigen::Index{1} << n), "state vector: amplitude count is not 2^n");
        if (std::abs(amps_.norm() - 1.0) > 1e-10) throw ValidationError("state vector is not normalized");
    }

    /// Basis state |bits>.
    static StateVector basis(int n, std::uint64_t bits = 0) {
        CVector v = CVector::Zero(Eigen::Index{1} << n);
        v(static_cast<Eigen::Index>(bits)) = 1.0;
        return StateVector(n, std::move(v));
    }

    /// Normalizes the given vector.
    static StateVector normalized(int n, const CVector &v) { return StateVector(n, v / v.norm()); }

    int n() const { return n_; }
    std::size_t dim() const { return std::size_t{1} << n_; }
    const CVector &amplitudes() const { return amps_; }

   private:
    int n_ = 0;
    CVector amps_;
};

/// Applies a 2^k x 2^k matrix to qubits [first, first + k) of v in place.
inline void apply_local(CVector &v, int first, int k, const CMatrix &m) {
    const std::uint64_t dim = static_cast<std::uint64_t>(v.size());
    const std::uint64_t local = std::uint64_t{1} << k;
    const std::uint64_t mask = (local - 1) << first;
    CVector in(static_cast<Eigen::Index>(local)), out(static_cast<Eigen::Index>(local));
    for (std::uint64_t base = 0; base < dim; ++base) {
        if (base & mask) continue;
        for (std::uint64_t a = 0; a < local; ++a) in(a) = v(static_cast<Eigen::Index>(base | (a << first)));
        out.noalias() = m * in;
        for (std::uint64_t a = 0; a < local; ++a) v(static_cast<Eigen::Index>(base | (a << first))) = out(a);
    }
}

/// Dense matrices of each block, in block order.
inline std::vector<CMatrix> block_matrices(const LayeredBlockUnitary &u) {
    std::vector<CMatrix> out;
    out.reserve(u.blocks().size());
    for (const auto &b : u.blocks()) out.push_back(b.dense());
    return out;
}

inline CVector apply_block_matrices(CVector v, const BlockLayout &lay, std::span<const CMatrix> mats) {
    for (int r = 0; r < lay.num_blocks(); ++r) apply_local(v, lay.block_first(r), lay.k(), mats[r]);
    return v;
}

inline StateVector apply_block_unitary(const StateVector &psi, const LayeredBlockUnitary &u) {
    require_dims(u.layout().n() == psi.n(), "apply_block_unitary: layout does not match state");
    auto mats = block_matrices(u);
    CVector v = apply_block_matrices(psi.amplitudes(), u.layout(), mats);
    return StateVector(psi.n(), v / v.norm());
}

/// Cumulative Born distribution of a vector; last entry is the total mass.
inline std::vector<double> born_cdf(const CVector &v) {
    std::vector<double> cdf(static_cast<std::size_t>(v.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        acc += std::norm(v(i));
        cdf[static_cast<std::size_t>(i)] = acc;
    }
    return cdf;
}

inline std::uint64_t sample_from_cdf(const std::vector<double> &cdf, Rng &rng) {
    double u = std::uniform_real_distribution<double>(0.0, cdf.back())(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    // Skip zero-probability outcomes that share the same cumulative value.
    return static_cast<std::uint64_t>(it - cdf.begin());
}

inline std::vector<std::uint64_t> sample_bitstrings(const StateVector &psi, std::size_t count, Rng &rng) {
    auto cdf = born_cdf(psi.amplitudes());
    std::vector<std::uint64_t> out(count);
    for (auto &b : out) b = sample_from_cdf(cdf, rng);
    return out;
}

inline double expectation(const StateVector &psi, const PauliString &p) {
    require_dims(p.n() == psi.n(), "expectation: size mismatch");
    cplx v = pauli_sandwich(p, psi.amplitudes());
    if (std::abs(v.imag()) > 1e-10) throw NumericalError("expectation of a Hermitian operator is not real");
    return v.real();
}

inline double expectation(const StateVector &psi, const ObservableSum &o) {
    require_dims(o.n() == psi.n(), "expectation: size mismatch");
    double acc = 0.0;
    for (const auto &t : o.terms()) acc += t.coeff * expectation(psi, t.pauli);
    return acc;
}

/// H v for a Pauli sum without forming H.
inline CVector apply_observable(const ObservableSum &o, const CVector &v) {
    CVector out = CVector::Zero(v.size());
    for (const auto &t : o.terms()) out += t.coeff * apply_pauli(t.pauli, v);
    return out;
}

/// Open-chain SSH hopping with alternating amplitudes v (sites 2j, 2j+1) and w.
struct SshSpec {
    int n = 0;
    double v = 1.0;
    double w = 1.0;
};

/// Jordan-Wigner form: sum over bonds t/2 (X_i X_{i+1} + Y_i Y_{i+1}); occupied site = |1>.
inline ObservableSum ssh_hamiltonian(const SshSpec &s) {
    if (s.n < 2 || s.n % 2 != 0) throw ValidationError("SSH chain needs an even number of sites");
    ObservableSum h(s.n);
    for (int i = 0; i + 1 < s.n; ++i) {
        double t = (i % 2 == 0) ? s.v : s.w;
        for (char c : {'X', 'Y'}) {
            PauliString p = PauliString::identity(s.n);
            p.set(i, c);
            p.set(i + 1, c);
            h.add(0.5 * t, p);
        }
    }
    return h.canonicalize();
}

/// Pauli-sum Hamiltonian or a free-fermion SSH chain.
using HamiltonianSpec = std::variant<ObservableSum, SshSpec>;

inline ObservableSum to_observable(const HamiltonianSpec &h) {
    if (const auto *o = std::get_if<ObservableSum>(&h)) return *o;
    return ssh_hamiltonian(std::get<SshSpec>(h));
}

struct GroundState {
    double energy;
    StateVector state;
};

namespace detail {

inline StateVector phase_fixed(int n, CVector v) {
    Eigen::Index lead = 0;
    v.cwiseAbs().maxCoeff(&lead);
    v *= std::abs(v(lead)) / v(lead);
    return StateVector(n, v / v.norm());
}

/// Lanczos with full reorthogonalization and restarts from the current Ritz vector.
inline GroundState lanczos_ground_state(const ObservableSum &h, int n) {
    const Eigen::Index dim = Eigen::Index{1} << n;
    Rng rng(0x5eed);
    std::normal_distribution<double> g;
    CVector start(dim);
    for (Eigen::Index i = 0; i < dim; ++i) start(i) = cplx(g(rng), g(rng));
    start.normalize();
    const int krylov = static_cast<int>(std::min<Eigen::Index>(dim, 160));
    for (int restart = 0; restart < 50; ++restart) {
        std::vector<CVector> basis{start};
        std::vector<double> alpha, beta;
        for (int j = 0; j < krylov; ++j) {
            CVector w = apply_observable(h, basis[j]);
            alpha.push_back(basis[j].dot(w).real());
            for (const auto &b : basis) w -= b.dot(w) * b;
            for (const auto &b : basis) w -= b.dot(w) * b;
            double nb = w.norm();
            if (j + 1 == krylov || nb < 1e-12) break;
            beta.push_back(nb);
            basis.push_back(w / nb);
        }
        const int m = static_cast<int>(alpha.size());
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (int j = 0; j < m; ++j) {
            t(j, j) = alpha[j];
            if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = beta[j];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        CVector ritz = CVector::Zero(dim);
        for (int j = 0; j < m; ++j) ritz += es.eigenvectors()(j, 0) * basis[j];
        ritz.normalize();
        double e = es.eigenvalues()(0);
        if ((apply_observable(h, ritz) - e * ritz).norm() < 1e-9) return {e, phase_fixed(n, ritz)};
        start = ritz;
    }
    throw NumericalError("Lanczos did not converge");
}

}  // namespace detail

/// Lowest eigenpair: dense diagonalization up to 10 qubits, Lanczos above.
inline GroundState ground_state_exact(const HamiltonianSpec &spec) {
    ObservableSum h = to_observable(spec);
    const int n = h.n();
    if (n > 12) throw UnsupportedError("ground_state_exact supports n <= 12");
    if (n > 10) return detail::lanczos_ground_state(h, n);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(observable_matrix(h));
    return {es.eigenvalues()(0), detail::phase_fixed(n, es.eigenvectors().col(0))};
}

/// Single-particle hopping matrix of the SSH chain.
inline Eigen::MatrixXd ssh_hopping_matrix(const SshSpec &s) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(s.n, s.n);
    for (int i = 0; i + 1 < s.n; ++i) t(i, i + 1) = t(i + 1, i) = (i % 2 == 0) ? s.v : s.w;
    return t;
}

/// Half-filled Slater determinant of the n/2 lowest single-particle modes.
/// The amplitude of an occupation pattern is the minor of the orbital matrix
/// on the occupied sites (ascending order, so Jordan-Wigner signs are all +).
inline StateVector ssh_ground_state(int n, double v, double w) {
    if (n < 2 || n % 2 != 0 || n > 12) throw ValidationError("ssh_ground_state needs even n <= 12");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ssh_hopping_matrix({n, v, w}));
    const int m = n / 2;
    Eigen::MatrixXd orbitals = es.eigenvectors().leftCols(m);
    CVector amps = CVector::Zero(Eigen::Index{1} << n);
    Eigen::MatrixXd minor(m, m);
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
        if (popcount(bits) != m) continue;
        int row = 0;
        for (int site = 0; site < n; ++site) {
            if ((bits >> site) & 1U) minor.row(row++) = orbitals.row(site);
        }
        amps(static_cast<Eigen::Index>(bits)) = minor.determinant();
    }
    return detail::phase_fixed(n, amps);
}

/// Sum of the n/2 lowest single-particle energies.
inline double ssh_ground_energy(int n, double v, double w) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ssh_hopping_matrix({n, v, w}));
    return es.eigenvalues().head(n / 2).sum();
}

/// exp(-i H t) through the eigendecomposition of the dense Hamiltonian.
inline CMatrix evolution_operator(const ObservableSum &h, double t) {
    if (h.n() > 10) throw UnsupportedError("dense evolution supports n <= 10");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(observable_matrix(h));
    CVector phases = (es.eigenvalues().cast<cplx>() * cplx(0.0, -t)).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline StateVector evolve_exact(const StateVector &psi, const ObservableSum &h, double t) {
    require_dims(h.n() == psi.n(), "evolve_exact: size mismatch");
    CVector v = evolution_operator(h, t) * psi.amplitudes();
    return StateVector(psi.n(), v / v.norm());
}

/// Brickwork of Haar two-qubit gates on neighbouring pairs, even pairs on even layers.
inline StateVector random_circuit_state(int n, int depth, Rng &rng) {
    if (n > kMaxStateQubits) throw UnsupportedError("random_circuit_state supports n <= 14");
    CVector v = StateVector::basis(n).amplitudes();
    for (int layer = 0; layer < depth; ++layer) {
        for (int q = layer % 2; q + 1 < n; q += 2) apply_local(v, q, 2, sample_dense_haar(2, rng).dense());
    }
    return StateVector(n, v / v.norm());
}

/// Reduced density matrix on `qubits` (listed order defines the local bit order).
inline CMatrix reduced_density_matrix(const StateVector &psi, std::span<const int> qubits) {
    const int a = static_cast<int>(qubits.size());
    std::uint64_t mask_a = 0;
    for (int q : qubits) {
        if (q < 0 || q >= psi.n()) throw DimensionError("subsystem qubit out of range");
        mask_a |= std::uint64_t{1} << q;
    }
    require_dims(popcount(mask_a) == a, "subsystem lists a qubit twice");
    const int b = psi.n() - a;
    std::vector<int> rest;
    for (int q = 0; q < psi.n(); ++q) {
        if (!((mask_a >> q) & 1U)) rest.push_back(q);
    }
    CMatrix m(Eigen::Index{1} << a, Eigen::Index{1} << b);
    for (std::uint64_t idx = 0; idx < psi.dim(); ++idx) {
        std::uint64_t ia = 0, ib = 0;
        for (int j = 0; j < a; ++j) ia |= ((idx >> qubits[j]) & 1U) << j;
        for (int j = 0; j < b; ++j) ib |= ((idx >> rest[j]) & 1U) << j;
        m(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib)) = psi.amplitudes()(static_cast<Eigen::Index>(idx));
    }
    return m * m.adjoint();
}

/// Tr(rho_A^2).
inline double purity_exact(const StateVector &psi, std::span<const int> qubits) {
    return reduced_density_matrix(psi, qubits).squaredNorm();
}

inline double purity_exact(const StateVector &psi) { return std::pow(psi.amplitudes().squaredNorm(), 2); }

/// |<a|b>|^2.
inline double fidelity_exact(const StateVector &a, const StateVector &b) {
    require_dims(a.n() == b.n(), "fidelity: size mismatch");
    return std::norm(a.amplitudes().dot(b.amplitudes()));
}

}  // namespace blockshadow
