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

#include "blockshadow/statevector.hpp"

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using namespace blockshadow;

namespace {

PauliString P(const char *s) { return PauliString::parse(s); }

StateVector bell() {
    CVector v = CVector::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    return StateVector(2, v);
}

StateVector plus() {
    CVector v(2);
    v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    return StateVector(1, v);
}

}  // namespace

TEST(StateVector, RejectsUnnormalizedInput) {
    EXPECT_THROW(StateVector(1, CVector::Ones(2)), ValidationError);
    EXPECT_THROW(StateVector(2, CVector::Ones(2)), DimensionError);
    EXPECT_THROW(StateVector::basis(15), UnsupportedError);
}

TEST(ApplyBlockUnitary, IdentityAndHadamard) {
    Rng rng(1);
    StateVector psi = StateVector::normalized(4, oracle::random_state(4, rng));
    auto id = LayeredBlockUnitary::identity(BlockLayout(4, 2));
    EXPECT_LT((apply_block_unitary(psi, id).amplitudes() - psi.amplitudes()).norm(), 1e-12);

    LayeredBlockUnitary h(BlockLayout(1, 1), {BlockUnitary(gates::hadamard(1, 0))});
    StateVector out = apply_block_unitary(StateVector::basis(1), h);
    // Tableau-derived matrices carry an arbitrary global phase.
    EXPECT_NEAR(fidelity_exact(out, plus()), 1.0, 1e-12);
}

TEST(ApplyBlockUnitary, CompositionMatchesProduct) {
    Rng rng(2);
    for (int k : {1, 2, 3}) {
        BlockLayout lay(6, k);
        for (auto kind : {EnsembleKind::clifford_full, EnsembleKind::haar_dense}) {
            EnsembleSpec spec{kind, lay};
            auto u = sample_layered(spec, rng), v = sample_layered(spec, rng);
            StateVector psi = StateVector::normalized(6, oracle::random_state(6, rng));
            StateVector two_step = apply_block_unitary(apply_block_unitary(psi, v), u);
            StateVector one_step = apply_block_unitary(psi, compose(u, v));
            EXPECT_NEAR(fidelity_exact(two_step, one_step), 1.0, 1e-10);
            EXPECT_NEAR(two_step.amplitudes().norm(), 1.0, 1e-12);
        }
    }
}

TEST(ApplyBlockUnitary, MatchesKroneckerProduct) {
    Rng rng(3);
    BlockLayout lay(4, 2);
    auto u = sample_layered({EnsembleKind::haar_dense, lay}, rng);
    StateVector psi = StateVector::normalized(4, oracle::random_state(4, rng));
    CVector expect = oracle::kron(u.block(1).dense(), u.block(0).dense()) * psi.amplitudes();
    EXPECT_LT((apply_block_unitary(psi, u).amplitudes() - expect).norm(), 1e-12);
}

TEST(SampleBitstrings, BasisPlusAndBell) {
    Rng rng(4);
    for (auto b : sample_bitstrings(StateVector::basis(3), 100, rng)) EXPECT_EQ(b, 0u);
    const int count = 100000;
    int zeros = 0;
    for (auto b : sample_bitstrings(plus(), count, rng)) zeros += b == 0;
    EXPECT_NEAR(zeros / double(count), 0.5, 5 * std::sqrt(0.25 / count));
    std::set<std::uint64_t> seen;
    for (auto b : sample_bitstrings(bell(), 1000, rng)) seen.insert(b);
    EXPECT_EQ(seen, (std::set<std::uint64_t>{0, 3}));
}

TEST(Expectation, SimpleCasesAndDenseOracle) {
    EXPECT_DOUBLE_EQ(expectation(StateVector::basis(1), P("Z")), 1.0);
    EXPECT_NEAR(expectation(plus(), P("Z")), 0.0, 1e-15);
    EXPECT_NEAR(expectation(bell(), P("YY")), -1.0, 1e-12);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 1 + trial % 5;
        oracle::Vec v = oracle::random_state(n, rng);
        StateVector psi(n, v);
        PauliString p(n, rng() & low_mask(n), rng() & low_mask(n), 2 * (rng() % 2));
        double dense = (v.adjoint() * oracle::pauli(p.str(false)) * v)(0, 0).real() * p.sign();
        EXPECT_NEAR(expectation(psi, p), dense, 1e-12);
    }
}

TEST(GroundState, SmallHamiltonians) {
    GroundState z = ground_state_exact(ObservableSum(1, {{1.0, P("Z")}}));
    EXPECT_NEAR(z.energy, -1.0, 1e-12);
    EXPECT_NEAR(std::norm(z.state.amplitudes()(1)), 1.0, 1e-12);

    GroundState s = ground_state_exact(ObservableSum(2, {{1.0, P("XX")}, {1.0, P("YY")}, {1.0, P("ZZ")}}));
    EXPECT_NEAR(s.energy, -3.0, 1e-12);
    CVector singlet = CVector::Zero(4);
    singlet(1) = 1.0 / std::sqrt(2.0);
    singlet(2) = -1.0 / std::sqrt(2.0);
    EXPECT_NEAR(fidelity_exact(s.state, StateVector(2, singlet)), 1.0, 1e-12);
}

TEST(GroundState, ClusterHeisenbergMatchesDenseAndResidual) {
    ObservableSum h = build_cluster_heisenberg(4);
    GroundState gs = ground_state_exact(h);
    Eigen::SelfAdjointEigenSolver<oracle::Mat> es(observable_matrix(h));
    EXPECT_NEAR(gs.energy, es.eigenvalues()(0), 1e-10);
    EXPECT_LT((apply_observable(h, gs.state.amplitudes()) - gs.energy * gs.state.amplitudes()).norm(), 1e-8);
}

TEST(GroundState, LanczosPathForElevenQubits) {
    ObservableSum h = build_cluster_heisenberg(11);
    GroundState gs = ground_state_exact(h);
    EXPECT_LT((apply_observable(h, gs.state.amplitudes()) - gs.energy * gs.state.amplitudes()).norm(), 1e-8);
    // The Lanczos path agrees with dense diagonalization where both apply.
    GroundState small = detail::lanczos_ground_state(build_cluster_heisenberg(6), 6);
    EXPECT_NEAR(small.energy, ground_state_exact(build_cluster_heisenberg(6)).energy, 1e-9);
}

TEST(Ssh, DimerLimitEnergy) {
    StateVector psi = ssh_ground_state(8, 1.0, 0.0);
    ObservableSum h = ssh_hamiltonian({8, 1.0, 0.0});
    EXPECT_NEAR(expectation(psi, h), -4.0, 1e-10);
    EXPECT_NEAR(ssh_ground_energy(8, 1.0, 0.0), -4.0, 1e-12);
}

TEST(Ssh, MatchesDenseJordanWignerDiagonalization) {
    for (double w : {0.3, 0.9, 1.7}) {
        StateVector psi = ssh_ground_state(8, 1.0, w);
        ObservableSum h = ssh_hamiltonian({8, 1.0, w});
        double e = expectation(psi, h);
        EXPECT_NEAR(e, ssh_ground_energy(8, 1.0, w), 1e-10);
        GroundState dense = ground_state_exact(HamiltonianSpec(SshSpec{8, 1.0, w}));
        EXPECT_NEAR(e, dense.energy, 1e-8);
        EXPECT_NEAR(fidelity_exact(psi, dense.state), 1.0, 1e-8);
        EXPECT_LT((apply_observable(h, psi.amplitudes()) - e * psi.amplitudes()).norm(), 1e-8);
    }
}

TEST(Ssh, HalfFillingAndSpectralSymmetry) {
    StateVector psi = ssh_ground_state(6, 1.0, 0.6);
    double number = 0.0;
    for (int q = 0; q < 6; ++q) number += (1.0 - expectation(psi, PauliString::single(6, q, 'Z'))) / 2.0;
    EXPECT_NEAR(number, 3.0, 1e-12);
    // Flipping the sign of either hopping is a gauge transformation.
    EXPECT_NEAR(ssh_ground_energy(8, 1.0, 0.6), ssh_ground_energy(8, -1.0, 0.6), 1e-12);
    EXPECT_NEAR(ssh_ground_energy(8, 1.0, 0.6), ssh_ground_energy(8, 1.0, -0.6), 1e-12);
    // Reflecting the chain maps the bond pattern onto itself, so the reflected
    // ground state is the ground state again.
    StateVector s = ssh_ground_state(8, 1.0, 1.3);
    CVector reflected(s.amplitudes().size());
    for (std::uint64_t b = 0; b < 256; ++b) {
        std::uint64_t r = 0;
        for (int q = 0; q < 8; ++q) r |= ((b >> q) & 1U) << (7 - q);
        reflected(static_cast<Eigen::Index>(r)) = s.amplitudes()(static_cast<Eigen::Index>(b));
    }
    EXPECT_NEAR(fidelity_exact(s, StateVector(8, reflected)), 1.0, 1e-10);
    EXPECT_THROW(ssh_ground_state(7, 1.0, 1.0), ValidationError);
}

TEST(Evolve, IdentityNormAndGroupProperty) {
    Rng rng(6);
    ObservableSum h = build_cluster_heisenberg(4);
    StateVector psi = StateVector::normalized(4, oracle::random_state(4, rng));
    EXPECT_LT((evolve_exact(psi, h, 0.0).amplitudes() - psi.amplitudes()).norm(), 1e-12);
    EXPECT_NEAR(evolve_exact(psi, h, 5.0).amplitudes().norm(), 1.0, 1e-10);
    StateVector a = evolve_exact(psi, h, 0.7 + 1.1);
    StateVector b = evolve_exact(evolve_exact(psi, h, 0.7), h, 1.1);
    EXPECT_LT((a.amplitudes() - b.amplitudes()).norm(), 1e-9);
    StateVector z = evolve_exact(StateVector::basis(1), ObservableSum(1, {{1.0, P("Z")}}), 2.3);
    EXPECT_NEAR(std::abs(z.amplitudes()(0)), 1.0, 1e-12);
}

TEST(RandomCircuit, DeterministicAndNormalized) {
    Rng a(9), b(9);
    StateVector s1 = random_circuit_state(6, 8, a), s2 = random_circuit_state(6, 8, b);
    EXPECT_EQ(s1.amplitudes(), s2.amplitudes());
    EXPECT_NEAR(s1.amplitudes().norm(), 1.0, 1e-10);
    Rng c(9);
    EXPECT_EQ(random_circuit_state(5, 0, c).amplitudes(), StateVector::basis(5).amplitudes());
}

TEST(Purity, KnownStates) {
    std::vector<int> all{0, 1};
    EXPECT_NEAR(purity_exact(bell(), all), 1.0, 1e-12);
    std::vector<int> one{0};
    EXPECT_NEAR(purity_exact(bell(), one), 0.5, 1e-12);
    CVector ghz = CVector::Zero(16);
    ghz(0) = ghz(15) = 1.0 / std::sqrt(2.0);
    std::vector<int> half{0, 1};
    EXPECT_NEAR(purity_exact(StateVector(4, ghz), half), 0.5, 1e-12);
}
