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

#include "blockshadow/noise.hpp"

#include <gtest/gtest.h>

#include "blockshadow/shadow.hpp"
#include "oracles.hpp"

using namespace blockshadow;

namespace {

PauliString P(const char *s) { return PauliString::parse(s); }

NoiseModel model1(PauliChannel c, std::string tag = "test") { return NoiseModel{NoiseKind::model1, {std::move(c)}, tag}; }

PauliChannel random_channel(NoiseScope scope, int width, Rng &rng, double total) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PauliChannel c{scope, {}};
    const std::uint64_t count = std::uint64_t{1} << (2 * width);
    std::vector<double> w(count - 1);
    double s = 0.0;
    for (auto &x : w) s += (x = u(rng));
    for (std::uint64_t v = 1; v < count; ++v) {
        c.probs.emplace_back(PauliString(width, v & low_mask(width), v >> width), total * w[v - 1] / s);
    }
    return c;
}

/// Brute-force E_U[lambda(UPU^dag)^power 1{Z-type}] over a finite block ensemble.
double brute_noisy_moment(const PauliString &p, std::span<const CliffordTableau> members, const BlockLayout &lay,
                          const PauliChannel &c, int power) {
    const int nb = lay.num_blocks();
    std::size_t total = 1;
    for (int r = 0; r < nb; ++r) total *= members.size();
    double sum = 0.0;
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::vector<BlockUnitary> blocks;
        std::size_t rest = idx;
        for (int r = 0; r < nb; ++r) {
            blocks.emplace_back(members[rest % members.size()]);
            rest /= members.size();
        }
        LayeredBlockUnitary u(lay, blocks);
        PauliString img = conjugate(u, p);
        if (img.x() == 0) sum += std::pow(lambda_coeff(c, img.unsigned_copy(), lay), power);
    }
    return sum / static_cast<double>(total);
}

/// Exact output of the model1 channel on U|psi><psi|U^dag.
CMatrix exact_model1_output(const StateVector &psi, const LayeredBlockUnitary &u, const PauliChannel &c) {
    const BlockLayout &lay = u.layout();
    CVector v = apply_block_unitary(psi, u).amplitudes();
    CMatrix rho = v * v.adjoint();
    // Apply unit channels one unit at a time.
    const int width = c.unit_width(lay);
    for (int unit = 0; unit < c.unit_count(lay); ++unit) {
        CMatrix next = (1.0 - c.total()) * rho;
        for (const auto &[e, w] : c.probs) {
            CMatrix m = pauli_matrix(PauliString(lay.n(), e.x() << (unit * width), e.z() << (unit * width)));
            next += w * m * rho * m.adjoint();
        }
        rho = next;
    }
    return rho;
}

}  // namespace

TEST(Lambda, Examples) {
    BlockLayout lay(1, 1);
    EXPECT_EQ(lambda_coeff(PauliChannel{}, P("X"), lay), 1.0);
    const double p = 0.09;
    PauliChannel dep = PauliChannel::depolarizing(NoiseScope::per_qubit, p, 1);
    for (const char *w : {"X", "Y", "Z"}) EXPECT_NEAR(lambda_coeff(dep, P(w), lay), 1.0 - 4.0 * p / 3.0, 1e-15);
    EXPECT_EQ(lambda_coeff(dep, P("I"), lay), 1.0);
    BlockLayout two(4, 2);
    PauliChannel block = PauliChannel::depolarizing(NoiseScope::per_block, 0.02, 2);
    EXPECT_NEAR(lambda_coeff(block, P("XIIZ"), two), std::pow(1.0 - 0.02 * 16.0 / 15.0, 2), 1e-15);
}

TEST(Lambda, MatchesDenseChannelAction) {
    Rng rng(31);
    BlockLayout lay(2, 2);
    for (auto scope : {NoiseScope::per_qubit, NoiseScope::per_block, NoiseScope::global}) {
        PauliChannel c = random_channel(scope, scope == NoiseScope::per_qubit ? 1 : 2, rng, 0.3);
        for (const auto &word : oracle::all_words(2)) {
            PauliString q = P(word.c_str());
            CMatrix m = pauli_matrix(q);
            CMatrix out = (1.0 - c.total()) * m;
            // Units of a per-qubit channel act independently.
            if (scope == NoiseScope::per_qubit) {
                out = m;
                for (int unit = 0; unit < 2; ++unit) {
                    CMatrix next = (1.0 - c.total()) * out;
                    for (const auto &[e, w] : c.probs) {
                        CMatrix em = pauli_matrix(PauliString(2, e.x() << unit, e.z() << unit));
                        next += w * em * out * em.adjoint();
                    }
                    out = next;
                }
            } else {
                for (const auto &[e, w] : c.probs) out += w * pauli_matrix(e) * m * pauli_matrix(e).adjoint();
            }
            EXPECT_LT(max_abs(out - lambda_coeff(c, q, lay) * m), 1e-12) << word;
        }
    }
}

TEST(Lambda, ValidationRejectsBadChannels) {
    BlockLayout lay(4, 2);
    PauliChannel wide{NoiseScope::per_qubit, {{P("XX"), 0.1}}};
    EXPECT_THROW(wide.validate(lay), DimensionError);
    PauliChannel heavy{NoiseScope::per_qubit, {{P("X"), 0.7}, {P("Z"), 0.7}}};
    EXPECT_THROW(heavy.validate(lay), ValidationError);
    PauliChannel negative{NoiseScope::per_qubit, {{P("X"), -0.1}}};
    EXPECT_THROW(negative.validate(lay), ValidationError);
    NoiseModel two_layers{NoiseKind::model1, {PauliChannel{}, PauliChannel{}}, ""};
    EXPECT_THROW(two_layers.validate(lay), ValidationError);
}

TEST(NoisyM, DepolarizingExample) {
    EnsembleSpec spec{EnsembleKind::clifford_full, BlockLayout(1, 1)};
    NoiseModel noise = model1(PauliChannel::depolarizing(NoiseScope::per_qubit, 0.06, 1));
    EXPECT_NEAR(noisy_m(P("Z"), spec, noise), (1.0 / 3.0) * (1.0 - 0.08), 1e-15);
    EXPECT_NEAR(noisy_m(P("Z"), spec, NoiseModel::none()), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(noisy_m(P("I"), spec, noise), 1.0);
}

TEST(NoisyM, MatchesEnumerationForEveryEnsembleAndScope) {
    Rng rng(32);
    for (int k : {1, 2}) {
        BlockLayout lay(k == 1 ? 2 : 4, k);
        for (auto kind : {EnsembleKind::clifford_full, EnsembleKind::mub, EnsembleKind::stabilizer_basis}) {
            // Two-block sums over Cl(2) are covered by the single-block test below.
            if (kind == EnsembleKind::clifford_full && k == 2) continue;
            std::span<const CliffordTableau> members =
                kind == EnsembleKind::clifford_full ? std::span<const CliffordTableau>(cached_clifford_group(k))
                                                    : ensemble_members(kind, k);
            for (auto scope : {NoiseScope::per_qubit, NoiseScope::per_block, NoiseScope::global}) {
                const int width = scope == NoiseScope::per_qubit ? 1 : scope == NoiseScope::per_block ? k : lay.n();
                PauliChannel c = random_channel(scope, width, rng, 0.25);
                for (int trial = 0; trial < 4; ++trial) {
                    PauliString p(lay.n(), rng() & low_mask(lay.n()), rng() & low_mask(lay.n()));
                    for (int power : {1, 2}) {
                        EXPECT_NEAR(noisy_moment(p, {kind, lay}, model1(c), power),
                                    brute_noisy_moment(p, members, lay, c, power), 1e-12)
                            << p.str() << " " << to_string(kind) << " " << to_string(scope);
                    }
                }
            }
        }
    }
}

TEST(NoisyM, CliffordTwoBlockNoisyEnumeration) {
    Rng rng(33);
    BlockLayout lay(2, 2);
    const auto &group = enumerate_clifford(2);
    for (auto scope : {NoiseScope::per_qubit, NoiseScope::per_block, NoiseScope::global}) {
        PauliChannel c = random_channel(scope, scope == NoiseScope::per_qubit ? 1 : 2, rng, 0.3);
        for (const char *w : {"XI", "YZ", "ZZ"}) {
            EnsembleSpec spec{EnsembleKind::clifford_full, lay};
            EXPECT_NEAR(noisy_moment(P(w), spec, model1(c), 1), brute_noisy_moment(P(w), group, lay, c, 1), 1e-12);
            EXPECT_NEAR(noisy_moment(P(w), spec, model1(c), 2), brute_noisy_moment(P(w), group, lay, c, 2), 1e-12);
        }
    }
}

TEST(NoisyM, ModelTwoMatchesLayerEnumeration) {
    Rng rng(34);
    BlockLayout lay(1, 1);
    const auto &group = enumerate_clifford(1);
    PauliChannel c1 = random_channel(NoiseScope::per_qubit, 1, rng, 0.3);
    PauliChannel c2 = random_channel(NoiseScope::per_qubit, 1, rng, 0.2);
    NoiseModel noise{NoiseKind::model2, {c1, c2}, "layers"};
    for (const char *w : {"X", "Y", "Z"}) {
        double sum = 0.0, sum2 = 0.0;
        for (const auto &u1 : group) {
            PauliString p1 = u1.conjugate(P(w)).unsigned_copy();
            for (const auto &u2 : group) {
                PauliString p2 = u2.conjugate(p1).unsigned_copy();
                if (p2.x() != 0) continue;
                double l = lambda_coeff(c1, p1, lay) * lambda_coeff(c2, p2, lay);
                sum += l;
                sum2 += l * l;
            }
        }
        const double count = double(group.size() * group.size());
        EnsembleSpec spec{EnsembleKind::clifford_full, lay};
        EXPECT_NEAR(noisy_moment(P(w), spec, noise, 1), sum / count, 1e-12);
        EXPECT_NEAR(noisy_moment(P(w), spec, noise, 2), sum2 / count, 1e-12);
    }
    EXPECT_THROW(noisy_m(P("X"), {EnsembleKind::mub, lay}, noise), UnsupportedError);
}

TEST(NoisyM, NeverExceedsNoiselessAndChannelTwoOrdering) {
    Rng rng(35);
    for (int trial = 0; trial < 100; ++trial) {
        int k = 1 + trial % 2;
        BlockLayout lay(4, k);
        EnsembleSpec spec{EnsembleKind::clifford_full, lay};
        NoiseModel noise = model1(random_channel(trial % 3 ? NoiseScope::per_qubit : NoiseScope::per_block,
                                                 trial % 3 ? 1 : k, rng, 0.4));
        PauliString p(4, rng() & 15, rng() & 15);
        double m = m_eigenvalue(p, spec);
        Channel2Report r = channel2_eigenvalue(p, spec, noise);
        EXPECT_LE(r.m2, r.m1 + 1e-15);
        EXPECT_LE(r.m1, m + 1e-15);
        EXPECT_TRUE(r.channel2_not_worse);
    }
}

TEST(NoisyM, ChannelTwoEqualityCases) {
    EnsembleSpec spec{EnsembleKind::clifford_full, BlockLayout(2, 1)};
    Channel2Report clean = channel2_eigenvalue(P("XZ"), spec, NoiseModel::none());
    EXPECT_NEAR(clean.m2, clean.m1, 1e-15);
    EXPECT_NEAR(clean.norm_channel1, 9.0, 1e-12);
    EXPECT_NEAR(clean.norm_channel2, 9.0, 1e-12);
    // Depolarizing gives the same lambda on every non-identity Pauli.
    Channel2Report dep =
        channel2_eigenvalue(P("XZ"), spec, model1(PauliChannel::depolarizing(NoiseScope::per_qubit, 0.1, 1)));
    EXPECT_NEAR(dep.norm_channel1, dep.norm_channel2, 1e-12);
    Rng rng(36);
    // With one qubit per block the only Z-type image is Z, so the norms coincide;
    // two-qubit blocks have several Z-type images with different lambda.
    PauliChannel skewed = random_channel(NoiseScope::per_qubit, 1, rng, 0.4);
    Channel2Report k1 = channel2_eigenvalue(P("X"), {EnsembleKind::clifford_full, BlockLayout(1, 1)}, model1(skewed));
    EXPECT_NEAR(k1.norm_channel2, k1.norm_channel1, 1e-12);
    Channel2Report k2 = channel2_eigenvalue(P("XY"), {EnsembleKind::clifford_full, BlockLayout(2, 2)}, model1(skewed));
    EXPECT_LT(k2.norm_channel2, k2.norm_channel1 * (1.0 - 1e-6));
}

TEST(Trajectory, ZeroNoiseAndDepolarizingFlipRate) {
    Rng rng(37);
    BlockLayout lay(1, 1);
    std::vector<LayeredBlockUnitary> id{LayeredBlockUnitary::identity(lay)};
    const double p = 0.15;
    NoiseModel dep = model1(PauliChannel::depolarizing(NoiseScope::per_qubit, p, 1));
    int ones = 0, clean_ones = 0;
    const int shots = 100000;
    for (int s = 0; s < shots; ++s) {
        ones += simulate_noisy_trajectory(StateVector::basis(1), id, dep, rng) == 1;
        clean_ones += simulate_noisy_trajectory(StateVector::basis(1), id, NoiseModel::none(), rng) == 1;
    }
    EXPECT_EQ(clean_ones, 0);
    const double rate = 2.0 * p / 3.0;
    EXPECT_NEAR(ones / double(shots), rate, 5.0 * std::sqrt(rate * (1 - rate) / shots));
}

TEST(Trajectory, AveragedOutputMatchesChannel) {
    Rng rng(38);
    BlockLayout lay(3, 1);
    StateVector psi = StateVector::normalized(3, oracle::random_state(3, rng));
    auto u = sample_layered({EnsembleKind::clifford_full, lay}, rng);
    PauliChannel c = random_channel(NoiseScope::per_qubit, 1, rng, 0.3);
    CMatrix exact = exact_model1_output(psi, u, c);
    // Compare outcome distributions (the diagonal is what a trajectory samples).
    std::vector<double> counts(8, 0.0);
    const int shots = 100000;
    std::vector<LayeredBlockUnitary> layers{u};
    NoiseModel noise = model1(c);
    for (int s = 0; s < shots; ++s) counts[simulate_noisy_trajectory(psi, layers, noise, rng)] += 1.0 / shots;
    for (int b = 0; b < 8; ++b) {
        double p = exact(b, b).real();
        EXPECT_NEAR(counts[b], p, 5.0 * std::sqrt(p * (1 - p) / shots) + 1e-9);
    }
}

TEST(Trajectory, ModelTwoErrorPropagation) {
    Rng rng(39);
    BlockLayout lay(2, 1);
    StateVector psi = StateVector::normalized(2, oracle::random_state(2, rng));
    std::vector<LayeredBlockUnitary> layers{sample_layered({EnsembleKind::clifford_full, lay}, rng),
                                            sample_layered({EnsembleKind::clifford_full, lay}, rng)};
    PauliChannel c1 = random_channel(NoiseScope::per_qubit, 1, rng, 0.3);
    PauliChannel c2 = random_channel(NoiseScope::per_qubit, 1, rng, 0.2);
    NoiseModel noise{NoiseKind::model2, {c1, c2}, "layers"};
    // Exact: channel after each layer on the density matrix.
    CVector v = apply_block_unitary(psi, layers[0]).amplitudes();
    CMatrix rho = v * v.adjoint();
    auto apply_channel = [&](const PauliChannel &c) {
        for (int q = 0; q < 2; ++q) {
            CMatrix next = (1.0 - c.total()) * rho;
            for (const auto &[e, w] : c.probs) {
                CMatrix m = pauli_matrix(PauliString(2, e.x() << q, e.z() << q));
                next += w * m * rho * m.adjoint();
            }
            rho = next;
        }
    };
    apply_channel(c1);
    CMatrix u2 = oracle::kron(layers[1].block(1).dense(), layers[1].block(0).dense());
    rho = u2 * rho * u2.adjoint();
    apply_channel(c2);
    std::vector<double> counts(4, 0.0);
    const int shots = 100000;
    for (int s = 0; s < shots; ++s) counts[simulate_noisy_trajectory(psi, layers, noise, rng)] += 1.0 / shots;
    for (int b = 0; b < 4; ++b) {
        double p = rho(b, b).real();
        EXPECT_NEAR(counts[b], p, 5.0 * std::sqrt(p * (1 - p) / shots) + 1e-9);
    }
}

TEST(Trajectory, UnmitigatedEstimateIsDeflated) {
    EnsembleSpec spec{EnsembleKind::clifford_full, BlockLayout(2, 1)};
    NoiseModel noise = model1(PauliChannel::depolarizing(NoiseScope::per_qubit, 0.1, 1));
    AcquireOptions opt;
    opt.seed = 40;
    opt.noise = &noise;
    ShadowDataset ds = acquire(StateVector::basis(2), spec, 100000, 1, opt);
    EstimatorOptions eo;
    eo.stderr_method = StderrMethod::analytic;
    Estimate e = estimate_pauli(ds, P("ZZ"), eo);
    const double ratio = noisy_m(P("ZZ"), spec, noise) / m_eigenvalue(P("ZZ"), spec);
    EXPECT_NEAR(e.mean, ratio, 3.0 * e.stderr);
}
