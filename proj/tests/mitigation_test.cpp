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

#include "blockshadow/mitigation.hpp"

#include <gtest/gtest.h>

#include "blockshadow/analytics.hpp"
#include "oracles.hpp"

using namespace blockshadow;

namespace {

NoiseModel block_depolarizing(double p, int k) {
    return NoiseModel{NoiseKind::model1, {PauliChannel::depolarizing(NoiseScope::per_block, p, k)}, "depol"};
}

EnsembleSpec clifford(int n, int k) { return EnsembleSpec{EnsembleKind::clifford_full, BlockLayout(n, k)}; }

PauliString on_block(const BlockLayout &lay, int r, std::uint64_t x, std::uint64_t z) {
    return PauliString(lay.n(), x << (r * lay.k()), z << (r * lay.k()));
}

/// Factorized report holding the exact amplification m / m-tilde of every block.
CalibrationReport exact_report(const EnsembleSpec &spec, const NoiseModel &noise) {
    CalibrationReport rep{spec.layout, CalibrationMode::factorized, {}};
    for (int r = 0; r < spec.layout.num_blocks(); ++r) {
        const PauliString p = on_block(spec.layout, r, 0, 1);
        LabelAlpha la;
        la.alpha = m_eigenvalue(p, spec) / noisy_m(p, spec, noise);
        la.ci_low = la.ci_high = la.alpha;
        rep.labels[std::uint64_t{1} << r] = la;
    }
    return rep;
}

/// Product of independent random block states.
StateVector random_block_product(const BlockLayout &lay, std::mt19937_64 &rng) {
    CVector amps = CVector::Ones(Eigen::Index{1} << lay.n());
    for (int r = 0; r < lay.num_blocks(); ++r) {
        oracle::Vec phi = oracle::random_state(lay.k(), rng);
        for (Eigen::Index i = 0; i < amps.size(); ++i) amps(i) *= phi(static_cast<Eigen::Index>(lay.extract(i, r)));
    }
    return StateVector(lay.n(), amps);
}

/// Sum over blocks of every non-identity block Pauli weighted by its expectation.
ObservableSum block_fidelity_observable(const StateVector &psi, const BlockLayout &lay) {
    ObservableSum o(lay.n());
    const std::uint64_t d2 = std::uint64_t{1} << (2 * lay.k());
    for (int r = 0; r < lay.num_blocks(); ++r) {
        for (std::uint64_t v = 1; v < d2; ++v) {
            PauliString p = on_block(lay, r, v & low_mask(lay.k()), v >> lay.k());
            o.add(expectation(psi, p), p);
        }
    }
    return o.canonicalize();
}

struct VarianceSample {
    double var;
    double se;
};

VarianceSample variance_with_se(const std::vector<double> &v) {
    const double n = static_cast<double>(v.size());
    double mu = 0;
    for (double x : v) mu += x;
    mu /= n;
    double m2 = 0, m4 = 0;
    for (double x : v) {
        double d = (x - mu) * (x - mu);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    return {m2 * n / (n - 1), std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
}

}  // namespace

TEST(IrrepLabel, IsBlockSupport) {
    BlockLayout lay(6, 2);
    EXPECT_EQ(irrep_label(PauliString(6, 0, 0), lay), 0u);
    EXPECT_EQ(irrep_label(PauliString(6, 0, 0b000010), lay), 0b001u);
    EXPECT_EQ(irrep_label(PauliString(6, 0b010000, 0b000100), lay), 0b110u);
    EXPECT_EQ(irrep_label(PauliString(6, 0b111111, 0), lay), 0b111u);
}

TEST(IrrepLabel, ProbesShareTheLabel) {
    BlockLayout lay(6, 2);
    EXPECT_EQ(label_probes(0, lay).size(), 1u);
    const auto probes = label_probes(0b101, lay);
    EXPECT_EQ(probes.size(), 9u);
    for (const auto &q : probes) {
        EXPECT_EQ(q.x(), 0u);
        EXPECT_EQ(irrep_label(q, lay), 0b101u);
    }
}

TEST(Calibration, NoiselessAlphaIsOneWithinInterval) {
    const auto spec = clifford(6, 2);
    AcquireOptions ao;
    ao.seed = 11;
    auto cal = acquire(StateVector::basis(6), spec, 4000, 1, ao);
    for (auto mode : {CalibrationMode::factorized, CalibrationMode::direct}) {
        CalibrationOptions co;
        co.mode = mode;
        co.resamples = 200;
        auto rep = calibrate_alpha(cal, StateVector::basis(6), co);
        EXPECT_EQ(rep.labels.size(), mode == CalibrationMode::factorized ? 3u : 7u);
        for (const auto &[label, la] : rep.labels) {
            EXPECT_FALSE(la.ill_conditioned);
            EXPECT_LE(la.ci_low, 1.0) << label;
            EXPECT_GE(la.ci_high, 1.0) << label;
        }
    }
}

TEST(Calibration, DepolarizingMatchesAnalyticRatio) {
    const auto spec = clifford(6, 2);
    const auto noise = block_depolarizing(0.08, 2);
    AcquireOptions ao;
    ao.seed = 12;
    ao.noise = &noise;
    auto cal = acquire(StateVector::basis(6), spec, 20000, 1, ao);
    CalibrationOptions co;
    co.resamples = 200;
    auto fact = calibrate_alpha(cal, StateVector::basis(6), co);
    const PauliString one = on_block(spec.layout, 0, 0, 1);
    const double ratio = m_eigenvalue(one, spec) / noisy_m(one, spec, noise);
    EXPECT_GT(ratio, 1.05);
    for (const auto &[label, la] : fact.labels) EXPECT_NEAR(la.alpha, ratio, 3 * la.stderr) << label;

    co.mode = CalibrationMode::direct;
    co.labels = {0b011, 0b111};
    auto direct = calibrate_alpha(cal, StateVector::basis(6), co);
    const PauliString three(6, 0, 0b010101);
    const double ratio3 = m_eigenvalue(three, spec) / noisy_m(three, spec, noise);
    EXPECT_NEAR(direct.labels.at(0b111).alpha, ratio3, 3 * direct.labels.at(0b111).stderr);
}

TEST(Calibration, FactorizedAgreesWithDirect) {
    const auto spec = clifford(4, 2);
    const auto noise = block_depolarizing(0.1, 2);
    AcquireOptions ao;
    ao.seed = 13;
    ao.noise = &noise;
    auto cal = acquire(StateVector::basis(4), spec, 20000, 1, ao);
    CalibrationOptions co;
    co.resamples = 200;
    auto fact = calibrate_alpha(cal, StateVector::basis(4), co);
    co.mode = CalibrationMode::direct;
    auto direct = calibrate_alpha(cal, StateVector::basis(4), co);
    ASSERT_EQ(direct.labels.size(), 3u);
    const auto &a0 = fact.labels.at(1), &a1 = fact.labels.at(2);
    const double prod = fact.alpha(0b11);
    EXPECT_DOUBLE_EQ(prod, a0.alpha * a1.alpha);
    const double prod_se = prod * std::hypot(a0.stderr / a0.alpha, a1.stderr / a1.alpha);
    const auto &d = direct.labels.at(0b11);
    EXPECT_NEAR(prod, d.alpha, 1.96 * std::hypot(prod_se, d.stderr));
    EXPECT_NEAR(fact.alpha(1), direct.alpha(1), 1e-12);
}

TEST(Calibration, ZeroSignalIsFlagged) {
    const auto spec = clifford(4, 2);
    const StateVector plus = StateVector::normalized(4, CVector::Ones(16));
    auto cal = acquire(plus, spec, 500, 1, {});
    auto rep = calibrate_alpha(cal, plus, {});
    for (const auto &[label, la] : rep.labels) {
        EXPECT_TRUE(la.ill_conditioned);
        EXPECT_EQ(la.alpha, 1.0);
        EXPECT_TRUE(std::isinf(la.ci_high));
    }
}

TEST(Calibration, RejectsBadInput) {
    const auto spec = clifford(4, 2);
    auto cal = acquire(StateVector::basis(4), spec, 10, 1, {});
    EXPECT_THROW(calibrate_alpha(cal, StateVector::basis(6), {}), DimensionError);
    CalibrationOptions co;
    co.mode = CalibrationMode::direct;
    co.labels = {0b100};
    EXPECT_THROW(calibrate_alpha(cal, StateVector::basis(4), co), ValidationError);
}

TEST(MitigatedEstimate, UnitReportIsRaw) {
    const auto spec = clifford(6, 2);
    std::mt19937_64 rng(5);
    const StateVector psi = random_block_product(spec.layout, rng);
    auto ds = acquire(psi, spec, 300, 3, {});
    const ObservableSum o = block_fidelity_observable(psi, spec.layout);
    CalibrationReport rep{spec.layout, CalibrationMode::factorized, {{1, {}}, {2, {}}, {4, {}}}};
    EstimatorOptions eo;
    eo.stderr_method = StderrMethod::analytic;
    auto raw = estimate_observable(ds, o, eo);
    auto mit = mitigated_estimate(ds, o, rep, {}, eo);
    ASSERT_EQ(raw.per_record.size(), mit.per_record.size());
    for (std::size_t i = 0; i < raw.per_record.size(); ++i) EXPECT_NEAR(raw.per_record[i], mit.per_record[i], 1e-12);
}

TEST(MitigatedEstimate, ClampOnlyTouchesLargeAlpha) {
    ClampRule off;
    ClampRule on{true};
    EXPECT_DOUBLE_EQ(off.apply(2.0), 2.0);
    EXPECT_DOUBLE_EQ(on.apply(2.0), 1.6);
    EXPECT_DOUBLE_EQ(on.apply(1.5), 1.5);
    EXPECT_DOUBLE_EQ(on.apply(1.2), 1.2);

    const auto spec = clifford(4, 2);
    auto ds = acquire(StateVector::basis(4), spec, 200, 2, {});
    CalibrationReport rep{spec.layout, CalibrationMode::factorized, {}};
    rep.labels[1].alpha = 2.0;
    rep.labels[2].alpha = 1.2;
    const PauliString p0 = on_block(spec.layout, 0, 0, 3), p1 = on_block(spec.layout, 1, 0, 1);
    ObservableSum o(4);
    o.add(1.0, p0);
    o.add(1.0, p1);
    EstimatorOptions eo;
    eo.stderr_method = StderrMethod::analytic;
    auto mit = mitigated_estimate(ds, o, rep, on, eo);
    const double expect = 1.6 * estimate_pauli(ds, p0, eo).mean + 1.2 * estimate_pauli(ds, p1, eo).mean;
    EXPECT_NEAR(mit.mean, expect, 1e-12);
}

TEST(MitigatedEstimate, MissingLabelThrows) {
    const auto spec = clifford(4, 2);
    auto ds = acquire(StateVector::basis(4), spec, 10, 1, {});
    CalibrationReport rep{spec.layout, CalibrationMode::direct, {{1, {}}}};
    ObservableSum o(4);
    o.add(1.0, on_block(spec.layout, 1, 0, 1));
    EXPECT_THROW(mitigated_estimate(ds, o, rep), ValidationError);
    CalibrationReport other{BlockLayout(4, 1), CalibrationMode::factorized, {}};
    EXPECT_THROW(mitigated_estimate(ds, o, other), DimensionError);
}

TEST(MitigatedEstimate, UnbiasedWithExactAmplification) {
    const auto spec = clifford(6, 2);
    const auto noise = block_depolarizing(0.1, 2);
    const auto rep = exact_report(spec, noise);
    std::mt19937_64 rng(21);
    EstimatorOptions eo;
    eo.stderr_method = StderrMethod::analytic;
    for (int fixture = 0; fixture < 3; ++fixture) {
        const StateVector psi = random_block_product(spec.layout, rng);
        const ObservableSum o = block_fidelity_observable(psi, spec.layout);
        AcquireOptions ao;
        ao.seed = 100 + fixture;
        ao.noise = &noise;
        auto ds = acquire(psi, spec, 6000, 8, ao);
        auto raw = estimate_observable(ds, o, eo);
        auto mit = mitigated_estimate(ds, o, rep, {}, eo);
        const double exact = expectation(psi, o);
        EXPECT_NEAR(mit.mean, exact, 5 * mit.stderr) << fixture;
        EXPECT_GT(std::abs(raw.mean - exact), 5 * raw.stderr) << fixture;
    }
}

// One calibration of 1e5 records serves 200 independent data sets.
TEST(MitigatedEstimate, BeatsRawInMostTrials) {
    const auto spec = clifford(6, 2);
    const auto noise = block_depolarizing(0.02, 2);
    AcquireOptions cao;
    cao.seed = 7001;
    cao.noise = &noise;
    auto cal = acquire(StateVector::basis(6), spec, 100000, 1, cao);
    CalibrationOptions co;
    co.resamples = 100;
    const auto rep = calibrate_alpha(cal, StateVector::basis(6), co);

    std::mt19937_64 rng(31);
    const StateVector psi = random_block_product(spec.layout, rng);
    const ObservableSum o = block_fidelity_observable(psi, spec.layout);
    const double exact = expectation(psi, o);
    EstimatorOptions eo;
    eo.stderr_method = StderrMethod::analytic;
    int wins = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        AcquireOptions ao;
        ao.seed = 9000 + t;
        ao.noise = &noise;
        auto ds = acquire(psi, spec, 3000, 16, ao);
        const double raw = estimate_observable(ds, o, eo).mean;
        const double mit = mitigated_estimate(ds, o, rep, {}, eo).mean;
        wins += std::abs(mit - exact) < std::abs(raw - exact);
    }
    EXPECT_GE(wins, 180) << wins << " of " << trials;
}

TEST(NoisyMultishotVariance, NoiselessLimit) {
    const auto spec = clifford(6, 2);
    for (const auto &p : {PauliString(6, 0, 1), PauliString(6, 0b000011, 0b110000), PauliString(6, 0b101010, 0b010101)}) {
        for (std::size_t ns : {1u, 4u, 32u}) {
            auto v = variance_noisy_multishot(p, spec, NoiseModel::none(), 0.4, 50, ns);
            EXPECT_NEAR(v.exact, variance_pauli_multishot(p, 0.4, 50, ns, spec.layout), 1e-12);
        }
    }
}

TEST(NoisyMultishotVariance, BoundExceedsNoiselessVariance) {
    const auto spec = clifford(4, 2);
    const auto noise = block_depolarizing(0.05, 2);
    for (const auto &p : {PauliString(4, 0, 1), PauliString(4, 0b0011, 0b1100)}) {
        for (double tr : {0.0, 0.3, 0.9}) {
            auto v = variance_noisy_multishot(p, spec, noise, tr, 10, 4);
            EXPECT_GT(v.bound, variance_pauli_multishot(p, tr, 10, 4, spec.layout));
            EXPECT_GT(v.exact, variance_pauli_multishot(p, tr, 10, 4, spec.layout));
        }
    }
}

TEST(NoisyMultishotVariance, MatchesMonteCarlo) {
    const auto spec = clifford(4, 1);
    const NoiseModel noise{NoiseKind::model1, {PauliChannel::depolarizing(NoiseScope::per_qubit, 0.06, 1)}, "d"};
    std::mt19937_64 rng(41);
    const StateVector psi(4, oracle::random_state(4, rng));
    const PauliString p(4, 0b0011, 0b0110);
    const double tr = expectation(psi, p);
    const double alpha = m_eigenvalue(p, spec) / noisy_m(p, spec, noise);
    for (int ns : {1, 6}) {
        AcquireOptions ao;
        ao.seed = 50 + ns;
        ao.noise = &noise;
        auto ds = acquire(psi, spec, 60000, ns, ao);
        EstimatorOptions eo;
        eo.stderr_method = StderrMethod::analytic;
        auto est = estimate_pauli(ds, p, eo);
        for (auto &x : est.per_record) x *= alpha;
        auto vs = variance_with_se(est.per_record);
        auto v = variance_noisy_multishot(p, spec, noise, tr, 1, static_cast<std::size_t>(ns));
        EXPECT_NEAR(vs.var, v.exact, 3 * vs.se) << ns;
    }
}

TEST(NoisyCrmVariance, FloorAtNoNoiseAndEqualStates) {
    const auto spec = clifford(4, 2);
    const PauliString p(4, 0b0001, 0b0110);
    const double m = m_eigenvalue(p, spec);
    auto v = variance_noisy_crm(p, spec, NoiseModel::none(), 0.6, 0.6, 20, 5);
    EXPECT_NEAR(v.bound, 1.0 / (m * 5 * 20), 1e-12);
    EXPECT_NEAR(v.exact, (1.0 - 0.36) / (m * 5 * 20), 1e-12);
    // The exact sigma shortcut is the many-shot limit of a measured sigma.
    EXPECT_NEAR(variance_noisy_crm(p, spec, NoiseModel::none(), 0.6, 0.2, 20, 5).exact,
                variance_crm(m, 0.6, 0.2, 5, std::size_t{1} << 40, 20), 1e-9);
}

TEST(NoisyCrmVariance, ResidualUnderNoise) {
    const auto spec = clifford(4, 2);
    const auto noise = block_depolarizing(0.02, 2);
    const PauliString p(4, 0, 0b0011);
    for (std::size_t ns : {1u, 16u, 1024u}) {
        auto v = variance_noisy_crm(p, spec, noise, 0.8, 0.8, 1, ns);
        EXPECT_GT(v.exact, 0.0);
    }
    // With infinitely many shots the residual stays finite.
    const double mt = noisy_m(p, spec, noise), mt2 = noisy_moment(p, spec, noise, 2), m = m_eigenvalue(p, spec);
    const double limit = (mt2 / (mt * mt) - 1.0 / m) * 0.64;
    EXPECT_GT(limit, 0.0);
    EXPECT_NEAR(variance_noisy_crm(p, spec, noise, 0.8, 0.8, 1, 1u << 30).exact, limit, 1e-8);
}

TEST(NoisyCrmVariance, MatchesMonteCarlo) {
    const auto spec = clifford(4, 2);
    const auto noise = block_depolarizing(0.1, 2);
    const auto rep = exact_report(spec, noise);
    std::mt19937_64 rng(61);
    const StateVector rho = random_block_product(spec.layout, rng);
    const StateVector sigma = random_block_product(spec.layout, rng);
    const PauliString p(4, 0b0010, 0b0110);
    ObservableSum o(4);
    o.add(1.0, p);
    for (const StateVector *s : {&rho, &sigma}) {
        AcquireOptions ao;
        ao.seed = 70;
        ao.noise = &noise;
        auto ds = acquire(rho, spec, 60000, 4, ao);
        EstimatorOptions eo;
        eo.stderr_method = StderrMethod::analytic;
        auto est = mitigated_crm_estimate(ds, *s, o, rep, {}, eo);
        auto vs = variance_with_se(est.per_record);
        auto v = variance_noisy_crm(p, spec, noise, expectation(rho, p), expectation(*s, p), 1, 4);
        EXPECT_NEAR(vs.var, v.exact, 3 * vs.se);
        EXPECT_NEAR(est.mean, expectation(rho, p), 5 * est.stderr);
        if (s == &rho) EXPECT_GT(vs.var, 0.0);
    }
}
