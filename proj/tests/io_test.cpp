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

#include "blockshadow/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "blockshadow/mitigation.hpp"
#include "blockshadow/verify.hpp"

namespace blockshadow {
namespace {

TEST(FormatDouble, RoundTripsAndSpellsNonFinite) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
        EXPECT_EQ(std::stod(io::format_double(v)), v);
    }
    EXPECT_EQ(io::format_double(std::nan("")), "nan");
    EXPECT_EQ(io::format_double(INFINITY), "inf");
}

TEST(CsvWriter, RejectsRaggedRows) {
    io::CsvWriter w({"a", "b"});
    w.row() << 1 << 2.5;
    EXPECT_EQ(w.str(), "a,b\n1,2.5\n");
    w.row() << 1 << 2 << 3;
    EXPECT_THROW(w.str(), DimensionError);
}

TEST(PauliTerms, ParsesCoefficientsAndComments) {
    std::istringstream in("# header\n0.5 XXII\nZZII\n\n-1e-2 IIYY  # trailing\n");
    auto terms = io::parse_pauli_terms(in);
    ASSERT_EQ(terms.size(), 3u);
    EXPECT_DOUBLE_EQ(terms[0].coeff, 0.5);
    EXPECT_EQ(terms[1].pauli.str(false), "ZZII");
    EXPECT_DOUBLE_EQ(terms[2].coeff, -0.01);
}

TEST(PauliTerms, RejectsMixedSizesAndGarbage) {
    std::istringstream mixed("XX\nZZZ\n");
    EXPECT_THROW(io::parse_pauli_terms(mixed), DimensionError);
    std::istringstream garbage("0.5 XQ\n");
    EXPECT_THROW(io::parse_pauli_terms(garbage), ValidationError);
}

class DatasetRoundTrip : public ::testing::TestWithParam<EnsembleKind> {};

TEST_P(DatasetRoundTrip, Identity) {
    const BlockLayout lay(4, 2);
    Rng rng(3);
    const StateVector psi = random_circuit_state(4, 3, rng);
    const auto ds = acquire(psi, EnsembleSpec{GetParam(), lay}, 6, 3, AcquireOptions{.seed = 11});
    const auto back = io::dataset_from_json(nlohmann::json::parse(io::dataset_to_json(ds).dump()));
    EXPECT_EQ(back, ds);
}

INSTANTIATE_TEST_SUITE_P(Ensembles, DatasetRoundTrip,
                         ::testing::Values(EnsembleKind::clifford_full, EnsembleKind::mub,
                                           EnsembleKind::stabilizer_basis, EnsembleKind::haar_dense));

TEST(DatasetJson, RejectsWrongFormat) {
    EXPECT_THROW(io::dataset_from_json(nlohmann::json{{"format", "other"}}), DataError);
    EXPECT_THROW(io::dataset_from_json(nlohmann::json::parse("[1,2]")), DataError);
}

TEST(NoiseJson, DepolarizingMatchesFactoryAndRoundTrips) {
    const BlockLayout lay(4, 2);
    const auto j = nlohmann::json::parse(R"({"kind":"model1","layers":[{"scope":"per_block","depolarizing":0.06}]})");
    const NoiseModel nm = io::noise_from_json(j, lay);
    ASSERT_EQ(nm.layers.size(), 1u);
    EXPECT_NEAR(nm.layers[0].total(), 0.06, 1e-15);
    const NoiseModel back = io::noise_from_json(io::noise_to_json(nm), lay);
    auto as_map = [](const PauliChannel &c) {
        std::map<std::string, double> m;
        for (const auto &[p, w] : c.probs) m[p.str(false)] = w;
        return m;
    };
    EXPECT_EQ(back.layers[0].scope, NoiseScope::per_block);
    EXPECT_EQ(as_map(back.layers[0]), as_map(nm.layers[0]));
}

TEST(NoiseJson, RejectsInvalidModels) {
    const BlockLayout lay(4, 2);
    EXPECT_THROW(io::noise_from_json(nlohmann::json::parse(R"({"kind":"model3","layers":[]})"), lay), ValidationError);
    EXPECT_THROW(io::noise_from_json(
                     nlohmann::json::parse(R"({"layers":[{"scope":"per_qubit","errors":{"XX":0.1}}]})"), lay),
                 DimensionError);
    EXPECT_THROW(io::noise_from_json(
                     nlohmann::json::parse(R"({"layers":[{"scope":"per_qubit","errors":{"X":0.7,"Z":0.6}}]})"), lay),
                 ValidationError);
}

TEST(CalibrationJson, RoundTripKeepsNonFiniteAsInfinity) {
    CalibrationReport r{BlockLayout(4, 2), CalibrationMode::factorized, {}};
    r.labels[1] = LabelAlpha{1.25, 0.01, 1.2, 1.3, false};
    r.labels[2] = LabelAlpha{40.0, INFINITY, 3.0, INFINITY, true};
    const auto back = io::calibration_from_json(nlohmann::json::parse(io::calibration_to_json(r).dump()));
    EXPECT_EQ(back.layout.n(), 4);
    EXPECT_EQ(back.labels.at(1).alpha, 1.25);
    EXPECT_EQ(back.labels.at(1).ci_high, 1.3);
    EXPECT_TRUE(std::isinf(back.labels.at(2).stderr));
    EXPECT_TRUE(back.labels.at(2).ill_conditioned);
    EXPECT_DOUBLE_EQ(back.alpha(3), 50.0);
}

TEST(Verify, AllEnumerationChecksPass) {
    for (const auto &c : verify::run_all()) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

}  // namespace
}  // namespace blockshadow
