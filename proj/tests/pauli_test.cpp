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

#include "blockshadow/pauli.hpp"

#include <gtest/gtest.h>

#include <random>

#include "blockshadow/dense.hpp"
#include "oracles.hpp"

using namespace blockshadow;

namespace {

PauliString P(const char *s) { return PauliString::parse(s); }

PauliString random_pauli(int n, std::mt19937_64 &rng) {
    std::uniform_int_distribution<std::uint64_t> bits(0, low_mask(n));
    return PauliString(n, bits(rng), bits(rng), static_cast<int>(rng() % 4));
}

ObservableSum from_dense(const oracle::Mat &m, int n) {
    ObservableSum out(n);
    for (const auto &w : oracle::all_words(n)) {
        oracle::cplx c = (oracle::pauli(w) * m).trace() / double(1 << n);
        if (std::abs(c) > 1e-12) out.add(c.real(), PauliString::parse(w));
    }
    return out.canonicalize();
}

}  // namespace

TEST(PauliString, ParseAndPrintRoundTrip) {
    EXPECT_EQ(P("-XYZI").str(), "-XYZI");
    EXPECT_EQ(P("IZ").str(false), "IZ");
    EXPECT_EQ(P("XZ").at(0), 'X');
    EXPECT_EQ(P("XZ").x(), 1u);
    EXPECT_EQ(P("XZ").z(), 2u);
    EXPECT_THROW(P("XQ"), ValidationError);
    EXPECT_THROW(P("-"), ValidationError);
}

TEST(PauliString, SingleQubitProducts) {
    EXPECT_EQ(P("X") * P("Z"), P("-iY"));
    EXPECT_EQ(P("Z") * P("X"), P("iY"));
    EXPECT_EQ(P("II") * P("XY"), P("XY"));
    EXPECT_EQ(P("XX") * P("ZZ"), P("-YY"));
    EXPECT_EQ(P("-XYZ") * P("-XYZ"), P("III"));
}

TEST(PauliString, MismatchedSizesAreRejected) {
    EXPECT_THROW(multiply(P("X"), P("XX")), DimensionError);
    EXPECT_THROW(commutes(P("X"), P("XX")), DimensionError);
}

TEST(PauliString, ProductMatchesDenseAlgebra) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 1 + static_cast<int>(rng() % 4);
        PauliString a = random_pauli(n, rng), b = random_pauli(n, rng);
        oracle::Mat expect = oracle::pauli(a.str(false)) * oracle::pauli(b.str(false)) * i_pow(a.phase() + b.phase());
        EXPECT_LT(max_abs(pauli_matrix(a * b) - expect), 1e-12) << a.str() << " * " << b.str();
        EXPECT_LT(max_abs(pauli_matrix(a) - oracle::pauli(a.str(false)) * i_pow(a.phase())), 1e-12);
    }
}

TEST(PauliString, CommutationMatchesDenseCommutator) {
    EXPECT_FALSE(commutes(P("X"), P("Z")));
    EXPECT_TRUE(commutes(P("XX"), P("ZZ")));
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng() % 4);
        PauliString a = random_pauli(n, rng), b = random_pauli(n, rng);
        EXPECT_TRUE(commutes(a, a));
        oracle::Mat ma = oracle::pauli(a.str(false)), mb = oracle::pauli(b.str(false));
        bool dense_commute = (ma * mb - mb * ma).cwiseAbs().maxCoeff() < 1e-12;
        EXPECT_EQ(commutes(a, b), dense_commute);
        // AB and BA differ exactly by the commutation sign.
        PauliString ab = a * b, ba = b * a;
        EXPECT_EQ(ab.x(), ba.x());
        EXPECT_EQ(ab.z(), ba.z());
        EXPECT_EQ((ab.phase() - ba.phase() + 4) % 4, commutes(a, b) ? 0 : 2);
    }
}

TEST(PauliString, ProductIsAssociative) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        PauliString a = random_pauli(5, rng), b = random_pauli(5, rng), c = random_pauli(5, rng);
        EXPECT_EQ((a * b) * c, a * (b * c));
    }
}

TEST(BlockLayout, RejectsRaggedBlocks) {
    EXPECT_THROW(BlockLayout(4, 3), ValidationError);
    EXPECT_NO_THROW(BlockLayout(6, 3));
    BlockLayout lay(6, 2);
    EXPECT_EQ(lay.num_blocks(), 3);
    EXPECT_EQ(lay.extract(0b110100, 2), 0b11u);
}

TEST(BlockWeight, CountsNonTrivialBlocks) {
    BlockLayout lay(4, 2);
    EXPECT_EQ(block_weight(P("IIII"), lay), 0);
    EXPECT_EQ(block_weight(P("XIII"), lay), 1);
    EXPECT_EQ(block_weight(P("XIZI"), lay), 2);
    EXPECT_EQ(block_weight(P("XIZI"), BlockLayout(4, 4)), 1);
}

TEST(BlockWeight, MonotoneUnderRefinement) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        PauliString p = random_pauli(6, rng);
        for (int k : {2, 3, 6}) {
            int wk = block_weight(p, BlockLayout(6, k));
            int w1 = block_weight(p, BlockLayout(6, 1));
            EXPECT_LE(wk, w1);
            EXPECT_LE(w1, k * wk);
        }
        EXPECT_EQ(block_weight(p, BlockLayout(6, 6)), p.is_identity_up_to_phase() ? 0 : 1);
    }
}

TEST(ObservableSum, CanonicalFormMergesAndDropsZeros) {
    ObservableSum o(2, {{1.0, P("ZZ")}, {0.5, P("XI")}, {-1.0, P("ZZ")}, {2.0, P("-XI")}});
    ASSERT_EQ(o.size(), 1u);
    EXPECT_EQ(o.terms()[0].pauli, P("XI"));
    EXPECT_DOUBLE_EQ(o.terms()[0].coeff, -1.5);
    EXPECT_THROW(ObservableSum(1, {{1.0, P("iX")}}), ValidationError);
}

TEST(ClusterHeisenberg, TermCounts) {
    ObservableSum h3 = build_cluster_heisenberg(3);
    EXPECT_EQ(h3.size(), 7u);
    for (const char *w : {"ZXZ", "XXI", "IXX", "YYI", "IYY", "ZZI", "IZZ"}) EXPECT_DOUBLE_EQ(h3.coefficient(P(w)), 1.0);
    EXPECT_EQ(build_cluster_heisenberg(2).size(), 3u);
    EXPECT_EQ(build_cluster_heisenberg(4).size(), 11u);
    EXPECT_THROW(build_cluster_heisenberg(1), ValidationError);
    EXPECT_DOUBLE_EQ(build_cluster_heisenberg(3, 0.5).coefficient(P("XXI")), 0.5);
    EXPECT_DOUBLE_EQ(build_cluster_heisenberg(3, 0.5).coefficient(P("ZXZ")), 1.0);
}

TEST(SquareObservable, SmallExamples) {
    ObservableSum z(1, {{1.0, P("Z")}});
    ObservableSum z2 = square_observable(z);
    ASSERT_EQ(z2.size(), 1u);
    EXPECT_DOUBLE_EQ(z2.coefficient(P("I")), 1.0);

    ObservableSum h(2, {{1.0, P("XX")}, {1.0, P("ZZ")}});
    ObservableSum h2 = square_observable(h);
    EXPECT_EQ(h2.size(), 2u);
    EXPECT_DOUBLE_EQ(h2.coefficient(P("II")), 2.0);
    EXPECT_DOUBLE_EQ(h2.coefficient(P("YY")), -2.0);
}

TEST(SquareObservable, MatchesDenseSquare) {
    std::mt19937_64 rng(21);
    for (int n = 1; n <= 6; ++n) {
        ObservableSum h = n >= 2 ? build_cluster_heisenberg(n) : ObservableSum(1, {{0.3, P("X")}, {-1.2, P("Z")}});
        if (n >= 3) h.add(0.7, random_pauli(n, rng).with_phase(0));
        h.canonicalize();
        oracle::Mat m = observable_matrix(h);
        ObservableSum expect = from_dense(m * m, n);
        ObservableSum got = square_observable(h);
        ASSERT_EQ(got.size(), expect.size()) << "n=" << n;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got.terms()[i].pauli, expect.terms()[i].pauli);
            EXPECT_NEAR(got.terms()[i].coeff, expect.terms()[i].coeff, 1e-12);
        }
    }
}

TEST(SquareObservable, TraceNormIdentity) {
    ObservableSum h = build_cluster_heisenberg(3);
    ObservableSum h2 = square_observable(h);
    oracle::Mat m = observable_matrix(h);
    oracle::Mat m2 = m * m;
    double lhs = 0.0;
    for (const auto &t : h2.terms()) lhs += t.coeff * t.coeff;
    double rhs = (m2 * m2).trace().real() / 8.0;
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(CrossTerms, SmallExamples) {
    EXPECT_TRUE(cross_terms({ObservableSum(1, {{1.0, P("Z")}}), ObservableSum(1, {{1.0, P("X")}})}).empty());
    ObservableSum c = cross_terms({ObservableSum(2, {{1.0, P("XX")}}), ObservableSum(2, {{1.0, P("ZZ")}})});
    ASSERT_EQ(c.size(), 1u);
    EXPECT_DOUBLE_EQ(c.coefficient(P("YY")), -2.0);
}

TEST(CrossTerms, UnionWithDiagonalSquaresIsTheSquare) {
    for (int n : {4, 5}) {
        auto parts = cluster_heisenberg_parts(n);
        ObservableSum total = cross_terms(parts);
        ObservableSum h(n);
        for (const auto &p : parts) {
            total += square_observable(p);
            h += p;
        }
        ObservableSum expect = square_observable(h);
        ASSERT_EQ(total.size(), expect.size());
        for (std::size_t i = 0; i < total.size(); ++i) {
            EXPECT_EQ(total.terms()[i].pauli, expect.terms()[i].pauli);
            EXPECT_NEAR(total.terms()[i].coeff, expect.terms()[i].coeff, 1e-12);
        }
    }
}
