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

// Enumeration self-checks: channel eigenvalues and f tables over the full
// block Clifford group, and the structure of the MUB and stabilizer-basis
// ensembles. Integer arithmetic throughout, so the comparisons are exact.

#pragma once

#include <string>
#include <vector>

#include "blockshadow/analytics.hpp"

namespace blockshadow::verify {

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Every local Pauli P != I is mapped to a Z-string by exactly |Cl|/(D+1) members.
inline Check channel_eigenvalues(int k) {
    const auto group = enumerate_clifford(k);
    const auto c = joint_z_counts(group, k);
    const int dim2 = 1 << (2 * k);
    const std::uint64_t d1 = (std::uint64_t{1} << k) + 1;
    int bad = 0;
    for (int p = 0; p < dim2; ++p) {
        const std::uint64_t hits = c.counts[static_cast<std::size_t>(p) * dim2 + p];
        const bool ok = p == 0 ? hits == c.members : hits * d1 == c.members;
        bad += !ok;
    }
    return {"channel eigenvalue (2^k+1)^-w, k=" + std::to_string(k), bad == 0,
            std::to_string(dim2) + " Paulis over " + std::to_string(c.members) + " Cliffords, " + std::to_string(bad) +
                " mismatches"};
}

namespace detail {

/// Counts whose normalized joint Z-type rate differs from the closed-form f table.
inline int f_table_mismatches(const JointZCounts &c, int k) {
    const int dim2 = 1 << (2 * k);
    const std::uint64_t d = std::uint64_t{1} << k, total = c.members;
    int bad = 0;
    for (int p = 0; p < dim2; ++p) {
        for (int q = 0; q < dim2; ++q) {
            const std::uint64_t n = c.counts[static_cast<std::size_t>(p) * dim2 + q];
            bool ok;
            if (p == 0 && q == 0) {
                ok = n == total;
            } else if (p == 0 || q == 0) {
                ok = n * (d + 1) == total;
            } else {
                // f = n (D+1)^2 / total; closed form times (D+2) is an integer.
                const auto lo = low_mask(k);
                const bool comm = commutes_masks(p & lo, static_cast<std::uint64_t>(p) >> k, q & lo,
                                                 static_cast<std::uint64_t>(q) >> k);
                const std::uint64_t num = !comm ? 0 : (p == q ? (d + 1) * (d + 2) : 2 * (d + 1));
                ok = n * (d + 1) * (d + 1) * (d + 2) == num * total;
            }
            bad += !ok;
        }
    }
    return bad;
}

}  // namespace detail

inline Check clifford_f_table(int k) {
    const auto group = enumerate_clifford(k);
    const int bad = detail::f_table_mismatches(joint_z_counts(group, k), k);
    const int dim2 = 1 << (2 * k);
    return {"f table over Cl(" + std::to_string(k) + ")", bad == 0,
            std::to_string(dim2 * dim2) + " pairs, " + std::to_string(bad) + " mismatches"};
}

/// MUB: 2^k + 1 members, each non-identity Pauli Z-type under exactly one.
inline Check mub_structure(int k) {
    const auto members = ensemble_members(EnsembleKind::mub, k);
    const auto c = joint_z_counts(members, k);
    const int dim2 = 1 << (2 * k);
    int bad = 0;
    for (int p = 1; p < dim2; ++p) bad += c.counts[static_cast<std::size_t>(p) * dim2 + p] != 1;
    const bool size_ok = members.size() == (std::size_t{1} << k) + 1;
    return {"MUB ensemble k=" + std::to_string(k), size_ok && bad == 0,
            std::to_string(members.size()) + " members, " + std::to_string(bad) + " Paulis not covered exactly once"};
}

/// Stabilizer-basis ensemble: prod_j (2^j + 1) members with the Clifford f table.
inline Check stabilizer_basis_structure(int k) {
    const auto members = ensemble_members(EnsembleKind::stabilizer_basis, k);
    std::size_t expect = 1;
    for (int j = 1; j <= k; ++j) expect *= (std::size_t{1} << j) + 1;
    const int bad = detail::f_table_mismatches(joint_z_counts(members, k), k);
    return {"stabilizer-basis ensemble k=" + std::to_string(k), members.size() == expect && bad == 0,
            std::to_string(members.size()) + " members (expected " + std::to_string(expect) + "), " +
                std::to_string(bad) + " f-table mismatches"};
}

inline std::vector<Check> run_all() {
    std::vector<Check> out;
    for (int k : {1, 2}) out.push_back(channel_eigenvalues(k));
    for (int k : {1, 2}) out.push_back(clifford_f_table(k));
    for (int k : {1, 2}) out.push_back(mub_structure(k));
    for (int k : {1, 2}) out.push_back(stabilizer_basis_structure(k));
    return out;
}

}  // namespace blockshadow::verify
