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

#include <Eigen/Dense>
#include <complex>
#include <cstdint>

#include "blockshadow/pauli.hpp"

namespace blockshadow {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline cplx i_pow(int e) {
    static const cplx kUnit[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return kUnit[((e % 4) + 4) % 4];
}

/// Dense 2^n x 2^n matrix of P; basis index bit q is qubit q.
inline CMatrix pauli_matrix(const PauliString &p) {
    const std::size_t dim = std::size_t{1} << p.n();
    CMatrix m = CMatrix::Zero(dim, dim);
    const int y_count = popcount(p.x() & p.z());
    for (std::uint64_t b = 0; b < dim; ++b) {
        int e = p.phase() + y_count + 2 * (popcount(p.z() & b) & 1);
        m(static_cast<Eigen::Index>(b ^ p.x()), static_cast<Eigen::Index>(b)) = i_pow(e);
    }
    return m;
}

inline CMatrix observable_matrix(const ObservableSum &o) {
    const std::size_t dim = std::size_t{1} << o.n();
    CMatrix m = CMatrix::Zero(dim, dim);
    for (const auto &t : o.terms()) m += t.coeff * pauli_matrix(t.pauli);
    return m;
}

/// y = P x without forming P.
inline CVector apply_pauli(const PauliString &p, const CVector &v) {
    CVector out(v.size());
    const int y_count = popcount(p.x() & p.z());
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(v.size()); ++b) {
        int e = p.phase() + y_count + 2 * (popcount(p.z() & b) & 1);
        out(static_cast<Eigen::Index>(b ^ p.x())) = i_pow(e) * v(static_cast<Eigen::Index>(b));
    }
    return out;
}

/// <v| P |v> (complex in general).
inline cplx pauli_sandwich(const PauliString &p, const CVector &v) {
    const int y_count = popcount(p.x() & p.z());
    cplx acc = 0.0;
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(v.size()); ++b) {
        double s = (popcount(p.z() & b) & 1) ? -1.0 : 1.0;
        acc += std::conj(v(static_cast<Eigen::Index>(b ^ p.x()))) * s * v(static_cast<Eigen::Index>(b));
    }
    return acc * i_pow(p.phase() + y_count);
}

inline double max_abs(const CMatrix &m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace blockshadow
