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
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blockshadow/error.hpp"

namespace blockshadow {

inline constexpr int kMaxQubits = 64;

/// Mask with the low `n` bits set.
constexpr std::uint64_t low_mask(int n) {
    return n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
}

constexpr int popcount(std::uint64_t v) { return std::popcount(v); }

/// n-qubit Pauli operator i^phase * (tensor of sigma(x_q, z_q)).
///
/// Qubit q is bit q of both masks; sigma(1,0)=X, sigma(0,1)=Z, sigma(1,1)=Y.
/// In text form qubit 0 is the leftmost character.
class PauliString {
   public:
    PauliString() = default;
    PauliString(int n, std::uint64_t x, std::uint64_t z, int phase = 0)
        : n_(n), x_(x), z_(z), phase_(static_cast<std::uint8_t>(phase & 3)) {
        if (n < 0 || n > kMaxQubits) throw DimensionError("PauliString: qubit count out of range");
        if ((x | z) & ~low_mask(n)) throw DimensionError("PauliString: mask wider than n");
    }

    static PauliString identity(int n) { return PauliString(n, 0, 0); }

    /// Single-qubit factor `c` in {I,X,Y,Z} on qubit q.
    static PauliString single(int n, int q, char c) {
        PauliString p = identity(n);
        p.set(q, c);
        return p;
    }

    /// Parses "+XYZ", "-IZ", "iX", "-iY" or a bare "XYZ".
    static PauliString parse(std::string_view text) {
        int phase = 0;
        std::size_t pos = 0;
        if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
            if (text[pos] == '-') phase = 2;
            ++pos;
        }
        if (pos < text.size() && text[pos] == 'i') {
            phase += 1;
            ++pos;
        }
        std::string_view body = text.substr(pos);
        if (body.empty()) throw ValidationError("Pauli text has no qubits");
        PauliString p = identity(static_cast<int>(body.size()));
        for (std::size_t q = 0; q < body.size(); ++q) {
            char c = body[q];
            if (c == '_') c = 'I';
            if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z') {
                throw ValidationError("invalid Pauli character '" + std::string(1, body[q]) + "'");
            }
            p.set(static_cast<int>(q), c);
        }
        p.phase_ = static_cast<std::uint8_t>(phase & 3);
        return p;
    }

    int n() const { return n_; }
    std::uint64_t x() const { return x_; }
    std::uint64_t z() const { return z_; }
    int phase() const { return phase_; }
    std::uint64_t support() const { return x_ | z_; }

    bool is_identity_up_to_phase() const { return (x_ | z_) == 0; }
    bool is_hermitian() const { return (phase_ & 1) == 0; }
    /// +1 or -1 for Hermitian strings.
    int sign() const { return phase_ == 2 ? -1 : 1; }
    int weight() const { return popcount(x_ | z_); }

    char at(int q) const {
        bool xb = (x_ >> q) & 1U, zb = (z_ >> q) & 1U;
        return xb ? (zb ? 'Y' : 'X') : (zb ? 'Z' : 'I');
    }

    void set(int q, char c) {
        if (q < 0 || q >= n_) throw DimensionError("PauliString::set: qubit out of range");
        std::uint64_t bit = std::uint64_t{1} << q;
        x_ &= ~bit;
        z_ &= ~bit;
        if (c == 'X' || c == 'Y') x_ |= bit;
        if (c == 'Z' || c == 'Y') z_ |= bit;
    }

    PauliString with_phase(int phase) const { return PauliString(n_, x_, z_, phase); }
    PauliString unsigned_copy() const { return PauliString(n_, x_, z_, 0); }

    /// Restriction to qubits [first, first + count), phase dropped.
    PauliString slice(int first, int count) const {
        std::uint64_t m = low_mask(count);
        return PauliString(count, (x_ >> first) & m, (z_ >> first) & m, 0);
    }

    std::string str(bool with_sign = true) const {
        std::string out;
        if (with_sign) {
            static constexpr const char *kPrefix[4] = {"+", "+i", "-", "-i"};
            out = kPrefix[phase_];
        }
        for (int q = 0; q < n_; ++q) out.push_back(at(q));
        return out;
    }

    friend bool operator==(const PauliString &, const PauliString &) = default;

    /// Ordering used for canonical observable storage: (x, z).
    friend bool less_by_masks(const PauliString &a, const PauliString &b) {
        return a.x_ != b.x_ ? a.x_ < b.x_ : a.z_ < b.z_;
    }

   private:
    int n_ = 0;
    std::uint64_t x_ = 0;
    std::uint64_t z_ = 0;
    std::uint8_t phase_ = 0;
};

/// Exponent e such that sigma(a) sigma(b) = i^e sigma(a xor b), summed over qubits.
inline int product_phase(std::uint64_t x1, std::uint64_t z1, std::uint64_t x2, std::uint64_t z2) {
    std::uint64_t X1 = x1 & ~z1, Y1 = x1 & z1, Z1 = ~x1 & z1;
    std::uint64_t X2 = x2 & ~z2, Y2 = x2 & z2, Z2 = ~x2 & z2;
    std::uint64_t plus = (X1 & Y2) | (Y1 & Z2) | (Z1 & X2);
    std::uint64_t minus = (Y1 & X2) | (Z1 & Y2) | (X1 & Z2);
    return popcount(plus) - popcount(minus);
}

inline PauliString multiply(const PauliString &a, const PauliString &b) {
    require_dims(a.n() == b.n(), "multiply: qubit counts differ");
    int e = a.phase() + b.phase() + product_phase(a.x(), a.z(), b.x(), b.z());
    return PauliString(a.n(), a.x() ^ b.x(), a.z() ^ b.z(), ((e % 4) + 4) % 4);
}

inline PauliString operator*(const PauliString &a, const PauliString &b) { return multiply(a, b); }

inline bool commutes_masks(std::uint64_t x1, std::uint64_t z1, std::uint64_t x2, std::uint64_t z2) {
    return (popcount((x1 & z2) ^ (z1 & x2)) & 1) == 0;
}

inline bool commutes(const PauliString &a, const PauliString &b) {
    require_dims(a.n() == b.n(), "commutes: qubit counts differ");
    return commutes_masks(a.x(), a.z(), b.x(), b.z());
}

/// Partition of n qubits into n/k contiguous blocks of k qubits.
class BlockLayout {
   public:
    BlockLayout() = default;
    BlockLayout(int n, int k) : n_(n), k_(k) {
        if (n < 1 || n > kMaxQubits) throw ValidationError("BlockLayout: n out of range");
        if (k < 1 || n % k != 0) {
            throw ValidationError("BlockLayout: block size " + std::to_string(k) + " does not divide n=" +
                                  std::to_string(n));
        }
    }

    int n() const { return n_; }
    int k() const { return k_; }
    int num_blocks() const { return k_ == 0 ? 0 : n_ / k_; }
    int block_first(int r) const { return r * k_; }
    /// Local dimension 2^k.
    int block_dim() const { return 1 << k_; }
    std::uint64_t block_mask(int r) const { return low_mask(k_) << (r * k_); }
    /// Bits of block r moved to the low end.
    std::uint64_t extract(std::uint64_t bits, int r) const { return (bits >> (r * k_)) & low_mask(k_); }

    friend bool operator==(const BlockLayout &, const BlockLayout &) = default;

   private:
    int n_ = 0;
    int k_ = 0;
};

/// Number of blocks on which P acts non-trivially.
inline int block_weight(const PauliString &p, const BlockLayout &layout) {
    require_dims(p.n() == layout.n(), "block_weight: layout does not match Pauli");
    std::uint64_t s = p.support();
    int w = 0;
    for (int r = 0; r < layout.num_blocks(); ++r) w += layout.extract(s, r) != 0;
    return w;
}

/// Real linear combination of phase-free Pauli strings, kept canonical:
/// sorted by (x, z), merged, zero coefficients dropped.
class ObservableSum {
   public:
    struct Term {
        double coeff;
        PauliString pauli;
    };

    ObservableSum() = default;
    explicit ObservableSum(int n) : n_(n) {}

    ObservableSum(int n, const std::vector<Term> &terms) : n_(n) {
        for (const auto &t : terms) add(t.coeff, t.pauli);
        canonicalize();
    }

    /// Adds c * P; a Hermitian phase on P is folded into c.
    void add(double c, const PauliString &p) {
        require_dims(n_ == p.n(), "ObservableSum: qubit count mismatch");
        if (!p.is_hermitian()) throw ValidationError("ObservableSum: non-Hermitian term " + p.str());
        terms_.push_back({c * p.sign(), p.unsigned_copy()});
        canonical_ = false;
    }

    ObservableSum &canonicalize() {
        if (canonical_) return *this;
        std::sort(terms_.begin(), terms_.end(),
                  [](const Term &a, const Term &b) { return less_by_masks(a.pauli, b.pauli); });
        std::vector<Term> merged;
        for (const auto &t : terms_) {
            if (!merged.empty() && merged.back().pauli == t.pauli) {
                merged.back().coeff += t.coeff;
            } else {
                merged.push_back(t);
            }
        }
        std::erase_if(merged, [](const Term &t) { return t.coeff == 0.0; });
        terms_ = std::move(merged);
        canonical_ = true;
        return *this;
    }

    int n() const { return n_; }
    const std::vector<Term> &terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    double coefficient(const PauliString &p) const {
        for (const auto &t : terms_) {
            if (t.pauli.x() == p.x() && t.pauli.z() == p.z()) return t.coeff * p.sign();
        }
        return 0.0;
    }

    ObservableSum &operator+=(const ObservableSum &o) {
        require_dims(n_ == o.n_, "ObservableSum: qubit count mismatch");
        for (const auto &t : o.terms_) add(t.coeff, t.pauli);
        return canonicalize();
    }

    friend ObservableSum operator+(ObservableSum a, const ObservableSum &b) { return a += b; }

    ObservableSum scaled(double s) const {
        ObservableSum out(n_);
        for (const auto &t : terms_) out.add(s * t.coeff, t.pauli);
        return out.canonicalize();
    }

   private:
    int n_ = 0;
    std::vector<Term> terms_;
    bool canonical_ = true;
};

/// Product A*B of two Hermitian sums; must come out Hermitian (imaginary parts cancel).
/// Used for squares and anticommutator sums, where that holds by construction.
inline ObservableSum product_hermitian_part(const ObservableSum &a, const ObservableSum &b,
                                            bool symmetrize) {
    require_dims(a.n() == b.n(), "observable product: qubit count mismatch");
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::complex<double>> acc;
    double scale = 0.0;
    auto accumulate = [&](const ObservableSum &lhs, const ObservableSum &rhs) {
        for (const auto &s : lhs.terms()) {
            for (const auto &t : rhs.terms()) {
                PauliString prod = s.pauli * t.pauli;
                static const std::complex<double> kUnit[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
                double c = s.coeff * t.coeff;
                scale = std::max(scale, std::abs(c));
                acc[{prod.x(), prod.z()}] += c * kUnit[prod.phase()];
            }
        }
    };
    accumulate(a, b);
    if (symmetrize) accumulate(b, a);
    ObservableSum out(a.n());
    double tol = 1e-12 * std::max(1.0, scale);
    for (const auto &[key, c] : acc) {
        if (std::abs(c.imag()) > tol) {
            throw NumericalError("observable product has an anti-Hermitian residue");
        }
        if (std::abs(c.real()) > tol) out.add(c.real(), PauliString(a.n(), key.first, key.second));
    }
    return out.canonicalize();
}

inline ObservableSum square_observable(const ObservableSum &h) { return product_hermitian_part(h, h, false); }

/// Sum over a < b of (H_a H_b + H_b H_a).
inline ObservableSum cross_terms(const std::vector<ObservableSum> &parts) {
    if (parts.empty()) return ObservableSum();
    ObservableSum out(parts.front().n());
    for (std::size_t a = 0; a < parts.size(); ++a) {
        for (std::size_t b = a + 1; b < parts.size(); ++b) out += product_hermitian_part(parts[a], parts[b], true);
    }
    return out;
}

/// The four pieces ZXZ, XX, YY, ZZ of the open-chain cluster-Heisenberg model.
/// The two-site pieces carry the coupling `lambda`.
inline std::vector<ObservableSum> cluster_heisenberg_parts(int n, double lambda = 1.0) {
    if (n < 2) throw ValidationError("cluster-Heisenberg model needs n >= 2");
    std::vector<ObservableSum> parts(4, ObservableSum(n));
    for (int i = 0; i + 2 < n; ++i) {
        PauliString p = PauliString::identity(n);
        p.set(i, 'Z');
        p.set(i + 1, 'X');
        p.set(i + 2, 'Z');
        parts[0].add(1.0, p);
    }
    const char kBond[3] = {'X', 'Y', 'Z'};
    for (int a = 0; a < 3; ++a) {
        for (int i = 0; i + 1 < n; ++i) {
            PauliString p = PauliString::identity(n);
            p.set(i, kBond[a]);
            p.set(i + 1, kBond[a]);
            parts[a + 1].add(lambda, p);
        }
    }
    for (auto &p : parts) p.canonicalize();
    return parts;
}

inline ObservableSum build_cluster_heisenberg(int n, double lambda = 1.0) {
    ObservableSum h(n);
    for (const auto &p : cluster_heisenberg_parts(n, lambda)) h += p;
    return h;
}

}  // namespace blockshadow
