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

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blockshadow/ensemble.hpp"
#include "blockshadow/statevector.hpp"

namespace blockshadow {

/// Width of the independent units a Pauli channel acts on.
enum class NoiseScope { per_qubit, per_block, global };

inline std::string to_string(NoiseScope s) {
    switch (s) {
        case NoiseScope::per_qubit: return "per_qubit";
        case NoiseScope::per_block: return "per_block";
        case NoiseScope::global: return "global";
    }
    return "unknown";
}

inline NoiseScope parse_noise_scope(const std::string &s) {
    if (s == "per_qubit" || s == "per-qubit") return NoiseScope::per_qubit;
    if (s == "per_block" || s == "per-block") return NoiseScope::per_block;
    if (s == "global") return NoiseScope::global;
    throw ValidationError("unknown noise scope '" + s + "'");
}

/// Pauli channel applied independently to every unit of its scope. Each entry
/// is an error Pauli on one unit with its probability; the remaining mass is
/// the identity.
struct PauliChannel {
    NoiseScope scope = NoiseScope::per_qubit;
    std::vector<std::pair<PauliString, double>> probs;

    int unit_width(const BlockLayout &layout) const {
        switch (scope) {
            case NoiseScope::per_qubit: return 1;
            case NoiseScope::per_block: return layout.k();
            case NoiseScope::global: return layout.n();
        }
        return 0;
    }
    int unit_count(const BlockLayout &layout) const { return layout.n() / unit_width(layout); }

    double total() const {
        double s = 0.0;
        for (const auto &[p, w] : probs) s += w;
        return s;
    }

    void validate(const BlockLayout &layout) const {
        const int width = unit_width(layout);
        for (const auto &[p, w] : probs) {
            if (p.n() != width) {
                throw DimensionError("noise channel: error " + p.str(false) + " does not fit a unit of " +
                                     std::to_string(width) + " qubits");
            }
            if (!(w >= 0.0)) throw ValidationError("noise channel: negative probability");
        }
        if (total() > 1.0 + 1e-12) throw ValidationError("noise channel: probabilities sum above 1");
    }

    /// Uniform depolarizing channel of total error rate p on units of `width` qubits.
    static PauliChannel depolarizing(NoiseScope scope, double p, int width) {
        PauliChannel c{scope, {}};
        const std::uint64_t count = std::uint64_t{1} << (2 * width);
        for (std::uint64_t v = 1; v < count; ++v) {
            c.probs.emplace_back(PauliString(width, v & low_mask(width), v >> width), p / static_cast<double>(count - 1));
        }
        return c;
    }
};

/// Eigenvalue of the channel on a single-unit Pauli: 1 - 2 * (mass of anticommuting errors).
inline double unit_lambda(const PauliChannel &c, std::uint64_t x, std::uint64_t z) {
    double anti = 0.0;
    for (const auto &[e, w] : c.probs) {
        if (!commutes_masks(e.x(), e.z(), x, z)) anti += w;
    }
    return 1.0 - 2.0 * anti;
}

/// lambda_P for an n-qubit Pauli: product of unit eigenvalues.
inline double lambda_coeff(const PauliChannel &c, const PauliString &p, const BlockLayout &layout) {
    require_dims(p.n() == layout.n(), "lambda_coeff: Pauli size does not match layout");
    const int width = c.unit_width(layout);
    double out = 1.0;
    for (int u = 0; u < c.unit_count(layout); ++u) {
        std::uint64_t x = (p.x() >> (u * width)) & low_mask(width), z = (p.z() >> (u * width)) & low_mask(width);
        if ((x | z) != 0) out *= unit_lambda(c, x, z);
    }
    return out;
}

/// Draws one error Pauli (phase dropped) from the channel.
inline PauliString sample_error(const PauliChannel &c, const BlockLayout &layout, Rng &rng) {
    const int width = c.unit_width(layout);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uint64_t x = 0, z = 0;
    for (int u = 0; u < c.unit_count(layout); ++u) {
        double r = unif(rng), acc = 0.0;
        for (const auto &[e, w] : c.probs) {
            acc += w;
            if (r < acc) {
                x |= e.x() << (u * width);
                z |= e.z() << (u * width);
                break;
            }
        }
    }
    return PauliString(layout.n(), x, z);
}

/// model1: one channel after the whole measurement unitary.
/// model2: the unitary is a product of layers with a channel after each.
enum class NoiseKind { model1, model2 };

struct NoiseModel {
    NoiseKind kind = NoiseKind::model1;
    std::vector<PauliChannel> layers;
    std::string tag;

    int layer_count() const { return static_cast<int>(layers.size()); }

    void validate(const BlockLayout &layout) const {
        if (layers.empty()) throw ValidationError("noise model has no channels");
        if (kind == NoiseKind::model1 && layers.size() != 1) {
            throw ValidationError("model1 noise takes exactly one channel");
        }
        for (const auto &c : layers) c.validate(layout);
    }

    static NoiseModel none() { return NoiseModel{NoiseKind::model1, {PauliChannel{}}, "noiseless"}; }
};

/// Bit-flip mask of the accumulated error for one shot. `layers` are the
/// unitary factors in application order (model2) or the single unitary (model1).
inline std::uint64_t sample_flip_mask(const NoiseModel &noise, std::span<const LayeredBlockUnitary> layers,
                                      const BlockLayout &layout, Rng &rng) {
    if (noise.kind == NoiseKind::model1) return sample_error(noise.layers.front(), layout, rng).x();
    require_dims(layers.size() == noise.layers.size(), "model2 noise: layer count does not match the unitary");
    PauliString e = PauliString::identity(layout.n());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        e = conjugate(layers[l], e).unsigned_copy();
        e = (sample_error(noise.layers[l], layout, rng) * e).unsigned_copy();
    }
    return e.x();
}

/// Product of layers applied first-to-last.
inline LayeredBlockUnitary compose_layers(std::span<const LayeredBlockUnitary> layers) {
    require_dims(!layers.empty(), "compose_layers: no layers");
    LayeredBlockUnitary u = layers.front();
    for (std::size_t l = 1; l < layers.size(); ++l) u = compose(layers[l], u);
    return u;
}

/// One noisy measurement of psi under the given unitary layers.
inline std::uint64_t simulate_noisy_trajectory(const StateVector &psi, std::span<const LayeredBlockUnitary> layers,
                                               const NoiseModel &noise, Rng &rng) {
    const BlockLayout &layout = layers.front().layout();
    StateVector out = apply_block_unitary(psi, compose_layers(layers));
    std::uint64_t b = sample_from_cdf(born_cdf(out.amplitudes()), rng);
    return b ^ sample_flip_mask(noise, layers, layout, rng);
}

namespace detail {

struct WeightedImage {
    std::uint64_t x, z;
    double weight;
};

/// Distribution of the unsigned image u Q u^dagger of a non-identity block Pauli Q.
inline std::vector<WeightedImage> block_images(const EnsembleSpec &spec, std::uint64_t qx, std::uint64_t qz) {
    const int k = spec.k();
    std::vector<WeightedImage> out;
    if (spec.kind == EnsembleKind::clifford_full) {
        const std::uint64_t count = std::uint64_t{1} << (2 * k);
        for (std::uint64_t v = 1; v < count; ++v) out.push_back({v & low_mask(k), v >> k, 1.0 / double(count - 1)});
        return out;
    }
    if (!spec.is_clifford()) throw UnsupportedError("noisy eigenvalues need a Clifford ensemble");
    auto members = ensemble_members(spec.kind, k);
    for (const auto &u : members) {
        std::uint64_t x, z;
        int s;
        u.conjugate_masks(qx, qz, x, z, s);
        out.push_back({x, z, 1.0 / double(members.size())});
    }
    return out;
}

/// Sum over products of per-block image lists of prod(weights) * f(image).
template <class Fn>
double enumerate_images(const std::vector<std::vector<WeightedImage>> &lists, const std::vector<int> &blocks,
                        const BlockLayout &layout, Fn &&f) {
    double total = 1.0;
    for (const auto &l : lists) total *= static_cast<double>(l.size());
    if (total > 4e6) throw UnsupportedError("noisy eigenvalue enumeration too large for a global channel");
    double sum = 0.0;
    auto rec = [&](auto &&self, std::size_t i, std::uint64_t x, std::uint64_t z, double w) -> void {
        if (i == lists.size()) {
            sum += w * f(PauliString(layout.n(), x, z));
            return;
        }
        const int shift = layout.block_first(blocks[i]);
        for (const auto &img : lists[i]) self(self, i + 1, x | (img.x << shift), z | (img.z << shift), w * img.weight);
    };
    rec(rec, 0, 0, 0, 1.0);
    return sum;
}

/// E over the image distribution of lambda(Q)^power, optionally restricted to Z-type Q.
inline double image_moment(const PauliChannel &c, const std::vector<std::vector<WeightedImage>> &lists,
                           const std::vector<int> &blocks, const BlockLayout &layout, int power, bool z_only) {
    auto filtered = lists;
    if (z_only) {
        for (auto &l : filtered) std::erase_if(l, [](const WeightedImage &w) { return w.x != 0; });
    }
    if (c.scope != NoiseScope::global) {
        // Units never straddle blocks, so the moment factorizes over blocks.
        double out = 1.0;
        for (std::size_t i = 0; i < filtered.size(); ++i) {
            double s = 0.0;
            for (const auto &img : filtered[i]) {
                PauliString q(layout.n(), img.x << layout.block_first(blocks[i]), img.z << layout.block_first(blocks[i]));
                s += img.weight * std::pow(lambda_coeff(c, q, layout), power);
            }
            out *= s;
        }
        return out;
    }
    return enumerate_images(filtered, blocks, layout,
                            [&](const PauliString &q) { return std::pow(lambda_coeff(c, q, layout), power); });
}

}  // namespace detail

/// E_U[lambda_{U,P}^power * 1{U P U^dagger in +-Z}]. power 1 gives the noisy
/// channel eigenvalue, power 2 the second-moment eigenvalue.
inline double noisy_moment(const PauliString &p, const EnsembleSpec &spec, const NoiseModel &noise, int power) {
    const BlockLayout &layout = spec.layout;
    require_dims(p.n() == layout.n(), "noisy_moment: Pauli size does not match layout");
    noise.validate(layout);
    std::vector<int> blocks;
    std::vector<std::vector<detail::WeightedImage>> lists;
    for (int r = 0; r < layout.num_blocks(); ++r) {
        std::uint64_t qx = layout.extract(p.x(), r), qz = layout.extract(p.z(), r);
        if ((qx | qz) == 0) continue;
        blocks.push_back(r);
        lists.push_back(detail::block_images(spec, qx, qz));
    }
    if (blocks.empty()) return 1.0;
    if (noise.kind == NoiseKind::model2 && spec.kind != EnsembleKind::clifford_full) {
        throw UnsupportedError("model2 noise is defined for the full Clifford ensemble");
    }
    double out = 1.0;
    // Under model2 each intermediate image is uniform and independent of the final one.
    for (int l = 0; l + 1 < noise.layer_count(); ++l) {
        out *= detail::image_moment(noise.layers[l], lists, blocks, layout, power, false);
    }
    return out * detail::image_moment(noise.layers.back(), lists, blocks, layout, power, true);
}

inline double noisy_m(const PauliString &p, const EnsembleSpec &spec, const NoiseModel &noise) {
    return noisy_moment(p, spec, noise, 1);
}

struct Channel2Report {
    double m1 = 0.0;          ///< noisy eigenvalue of the standard channel
    double m2 = 0.0;          ///< E[lambda^2 1{...}]
    double norm_channel1 = 0.0;  ///< m_P / m1^2
    double norm_channel2 = 0.0;  ///< 1 / m2
    bool channel2_not_worse = false;
};

/// Compares the squared shadow norms of a Pauli under the two noisy channels.
inline Channel2Report channel2_eigenvalue(const PauliString &p, const EnsembleSpec &spec, const NoiseModel &noise) {
    Channel2Report r;
    r.m1 = noisy_moment(p, spec, noise, 1);
    r.m2 = noisy_moment(p, spec, noise, 2);
    const double m = m_eigenvalue(p, spec);
    r.norm_channel1 = m / (r.m1 * r.m1);
    r.norm_channel2 = 1.0 / r.m2;
    r.channel2_not_worse = r.norm_channel2 <= r.norm_channel1 * (1.0 + 1e-12);
    return r;
}

}  // namespace blockshadow
