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
#include <span>
#include <utility>
#include <vector>

#include "blockshadow/ensemble.hpp"
#include "blockshadow/pauli.hpp"

namespace blockshadow {

/// Per-basis success weight 1 - exp(-eps^2/2).
inline double confidence_nu(double eps) {
    if (!(eps >= 0.0)) throw ValidationError("confidence parameter must be non-negative");
    return -std::expm1(-eps * eps / 2.0);
}

/// Number of bases under which each target is a Z-string.
inline std::vector<int> coverage_counts(std::span<const PauliString> targets,
                                        std::span<const LayeredBlockUnitary> bases) {
    std::vector<int> out(targets.size(), 0);
    for (const auto &u : bases) {
        for (std::size_t l = 0; l < targets.size(); ++l) out[l] += indicator(u, targets[l]);
    }
    return out;
}

/// Sum over targets of exp(-eps^2/2 * coverage).
inline double conf(std::span<const PauliString> targets, std::span<const LayeredBlockUnitary> bases, double eps) {
    double s = 0.0;
    for (int c : coverage_counts(targets, bases)) s += std::exp(-eps * eps / 2.0 * c);
    return s;
}

/// Mean of conf over M independent uniformly random block bases.
inline double expected_conf(std::span<const PauliString> targets, int num_bases, const BlockLayout &layout, double eps) {
    if (num_bases < 0) throw ValidationError("expected_conf: negative basis count");
    const double nu = confidence_nu(eps);
    const double r = static_cast<double>((1 << layout.k()) + 1);
    double s = 0.0;
    for (const auto &p : targets) {
        require_dims(p.n() == layout.n(), "expected_conf: target size does not match layout");
        s += std::pow(1.0 - nu * std::pow(r, -block_weight(p, layout)), num_bases);
    }
    return s;
}

/// Candidate index chosen for each block of one basis.
using BasisChoice = std::vector<int>;

namespace detail {

/// Z-type table of candidate c on local Pauli v (x | z << k).
inline std::vector<std::vector<char>> candidate_z_table(std::span<const CliffordTableau> candidates, int k) {
    const std::uint64_t count = std::uint64_t{1} << (2 * k);
    std::vector<std::vector<char>> out(candidates.size(), std::vector<char>(count));
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        for (std::uint64_t v = 0; v < count; ++v) {
            out[c][v] = candidates[c].conjugate(PauliString(k, v & low_mask(k), v >> k)).x() == 0;
        }
    }
    return out;
}

inline std::uint64_t local_word(const PauliString &p, const BlockLayout &lay, int r) {
    return lay.extract(p.x(), r) | (lay.extract(p.z(), r) << lay.k());
}

inline std::span<const CliffordTableau> candidate_members(EnsembleKind kind, int k) {
    if (kind != EnsembleKind::mub && kind != EnsembleKind::stabilizer_basis) {
        throw UnsupportedError("derandomization candidates must be the MUB or stabilizer-basis ensemble");
    }
    return ensemble_members(kind, k);
}

}  // namespace detail

/// Conditional mean of conf when bases [0, fixed.size()) are fully chosen, the
/// next basis has its first blocks fixed by `partial`, and the remaining blocks and
/// bases up to `num_bases` are uniformly random. Without the future factor only
/// the bases up to and including the partial one count.
inline double conditional_expected_conf(std::span<const PauliString> targets, std::span<const BasisChoice> fixed,
                                        const BasisChoice &partial, int num_bases, const BlockLayout &layout, double eps,
                                        EnsembleKind candidates = EnsembleKind::mub, bool include_future_factor = true) {
    const int nb = layout.num_blocks();
    if (static_cast<int>(partial.size()) > nb) throw ValidationError("conditional_expected_conf: partial basis too long");
    const int done = static_cast<int>(fixed.size());
    if (include_future_factor && (done > num_bases || (done == num_bases && !partial.empty()))) {
        throw ValidationError("conditional_expected_conf: more bases than the budget");
    }
    // With the future factor, the partial basis exists only while the budget is not spent.
    const bool has_partial = !include_future_factor || done < num_bases;
    auto members = detail::candidate_members(candidates, layout.k());
    const auto table = detail::candidate_z_table(members, layout.k());
    auto check_choice = [&](int c) {
        if (c < 0 || c >= static_cast<int>(members.size())) throw ValidationError("conditional_expected_conf: bad candidate");
    };
    const double nu = confidence_nu(eps);
    const double rr = static_cast<double>((1 << layout.k()) + 1);
    double total = 0.0;
    for (const auto &p : targets) {
        require_dims(p.n() == layout.n(), "conditional_expected_conf: target size does not match layout");
        int hits = 0;
        for (const auto &basis : fixed) {
            if (static_cast<int>(basis.size()) != nb) throw ValidationError("conditional_expected_conf: incomplete fixed basis");
            bool ok = true;
            for (int r = 0; r < nb && ok; ++r) {
                check_choice(basis[r]);
                ok = table[basis[r]][detail::local_word(p, layout, r)];
            }
            hits += ok;
        }
        double term = std::exp(-eps * eps / 2.0 * hits);
        if (has_partial) {
            bool ok = true;
            int remaining = 0;
            for (int r = 0; r < nb; ++r) {
                const std::uint64_t v = detail::local_word(p, layout, r);
                if (r < static_cast<int>(partial.size())) {
                    check_choice(partial[r]);
                    ok = ok && table[partial[r]][v];
                } else {
                    remaining += v != 0;
                }
            }
            term *= 1.0 - (ok ? nu * std::pow(rr, -remaining) : 0.0);
        }
        if (include_future_factor) {
            const int future = num_bases - done - 1;
            if (future > 0) term *= std::pow(1.0 - nu * std::pow(rr, -block_weight(p, layout)), future);
        }
        total += term;
    }
    return total;
}

struct DerandConfig {
    double eps = 0.9;
    EnsembleKind candidates = EnsembleKind::mub;
    /// Fixed basis budget M; ignored when min_cover is set.
    int num_bases = 0;
    /// Adaptive stop: add bases until every target is covered this many times.
    int min_cover = 0;
    /// Safety cap for the adaptive rule.
    int max_bases = 100000;
    /// Weight by the expected contribution of the bases still to come (fixed M only).
    bool include_future_factor = true;
};

struct MeasurementPlan {
    BlockLayout layout;
    EnsembleKind candidates = EnsembleKind::mub;
    double eps = 0.0;
    std::vector<PauliString> targets;
    std::vector<BasisChoice> choices;
    std::vector<LayeredBlockUnitary> bases;
    std::vector<int> shots;
    /// Conditional expected confidence before the first basis and after each basis.
    std::vector<double> trace;
    bool reached_min_cover = true;

    std::size_t size() const { return bases.size(); }
};

inline LayeredBlockUnitary basis_unitary(const BasisChoice &choice, const BlockLayout &layout, EnsembleKind candidates) {
    auto members = detail::candidate_members(candidates, layout.k());
    std::vector<BlockUnitary> blocks;
    for (int c : choice) blocks.emplace_back(members[static_cast<std::size_t>(c)]);
    return LayeredBlockUnitary(layout, std::move(blocks));
}

/// Greedy block-by-block choice of measurement bases. Each block takes the
/// candidate minimizing the conditional expected confidence; ties go to the
/// lowest candidate index.
inline MeasurementPlan derandomize(std::span<const PauliString> targets, const BlockLayout &layout,
                                   const DerandConfig &cfg) {
    if (targets.empty()) throw ValidationError("derandomize: no targets");
    if (!(cfg.eps > 0.0)) throw ValidationError("derandomize: eps must be positive");
    const bool adaptive = cfg.min_cover > 0;
    if (!adaptive && cfg.num_bases < 1) throw ValidationError("derandomize: set num_bases or min_cover");
    for (const auto &p : targets) require_dims(p.n() == layout.n(), "derandomize: target size does not match layout");

    auto members = detail::candidate_members(cfg.candidates, layout.k());
    const auto table = detail::candidate_z_table(members, layout.k());
    const int nb = layout.num_blocks();
    const std::size_t nt = targets.size();
    const double nu = confidence_nu(cfg.eps);
    const double rr = static_cast<double>((1 << layout.k()) + 1);
    const bool future = cfg.include_future_factor && !adaptive;
    const int budget = adaptive ? cfg.max_bases : cfg.num_bases;

    std::vector<std::vector<std::uint64_t>> words(nt, std::vector<std::uint64_t>(nb));
    std::vector<int> weight(nt), hits(nt, 0);
    std::vector<double> per_basis(nt);
    for (std::size_t l = 0; l < nt; ++l) {
        for (int r = 0; r < nb; ++r) words[l][r] = detail::local_word(targets[l], layout, r);
        weight[l] = block_weight(targets[l], layout);
        per_basis[l] = 1.0 - nu * std::pow(rr, -weight[l]);
    }

    MeasurementPlan plan{layout, cfg.candidates, cfg.eps, {targets.begin(), targets.end()}, {}, {}, {}, {}, true};
    auto history = [&](std::size_t l, int bases_done) {
        double h = std::exp(-cfg.eps * cfg.eps / 2.0 * hits[l]);
        if (future) h *= std::pow(per_basis[l], budget - bases_done - 1);
        return h;
    };
    auto covered = [&] {
        for (int h : hits)
            if (h < cfg.min_cover) return false;
        return true;
    };
    {
        double start = 0.0;
        for (std::size_t l = 0; l < nt; ++l) {
            start += std::exp(-cfg.eps * cfg.eps / 2.0 * hits[l]) * (future ? std::pow(per_basis[l], budget) : 1.0);
        }
        plan.trace.push_back(start);
    }

    std::vector<double> h(nt);
    std::vector<char> ok(nt);
    std::vector<int> remaining(nt);
    for (int m = 0; m < budget; ++m) {
        if (adaptive && covered()) break;
        for (std::size_t l = 0; l < nt; ++l) {
            h[l] = history(l, m);
            ok[l] = 1;
            remaining[l] = weight[l];
        }
        BasisChoice choice;
        for (int r = 0; r < nb; ++r) {
            int best = 0;
            double best_value = 0.0;
            for (int c = 0; c < static_cast<int>(members.size()); ++c) {
                double v = 0.0;
                for (std::size_t l = 0; l < nt; ++l) {
                    if (!ok[l]) continue;
                    const std::uint64_t w = words[l][r];
                    const int rem = remaining[l] - (w != 0);
                    if (table[c][w]) v -= h[l] * nu * std::pow(rr, -rem);
                }
                if (c == 0 || v < best_value) {
                    best = c;
                    best_value = v;
                }
            }
            choice.push_back(best);
            for (std::size_t l = 0; l < nt; ++l) {
                const std::uint64_t w = words[l][r];
                ok[l] = ok[l] && table[best][w];
                remaining[l] -= w != 0;
            }
        }
        double after = 0.0;
        for (std::size_t l = 0; l < nt; ++l) {
            hits[l] += ok[l];
            after += history(l, m);
        }
        plan.trace.push_back(after);
        plan.bases.push_back(basis_unitary(choice, layout, cfg.candidates));
        plan.choices.push_back(std::move(choice));
        plan.shots.push_back(1);
    }
    plan.reached_min_cover = !adaptive || covered();
    return plan;
}

struct TargetCoverage {
    PauliString target;
    int count = 0;
};

inline std::vector<TargetCoverage> coverage_report(const MeasurementPlan &plan) {
    auto counts = coverage_counts(plan.targets, plan.bases);
    std::vector<TargetCoverage> out;
    for (std::size_t l = 0; l < counts.size(); ++l) out.push_back({plan.targets[l], counts[l]});
    return out;
}

/// Non-identity Pauli strings of the cross terms between the model's pieces.
inline std::vector<PauliString> cluster_heisenberg_square_targets(int n) {
    std::vector<PauliString> out;
    const ObservableSum cross = cross_terms(cluster_heisenberg_parts(n));
    for (const auto &t : cross.terms()) {
        if (!t.pauli.is_identity_up_to_phase()) out.push_back(t.pauli);
    }
    return out;
}

}  // namespace blockshadow
