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
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "blockshadow/noise.hpp"
#include "blockshadow/shadow.hpp"

namespace blockshadow {

/// Irrep label of a Pauli under a block Clifford ensemble: the set of blocks
/// on which it acts, as a bit mask over block indices.
inline std::uint64_t irrep_label(const PauliString &p, const BlockLayout &layout) {
    std::uint64_t label = 0;
    const std::uint64_t s = p.support();
    for (int r = 0; r < layout.num_blocks(); ++r) {
        if (layout.extract(s, r) != 0) label |= std::uint64_t{1} << r;
    }
    return label;
}

/// Calibration probes of a label: every Z-type string whose block support is
/// exactly the label. All of them share the label's channel eigenvalue.
inline std::vector<PauliString> label_probes(std::uint64_t label, const BlockLayout &layout) {
    std::vector<PauliString> out{PauliString(layout.n(), 0, 0)};
    const std::uint64_t per_block = (std::uint64_t{1} << layout.k()) - 1;
    for (int r = 0; r < layout.num_blocks(); ++r) {
        if (!((label >> r) & 1)) continue;
        if (out.size() * per_block > (std::size_t{1} << 16)) throw UnsupportedError("label_probes: label too large");
        std::vector<PauliString> next;
        for (const auto &q : out) {
            for (std::uint64_t z = 1; z <= per_block; ++z) {
                next.emplace_back(layout.n(), 0, q.z() | (z << (r * layout.k())));
            }
        }
        out = std::move(next);
    }
    return out;
}

enum class CalibrationMode { factorized, direct };

struct LabelAlpha {
    double alpha = 1.0;
    double stderr = 0.0;
    double ci_low = 1.0;
    double ci_high = 1.0;
    bool ill_conditioned = false;
};

struct CalibrationReport {
    BlockLayout layout;
    CalibrationMode mode = CalibrationMode::factorized;
    /// Factorized mode: one entry per single-block label. Direct mode: one per requested label.
    std::map<std::uint64_t, LabelAlpha> labels;

    bool factorized() const { return mode == CalibrationMode::factorized; }

    /// Amplification for a label; throws when the report cannot supply it.
    double alpha(std::uint64_t label) const {
        if (label == 0) return 1.0;
        if (!factorized()) {
            auto it = labels.find(label);
            if (it == labels.end()) throw ValidationError("calibration report has no label " + std::to_string(label));
            return it->second.alpha;
        }
        double a = 1.0;
        for (int r = 0; r < layout.num_blocks(); ++r) {
            if (!((label >> r) & 1)) continue;
            auto it = labels.find(std::uint64_t{1} << r);
            if (it == labels.end()) throw ValidationError("calibration report has no block " + std::to_string(r));
            a *= it->second.alpha;
        }
        return a;
    }
};

struct CalibrationOptions {
    CalibrationMode mode = CalibrationMode::factorized;
    /// Labels to calibrate in direct mode; empty means every non-empty block subset.
    std::vector<std::uint64_t> labels;
    /// Labels whose measured probe value falls below this fraction of the exact value are flagged.
    double min_signal = 0.1;
    int resamples = 500;
    std::uint64_t bootstrap_seed = 0xca1b;
    double z_level = 1.959963984540054;
    int threads = 0;
};

/// Estimates amplification factors alpha = exact / measured on a calibration
/// dataset of a known state (default |0...0>), probing each label with its Z-type strings.
inline CalibrationReport calibrate_alpha(const ShadowDataset &cal, const StateVector &sigma_cal,
                                         const CalibrationOptions &opt = {}) {
    const BlockLayout lay = cal.layout();
    require_dims(sigma_cal.n() == lay.n(), "calibrate_alpha: calibration state size does not match dataset");
    if (cal.records.empty()) throw DataError("calibrate_alpha: empty calibration dataset");
    if (lay.num_blocks() > 20) throw UnsupportedError("calibrate_alpha: too many blocks for label enumeration");

    std::vector<std::uint64_t> labels;
    if (opt.mode == CalibrationMode::factorized) {
        for (int r = 0; r < lay.num_blocks(); ++r) labels.push_back(std::uint64_t{1} << r);
    } else if (opt.labels.empty()) {
        for (std::uint64_t l = 1; l < (std::uint64_t{1} << lay.num_blocks()); ++l) labels.push_back(l);
    } else {
        labels = opt.labels;
    }

    CalibrationReport report{lay, opt.mode, {}};
    const std::size_t count = cal.records.size();
    for (std::uint64_t label : labels) {
        if (label == 0 || label >> lay.num_blocks()) throw ValidationError("calibrate_alpha: invalid label");
        const auto probes = label_probes(label, lay);
        double exact = 0.0;
        for (const auto &q : probes) exact += expectation(sigma_cal, q);
        std::vector<double> raw(count);
        parallel_for(count, opt.threads, [&](std::size_t i) {
            CompensatedSum s;
            for (const auto &q : probes) s.add(detail::record_pauli_mean(cal.records[i], q));
            raw[i] = s.value();
        });
        const double measured = mean(raw);
        LabelAlpha la;
        la.ill_conditioned = std::abs(exact) < 1e-12 || std::abs(measured) < opt.min_signal * std::abs(exact);
        if (la.ill_conditioned) {
            la.alpha = 1.0;
            la.ci_low = 0.0;
            la.ci_high = std::numeric_limits<double>::infinity();
            la.stderr = std::numeric_limits<double>::infinity();
        } else {
            la.alpha = exact / measured;
            la.stderr = bootstrap_stderr(raw, [exact](std::span<const double> v) { return exact / mean(v); }, opt.resamples,
                                         opt.bootstrap_seed + label);
            la.ci_low = std::max(0.0, la.alpha - opt.z_level * la.stderr);
            la.ci_high = la.alpha + opt.z_level * la.stderr;
        }
        report.labels[label] = la;
    }
    return report;
}

struct ClampRule {
    bool enabled = false;
    double threshold = 1.5;
    double factor = 0.8;

    double apply(double alpha) const { return enabled && alpha > threshold ? factor * alpha : alpha; }
};

/// Error-mitigated estimate of Tr(rho O): each Pauli term's raw estimate is
/// scaled by its label's amplification. Calibration uncertainty is not
/// propagated into the stderr.
inline Estimate mitigated_estimate(const ShadowDataset &ds, const ObservableSum &o, const CalibrationReport &report,
                                   const ClampRule &clamp = {}, const EstimatorOptions &opt = {}) {
    require_dims(o.n() == ds.meta.n, "mitigated_estimate: observable size does not match dataset");
    require_dims(report.layout == ds.layout(), "mitigated_estimate: calibration layout differs from dataset");
    std::vector<double> scale;
    for (const auto &t : o.terms()) scale.push_back(t.coeff * clamp.apply(report.alpha(irrep_label(t.pauli, report.layout))));
    return summarize(detail::per_record(ds.records.size(), opt.threads,
                                        [&](std::size_t i) {
                                            CompensatedSum s;
                                            for (std::size_t j = 0; j < scale.size(); ++j) {
                                                s.add(scale[j] * detail::record_pauli_mean(ds.records[i], o.terms()[j].pauli));
                                            }
                                            return s.value();
                                        }),
                     opt);
}

/// CRM with the classical shortcut for sigma and mitigated rho terms:
/// sum_P c_P [alpha_P raw_P - 1{U P U^dag in +-Z} Tr(sigma P) / m_P] + Tr(sigma O).
inline Estimate mitigated_crm_estimate(const ShadowDataset &ds_rho, const StateVector &sigma, const ObservableSum &o,
                                       const CalibrationReport &report, const ClampRule &clamp = {},
                                       const EstimatorOptions &opt = {}) {
    require_dims(sigma.n() == ds_rho.meta.n && o.n() == ds_rho.meta.n, "mitigated_crm_estimate: size mismatch");
    const EnsembleSpec spec = ds_rho.spec();
    if (!spec.is_clifford()) throw UnsupportedError("mitigated CRM needs a Clifford ensemble");
    std::vector<double> alpha, sigma_p;
    for (const auto &t : o.terms()) {
        alpha.push_back(clamp.apply(report.alpha(irrep_label(t.pauli, report.layout))));
        sigma_p.push_back(expectation(sigma, t.pauli));
    }
    const double exact_sigma = expectation(sigma, o);
    return summarize(detail::per_record(ds_rho.records.size(), opt.threads,
                                        [&](std::size_t i) {
                                            const ShadowRecord &rec = ds_rho.records[i];
                                            CompensatedSum s;
                                            for (std::size_t j = 0; j < alpha.size(); ++j) {
                                                const auto &t = o.terms()[j];
                                                const double raw = detail::record_pauli_mean(rec, t.pauli);
                                                const double shift =
                                                    indicator(rec.unitary, t.pauli) * sigma_p[j] / m_eigenvalue(t.pauli, spec);
                                                s.add(t.coeff * (alpha[j] * raw - shift));
                                            }
                                            return s.value() + exact_sigma;
                                        }),
                     opt);
}

struct NoisyVariance {
    double exact = 0.0;
    double bound = 0.0;
};

/// Variance of the mitigated (m-tilde normalized) multi-shot Pauli estimator.
inline NoisyVariance variance_noisy_multishot(const PauliString &p, const EnsembleSpec &spec, const NoiseModel &noise,
                                              double tr_p, std::size_t n_u, std::size_t n_s) {
    if (n_u == 0 || n_s == 0) throw ValidationError("variance_noisy_multishot: counts must be positive");
    const double m = m_eigenvalue(p, spec);
    const double mt = noisy_moment(p, spec, noise, 1);
    const double mt2 = noisy_moment(p, spec, noise, 2);
    const double ns = static_cast<double>(n_s), nu = static_cast<double>(n_u);
    const double bound = (m / ns + (ns - 1.0) / ns * tr_p * tr_p * mt2) / (mt * mt * nu);
    return {bound - tr_p * tr_p / nu, bound};
}

/// Variance of the mitigated CRM Pauli estimator with the classical sigma shortcut.
inline NoisyVariance variance_noisy_crm(const PauliString &p, const EnsembleSpec &spec, const NoiseModel &noise,
                                        double tr_rho, double tr_sigma, std::size_t n_u, std::size_t n_s) {
    if (n_u == 0 || n_s == 0) throw ValidationError("variance_noisy_crm: counts must be positive");
    const double m = m_eigenvalue(p, spec);
    const double mt = noisy_moment(p, spec, noise, 1);
    const double mt2 = noisy_moment(p, spec, noise, 2);
    const double ns = static_cast<double>(n_s), nu = static_cast<double>(n_u);
    const double floor = m / (mt * mt * ns);
    const double cross = -2.0 * tr_rho * tr_sigma / m + tr_sigma * tr_sigma / m;
    const double exact = floor + (ns - 1.0) / ns * mt2 / (mt * mt) * tr_rho * tr_rho + cross - (tr_rho - tr_sigma) * (tr_rho - tr_sigma);
    const double bound = floor + mt2 / (mt * mt) * tr_rho * tr_rho + cross;
    return {exact / nu, bound / nu};
}

}  // namespace blockshadow
