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

// blockshadow: acquire block-shadow data, estimate from it, calibrate noise,
// plan derandomized measurements and run kernel-PCA phase scans.
//
// Exit codes: 0 success, 2 usage or validation error, 3 runtime or data error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "blockshadow/derandomizer.hpp"
#include "blockshadow/io.hpp"
#include "blockshadow/kernel.hpp"
#include "blockshadow/mitigation.hpp"
#include "blockshadow/verify.hpp"

namespace bs = blockshadow;
using bs::io::CsvWriter;
using bs::io::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Common {
    int threads = 0;
    int resamples = 1000;
};

/// Builtin states: zero, bell, ghz, basis:<bits>, random-circuit:<depth>,
/// ssh:<v>,<w>, ground:<pauli-term file>.
bs::StateVector make_state(const std::string &spec, int n, std::uint64_t state_seed) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto need_arg = [&] {
        if (arg.empty()) throw bs::ValidationError("state '" + name + "' needs an argument");
    };
    const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << n);
    if (name == "zero") return bs::StateVector::basis(n);
    if (name == "basis") {
        need_arg();
        if (static_cast<int>(arg.size()) != n) throw bs::ValidationError("basis state needs n bits");
        std::uint64_t bits = 0;
        for (int q = 0; q < n; ++q) {
            if (arg[q] != '0' && arg[q] != '1') throw bs::ValidationError("basis state takes 0/1 characters");
            if (arg[q] == '1') bits |= std::uint64_t{1} << q;
        }
        return bs::StateVector::basis(n, bits);
    }
    if (name == "ghz") {
        bs::CVector v = bs::CVector::Zero(dim);
        v(0) = v(dim - 1) = 1.0 / std::sqrt(2.0);
        return bs::StateVector(n, v);
    }
    if (name == "bell") {
        if (n % 2 != 0) throw bs::ValidationError("bell state needs even n (pairs of qubits)");
        bs::CVector v = bs::CVector::Zero(dim);
        const double amp = std::pow(2.0, -n / 4.0);
        for (std::uint64_t pairs = 0; pairs < (std::uint64_t{1} << (n / 2)); ++pairs) {
            std::uint64_t idx = 0;
            for (int j = 0; j < n / 2; ++j) {
                if ((pairs >> j) & 1U) idx |= std::uint64_t{3} << (2 * j);
            }
            v(static_cast<Eigen::Index>(idx)) = amp;
        }
        return bs::StateVector(n, v);
    }
    if (name == "random-circuit") {
        need_arg();
        bs::Rng rng(state_seed);
        return bs::random_circuit_state(n, std::stoi(arg), rng);
    }
    if (name == "ssh") {
        need_arg();
        const auto comma = arg.find(',');
        if (comma == std::string::npos) throw bs::ValidationError("ssh state takes 'ssh:v,w'");
        return bs::ssh_ground_state(n, std::stod(arg.substr(0, comma)), std::stod(arg.substr(comma + 1)));
    }
    if (name == "ground") {
        need_arg();
        auto h = bs::io::sum_terms(bs::io::read_pauli_terms(arg));
        if (h.n() != n) throw bs::DimensionError("Hamiltonian size does not match --n");
        return bs::ground_state_exact(h).state;
    }
    throw bs::ValidationError("unknown state '" + spec + "'");
}

void emit(const CsvWriter &csv, const std::string &out) {
    if (out.empty() || out == "-") {
        csv.write(std::cout);
    } else {
        bs::io::write_text(out, csv.str());
    }
}

bs::EstimatorOptions estimator_options(const Common &c) {
    bs::EstimatorOptions o;
    o.threads = c.threads;
    o.resamples = c.resamples;
    return o;
}

std::string opt_double(std::optional<double> v) { return v ? bs::io::format_double(*v) : ""; }

std::optional<double> z_score(double mean, double stderr, std::optional<double> exact) {
    if (!exact || !(stderr > 0.0)) return std::nullopt;
    return (mean - *exact) / stderr;
}

bool noiseless_clifford(const bs::ShadowDataset &ds) {
    return ds.meta.noise_tag == "noiseless" && ds.spec().is_clifford();
}

// ---------------------------------------------------------------- acquire

struct AcquireArgs {
    std::string state, noise, out;
    int n = 0, k = 1, nu = 0, ns = 1;
    std::string ensemble = "clifford_full";
    std::uint64_t seed = 0, state_seed = 1;
    std::optional<std::uint64_t> shot_seed;
};

int run_acquire(const AcquireArgs &a, const Common &c) {
    const bs::BlockLayout layout(a.n, a.k);
    const bs::EnsembleSpec spec{bs::parse_ensemble_kind(a.ensemble), layout};
    std::optional<bs::NoiseModel> noise;
    if (!a.noise.empty()) noise = bs::io::noise_from_json(bs::io::load_json(a.noise), layout);
    bs::AcquireOptions ao;
    ao.seed = a.seed;
    ao.shot_seed = a.shot_seed;
    ao.noise = noise ? &*noise : nullptr;
    ao.threads = c.threads;
    const auto ds = bs::acquire(make_state(a.state, a.n, a.state_seed), spec, a.nu, a.ns, ao);
    bs::io::save_json(a.out, bs::io::dataset_to_json(ds));
    return 0;
}

// ---------------------------------------------------------------- estimators

struct EstimateArgs {
    std::string data, targets, state, out;
    std::uint64_t state_seed = 1;
};

int run_estimate(const EstimateArgs &a, const Common &c) {
    const auto ds = bs::io::load_dataset(a.data);
    const auto terms = bs::io::read_pauli_terms(a.targets);
    std::optional<bs::StateVector> psi;
    if (!a.state.empty()) psi = make_state(a.state, ds.meta.n, a.state_seed);
    CsvWriter csv({"target", "coeff", "mean", "stderr", "exact", "predicted_std", "z"});
    for (const auto &t : terms) {
        if (t.pauli.n() != ds.meta.n) throw bs::DimensionError("target " + t.pauli.str(false) + " does not match n");
        const auto e = bs::estimate_observable(ds, bs::ObservableSum(ds.meta.n, {t}), estimator_options(c));
        std::optional<double> exact, pred;
        if (psi) {
            const double tr = bs::expectation(*psi, t.pauli);
            exact = t.coeff * tr;
            if (noiseless_clifford(ds)) {
                pred = std::abs(t.coeff) *
                       std::sqrt(bs::variance_pauli_multishot(t.pauli, tr, ds.records.size(),
                                                              static_cast<std::size_t>(ds.meta.shots), ds.layout()));
            }
        }
        csv.row() << t.pauli.str(false) << t.coeff << e.mean << e.stderr << opt_double(exact) << opt_double(pred)
                  << opt_double(z_score(e.mean, e.stderr, exact));
    }
    emit(csv, a.out);
    return 0;
}

int run_purity(const EstimateArgs &a, const Common &c) {
    const auto ds = bs::io::load_dataset(a.data);
    const auto e = bs::estimate_purity(ds, estimator_options(c));
    std::optional<double> exact;
    if (!a.state.empty()) exact = bs::purity_exact(make_state(a.state, ds.meta.n, a.state_seed));
    CsvWriter csv({"quantity", "mean", "stderr", "exact", "z"});
    csv.row() << "purity" << e.mean << e.stderr << opt_double(exact) << opt_double(z_score(e.mean, e.stderr, exact));
    emit(csv, a.out);
    return 0;
}

struct FidelityArgs {
    std::string data, target, state, out;
    std::uint64_t state_seed = 1;
};

int run_fidelity(const FidelityArgs &a, const Common &c) {
    const auto ds = bs::io::load_dataset(a.data);
    const auto target = make_state(a.target, ds.meta.n, a.state_seed);
    const auto e = bs::estimate_fidelity(ds, target, estimator_options(c));
    std::optional<double> exact, pred;
    if (!a.state.empty()) {
        const auto psi = make_state(a.state, ds.meta.n, a.state_seed);
        exact = bs::fidelity_exact(target, psi);
        if (noiseless_clifford(ds) && ds.meta.n <= 7) {
            const auto v = bs::compute_V123(target, psi, ds.layout(), ds.meta.ensemble, c.threads);
            pred = std::sqrt(std::max(0.0, bs::variance_fidelity(v.V1, v.V2, *exact, ds.records.size(),
                                                                 static_cast<std::size_t>(ds.meta.shots))));
        }
    }
    CsvWriter csv({"quantity", "mean", "stderr", "exact", "predicted_std", "z"});
    csv.row() << "fidelity" << e.mean << e.stderr << opt_double(exact) << opt_double(pred)
              << opt_double(z_score(e.mean, e.stderr, exact));
    emit(csv, a.out);
    return 0;
}

struct CrmArgs {
    std::string data, sigma, sigma_data, targets, state, out, mode = "old";
    std::uint64_t state_seed = 1;
};

int run_crm(const CrmArgs &a, const Common &c) {
    const auto ds = bs::io::load_dataset(a.data);
    const auto sigma = make_state(a.sigma, ds.meta.n, a.state_seed);
    const auto terms = bs::io::read_pauli_terms(a.targets);
    if (a.mode != "old" && a.mode != "new") throw bs::ValidationError("--mode takes old or new");
    const auto mode = a.mode == "old" ? bs::CrmMode::old_mode : bs::CrmMode::new_mode;
    std::optional<bs::ShadowDataset> ds_sigma;
    if (mode == bs::CrmMode::new_mode) {
        if (a.sigma_data.empty()) throw bs::ValidationError("--mode new needs --sigma-data");
        ds_sigma = bs::io::load_dataset(a.sigma_data);
    }
    std::optional<bs::StateVector> psi;
    if (!a.state.empty()) psi = make_state(a.state, ds.meta.n, a.state_seed);
    CsvWriter csv({"target", "coeff", "mean", "stderr", "plain_mean", "plain_stderr", "exact", "predicted_std", "z"});
    for (const auto &t : terms) {
        const bs::ObservableSum o(ds.meta.n, {t});
        const auto e = bs::crm_estimate(ds, sigma, mode, ds_sigma ? &*ds_sigma : nullptr, o, estimator_options(c));
        const auto plain = bs::estimate_observable(ds, o, estimator_options(c));
        std::optional<double> exact, pred;
        if (psi) {
            const double tr_rho = bs::expectation(*psi, t.pauli);
            exact = t.coeff * tr_rho;
            if (mode == bs::CrmMode::new_mode && noiseless_clifford(ds) && !t.pauli.is_identity_up_to_phase()) {
                const double m = bs::m_eigenvalue(t.pauli, ds.spec());
                pred = std::abs(t.coeff) *
                       std::sqrt(std::max(0.0, bs::variance_crm(m, tr_rho, bs::expectation(sigma, t.pauli),
                                                                static_cast<std::size_t>(ds.meta.shots),
                                                                static_cast<std::size_t>(ds_sigma->meta.shots),
                                                                ds.records.size())));
            }
        }
        csv.row() << t.pauli.str(false) << t.coeff << e.mean << e.stderr << plain.mean << plain.stderr
                  << opt_double(exact) << opt_double(pred) << opt_double(z_score(e.mean, e.stderr, exact));
    }
    emit(csv, a.out);
    return 0;
}

struct SffArgs {
    std::string hamiltonian, out;
    double time = 1.0;
    int k = 1, samples = 1000;
    std::uint64_t seed = 0;
};

int run_sff(const SffArgs &a, const Common &c) {
    const auto h = bs::io::sum_terms(bs::io::read_pauli_terms(a.hamiltonian));
    const bs::BlockLayout layout(h.n(), a.k);
    const auto e = bs::sff_estimate(h, a.time, layout, a.samples, a.seed, estimator_options(c));
    const double exact = bs::sff_exact(h, a.time);
    const double pred = std::sqrt(std::max(0.0, bs::sff_variance_exact(h, a.time, layout, a.samples)));
    CsvWriter csv({"t", "mean", "stderr", "exact", "predicted_std", "z"});
    csv.row() << a.time << e.mean << e.stderr << exact << pred << opt_double(z_score(e.mean, e.stderr, exact));
    emit(csv, a.out);
    return 0;
}

// ---------------------------------------------------------------- noise

struct CalibrateArgs {
    std::string data, cal_state = "zero", mode = "factorized", out, summary;
    std::uint64_t bootstrap_seed = 0xca1b;
};

int run_calibrate(const CalibrateArgs &a, const Common &c) {
    const auto ds = bs::io::load_dataset(a.data);
    bs::CalibrationOptions co;
    if (a.mode == "factorized") {
        co.mode = bs::CalibrationMode::factorized;
    } else if (a.mode == "direct") {
        co.mode = bs::CalibrationMode::direct;
    } else {
        throw bs::ValidationError("--mode takes factorized or direct");
    }
    co.resamples = c.resamples;
    co.bootstrap_seed = a.bootstrap_seed;
    co.threads = c.threads;
    const auto report = bs::calibrate_alpha(ds, make_state(a.cal_state, ds.meta.n, 1), co);
    bs::io::save_json(a.out, bs::io::calibration_to_json(report));
    CsvWriter csv({"label", "alpha", "stderr", "ci_low", "ci_high", "ill_conditioned"});
    for (const auto &[label, la] : report.labels) {
        csv.row() << std::to_string(label) << la.alpha << la.stderr << la.ci_low << la.ci_high
                  << (la.ill_conditioned ? "1" : "0");
    }
    emit(csv, a.summary);
    return 0;
}

struct MitigateArgs {
    std::string data, calibration, targets, state, out, sigma;
    bool clamp = false;
    double clamp_threshold = 1.5, clamp_factor = 0.8;
    std::uint64_t state_seed = 1;
};

int run_mitigate(const MitigateArgs &a, const Common &c) {
    const auto ds = bs::io::load_dataset(a.data);
    const auto report = bs::io::calibration_from_json(bs::io::load_json(a.calibration));
    const auto terms = bs::io::read_pauli_terms(a.targets);
    const bs::ClampRule clamp{a.clamp, a.clamp_threshold, a.clamp_factor};
    std::optional<bs::StateVector> psi, sigma;
    if (!a.state.empty()) psi = make_state(a.state, ds.meta.n, a.state_seed);
    if (!a.sigma.empty()) sigma = make_state(a.sigma, ds.meta.n, a.state_seed);
    CsvWriter csv({"target", "coeff", "label", "alpha", "raw_mean", "raw_stderr", "mitigated_mean", "mitigated_stderr",
                   "exact"});
    for (const auto &t : terms) {
        const bs::ObservableSum o(ds.meta.n, {t});
        const auto raw = sigma ? bs::crm_estimate(ds, *sigma, bs::CrmMode::old_mode, nullptr, o, estimator_options(c))
                               : bs::estimate_observable(ds, o, estimator_options(c));
        const auto mit = sigma ? bs::mitigated_crm_estimate(ds, *sigma, o, report, clamp, estimator_options(c))
                               : bs::mitigated_estimate(ds, o, report, clamp, estimator_options(c));
        const auto label = bs::irrep_label(t.pauli, ds.layout());
        std::optional<double> exact;
        if (psi) exact = t.coeff * bs::expectation(*psi, t.pauli);
        csv.row() << t.pauli.str(false) << t.coeff << std::to_string(label) << clamp.apply(report.alpha(label))
                  << raw.mean << raw.stderr << mit.mean << mit.stderr << opt_double(exact);
    }
    emit(csv, a.out);
    return 0;
}

// ---------------------------------------------------------------- derandomize

struct DerandArgs {
    std::string targets, out, coverage, compare_k, candidates = "mub";
    int n = 0, k = 1, bases = 0, min_cover = 0, ch2 = 0;
    double eps = 0.9;
};

std::vector<bs::PauliString> derand_targets(const DerandArgs &a) {
    if (a.ch2 > 0) {
        if (!a.targets.empty()) throw bs::ValidationError("give either --targets or --ch2");
        return bs::cluster_heisenberg_square_targets(a.ch2);
    }
    if (a.targets.empty()) throw bs::ValidationError("derandomize needs --targets or --ch2");
    std::vector<bs::PauliString> out;
    for (const auto &t : bs::io::read_pauli_terms(a.targets)) {
        if (!t.pauli.is_identity_up_to_phase()) out.push_back(t.pauli);
    }
    if (out.empty()) throw bs::ValidationError("derandomize: no non-identity targets");
    return out;
}

int run_derandomize(const DerandArgs &a, const Common &) {
    const auto targets = derand_targets(a);
    const int n = targets.front().n();
    bs::DerandConfig cfg;
    cfg.eps = a.eps;
    cfg.candidates = bs::parse_ensemble_kind(a.candidates);
    cfg.num_bases = a.bases;
    cfg.min_cover = a.min_cover;

    if (!a.compare_k.empty()) {
        CsvWriter csv({"k", "num_bases", "min_coverage", "conf", "expected_conf", "reached_min_cover"});
        std::istringstream ks(a.compare_k);
        for (std::string tok; std::getline(ks, tok, ',');) {
            const int k = std::stoi(tok);
            const bs::BlockLayout layout(n, k);
            const auto plan = bs::derandomize(targets, layout, cfg);
            const auto cov = bs::coverage_counts(targets, plan.bases);
            const double cf = bs::conf(targets, plan.bases, cfg.eps);
            csv.row() << k << plan.size() << *std::min_element(cov.begin(), cov.end()) << cf
                      << bs::expected_conf(targets, static_cast<int>(plan.size()), layout, cfg.eps)
                      << (plan.reached_min_cover ? "1" : "0");
        }
        emit(csv, a.out);
        return 0;
    }

    const bs::BlockLayout layout(n, a.k);
    const auto plan = bs::derandomize(targets, layout, cfg);
    const double cf = bs::conf(targets, plan.bases, cfg.eps);
    const double ex = bs::expected_conf(targets, static_cast<int>(plan.size()), layout, cfg.eps);
    if (a.out.empty()) throw bs::ValidationError("derandomize needs --out for the plan file");
    bs::io::save_json(a.out, bs::io::plan_to_json(plan, cf, ex));
    CsvWriter csv({"target", "count"});
    for (const auto &tc : bs::coverage_report(plan)) csv.row() << tc.target.str(false) << tc.count;
    emit(csv, a.coverage);
    return 0;
}

// ---------------------------------------------------------------- phase scan

struct ScanArgs {
    std::string out, fit, noise;
    int n = 8, k = 2, records = 30, shots = 80, points = 19, bootstrap = 20, cal_records = 20000;
    double v = 1.0, w_min = 0.2, w_max = 2.0;
    std::optional<double> tau, gamma;
    std::uint64_t seed = 0;
};

int run_phase_scan(const ScanArgs &a, const Common &c) {
    if (a.n % 2 != 0) throw bs::ValidationError("phase-scan needs even n");
    if (a.points < 4) throw bs::ValidationError("phase-scan needs at least 4 points");
    std::vector<double> w(static_cast<std::size_t>(a.points));
    for (int i = 0; i < a.points; ++i) w[i] = a.w_min + (a.w_max - a.w_min) * i / (a.points - 1);

    bs::PhaseScanConfig cfg;
    cfg.n = a.n;
    cfg.k = a.k;
    cfg.v = a.v;
    cfg.records = a.records;
    cfg.shots = a.shots;
    cfg.kernel = bs::KernelParams::defaults(a.k);
    cfg.kernel.averaged = a.shots > 1;
    if (a.tau) cfg.kernel.tau = *a.tau;
    if (a.gamma) cfg.kernel.gamma = *a.gamma;
    cfg.seed = a.seed;
    cfg.bootstrap = a.bootstrap;
    cfg.threads = c.threads;

    const bs::BlockLayout layout(a.n, a.k);
    std::optional<bs::NoiseModel> noise;
    double alpha = 1.0;
    if (!a.noise.empty()) {
        noise = bs::io::noise_from_json(bs::io::load_json(a.noise), layout);
        cfg.noise = &*noise;
        bs::AcquireOptions ao;
        ao.seed = bs::substream(a.seed, 0, 0xca1)();
        ao.noise = &*noise;
        ao.threads = c.threads;
        const auto cal = bs::acquire(bs::StateVector::basis(a.n), bs::EnsembleSpec{cfg.ensemble, layout}, a.cal_records, 1, ao);
        bs::CalibrationOptions co;
        co.resamples = std::min(c.resamples, 200);
        co.threads = c.threads;
        // Sampling noise can put the estimate just below 1 on weak noise.
        alpha = std::max(1.0, bs::uniform_block_alpha(bs::calibrate_alpha(cal, bs::StateVector::basis(a.n), co)));
        cfg.alpha = alpha;
    }

    const auto r = bs::phase_scan(w, cfg);
    CsvWriter csv({"w", "pc1", "pc1_stderr"});
    for (std::size_t i = 0; i < r.w.size(); ++i) csv.row() << r.w[i] << r.pc1[i] << r.pc1_stderr[i];
    emit(csv, a.out);
    if (!a.fit.empty()) {
        bs::io::save_json(a.fit, json{{"a", r.fit.a},
                                      {"b", r.fit.b},
                                      {"c", r.fit.c},
                                      {"w0", r.fit.w0},
                                      {"w0_stderr", r.w0_stderr},
                                      {"residual", r.fit.residual_norm},
                                      {"peak_derivative", r.fit.peak_derivative()},
                                      {"k", a.k},
                                      {"n", a.n},
                                      {"records", a.records},
                                      {"shots", a.shots},
                                      {"alpha", alpha}});
    }
    return 0;
}

// ---------------------------------------------------------------- verify

int run_verify() {
    bool all = true;
    for (const auto &ch : bs::verify::run_all()) {
        std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << "\n";
        all = all && ch.passed;
    }
    return all ? 0 : kExitRuntime;
}

int default_threads() {
    if (const char *env = std::getenv("SHADOW_THREADS")) {
        try {
            return std::max(0, std::stoi(env));
        } catch (const std::exception &) {
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Block-shadow randomized measurement toolkit"};
    app.require_subcommand(1);
    Common common;
    common.threads = default_threads();
    app.add_option("--threads", common.threads, "Worker threads (0 = all cores; env SHADOW_THREADS)")->check(CLI::NonNegativeNumber);
    app.add_option("--resamples", common.resamples, "Bootstrap resamples for standard errors")->check(CLI::PositiveNumber);

    int status = 0;
    auto bind = [&](CLI::App *sub, auto fn) { sub->callback([&status, fn] { status = fn(); }); };

    AcquireArgs acq;
    auto *s_acq = app.add_subcommand("acquire", "Simulate randomized measurements of a state");
    s_acq->add_option("--state", acq.state, "zero | bell | ghz | basis:<bits> | random-circuit:<depth> | ssh:<v>,<w> | ground:<file>")->required();
    s_acq->add_option("--n", acq.n, "Qubits")->required()->check(CLI::Range(1, 12));
    s_acq->add_option("--k", acq.k, "Block size")->check(CLI::Range(1, 4));
    s_acq->add_option("--ensemble", acq.ensemble, "clifford_full | mub | stabilizer_basis | haar_dense");
    s_acq->add_option("--nu", acq.nu, "Number of unitaries")->required()->check(CLI::PositiveNumber);
    s_acq->add_option("--ns", acq.ns, "Shots per unitary")->check(CLI::PositiveNumber);
    s_acq->add_option("--seed", acq.seed, "Seed of the unitaries")->required();
    s_acq->add_option("--shot-seed", acq.shot_seed, "Seed of the Born sampling (default: --seed)");
    s_acq->add_option("--state-seed", acq.state_seed, "Seed of random-circuit states");
    s_acq->add_option("--noise", acq.noise, "Noise model JSON");
    s_acq->add_option("--out", acq.out, "Dataset JSON path")->required();
    bind(s_acq, [&] { return run_acquire(acq, common); });

    EstimateArgs est;
    auto *s_est = app.add_subcommand("estimate", "Pauli expectations from a dataset");
    s_est->add_option("--data", est.data, "Dataset JSON")->required();
    s_est->add_option("--targets", est.targets, "Pauli-term list")->required();
    s_est->add_option("--state", est.state, "State for exact values and predicted spread");
    s_est->add_option("--state-seed", est.state_seed);
    s_est->add_option("--out", est.out, "CSV path (default stdout)");
    bind(s_est, [&] { return run_estimate(est, common); });

    EstimateArgs pur;
    auto *s_pur = app.add_subcommand("purity", "Purity Tr(rho^2) from a multi-shot dataset");
    s_pur->add_option("--data", pur.data, "Dataset JSON")->required();
    s_pur->add_option("--state", pur.state, "State for the exact value");
    s_pur->add_option("--state-seed", pur.state_seed);
    s_pur->add_option("--out", pur.out, "CSV path (default stdout)");
    bind(s_pur, [&] { return run_purity(pur, common); });

    FidelityArgs fid;
    auto *s_fid = app.add_subcommand("fidelity", "Fidelity with a pure target state");
    s_fid->add_option("--data", fid.data, "Dataset JSON")->required();
    s_fid->add_option("--target", fid.target, "Target state")->required();
    s_fid->add_option("--state", fid.state, "Measured state for exact value and predicted spread");
    s_fid->add_option("--state-seed", fid.state_seed);
    s_fid->add_option("--out", fid.out, "CSV path (default stdout)");
    bind(s_fid, [&] { return run_fidelity(fid, common); });

    CrmArgs crm;
    auto *s_crm = app.add_subcommand("crm", "Common-randomized-measurement estimates with a known bias state");
    s_crm->add_option("--data", crm.data, "Dataset JSON")->required();
    s_crm->add_option("--sigma", crm.sigma, "Bias state")->required();
    s_crm->add_option("--targets", crm.targets, "Pauli-term list")->required();
    s_crm->add_option("--mode", crm.mode, "old (exact sigma term) | new (sigma dataset)");
    s_crm->add_option("--sigma-data", crm.sigma_data, "Sigma dataset sharing the unitaries (new mode)");
    s_crm->add_option("--state", crm.state, "State for exact values");
    s_crm->add_option("--state-seed", crm.state_seed);
    s_crm->add_option("--out", crm.out, "CSV path (default stdout)");
    bind(s_crm, [&] { return run_crm(crm, common); });

    SffArgs sff;
    auto *s_sff = app.add_subcommand("sff", "Spectral form factor of a Pauli-sum Hamiltonian");
    s_sff->add_option("--hamiltonian", sff.hamiltonian, "Pauli-term list")->required();
    s_sff->add_option("--time", sff.time, "Evolution time");
    s_sff->add_option("--k", sff.k, "Block size")->check(CLI::Range(1, 4));
    s_sff->add_option("--samples", sff.samples, "Random unitaries")->check(CLI::PositiveNumber);
    s_sff->add_option("--seed", sff.seed, "Seed")->required();
    s_sff->add_option("--out", sff.out, "CSV path (default stdout)");
    bind(s_sff, [&] { return run_sff(sff, common); });

    CalibrateArgs cal;
    auto *s_cal = app.add_subcommand("calibrate", "Amplification factors from a calibration dataset");
    s_cal->add_option("--data", cal.data, "Calibration dataset JSON")->required();
    s_cal->add_option("--cal-state", cal.cal_state, "Calibration state (default zero)");
    s_cal->add_option("--mode", cal.mode, "factorized | direct");
    s_cal->add_option("--bootstrap-seed", cal.bootstrap_seed);
    s_cal->add_option("--out", cal.out, "Calibration report JSON")->required();
    s_cal->add_option("--summary", cal.summary, "CSV summary path (default stdout)");
    bind(s_cal, [&] { return run_calibrate(cal, common); });

    MitigateArgs mit;
    auto *s_mit = app.add_subcommand("mitigate", "Error-mitigated Pauli estimates");
    s_mit->add_option("--data", mit.data, "Dataset JSON")->required();
    s_mit->add_option("--calibration", mit.calibration, "Calibration report JSON")->required();
    s_mit->add_option("--targets", mit.targets, "Pauli-term list")->required();
    s_mit->add_option("--sigma", mit.sigma, "Bias state: mitigate CRM estimates instead");
    s_mit->add_flag("--clamp", mit.clamp, "Shrink large amplification factors");
    s_mit->add_option("--clamp-threshold", mit.clamp_threshold);
    s_mit->add_option("--clamp-factor", mit.clamp_factor);
    s_mit->add_option("--state", mit.state, "State for exact values");
    s_mit->add_option("--state-seed", mit.state_seed);
    s_mit->add_option("--out", mit.out, "CSV path (default stdout)");
    bind(s_mit, [&] { return run_mitigate(mit, common); });

    DerandArgs der;
    auto *s_der = app.add_subcommand("derandomize", "Greedy derandomized measurement plan");
    s_der->add_option("--targets", der.targets, "Pauli-term list");
    s_der->add_option("--ch2", der.ch2, "Use the cluster-Heisenberg H^2 cross terms on this many qubits");
    s_der->add_option("--k", der.k, "Block size")->check(CLI::Range(1, 4));
    s_der->add_option("--eps", der.eps, "Accuracy parameter")->check(CLI::PositiveNumber);
    s_der->add_option("--bases", der.bases, "Fixed number of bases");
    s_der->add_option("--min-cover", der.min_cover, "Add bases until each target is covered this often");
    s_der->add_option("--candidates", der.candidates, "mub | stabilizer_basis");
    s_der->add_option("--compare-k", der.compare_k, "Comma-separated block sizes to compare, e.g. 1,2");
    s_der->add_option("--out", der.out, "Plan JSON (or comparison CSV with --compare-k)");
    s_der->add_option("--coverage", der.coverage, "Coverage CSV path (default stdout)");
    bind(s_der, [&] { return run_derandomize(der, common); });

    ScanArgs scan;
    auto *s_scan = app.add_subcommand("phase-scan", "Kernel-PCA scan across the SSH transition");
    s_scan->add_option("--n", scan.n, "Even number of sites")->check(CLI::Range(2, 12));
    s_scan->add_option("--k", scan.k, "Block size")->check(CLI::Range(1, 4));
    s_scan->add_option("--v", scan.v, "Intra-cell hopping");
    s_scan->add_option("--w-min", scan.w_min);
    s_scan->add_option("--w-max", scan.w_max);
    s_scan->add_option("--points", scan.points, "Grid points");
    s_scan->add_option("--records", scan.records, "Records per grid point")->check(CLI::PositiveNumber);
    s_scan->add_option("--shots", scan.shots, "Shots per record, averaged in the kernel")->check(CLI::PositiveNumber);
    s_scan->add_option("--tau", scan.tau);
    s_scan->add_option("--gamma", scan.gamma);
    s_scan->add_option("--bootstrap", scan.bootstrap, "Record-bootstrap resamples for the standard errors");
    s_scan->add_option("--noise", scan.noise, "Noise model JSON; enables the mitigated kernel");
    s_scan->add_option("--cal-records", scan.cal_records, "Calibration records under noise");
    s_scan->add_option("--seed", scan.seed, "Seed")->required();
    s_scan->add_option("--out", scan.out, "Scan CSV path (default stdout)");
    s_scan->add_option("--fit", scan.fit, "Fit report JSON path");
    bind(s_scan, [&] { return run_phase_scan(scan, common); });

    auto *s_ver = app.add_subcommand("verify", "Enumeration self-checks");
    bind(s_ver, [] { return run_verify(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitUsage;
    } catch (const std::invalid_argument &e) {
        // ValidationError, DimensionError and malformed numbers.
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return status;
}
