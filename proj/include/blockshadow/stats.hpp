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
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "blockshadow/clifford.hpp"

namespace blockshadow {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Independent generator for work item `index` of a run seeded with `seed`.
inline Rng substream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
    const std::uint64_t h = detail::splitmix64(detail::splitmix64(detail::splitmix64(seed) ^ index) ^ salt);
    return Rng(h);
}

/// Neumaier compensated summation.
class CompensatedSum {
   public:
    void add(double v) {
        double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

   private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double mean(std::span<const double> v) {
    CompensatedSum s;
    for (double x : v) s.add(x);
    return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    CompensatedSum s;
    for (double x : v) s.add((x - m) * (x - m));
    return s.value() / static_cast<double>(v.size() - 1);
}

/// Standard deviation of the bootstrap distribution of `stat` over resamples of `v`.
inline double bootstrap_stderr(std::span<const double> v, const std::function<double(std::span<const double>)> &stat,
                               int resamples, std::uint64_t seed) {
    if (v.size() < 2) return 0.0;
    Rng rng = substream(seed, v.size(), 0xb007);
    std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
    std::vector<double> draw(v.size()), stats(static_cast<std::size_t>(resamples));
    for (auto &s : stats) {
        for (auto &d : draw) d = v[pick(rng)];
        s = stat(draw);
    }
    return std::sqrt(sample_variance(stats));
}

inline double median_of_means(std::span<const double> v, int groups) {
    groups = std::clamp<int>(groups, 1, static_cast<int>(std::max<std::size_t>(v.size(), 1)));
    std::vector<double> means;
    const std::size_t size = v.size() / groups;
    for (int g = 0; g < groups; ++g) {
        std::size_t first = g * size, last = (g + 1 == groups) ? v.size() : first + size;
        means.push_back(mean(v.subspan(first, last - first)));
    }
    std::nth_element(means.begin(), means.begin() + means.size() / 2, means.end());
    if (means.size() % 2 == 1) return means[means.size() / 2];
    double hi = means[means.size() / 2];
    double lo = *std::max_element(means.begin(), means.begin() + means.size() / 2);
    return 0.5 * (lo + hi);
}

enum class StderrMethod { bootstrap, analytic };

struct EstimatorOptions {
    StderrMethod stderr_method = StderrMethod::bootstrap;
    int resamples = 1000;
    std::uint64_t bootstrap_seed = 0x5eedb007;
    /// 0 selects the plain mean; otherwise the number of median-of-means groups.
    int mom_groups = 0;
    int threads = 0;
};

struct Estimate {
    double mean = 0.0;
    double stderr = 0.0;
    std::vector<double> per_record;
};

inline Estimate summarize(std::vector<double> per_record, const EstimatorOptions &opt) {
    Estimate e;
    auto stat = [&opt](std::span<const double> v) {
        return opt.mom_groups > 0 ? median_of_means(v, opt.mom_groups) : mean(v);
    };
    e.mean = stat(per_record);
    if (opt.stderr_method == StderrMethod::analytic) {
        e.stderr = per_record.size() > 1 ? std::sqrt(sample_variance(per_record) / per_record.size()) : 0.0;
    } else {
        e.stderr = bootstrap_stderr(per_record, stat, opt.resamples, opt.bootstrap_seed);
    }
    e.per_record = std::move(per_record);
    return e;
}

/// Worker count: explicit value, else SHADOW_THREADS, else hardware concurrency.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char *env = std::getenv("SHADOW_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers with static striping.
/// Results must be written to per-index slots so the outcome is schedule independent.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn &&fn) {
    const int workers = static_cast<int>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace blockshadow
