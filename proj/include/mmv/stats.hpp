#ifndef MMV_STATS_HPP
#define MMV_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

namespace mmv {

/// Neumaier-compensated running sums of x and x^2.
///
/// Partials combine associatively in a fixed order, so chunked parallel
/// accumulation reproduces the serial result bit for bit.
class MomentSums {
public:
    void add(double x) {
        add_compensated(sum_, comp_, x);
        add_compensated(sum_sq_, comp_sq_, x * x);
        ++count_;
    }

    void combine(const MomentSums& other) {
        add_compensated(sum_, comp_, other.sum());
        add_compensated(sum_sq_, comp_sq_, other.sum_sq());
        count_ += other.count_;
    }

    std::int64_t count() const { return count_; }
    double sum() const { return sum_ + comp_; }
    double sum_sq() const { return sum_sq_ + comp_sq_; }

    double mean() const { return count_ > 0 ? sum() / static_cast<double>(count_) : 0.0; }

    /// Unbiased sample variance, clamped at zero against rounding.
    double variance() const {
        if (count_ < 2) return 0.0;
        const double n = static_cast<double>(count_);
        const double m = mean();
        return std::max(0.0, (sum_sq() - n * m * m) / (n - 1.0));
    }

    double std_error() const {
        return count_ > 0 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
    }

private:
    static void add_compensated(double& s, double& c, double x) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x)) {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }

    double sum_ = 0.0, comp_ = 0.0;
    double sum_sq_ = 0.0, comp_sq_ = 0.0;
    std::int64_t count_ = 0;
};

namespace detail {
inline constexpr std::int64_t kStatsBlockSize = 4096;
}

/// Evaluates fn(unit_index, partial) for unit_index in [0, n_units) and
/// reduces per-block partials in block order. Partial needs a default
/// constructor and combine(const Partial&). The block partition is fixed, so
/// the combined result does not depend on n_threads.
template <class Partial, class Fn>
Partial accumulate_partials(std::int64_t n_units, int n_threads, Fn&& fn) {
    const std::int64_t block = detail::kStatsBlockSize;
    const std::int64_t n_blocks = (n_units + block - 1) / block;
    if (n_threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n_threads = hw > 0 ? static_cast<int>(hw) : 1;
    }
    n_threads = static_cast<int>(std::min<std::int64_t>(n_threads, std::max<std::int64_t>(n_blocks, 1)));

    std::vector<Partial> partials(static_cast<std::size_t>(std::max<std::int64_t>(n_blocks, 1)));
    auto run_block = [&](std::int64_t b) {
        Partial& sums = partials[static_cast<std::size_t>(b)];
        const std::int64_t lo = b * block;
        const std::int64_t hi = std::min(lo + block, n_units);
        for (std::int64_t u = lo; u < hi; ++u) fn(u, sums);
    };

    if (n_threads <= 1) {
        for (std::int64_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(n_threads));
        for (int w = 0; w < n_threads; ++w) {
            workers.emplace_back([&, w] {
                for (std::int64_t b = w; b < n_blocks; b += n_threads) run_block(b);
            });
        }
        for (auto& t : workers) t.join();
    }

    Partial total;
    for (const auto& p : partials) total.combine(p);
    return total;
}

template <class Fn>
MomentSums accumulate_units(std::int64_t n_units, int n_threads, Fn&& fn) {
    return accumulate_partials<MomentSums>(n_units, n_threads, std::forward<Fn>(fn));
}

}  // namespace mmv

#endif  // MMV_STATS_HPP
