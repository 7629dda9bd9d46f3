#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mmlat/errors.hpp"

namespace mmlat {

/// Empirical distribution of the effective channel gain: a sorted sample
/// store with right-continuous CDF and lower-order-statistic quantiles.
///
/// The quantile convention matters for reliability accounting: inverse_cdf
/// returns the smallest sample whose empirical CDF is >= eps, so a power
/// level provisioned from it never yields an achieved error rate above the
/// requested target. Immutable after construction, safe to share across
/// threads.
class GainDistribution {
  public:
    static GainDistribution from_samples(std::vector<double> samples) {
        if (samples.empty()) throw ConfigError("gain distribution needs samples");
        for (double s : samples) {
            if (!(s > 0.0) || !std::isfinite(s))
                throw ConfigError("gain samples must be positive and finite");
        }
        std::sort(samples.begin(), samples.end());
        return GainDistribution(std::move(samples));
    }

    std::size_t size() const { return samples_.size(); }
    double min() const { return samples_.front(); }
    double max() const { return samples_.back(); }

    double mean() const {
        double acc = 0.0;
        for (double s : samples_) acc += s;
        return acc / static_cast<double>(samples_.size());
    }

    /// Fraction of samples <= x (empirical CDF, right-continuous).
    double cdf(double x) const {
        const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
        return static_cast<double>(it - samples_.begin()) /
               static_cast<double>(samples_.size());
    }

    /// Smallest sample with cdf(sample) >= eps; the lower order statistic,
    /// no interpolation. eps <= 0 asks for the infimum of an empty set.
    double inverse_cdf(double eps) const {
        if (!(eps > 0.0)) throw DomainError("inverse_cdf requires eps > 0");
        if (eps > 1.0) throw DomainError("inverse_cdf requires eps <= 1");
        return samples_[rank_of(eps) - 1];
    }

    /// 1-based rank k of the eps-quantile: smallest integer with k/n >= eps.
    /// Guards against n*eps landing an ulp above an exact integer.
    std::size_t rank_of(double eps) const {
        const double n = static_cast<double>(samples_.size());
        const double t = eps * n;
        auto k = static_cast<long long>(std::ceil(t - 1e-9 * std::max(t, 1.0)));
        if (k < 1) k = 1;
        if (k > static_cast<long long>(samples_.size()))
            k = static_cast<long long>(samples_.size());
        return static_cast<std::size_t>(k);
    }

    const std::vector<double>& samples() const { return samples_; }

  private:
    explicit GainDistribution(std::vector<double> sorted) : samples_(std::move(sorted)) {}

    std::vector<double> samples_;
};

} // namespace mmlat
