#include "muonlab/sign_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "muonlab/errors.hpp"
#include "muonlab/parallel.hpp"

namespace muonlab {

std::string_view to_string(TargetConvention c) {
    return c == TargetConvention::Interval ? "interval" : "loss";
}

double SignDynConfig::half_width() const {
    return target == TargetConvention::Interval ? eps : loss_eps_to_half_width(eps);
}

int SignDynConfig::baseline() const {
    return static_cast<int>(std::ceil(std::abs(s0) / alpha));
}

void SignDynConfig::validate() const {
    if (!(alpha > 0.0) || !(sigma >= 0.0) || !(eps > 0.0) || !std::isfinite(s0)) {
        throw InvalidArgument("sign dynamics: need alpha > 0, sigma >= 0, eps > 0, finite s0");
    }
    if (n_max < 1 || n_samples < 1) {
        throw InvalidArgument("sign dynamics: n_max and n_samples must be positive");
    }
}

SignDynConfig reference_sign_config() {
    SignDynConfig c;
    c.alpha = 0.1;
    c.eps = c.alpha / 5.0;
    c.s0 = 10.0 * c.alpha + 1.3 * c.eps;
    c.n_max = 1000;
    c.n_samples = 10000;
    c.target = TargetConvention::Interval;
    return c;
}

std::vector<double> reference_sigma_grid(int per_decade) {
    if (per_decade < 1) {
        throw InvalidArgument("sigma grid: per_decade must be positive");
    }
    const int points = 4 * per_decade + 1;
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        grid[static_cast<std::size_t>(i)] = std::pow(10.0, -3.0 + static_cast<double>(i) / per_decade);
    }
    grid.front() = 1e-3;
    grid.back() = 10.0;
    return grid;
}

double loss_eps_to_half_width(double eps_loss) { return std::sqrt(2.0 * eps_loss); }

double sign0(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

double step_1d(double s, double alpha, double sigma, double xi) {
    return s - alpha * (sign0(s) + sigma * xi);
}

HittingOutcome hitting_time(const SignDynConfig& config, RandomStream& stream) {
    const double h = config.half_width();
    double s = config.s0;
    for (int t = 0; t <= config.n_max; ++t) {
        if (std::abs(s) <= h) {
            return {std::min(t, config.n_max), false};
        }
        // Noise is drawn only when sigma > 0 so the noiseless path consumes nothing.
        const double xi = config.sigma > 0.0 ? stream.normal() : 0.0;
        s = step_1d(s, config.alpha, config.sigma, xi);
    }
    return {config.n_max, true};
}

double empirical_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) {
        throw InvalidArgument("quantile of an empty sample");
    }
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

HittingTimeSummary monte_carlo_summary(const SignDynConfig& config, std::uint64_t base_seed,
                                       int threads, int above_threshold) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.n_samples);
    std::vector<double> times(n);
    std::vector<char> capped(n);
    parallel_for(n, threads, [&](std::size_t j) {
        RandomStream stream(RandomStream::derive_seed(base_seed, j));
        const HittingOutcome out = hitting_time(config, stream);
        times[j] = out.time;
        capped[j] = out.capped ? 1 : 0;
    });

    HittingTimeSummary s;
    s.sigma = config.sigma;
    s.baseline = config.baseline();
    s.n_samples = config.n_samples;
    s.seed = base_seed;
    s.above_threshold = above_threshold;
    s.frac_capped = static_cast<double>(std::count(capped.begin(), capped.end(), 1)) / static_cast<double>(n);
    if (above_threshold > 0) {
        const auto above = std::count_if(times.begin(), times.end(),
                                         [&](double t) { return t > above_threshold; });
        s.frac_above = static_cast<double>(above) / static_cast<double>(n);
    }
    std::sort(times.begin(), times.end());
    s.median = empirical_quantile(times, 0.5);
    s.q025 = empirical_quantile(times, 0.025);
    s.q975 = empirical_quantile(times, 0.975);
    return s;
}

std::vector<HittingTimeSummary> sigma_sweep(const SignDynConfig& config,
                                            const std::vector<double>& sigma_grid,
                                            std::uint64_t base_seed, int threads,
                                            int above_threshold) {
    if (!std::is_sorted(sigma_grid.begin(), sigma_grid.end())) {
        throw InvalidArgument("sigma grid must be sorted ascending");
    }
    std::vector<HittingTimeSummary> out;
    out.reserve(sigma_grid.size());
    for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
        SignDynConfig c = config;
        c.sigma = sigma_grid[i];
        // Scramble the per-sigma seed so the per-sample XOR derivation below
        // cannot alias across (sigma, sample) pairs.
        const std::uint64_t sigma_seed = RandomStream(RandomStream::derive_seed(base_seed, i)).next_u64();
        HittingTimeSummary s = monte_carlo_summary(c, sigma_seed, threads, above_threshold);
        s.seed = base_seed;
        out.push_back(s);
    }
    return out;
}

MomentumVariant1d parse_momentum_variant_1d(std::string_view name) {
    if (name == "orth_sgdm") {
        return MomentumVariant1d::OrthSgdm;
    }
    if (name == "std_pre") {
        return MomentumVariant1d::StandardPre;
    }
    if (name == "nesterov_pre") {
        return MomentumVariant1d::NesterovPre;
    }
    throw UnknownVariant("unknown momentum variant '" + std::string(name) + "'");
}

std::vector<double> momentum_variant_1d(double s0, double eta, MomentumVariant1d variant, double mu,
                                        int steps) {
    if (!(mu >= 0.0 && mu < 1.0)) {
        throw InvalidArgument("momentum_variant_1d: mu must lie in [0, 1)");
    }
    if (steps < 0) {
        throw InvalidArgument("momentum_variant_1d: steps must be non-negative");
    }
    std::vector<double> s(static_cast<std::size_t>(steps) + 1);
    s[0] = s0;
    double m = 0.0;
    for (int t = 0; t < steps; ++t) {
        const double x = s[static_cast<std::size_t>(t)];
        const double g = x;
        double step = 0.0;
        switch (variant) {
        case MomentumVariant1d::OrthSgdm:
            m = mu * m + (1.0 - mu) * sign0(g);
            step = m;
            break;
        case MomentumVariant1d::StandardPre:
            m = mu * m + (1.0 - mu) * g;
            step = sign0(m);
            break;
        case MomentumVariant1d::NesterovPre: {
            m = mu * m + (1.0 - mu) * g;
            step = sign0(mu * m + (1.0 - mu) * g);
            break;
        }
        }
        s[static_cast<std::size_t>(t) + 1] = x - eta * step;
    }
    return s;
}

} // namespace muonlab
