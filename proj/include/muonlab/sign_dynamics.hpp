#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "muonlab/random.hpp"

namespace muonlab {

/// How `eps` is read: as the half-width of the target interval |s| <= eps, or
/// as a loss level 1/2 s^2 <= eps (half-width sqrt(2 eps)).
enum class TargetConvention { Interval, Loss };

std::string_view to_string(TargetConvention c);

struct SignDynConfig {
    double alpha = 0.1;
    double sigma = 0.0;
    double eps = 0.02;
    double s0 = 1.026;
    int n_max = 1000;
    int n_samples = 10000;
    TargetConvention target = TargetConvention::Interval;

    /// Half-width of the target interval under the configured convention.
    double half_width() const;
    /// ceil(|s0| / alpha), the noiseless cycling time.
    int baseline() const;
    void validate() const;
};

/// alpha = 0.1, eps = alpha / 5 (interval), s0 = 10 alpha + 1.3 eps, cap 1000,
/// 1e4 samples.
SignDynConfig reference_sign_config();

/// Log-spaced sigma grid from 1e-3 to 10 with `per_decade` points per decade
/// (endpoints included).
std::vector<double> reference_sigma_grid(int per_decade = 10);

double loss_eps_to_half_width(double eps_loss);

/// sign with sign(0) = 0.
double sign0(double x);

/// s - alpha (sign(s) + sigma xi)
double step_1d(double s, double alpha, double sigma, double xi);

struct HittingOutcome {
    /// min(T, n_max)
    int time = 0;
    /// True when the target was not reached in steps 0..n_max.
    bool capped = false;
};

/// First t with |s_t| <= half_width, drawing xi from `stream`.
HittingOutcome hitting_time(const SignDynConfig& config, RandomStream& stream);

struct HittingTimeSummary {
    double sigma = 0.0;
    double median = 0.0;
    double q025 = 0.0;
    double q975 = 0.0;
    double frac_capped = 0.0;
    int baseline = 0;
    int n_samples = 0;
    std::uint64_t seed = 0;
    /// Fraction of samples with capped time strictly above the threshold
    /// passed to monte_carlo_summary (0 when none was given).
    double frac_above = 0.0;
    int above_threshold = 0;
};

/// Empirical quantile with linear interpolation between order statistics
/// (position p (n - 1) in the sorted sample).
double empirical_quantile(const std::vector<double>& sorted, double p);

/// Sample j uses its own stream derived from base_seed and j, so results do
/// not depend on the worker count.
HittingTimeSummary monte_carlo_summary(const SignDynConfig& config, std::uint64_t base_seed,
                                       int threads = 1, int above_threshold = 0);

/// One summary per sigma; sigma i draws from a sub-stream derived from
/// base_seed and i.
std::vector<HittingTimeSummary> sigma_sweep(const SignDynConfig& config,
                                            const std::vector<double>& sigma_grid,
                                            std::uint64_t base_seed, int threads = 1,
                                            int above_threshold = 0);

enum class MomentumVariant1d { OrthSgdm, StandardPre, NesterovPre };

MomentumVariant1d parse_momentum_variant_1d(std::string_view name);

/// Noiseless scalar recursion on 1/2 s^2 with P = sign. Returns s_0..s_steps.
std::vector<double> momentum_variant_1d(double s0, double eta, MomentumVariant1d variant, double mu,
                                        int steps);

} // namespace muonlab
