#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lobliq/liquidity.hpp"

namespace lobliq {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double se_slope = 0.0;
    double se_intercept = 0.0;
    double r_squared = 0.0;
    /// Two-sided t-test p-value for slope = 0.
    double p_value_slope = 1.0;
    std::size_t n_points = 0;
};

/// Throws Errc::fit_error with fewer than 3 points or zero variance in x.
LinearFit ordinary_least_squares(std::span<const Point> points);

enum class FitSpace {
    log_log,    ///< linear least squares on (log x, log y)
    nonlinear,  ///< least squares on y = K x^-alpha directly
};

/// Power law y = K · x^(-alpha). alpha is the decay exponent, positive when
/// y falls with x.
struct FitResult {
    double K = 0.0;
    double alpha = 0.0;
    double se_K = 0.0;
    double se_alpha = 0.0;
    double r_squared = 0.0;
    double p_value_alpha = 1.0;
    std::size_t n_points = 0;
    FitSpace space = FitSpace::log_log;
};

/// Requires >= 3 points with strictly positive coordinates (Errc::domain_error
/// otherwise); zero variance in log x raises Errc::fit_error.
FitResult power_law_fit(std::span<const Point> points, FitSpace space = FitSpace::log_log);

inline constexpr std::size_t kMinBinCount = 30;

/// Binned conditional means. Bins whose occupancy is below `min_count` are
/// merged with the following ones; empty bins are dropped and reported in
/// `warnings`.
struct ConditionalCurve {
    std::vector<double> bin_centers;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> means;
    std::vector<double> se;    ///< standard error of the mean
    std::vector<double> bars;  ///< 2 × se, for display
    std::vector<std::size_t> counts;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const { return means.size(); }
};

/// Geometric bin edges between the smallest and largest abscissa. Centres are
/// the geometric means of the member abscissae.
ConditionalCurve log_binning(std::span<const Point> points, int n_bins, std::size_t min_count = kMinBinCount);

/// R² of the power-law fit of returns against one side's exponential
/// liquidity for each δ. Positive sign uses windows with r > 0 and the ask
/// side; negative uses r < 0, the bid side and |r|.
struct DeltaScanEntry {
    double delta = 0.0;
    bool valid = false;
    double r_squared = 0.0;
    FitResult fit;
    std::string error;
};

struct DeltaScan {
    Sign sign = Sign::Positive;
    std::vector<DeltaScanEntry> entries;
    std::optional<double> best_delta;
};

/// `return_scale` divides every return (e.g. the dataset's return standard
/// deviation); it changes K but not alpha or R².
DeltaScan delta_scan(std::span<const BookWindow> windows, std::span<const double> delta_values, Sign sign, double norm,
                     double return_scale = 1.0);

/// (liquidity, return) pairs of windows with a return of the given sign,
/// liquidity measured on the side under pressure (ask for positive).
std::vector<Point> liquidity_return_points(std::span<const BookWindow> windows, double delta, Sign sign, double norm,
                                           double return_scale = 1.0);

struct ImbalanceSample {
    double imbalance = 0.0;
    double log_return = 0.0;
};

struct SignFrequencies {
    std::vector<double> positive;
    std::vector<double> zero;
    std::vector<double> negative;
};

struct ImbalanceConditionals {
    ConditionalCurve mean_return;
    /// Aligned with mean_return bins. zero = 1 - (positive + negative), so
    /// (positive + negative) + zero == 1 exactly.
    SignFrequencies frequencies;
};

/// Equal-width imbalance bins over [-1, 1].
ImbalanceConditionals imbalance_conditionals(std::span<const ImbalanceSample> samples, int n_bins,
                                             std::size_t min_count = kMinBinCount);

}  // namespace lobliq
