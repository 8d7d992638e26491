#pragma once

#include <array>
#include <span>
#include <vector>

#include "gmpc/random.hpp"
#include "gmpc/sim.hpp"

namespace gmpc {

/// One Gaussian meal pulse. `center` and `spread` are in days; the pulse
/// peaks at absolute time day + center.
struct MealPulse {
    int day = 0;
    double amplitude = 0.0;
    double center = 0.0;
    double spread = 1.0 / 24.0;

    double peak_time() const { return static_cast<double>(day) + center; }
};

/// Nominal breakfast, lunch and dinner times (fraction of a day).
inline constexpr std::array<double, 3> kNominalMealTimes{8.0 / 24.0, 12.0 / 24.0, 18.0 / 24.0};

struct MealBounds {
    std::array<Range, 3> amplitude{Range{0.6, 1.2}, Range{0.6, 1.5}, Range{0.5, 1.8}};
    double max_shift = 1.5 / 24.0;
    Range spread{0.2 / 24.0, 1.0 / 24.0};

    void validate() const;
};

std::array<MealPulse, 3> sample_day_pulses(int day, Rng& rng, const MealBounds& bounds = {});

/// Pulses for days [first_day, first_day + n_days), three per day, in day order.
std::vector<MealPulse> sample_pulses(int first_day, int n_days, Rng& rng, const MealBounds& bounds = {});

/// Sum of every pulse at time t (days).
double evaluate(std::span<const MealPulse> pulses, double t_days);

/// Point evaluation on the hourly grid: element h is evaluate(pulses, (first_hour + h) / 24).
std::vector<double> hourly_profile(std::span<const MealPulse> pulses, int first_hour, int n_hours);

/// J independent horizon-length hourly profiles (days 0..horizon_days-1).
std::vector<std::vector<double>> sample_scenarios(int count, int horizon_days, Rng& rng,
                                                  const MealBounds& bounds = {});

}  // namespace gmpc
