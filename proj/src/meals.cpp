#include "gmpc/meals.hpp"

#include <cmath>

#include "gmpc/error.hpp"

namespace gmpc {

namespace {

// Beyond 40 spreads exp(-z^2/2) underflows to exactly 0 in double, so
// skipping those terms leaves every sum bit-identical.
constexpr double kNegligibleZ = 40.0;

double pulse_value(const MealPulse& m, double t) {
    const double z = (t - m.peak_time()) / m.spread;
    if (std::abs(z) > kNegligibleZ) return 0.0;
    return m.amplitude * std::exp(-0.5 * z * z);
}

}  // namespace

void MealBounds::validate() const {
    for (const Range& r : amplitude)
        if (!(r.lo > 0.0) || r.lo > r.hi) throw ConfigError("meal amplitude range must be positive and ordered");
    if (!(spread.lo > 0.0) || spread.lo > spread.hi) throw ConfigError("meal spread range must be positive and ordered");
    if (!(max_shift >= 0.0)) throw ConfigError("meal time shift must be non-negative");
}

std::array<MealPulse, 3> sample_day_pulses(int day, Rng& rng, const MealBounds& bounds) {
    std::array<MealPulse, 3> out;
    for (std::size_t k = 0; k < 3; ++k) {
        MealPulse& m = out[k];
        m.day = day;
        m.amplitude = uniform(rng, bounds.amplitude[k].lo, bounds.amplitude[k].hi);
        m.center = kNominalMealTimes[k] + uniform(rng, -bounds.max_shift, bounds.max_shift);
        m.spread = uniform(rng, bounds.spread.lo, bounds.spread.hi);
    }
    return out;
}

std::vector<MealPulse> sample_pulses(int first_day, int n_days, Rng& rng, const MealBounds& bounds) {
    bounds.validate();
    std::vector<MealPulse> pulses;
    pulses.reserve(static_cast<std::size_t>(std::max(n_days, 0)) * 3);
    for (int d = 0; d < n_days; ++d) {
        const auto day = sample_day_pulses(first_day + d, rng, bounds);
        pulses.insert(pulses.end(), day.begin(), day.end());
    }
    return pulses;
}

double evaluate(std::span<const MealPulse> pulses, double t_days) {
    double sum = 0.0;
    for (const MealPulse& m : pulses) {
        const double v = pulse_value(m, t_days);
        if (v != 0.0) sum += v;
    }
    return sum;
}

std::vector<double> hourly_profile(std::span<const MealPulse> pulses, int first_hour, int n_hours) {
    std::vector<double> out(static_cast<std::size_t>(std::max(n_hours, 0)), 0.0);
    if (out.empty()) return out;
    // Accumulate pulse by pulse over the hours each one can reach; the
    // per-hour summation order matches evaluate().
    for (const MealPulse& m : pulses) {
        const double reach = kNegligibleZ * m.spread;
        const double peak_hour = m.peak_time() * 24.0;
        const long lo = std::max<long>(0, static_cast<long>(std::floor(peak_hour - reach * 24.0)) - 1 - first_hour);
        const long hi = std::min<long>(n_hours - 1, static_cast<long>(std::ceil(peak_hour + reach * 24.0)) + 1 - first_hour);
        for (long h = lo; h <= hi; ++h) {
            const double v = pulse_value(m, static_cast<double>(first_hour + h) / 24.0);
            if (v != 0.0) out[static_cast<std::size_t>(h)] += v;
        }
    }
    return out;
}

std::vector<std::vector<double>> sample_scenarios(int count, int horizon_days, Rng& rng, const MealBounds& bounds) {
    if (count < 1) throw ConfigError("scenario count must be at least 1");
    if (horizon_days < 0) throw ConfigError("scenario horizon must be non-negative");
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        const auto pulses = sample_pulses(0, horizon_days, rng, bounds);
        out.push_back(hourly_profile(pulses, 0, horizon_days * 24));
    }
    return out;
}

}  // namespace gmpc
