#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "gmpc/error.hpp"
#include "gmpc/meals.hpp"

using namespace gmpc;

TEST_SUITE("meals") {

TEST_CASE("zero shift puts meals at the nominal times") {
    MealBounds b;
    b.max_shift = 0.0;
    Rng rng(1);
    const auto day = sample_day_pulses(4, rng, b);
    for (int k = 0; k < 3; ++k) {
        CHECK(day[k].center == kNominalMealTimes[k]);
        CHECK(day[k].day == 4);
    }
    CHECK(kNominalMealTimes[0] == 8.0 / 24.0);
    CHECK(kNominalMealTimes[1] == 12.0 / 24.0);
    CHECK(kNominalMealTimes[2] == 18.0 / 24.0);
}

TEST_CASE("sampled pulses respect their ranges") {
    const MealBounds b;
    Rng rng = make_rng(2, "meal-ranges");
    for (int i = 0; i < 10000; ++i) {
        const auto day = sample_day_pulses(i, rng, b);
        for (int k = 0; k < 3; ++k) {
            REQUIRE(day[k].amplitude >= b.amplitude[k].lo);
            REQUIRE(day[k].amplitude <= b.amplitude[k].hi);
            REQUIRE(std::abs(day[k].center - kNominalMealTimes[k]) <= b.max_shift);
            REQUIRE(day[k].spread >= b.spread.lo);
            REQUIRE(day[k].spread <= b.spread.hi);
        }
    }
}

TEST_CASE("same seed gives the same pulses") {
    Rng a(7), b(7);
    const auto x = sample_pulses(0, 5, a), y = sample_pulses(0, 5, b);
    REQUIRE(x.size() == 15);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(x[i].amplitude == y[i].amplitude);
        CHECK(x[i].center == y[i].center);
        CHECK(x[i].spread == y[i].spread);
    }
}

TEST_CASE("pulse peak, tail and linearity") {
    const MealPulse m{2, 1.3, 0.5, 0.5 / 24.0};
    const std::vector<MealPulse> one{m}, two{m, m};
    CHECK(evaluate(one, m.peak_time()) == 1.3);
    CHECK(evaluate(one, m.peak_time() + 10.5 * m.spread) < 1.3e-20);
    for (double t : {2.3, 2.45, 2.5, 2.52, 2.7}) CHECK(evaluate(two, t) == 2.0 * evaluate(one, t));
}

TEST_CASE("hourly grid equals point evaluation and is non-negative") {
    Rng rng(9);
    const auto pulses = sample_pulses(0, 4, rng);
    const auto hourly = hourly_profile(pulses, 0, 96);
    REQUIRE(hourly.size() == 96);
    for (int h = 0; h < 96; ++h) {
        CHECK(hourly[h] == evaluate(pulses, h / 24.0));
        CHECK(hourly[h] >= 0.0);
    }
    const auto offset = hourly_profile(pulses, 30, 20);
    for (int h = 0; h < 20; ++h) CHECK(offset[h] == hourly[30 + h]);
}

TEST_CASE("scenario shapes and seeding") {
    Rng rng(3);
    const auto s = sample_scenarios(8, 3, rng);
    REQUIRE(s.size() == 8);
    for (const auto& v : s) CHECK(v.size() == 72);

    Rng a(4), b(4);
    const auto one = sample_scenarios(1, 3, a);
    const auto direct = hourly_profile(sample_pulses(0, 3, b), 0, 72);
    CHECK(one.front() == direct);

    CHECK_THROWS_AS(sample_scenarios(0, 3, rng), ConfigError);
}

TEST_CASE("mean daily intake matches its expectation") {
    const MealBounds b;
    Rng rng = make_rng(5, "meal-intake");
    const int n = 4000;
    const double dt = 1.0 / (24.0 * 30.0);
    std::vector<double> amp_sum(n), intake(n);
    for (int i = 0; i < n; ++i) {
        const auto pulses = sample_pulses(0, 1, rng);
        amp_sum[i] = pulses[0].amplitude + pulses[1].amplitude + pulses[2].amplitude;
        double area = 0.0;
        for (double t = 0.0; t < 1.0; t += dt) area += evaluate(pulses, t) * dt;
        intake[i] = area;
    }
    auto mean_se = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()))};
    };
    double mid = 0.0;
    for (const Range& r : b.amplitude) mid += 0.5 * (r.lo + r.hi);
    const auto [m_amp, se_amp] = mean_se(amp_sum);
    CHECK(std::abs(m_amp - mid) < 3.0 * se_amp);

    // Each pulse integrates to amplitude * spread * sqrt(2 pi); amplitude and spread are independent.
    const double expected = mid * 0.5 * (b.spread.lo + b.spread.hi) * std::sqrt(2.0 * M_PI);
    const auto [m_int, se_int] = mean_se(intake);
    CHECK(std::abs(m_int - expected) < 3.0 * se_int);
}

}  // TEST_SUITE
