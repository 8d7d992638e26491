#include <cmath>
#include <vector>

#include "doctest.h"
#include "gmpc/error.hpp"
#include "gmpc/random.hpp"
#include "gmpc/sim.hpp"

using namespace gmpc;

TEST_SUITE("sim") {

TEST_CASE("degenerate ranges reproduce the parameters exactly") {
    PatientParams p;
    p.k_e = 0.42;
    p.k_rec = 0.011;
    p.eta_r = -0.2;
    const PatientParams q = sample_patient(17, ParamBounds::degenerate(p));
    CHECK(q.k_e == p.k_e);
    CHECK(q.k_rec == p.k_rec);
    CHECK(q.eta_r == p.eta_r);
    CHECK(q.a_high == p.a_high);
}

TEST_CASE("sampling is deterministic per seed and rejects inverted ranges") {
    const ParamBounds b;
    const PatientParams a = sample_patient(99, b), c = sample_patient(99, b);
    CHECK(a.k_bind == c.k_bind);
    CHECK(a.eta_d == c.eta_d);
    CHECK(sample_patient(100, b).k_bind != a.k_bind);

    ParamBounds bad;
    bad.k_e = {0.8, 0.3};
    CHECK_THROWS_AS(sample_patient(1, bad), ConfigError);
}

TEST_CASE("uniform k_e mean lies within three standard errors") {
    ParamBounds b;
    b.k_e = {0.1, 0.5};
    const int n = 1000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_patient(derive_seed(5, "k_e", static_cast<std::uint64_t>(i)), b).k_e;
    const double se = (0.4 / std::sqrt(12.0)) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum / n - 0.3) < 3.0 * se);
}

TEST_CASE("derivative terms") {
    PatientParams p;
    SimState s{0.0, 1.0, 0.0};
    StateRate r = derivative(s, 0.0, 0.0, p);
    CHECK(r.d_acid == p.s0);
    CHECK(r.d_pump == 0.0);
    CHECK(r.d_drug == 0.0);

    s = {0.7, 0.0, 0.3};
    r = derivative(s, 1.3, 0.0, p);
    CHECK(r.d_acid == doctest::Approx(-p.k_A * 0.7).epsilon(1e-15));

    s = {0.0, 0.5, 0.0};
    r = derivative(s, 0.0, 0.0, p);
    CHECK(r.d_pump == doctest::Approx(0.5 * p.k_rec).epsilon(1e-15));

    s = {0.0, 1.0, 2.0};
    r = derivative(s, 0.0, 0.4, p);
    CHECK(r.d_drug == doctest::Approx(-p.k_e * 2.0 + 0.4).epsilon(1e-15));
}

TEST_CASE("rk4 step matches exponential decay") {
    PatientParams p;
    p.s0 = 0.0;
    p.k_A = 1.0;
    const SimState next = step_rk4({1.0, 0.0, 0.0}, 0.0, 0.0, p, 0.1);
    CHECK(std::abs(next.acid - std::exp(-0.1)) < 1e-6);
}

TEST_CASE("rk4 rejects non-positive steps and keeps the zero fixed point") {
    PatientParams p;
    CHECK_THROWS_AS(step_rk4({1.0, 1.0, 0.0}, 0.0, 0.0, p, 0.0), DomainError);
    CHECK_THROWS_AS(step_rk4({1.0, 1.0, 0.0}, 0.0, 0.0, p, -0.1), DomainError);
    p.s0 = 0.0;
    const SimState rest{0.0, 1.0, 0.0};
    CHECK(step_rk4(rest, 0.0, 0.0, p, 0.05) == rest);
    // The all-zero state is only fixed once pump regeneration is switched off.
    const SimState z{0.0, 0.0, 0.0};
    CHECK(step_rk4(z, 0.0, 0.0, p, 0.05).pump > 0.0);
    p.k_rec = 0.0;
    CHECK(step_rk4(z, 0.0, 0.0, p, 0.05) == z);
}

TEST_CASE("rk4 error shrinks at fourth order over one decade of dt") {
    PatientParams p;
    p.s0 = 0.0;
    p.k_A = 1.0;
    auto error_at = [&](double dt) {
        const int steps = static_cast<int>(std::lround(2.0 / dt));
        SimState s{1.0, 0.0, 0.0};
        for (int i = 0; i < steps; ++i) s = step_rk4(s, 0.0, 0.0, p, dt);
        return std::abs(s.acid - std::exp(-2.0));
    };
    const double ratio = error_at(0.1) / error_at(0.05);
    CHECK(ratio == doctest::Approx(16.0).epsilon(0.05));
    const double order = std::log10(error_at(0.2) / error_at(0.02));
    CHECK(order >= 3.8);
}

TEST_CASE("episode inputs are validated") {
    PatientParams p;
    const std::vector<double> m(5, 0.0), d(4, 0.0);
    CHECK_THROWS_AS(simulate_episode(p, m, d), ShapeError);
    CHECK(simulate_episode(p, std::vector<double>{}, std::vector<double>{}).empty());
    const std::vector<double> m4(4, 0.0);
    CHECK_THROWS_AS(simulate_episode(p, m4, d, 0.07), DomainError);
}

TEST_CASE("undosed acid settles at s0/k_A") {
    PatientParams p;
    p.s0 = 1.1;
    p.k_A = 0.7;
    const int hours = static_cast<int>(std::ceil(10.0 / p.k_A));
    const std::vector<double> zeros(static_cast<std::size_t>(hours), 0.0);
    SimState s{0.0, 1.0, 0.0};
    const auto acid = simulate_episode(p, zeros, zeros, kDefaultSubStep, s);
    CHECK(std::abs(acid.back() - p.s0 / p.k_A) <= 0.01 * p.s0 / p.k_A);
}

TEST_CASE("steady state under constant dosing matches the analytic fixed point") {
    PatientParams p;
    const double u = 0.6;  // per hour, infused over the hour
    const int hours = 3000;
    const std::vector<double> meals(hours, 0.0), doses(hours, u);
    const auto acid = simulate_episode(p, meals, doses);
    const double c_star = u / p.k_e;
    const double p_star = p.k_rec / (p.k_rec + p.k_bind * c_star);
    CHECK(acid.back() == doctest::Approx(p_star * p.s0 / p.k_A).epsilon(1e-6));
    CHECK(acid.back() < p.s0 / p.k_A);
}

TEST_CASE("pointwise larger dosing never raises steady-state acid") {
    Rng rng = make_rng(11, "monotone");
    for (int trial = 0; trial < 20; ++trial) {
        const PatientParams p = sample_patient(derive_seed(11, "monotone-patient", trial), ParamBounds{});
        const int hours = 2400;
        std::vector<double> meals(hours, 0.0), lo(hours), hi(hours);
        const double base = uniform(rng, 0.0, 0.5), extra = uniform(rng, 0.0, 0.5);
        for (int h = 0; h < hours; ++h) {
            meals[h] = 0.5;
            lo[h] = base;
            hi[h] = base + extra;
        }
        const auto a_lo = simulate_episode(p, meals, lo);
        const auto a_hi = simulate_episode(p, meals, hi);
        CHECK(a_hi.back() <= a_lo.back() + 1e-9);
    }
}

TEST_CASE("states stay admissible under random inputs") {
    Rng rng = make_rng(12, "admissible");
    for (int trial = 0; trial < 50; ++trial) {
        const PatientParams p = sample_patient(derive_seed(12, "admissible-patient", trial), ParamBounds{});
        SimState s{uniform(rng, 0.0, 3.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 2.0)};
        for (int h = 0; h < 200; ++h) {
            const double meal = uniform(rng, 0.0, 3.0);
            const double dose = (h % 24 == 6) ? uniform(rng, 0.0, 1.0) : 0.0;
            for (int k = 0; k < 20; ++k) {
                s = step_rk4(s, meal, dose, p, 0.05);
                REQUIRE(s.acid >= 0.0);
                REQUIRE(s.drug >= 0.0);
                REQUIRE(s.pump >= 0.0);
                REQUIRE(s.pump <= 1.0);
            }
        }
    }
}

TEST_CASE("without secretion acid decays monotonically") {
    PatientParams p;
    p.s0 = 0.0;
    p.s_meal = 0.0;
    SimState s{2.5, 0.7, 0.4};
    double prev = s.acid;
    for (int i = 0; i < 400; ++i) {
        s = step_rk4(s, 1.0, 0.3, p, 0.05);
        REQUIRE(s.acid <= prev);
        prev = s.acid;
    }
}

}  // TEST_SUITE
