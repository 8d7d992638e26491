#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gmpc {

/// One virtual patient: gastric surrogate rates plus symptom-encoder settings.
struct PatientParams {
    double k_e = 0.5;      ///< drug elimination rate (1/h)
    double k_bind = 2.0;   ///< pump inactivation per unit drug concentration (1/h)
    double k_rec = 0.015;  ///< pump regeneration rate (1/h)
    double s0 = 1.0;       ///< basal acid secretion (acid-units/h)
    double s_meal = 2.0;   ///< meal-stimulated secretion gain
    double k_A = 0.8;      ///< luminal washout rate (1/h)
    double a_high = 1.0;   ///< reflux threshold (acid-units)
    double a_low = 0.07;   ///< digestion threshold (acid-units)
    double k_r = 4.0;      ///< reflux sigmoid steepness
    double k_d = 45.0;     ///< digestion sigmoid steepness
    double eta_r = 0.0;    ///< patient-constant reflux report offset
    double eta_d = 0.0;    ///< patient-constant digestion report offset
    double sigma_noise = 0.3;

    /// Throws ConfigError if a rate is non-positive or a_low >= a_high.
    void validate() const;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Uniform sampling ranges for PatientParams. Defaults produce a population
/// in which zero dosing drives acid above a_high and sustained maximal dosing
/// drives it below a_low.
struct ParamBounds {
    Range k_e{0.3, 0.8};
    Range k_bind{1.0, 4.0};
    Range k_rec{0.008, 0.025};
    Range s0{0.8, 1.2};
    Range s_meal{1.0, 3.0};
    Range k_A{0.6, 1.0};
    Range a_high{0.8, 1.2};
    Range a_low{0.06, 0.09};
    Range k_r{3.0, 5.0};
    Range k_d{35.0, 55.0};
    Range eta_r{-0.5, 0.5};
    Range eta_d{-0.5, 0.5};
    Range sigma_noise{0.3, 0.3};

    /// All ranges collapsed onto the fields of `p`.
    static ParamBounds degenerate(const PatientParams& p);
    void validate() const;
};

PatientParams sample_patient(std::uint64_t seed, const ParamBounds& bounds);

struct SimState {
    double acid = 0.0;  ///< gastric acid level A
    double pump = 1.0;  ///< active proton-pump fraction P
    double drug = 0.0;  ///< plasma drug concentration C

    friend bool operator==(const SimState&, const SimState&) = default;
};

struct StateRate {
    double d_acid = 0.0;
    double d_pump = 0.0;
    double d_drug = 0.0;
};

/// Untreated resting state: all pumps active, no drug, acid at s0/k_A.
SimState resting_state(const PatientParams& p);

StateRate derivative(const SimState& s, double meal, double dose_rate, const PatientParams& p);

/// One classical RK4 step with inputs held over the step, followed by
/// clamping pump into [0,1] and acid/drug to >= 0.
SimState step_rk4(const SimState& s, double meal, double dose_rate, const PatientParams& p, double dt);

/// A dose u recorded at hour t is infused at rate u / kDoseAbsorptionHours
/// over that hour.
inline constexpr double kDoseAbsorptionHours = 1.0;
inline constexpr double kDefaultSubStep = 0.05;

/// Integrates hourly inputs starting from `state` (updated in place) and
/// returns the acid level at the end of every hour.
std::vector<double> simulate_episode(const PatientParams& p, std::span<const double> meals,
                                     std::span<const double> doses, double dt_sub, SimState& state);

inline std::vector<double> simulate_episode(const PatientParams& p, std::span<const double> meals,
                                            std::span<const double> doses,
                                            double dt_sub = kDefaultSubStep) {
    SimState s = resting_state(p);
    return simulate_episode(p, meals, doses, dt_sub, s);
}

}  // namespace gmpc
