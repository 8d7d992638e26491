#pragma once

#include "gmpc/random.hpp"
#include "gmpc/sim.hpp"

namespace gmpc {

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

struct SymptomPair {
    int reflux = kMinScore;
    int digestion = kMinScore;
};

/// Sigmoid reflux severity in (1, 10), increasing in acid.
double reflux_score_continuous(double acid, double a_high, double k_r);

/// Sigmoid digestive-discomfort severity in (1, 10), decreasing in acid.
double digestion_score_continuous(double acid, double a_low, double k_d);

/// clip(floor(score + eta + noise), 1, 10). Infinite sums saturate; NaN is a DomainError.
int report(double score, double eta, double noise);

/// Draws fresh per-report noise with the patient's sigma and applies the
/// patient-constant offsets. Consumes exactly two normal draws.
SymptomPair encode_symptoms(double acid, const PatientParams& p, Rng& rng);

}  // namespace gmpc
