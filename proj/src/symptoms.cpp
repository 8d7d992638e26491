#include "gmpc/symptoms.hpp"

#include <algorithm>
#include <cmath>

#include "gmpc/error.hpp"

namespace gmpc {

double reflux_score_continuous(double acid, double a_high, double k_r) {
    return 1.0 + 9.0 / (1.0 + std::exp(-k_r * (acid - a_high)));
}

double digestion_score_continuous(double acid, double a_low, double k_d) {
    return 1.0 + 9.0 / (1.0 + std::exp(k_d * (acid - a_low)));
}

int report(double score, double eta, double noise) {
    const double x = std::floor(score + eta + noise);
    if (std::isnan(x)) throw DomainError("symptom report of NaN score");
    return static_cast<int>(std::clamp(x, static_cast<double>(kMinScore), static_cast<double>(kMaxScore)));
}

SymptomPair encode_symptoms(double acid, const PatientParams& p, Rng& rng) {
    const double n_r = p.sigma_noise * standard_normal(rng);
    const double n_d = p.sigma_noise * standard_normal(rng);
    return {report(reflux_score_continuous(acid, p.a_high, p.k_r), p.eta_r, n_r),
            report(digestion_score_continuous(acid, p.a_low, p.k_d), p.eta_d, n_d)};
}

}  // namespace gmpc
