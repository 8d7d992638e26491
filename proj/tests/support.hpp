#pragma once

// Independent reference implementations shared by the unit and acceptance
// suites. Nothing here calls into the library code it checks.

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmpc/bnn.hpp"
#include "gmpc/random.hpp"

namespace gmpc::testing {

/// Scalar LSTM cell over plain loops; gate rows are i, f, g, o.
struct ScalarCell {
    int hidden;
    const bnn::LstmParams& p;

    void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
        const int H = hidden;
        std::vector<double> z(static_cast<std::size_t>(4 * H));
        for (int r = 0; r < 4 * H; ++r) {
            double acc = p.bias(r);
            for (std::size_t k = 0; k < x.size(); ++k) acc += p.w_input(r, static_cast<Eigen::Index>(k)) * x[k];
            for (int k = 0; k < H; ++k) acc += p.w_hidden(r, k) * h[static_cast<std::size_t>(k)];
            z[static_cast<std::size_t>(r)] = acc;
        }
        auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        for (int k = 0; k < H; ++k) {
            const auto u = static_cast<std::size_t>(k);
            const double i = sig(z[u]);
            const double f = sig(z[u + H]);
            const double g = std::tanh(z[u + 2 * H]);
            const double o = sig(z[u + 3 * H]);
            c[u] = f * c[u] + i * g;
            h[u] = o * std::tanh(c[u]);
        }
    }
};

/// Deterministic encoder/decoder forward written without Eigen products.
inline Eigen::MatrixXd scalar_forward(const bnn::ModelWeights& w, const bnn::WindowInputs& in) {
    const int H = w.shape.hidden;
    std::vector<double> h(static_cast<std::size_t>(H), 0.0), c(static_cast<std::size_t>(H), 0.0);
    const ScalarCell enc{H, w.params.encoder}, dec{H, w.params.decoder};
    for (int t = 0; t < w.shape.t_hist; ++t)
        enc.step({in.hist_symptoms(t, 0), in.hist_symptoms(t, 1), in.combined_inputs(t, 0), in.combined_inputs(t, 1)},
                 h, c);
    Eigen::MatrixXd out(w.shape.t_fut, 2);
    for (int t = 0; t < w.shape.t_fut; ++t) {
        const int row = w.shape.t_hist + t;
        dec.step({in.combined_inputs(row, 0), in.combined_inputs(row, 1)}, h, c);
        for (int o = 0; o < 2; ++o) {
            double acc = w.params.head_b(o);
            for (int k = 0; k < H; ++k) acc += w.params.head_w(o, k) * h[static_cast<std::size_t>(k)];
            out(t, o) = acc;
        }
    }
    return out;
}

inline bnn::WindowSample random_sample(const bnn::ModelShape& s, Rng& rng) {
    bnn::WindowSample ws;
    ws.hist_symptoms.resize(s.t_hist, 2);
    ws.combined_inputs.resize(s.t_hist + s.t_fut, 2);
    ws.target.resize(s.t_fut, 2);
    for (Eigen::Index i = 0; i < ws.hist_symptoms.size(); ++i) ws.hist_symptoms.data()[i] = uniform(rng, 0.0, 1.0);
    for (Eigen::Index i = 0; i < ws.combined_inputs.size(); ++i) ws.combined_inputs.data()[i] = uniform(rng, 0.0, 1.0);
    for (Eigen::Index i = 0; i < ws.target.size(); ++i) ws.target.data()[i] = uniform(rng, 0.0, 1.0);
    return ws;
}

/// Weights drawn wider than the default init so gates leave their linear regime.
inline bnn::ModelWeights random_weights(const bnn::ModelShape& s, double dropout, Rng& rng, double scale = 1.0) {
    bnn::ModelWeights w = bnn::init_weights(s, dropout, {}, rng);
    w.params.for_each([&](Eigen::Ref<Eigen::MatrixXd> t, const char*, bool) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -scale, scale);
    });
    return w;
}

struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t components = 0;
};

/// Compares analytic gradients with central differences at step h. The
/// relative error uses max(|analytic|, |numeric|, floor) as denominator so
/// components that are zero up to rounding do not dominate.
inline GradientCheck check_gradients(const bnn::ModelWeights& w, const std::vector<bnn::WindowSample>& batch,
                                     const bnn::DropoutMasks& masks, double h = 1e-5, double floor = 1e-6) {
    const bnn::LossAndGradients lg = bnn::loss_and_gradients(w, batch, masks);
    std::vector<double> analytic;
    lg.grads.for_each([&](const Eigen::Ref<const Eigen::MatrixXd>& t, const char*, bool) {
        for (Eigen::Index i = 0; i < t.size(); ++i) analytic.push_back(t.data()[i]);
    });
    GradientCheck out;
    bnn::ModelWeights probe = w;
    std::size_t k = 0;
    probe.params.for_each([&](Eigen::Ref<Eigen::MatrixXd> t, const char*, bool) {
        for (Eigen::Index i = 0; i < t.size(); ++i, ++k) {
            const double saved = t.data()[i];
            t.data()[i] = saved + h;
            const double up = bnn::loss_and_gradients(probe, batch, masks).loss;
            t.data()[i] = saved - h;
            const double down = bnn::loss_and_gradients(probe, batch, masks).loss;
            t.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), floor});
            out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic[k] - numeric) / denom);
            ++out.components;
        }
    });
    return out;
}

/// Standard-normal CDF from erfc, inverted by bisection to full precision.
inline double bisection_quantile(double p) {
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace gmpc::testing
