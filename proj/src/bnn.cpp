#include "gmpc/bnn.hpp"

#include <cmath>
#include <limits>

#include "gmpc/error.hpp"

namespace gmpc::bnn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---- parameters -------------------------------------------------------------

namespace {

Eigen::Map<MatrixXd> as_matrix(VectorXd& v) { return {v.data(), v.rows(), 1}; }
Eigen::Map<const MatrixXd> as_matrix(const VectorXd& v) { return {v.data(), v.rows(), 1}; }

}  // namespace

Parameters Parameters::zeros_like() const {
    Parameters z;
    z.encoder = {MatrixXd::Zero(encoder.w_input.rows(), encoder.w_input.cols()),
                 MatrixXd::Zero(encoder.w_hidden.rows(), encoder.w_hidden.cols()),
                 VectorXd::Zero(encoder.bias.size())};
    z.decoder = {MatrixXd::Zero(decoder.w_input.rows(), decoder.w_input.cols()),
                 MatrixXd::Zero(decoder.w_hidden.rows(), decoder.w_hidden.cols()),
                 VectorXd::Zero(decoder.bias.size())};
    z.head_w = MatrixXd::Zero(head_w.rows(), head_w.cols());
    z.head_b = VectorXd::Zero(head_b.size());
    return z;
}

void Parameters::for_each(const std::function<void(Eigen::Ref<MatrixXd>, const char*, bool)>& fn) {
    fn(encoder.w_input, "encoder.w_input", true);
    fn(encoder.w_hidden, "encoder.w_hidden", true);
    fn(as_matrix(encoder.bias), "encoder.bias", true);
    fn(decoder.w_input, "decoder.w_input", false);
    fn(decoder.w_hidden, "decoder.w_hidden", false);
    fn(as_matrix(decoder.bias), "decoder.bias", false);
    fn(head_w, "head.w", false);
    fn(as_matrix(head_b), "head.b", false);
}

void Parameters::for_each(
    const std::function<void(const Eigen::Ref<const MatrixXd>&, const char*, bool)>& fn) const {
    fn(encoder.w_input, "encoder.w_input", true);
    fn(encoder.w_hidden, "encoder.w_hidden", true);
    fn(as_matrix(encoder.bias), "encoder.bias", true);
    fn(decoder.w_input, "decoder.w_input", false);
    fn(decoder.w_hidden, "decoder.w_hidden", false);
    fn(as_matrix(decoder.bias), "decoder.bias", false);
    fn(head_w, "head.w", false);
    fn(as_matrix(head_b), "head.b", false);
}

std::size_t Parameters::size() const {
    std::size_t n = 0;
    for_each([&](const Eigen::Ref<const MatrixXd>& t, const char*, bool) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

ModelWeights init_weights(const ModelShape& shape, double dropout, const Normalization& norm, Rng& rng) {
    if (shape.hidden < 1 || shape.t_hist < 1 || shape.t_fut < 1) throw ConfigError("model dimensions must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    const int h = shape.hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    auto fill = [&](Eigen::Ref<MatrixXd> m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform(rng, -bound, bound);
    };
    ModelWeights w;
    w.shape = shape;
    w.dropout = dropout;
    w.norm = norm;
    w.params.encoder = {MatrixXd(4 * h, ModelShape::kEncoderInputs), MatrixXd(4 * h, h), VectorXd(4 * h)};
    w.params.decoder = {MatrixXd(4 * h, ModelShape::kDecoderInputs), MatrixXd(4 * h, h), VectorXd(4 * h)};
    w.params.head_w = MatrixXd(ModelShape::kOutputs, h);
    w.params.head_b = VectorXd(ModelShape::kOutputs);
    w.params.for_each([&](Eigen::Ref<MatrixXd> t, const char*, bool) { fill(t); });
    return w;
}

// ---- shape checks -------------------------------------------------------------

namespace {

void expect_dims(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

}  // namespace

void check_window(const ModelShape& shape, const WindowInputs& w) {
    expect_dims(w.hist_symptoms, shape.t_hist, 2, "history symptoms");
    expect_dims(w.combined_inputs, shape.t_hist + shape.t_fut, 2, "combined inputs");
}

void check_sample(const ModelShape& shape, const WindowSample& s) {
    check_window(shape, s.inputs());
    expect_dims(s.target, shape.t_fut, 2, "target");
}

DropoutMasks DropoutMasks::sample(const ModelShape& shape, double rate, int batch, Rng& rng) {
    DropoutMasks m;
    if (rate <= 0.0) return m;
    const double keep_scale = 1.0 / (1.0 - rate);
    m.steps.assign(static_cast<std::size_t>(shape.t_fut), MatrixXd(shape.hidden, batch));
    for (MatrixXd& step : m.steps)
        for (Eigen::Index c = 0; c < step.cols(); ++c)
            for (Eigen::Index r = 0; r < step.rows(); ++r)
                step(r, c) = (static_cast<double>(rng() >> 11) * 0x1.0p-53 < rate) ? 0.0 : keep_scale;
    return m;
}

// ---- LSTM core ---------------------------------------------------------------

namespace {

/// Activations recorded per step for back-propagation. gates holds the
/// post-nonlinearity i, f, g, o stacked like the weight rows.
struct LstmTrace {
    std::vector<MatrixXd> gates;
    std::vector<MatrixXd> cell;
    std::vector<MatrixXd> tanh_cell;
    std::vector<MatrixXd> hidden;
};

/// Runs one cell over a sequence. When `trace` is null only the final state
/// (and, if requested, every hidden state) is kept.
void run_lstm(const LstmParams& p, const std::vector<MatrixXd>& inputs, MatrixXd& h, MatrixXd& c, LstmTrace* trace,
              std::vector<MatrixXd>* hidden_out) {
    const Eigen::Index H = p.w_hidden.cols();
    const Eigen::Index B = h.cols();
    MatrixXd z(4 * H, B), tc(H, B);
    for (const MatrixXd& x : inputs) {
        z.noalias() = p.w_input * x;
        z.noalias() += p.w_hidden * h;
        z.colwise() += p.bias;
        // tanh(x) = 2 sigmoid(2x) - 1 keeps every gate on the vectorized exp path
        z.middleRows(2 * H, H) *= 2.0;
        z.array() = (1.0 + (-z.array()).exp()).inverse();
        z.middleRows(2 * H, H).array() = 2.0 * z.middleRows(2 * H, H).array() - 1.0;
        c.array() = z.middleRows(H, H).array() * c.array() + z.topRows(H).array() * z.middleRows(2 * H, H).array();
        tc.array() = 2.0 / (1.0 + (-2.0 * c.array()).exp()) - 1.0;
        h.array() = z.bottomRows(H).array() * tc.array();
        if (trace) {
            trace->gates.push_back(z);
            trace->cell.push_back(c);
            trace->tanh_cell.push_back(tc);
            trace->hidden.push_back(h);
        }
        if (hidden_out) hidden_out->push_back(h);
    }
}

/// Back-propagates through a traced sequence. `dh_out[t]` is the loss
/// gradient arriving at hidden state t from outside the recurrence (may be
/// empty for no external gradient). dh/dc carry the gradient w.r.t. the final
/// state in and the initial state out.
void backprop_lstm(const LstmParams& p, LstmParams& g, const std::vector<MatrixXd>& inputs, const LstmTrace& tr,
                   const MatrixXd& h0, const MatrixXd& c0, const std::vector<MatrixXd>& dh_out, MatrixXd& dh,
                   MatrixXd& dc) {
    const Eigen::Index H = p.w_hidden.cols();
    const Eigen::Index B = h0.cols();
    MatrixXd dz(4 * H, B), dcv(H, B);
    for (std::size_t step = inputs.size(); step-- > 0;) {
        const MatrixXd& gates = tr.gates[step];
        const MatrixXd& tc = tr.tanh_cell[step];
        const MatrixXd& c_prev = step > 0 ? tr.cell[step - 1] : c0;
        const MatrixXd& h_prev = step > 0 ? tr.hidden[step - 1] : h0;
        if (!dh_out.empty()) dh += dh_out[step];
        const auto i = gates.topRows(H).array();
        const auto f = gates.middleRows(H, H).array();
        const auto gg = gates.middleRows(2 * H, H).array();
        const auto o = gates.bottomRows(H).array();
        const auto t = tc.array();
        dcv.array() = dc.array() + dh.array() * o * (1.0 - t.square());
        dz.topRows(H).array() = dcv.array() * gg * i * (1.0 - i);
        dz.middleRows(H, H).array() = dcv.array() * c_prev.array() * f * (1.0 - f);
        dz.middleRows(2 * H, H).array() = dcv.array() * i * (1.0 - gg.square());
        dz.bottomRows(H).array() = dh.array() * t * o * (1.0 - o);
        dc.array() = dcv.array() * f;
        g.w_input.noalias() += dz * inputs[step].transpose();
        g.w_hidden.noalias() += dz * h_prev.transpose();
        g.bias += dz.rowwise().sum();
        dh.noalias() = p.w_hidden.transpose() * dz;
    }
}

/// Packs windows into per-step batch matrices (features x batch).
void pack_inputs(const ModelShape& shape, std::span<const WindowInputs> windows, std::vector<MatrixXd>& enc,
                 std::vector<MatrixXd>& dec) {
    const Eigen::Index B = static_cast<Eigen::Index>(windows.size());
    enc.assign(static_cast<std::size_t>(shape.t_hist), MatrixXd(ModelShape::kEncoderInputs, B));
    dec.assign(static_cast<std::size_t>(shape.t_fut), MatrixXd(ModelShape::kDecoderInputs, B));
    for (Eigen::Index b = 0; b < B; ++b) {
        const WindowInputs& w = windows[static_cast<std::size_t>(b)];
        check_window(shape, w);
        for (int t = 0; t < shape.t_hist; ++t) {
            MatrixXd& x = enc[static_cast<std::size_t>(t)];
            x(0, b) = w.hist_symptoms(t, 0);
            x(1, b) = w.hist_symptoms(t, 1);
            x(2, b) = w.combined_inputs(t, 0);
            x(3, b) = w.combined_inputs(t, 1);
        }
        for (int t = 0; t < shape.t_fut; ++t) {
            MatrixXd& x = dec[static_cast<std::size_t>(t)];
            x(0, b) = w.combined_inputs(shape.t_hist + t, 0);
            x(1, b) = w.combined_inputs(shape.t_hist + t, 1);
        }
    }
}

void check_masks(const ModelShape& shape, const DropoutMasks& masks, Eigen::Index batch) {
    if (masks.empty()) return;
    if (masks.steps.size() != static_cast<std::size_t>(shape.t_fut))
        throw ShapeError("dropout masks: expected " + std::to_string(shape.t_fut) + " steps, got " +
                         std::to_string(masks.steps.size()));
    for (const MatrixXd& m : masks.steps) expect_dims(m, shape.hidden, batch, "dropout mask");
}

/// Head output for one decoder step: W (mask .* h) + b.
MatrixXd apply_head(const Parameters& p, const MatrixXd& h, const MatrixXd* mask) {
    MatrixXd y;
    if (mask)
        y.noalias() = p.head_w * h.cwiseProduct(*mask);
    else
        y.noalias() = p.head_w * h;
    y.colwise() += p.head_b;
    return y;
}

}  // namespace

// ---- forward -----------------------------------------------------------------

std::vector<MatrixXd> forward_batch(const ModelWeights& w, std::span<const WindowInputs> windows,
                                    const DropoutMasks& masks) {
    const ModelShape& s = w.shape;
    const Eigen::Index B = static_cast<Eigen::Index>(windows.size());
    check_masks(s, masks, B);
    std::vector<MatrixXd> enc, dec;
    pack_inputs(s, windows, enc, dec);

    MatrixXd h = MatrixXd::Zero(s.hidden, B), c = MatrixXd::Zero(s.hidden, B);
    run_lstm(w.params.encoder, enc, h, c, nullptr, nullptr);
    std::vector<MatrixXd> hidden;
    hidden.reserve(dec.size());
    run_lstm(w.params.decoder, dec, h, c, nullptr, &hidden);

    std::vector<MatrixXd> out(static_cast<std::size_t>(B), MatrixXd(s.t_fut, ModelShape::kOutputs));
    for (int t = 0; t < s.t_fut; ++t) {
        const MatrixXd y = apply_head(w.params, hidden[static_cast<std::size_t>(t)],
                                      masks.empty() ? nullptr : &masks.steps[static_cast<std::size_t>(t)]);
        for (Eigen::Index b = 0; b < B; ++b) out[static_cast<std::size_t>(b)].row(t) = y.col(b).transpose();
    }
    return out;
}

MatrixXd forward(const ModelWeights& w, const WindowInputs& window, Rng* dropout_rng) {
    DropoutMasks masks;
    if (dropout_rng) masks = DropoutMasks::sample(w.shape, w.dropout, 1, *dropout_rng);
    return forward_batch(w, std::span<const WindowInputs>(&window, 1), masks).front();
}

// ---- loss and gradients ------------------------------------------------------

LossAndGradients loss_and_gradients(const ModelWeights& w, std::span<const WindowSample> batch,
                                    const DropoutMasks& masks, bool encoder_grads) {
    if (batch.empty()) throw ConfigError("loss requires a non-empty batch");
    const ModelShape& s = w.shape;
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    check_masks(s, masks, B);

    std::vector<WindowInputs> windows;
    windows.reserve(batch.size());
    for (const WindowSample& ws : batch) {
        check_sample(s, ws);
        windows.push_back(ws.inputs());
    }
    std::vector<MatrixXd> enc, dec;
    pack_inputs(s, windows, enc, dec);

    const MatrixXd zeros = MatrixXd::Zero(s.hidden, B);
    MatrixXd h = zeros, c = zeros;
    LstmTrace enc_trace, dec_trace;
    run_lstm(w.params.encoder, enc, h, c, &enc_trace, nullptr);
    const MatrixXd h_enc = h, c_enc = c;
    run_lstm(w.params.decoder, dec, h, c, &dec_trace, nullptr);

    LossAndGradients out;
    out.grads = w.params.zeros_like();
    const double denom = static_cast<double>(B) * s.t_fut * ModelShape::kOutputs;
    double sse = 0.0;
    std::vector<MatrixXd> dh_out(static_cast<std::size_t>(s.t_fut));
    MatrixXd target(ModelShape::kOutputs, B);
    for (int t = 0; t < s.t_fut; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const MatrixXd* mask = masks.empty() ? nullptr : &masks.steps[ts];
        const MatrixXd& hid = dec_trace.hidden[ts];
        const MatrixXd y = apply_head(w.params, hid, mask);
        for (Eigen::Index b = 0; b < B; ++b) target.col(b) = batch[static_cast<std::size_t>(b)].target.row(t).transpose();
        const MatrixXd err = y - target;
        sse += err.squaredNorm();
        const MatrixXd dy = (2.0 / denom) * err;
        const MatrixXd dropped = mask ? MatrixXd(hid.cwiseProduct(*mask)) : hid;
        out.grads.head_w.noalias() += dy * dropped.transpose();
        out.grads.head_b += dy.rowwise().sum();
        dh_out[ts].noalias() = w.params.head_w.transpose() * dy;
        if (mask) dh_out[ts] = dh_out[ts].cwiseProduct(*mask);
    }
    out.loss = sse / denom;
    if (!std::isfinite(out.loss)) throw NumericalError("non-finite training loss");

    MatrixXd dh = zeros, dc = zeros;
    backprop_lstm(w.params.decoder, out.grads.decoder, dec, dec_trace, h_enc, c_enc, dh_out, dh, dc);
    if (encoder_grads)
        backprop_lstm(w.params.encoder, out.grads.encoder, enc, enc_trace, zeros, zeros, {}, dh, dc);
    return out;
}

double evaluate_loss(const ModelWeights& w, std::span<const WindowSample> samples, int batch_size) {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sse = 0.0;
    const DropoutMasks none;
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t n = std::min(samples.size() - start, static_cast<std::size_t>(batch_size));
        std::vector<WindowInputs> windows;
        windows.reserve(n);
        for (std::size_t i = 0; i < n; ++i) windows.push_back(samples[start + i].inputs());
        const auto preds = forward_batch(w, windows, none);
        for (std::size_t i = 0; i < n; ++i) sse += (preds[i] - samples[start + i].target).squaredNorm();
    }
    return sse / (static_cast<double>(samples.size()) * w.shape.t_fut * ModelShape::kOutputs);
}

// ---- Monte Carlo dropout -------------------------------------------------------

namespace {

/// Dropout acts only between the decoder hidden state and the linear head, so
/// the recurrent pass is shared by every MC sample and each pass redraws the
/// mask and re-applies the head. This is the same distribution as M complete
/// stochastic forward passes.
std::vector<ForecastDistribution> mc_from_hidden(const ModelWeights& w, const std::vector<MatrixXd>& hidden,
                                                 int passes, Rng& rng) {
    if (passes < 1) throw ConfigError("Monte Carlo pass count must be at least 1");
    const ModelShape& s = w.shape;
    const Eigen::Index B = hidden.front().cols();
    std::vector<MatrixXd> sum(static_cast<std::size_t>(s.t_fut), MatrixXd::Zero(ModelShape::kOutputs, B));
    std::vector<MatrixXd> sum_sq = sum;
    for (int m = 0; m < passes; ++m) {
        const DropoutMasks masks = DropoutMasks::sample(s, w.dropout, static_cast<int>(B), rng);
        for (int t = 0; t < s.t_fut; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            const MatrixXd y = apply_head(w.params, hidden[ts], masks.empty() ? nullptr : &masks.steps[ts]);
            sum[ts] += y;
            sum_sq[ts] += y.cwiseProduct(y);
        }
    }
    std::vector<ForecastDistribution> out(static_cast<std::size_t>(B));
    const double inv_m = 1.0 / passes;
    for (auto& f : out) {
        f.mu.resize(s.t_fut, 2);
        f.sigma.resize(s.t_fut, 2);
        f.passes = passes;
    }
    for (int t = 0; t < s.t_fut; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        for (Eigen::Index b = 0; b < B; ++b) {
            ForecastDistribution& f = out[static_cast<std::size_t>(b)];
            for (int k = 0; k < 2; ++k) {
                const double mean = sum[ts](k, b) * inv_m;
                double var = sum_sq[ts](k, b) * inv_m - mean * mean;
                if (w.dropout <= 0.0 || passes == 1 || var < 0.0) var = 0.0;
                f.mu(t, k) = denormalize_symptom(mean);
                f.sigma(t, k) = 9.0 * std::sqrt(var);
            }
        }
    }
    return out;
}

}  // namespace

std::vector<ForecastDistribution> predict_mc_shared(const ModelWeights& w, const MatrixXd& hist_symptoms,
                                                    const MatrixXd& hist_inputs, std::span<const MatrixXd> futures,
                                                    int passes, Rng& rng) {
    const ModelShape& s = w.shape;
    expect_dims(hist_symptoms, s.t_hist, 2, "history symptoms");
    expect_dims(hist_inputs, s.t_hist, 2, "history inputs");
    if (futures.empty()) return {};
    const Eigen::Index B = static_cast<Eigen::Index>(futures.size());

    std::vector<MatrixXd> enc(static_cast<std::size_t>(s.t_hist), MatrixXd(ModelShape::kEncoderInputs, 1));
    for (int t = 0; t < s.t_hist; ++t) {
        MatrixXd& x = enc[static_cast<std::size_t>(t)];
        x << hist_symptoms(t, 0), hist_symptoms(t, 1), hist_inputs(t, 0), hist_inputs(t, 1);
    }
    MatrixXd h = MatrixXd::Zero(s.hidden, 1), c = MatrixXd::Zero(s.hidden, 1);
    run_lstm(w.params.encoder, enc, h, c, nullptr, nullptr);

    std::vector<MatrixXd> dec(static_cast<std::size_t>(s.t_fut), MatrixXd(ModelShape::kDecoderInputs, B));
    for (Eigen::Index b = 0; b < B; ++b) {
        const MatrixXd& f = futures[static_cast<std::size_t>(b)];
        expect_dims(f, s.t_fut, 2, "future inputs");
        for (int t = 0; t < s.t_fut; ++t) dec[static_cast<std::size_t>(t)].col(b) = f.row(t).transpose();
    }
    MatrixXd hb = h.replicate(1, B), cb = c.replicate(1, B);
    std::vector<MatrixXd> hidden;
    hidden.reserve(dec.size());
    run_lstm(w.params.decoder, dec, hb, cb, nullptr, &hidden);
    return mc_from_hidden(w, hidden, passes, rng);
}

ForecastDistribution predict_mc(const ModelWeights& w, const WindowInputs& window, int passes, Rng& rng) {
    check_window(w.shape, window);
    const MatrixXd hist_inputs = window.combined_inputs.topRows(w.shape.t_hist);
    const MatrixXd future = window.combined_inputs.bottomRows(w.shape.t_fut);
    return predict_mc_shared(w, window.hist_symptoms, hist_inputs, std::span<const MatrixXd>(&future, 1), passes,
                             rng)
        .front();
}

}  // namespace gmpc::bnn
