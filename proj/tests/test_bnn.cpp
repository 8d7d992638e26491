#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "gmpc/bnn.hpp"
#include "gmpc/error.hpp"
#include "support.hpp"

using namespace gmpc;
using namespace gmpc::bnn;
using gmpc::testing::random_sample;
using gmpc::testing::random_weights;

namespace {

bool same_params(const Parameters& a, const Parameters& b, bool encoder_only = false) {
    std::vector<double> x, y;
    a.for_each([&](const Eigen::Ref<const Eigen::MatrixXd>& t, const char*, bool enc) {
        if (!encoder_only || enc) x.insert(x.end(), t.data(), t.data() + t.size());
    });
    b.for_each([&](const Eigen::Ref<const Eigen::MatrixXd>& t, const char*, bool enc) {
        if (!encoder_only || enc) y.insert(y.end(), t.data(), t.data() + t.size());
    });
    return x == y;
}

std::vector<WindowSample> random_batch(const ModelShape& s, int n, Rng& rng) {
    std::vector<WindowSample> out;
    for (int i = 0; i < n; ++i) out.push_back(random_sample(s, rng));
    return out;
}

}  // namespace

TEST_SUITE("bnn") {

TEST_CASE("zero weights give zero output") {
    const ModelShape s{5, 4, 3};
    Rng rng(1);
    ModelWeights w = init_weights(s, 0.1, {}, rng);
    w.params.for_each([](Eigen::Ref<Eigen::MatrixXd> t, const char*, bool) { t.setZero(); });
    const WindowSample ws = random_sample(s, rng);
    CHECK(forward(w, ws.inputs()).isZero(0.0));
    CHECK(forward(w, ws.inputs(), &rng).isZero(0.0));
}

TEST_CASE("init bounds and parameter count") {
    const ModelShape s{8, 3, 3};
    Rng rng(2);
    const ModelWeights w = init_weights(s, 0.1, {}, rng);
    const double bound = 1.0 / std::sqrt(8.0);
    w.params.for_each([&](const Eigen::Ref<const Eigen::MatrixXd>& t, const char*, bool) {
        CHECK(t.cwiseAbs().maxCoeff() <= bound);
    });
    CHECK(w.params.size() == static_cast<std::size_t>(4 * 8 * (4 + 8 + 1) + 4 * 8 * (2 + 8 + 1) + 2 * 8 + 2));
    CHECK_THROWS_AS(init_weights(s, 1.0, {}, rng), ConfigError);
}

TEST_CASE("deterministic forward matches the scalar reference") {
    Rng rng = make_rng(3, "scalar-oracle");
    for (int trial = 0; trial < 10; ++trial) {
        const ModelShape s{3, 2, 2};
        const ModelWeights w = random_weights(s, 0.1, rng);
        const WindowSample ws = random_sample(s, rng);
        const Eigen::MatrixXd got = forward(w, ws.inputs());
        const Eigen::MatrixXd want = gmpc::testing::scalar_forward(w, ws.inputs());
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(forward(w, ws.inputs()) == got);
    }
}

TEST_CASE("batched forward agrees with single-window forward") {
    const ModelShape s{6, 5, 4};
    Rng rng(4);
    const ModelWeights w = random_weights(s, 0.2, rng, 0.5);
    const auto batch = random_batch(s, 7, rng);
    std::vector<WindowInputs> in;
    for (const auto& b : batch) in.push_back(b.inputs());
    const auto out = forward_batch(w, in, {});
    REQUIRE(out.size() == 7);
    for (std::size_t i = 0; i < in.size(); ++i) {
        CHECK(out[i].rows() == s.t_fut);
        CHECK(out[i].cols() == 2);
        CHECK((out[i] - forward(w, in[i])).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("shape errors name both dimensions") {
    const ModelShape s{3, 4, 2};
    Rng rng(5);
    const ModelWeights w = init_weights(s, 0.1, {}, rng);
    WindowSample ws = random_sample(s, rng);
    ws.hist_symptoms.resize(3, 2);
    try {
        forward(w, ws.inputs());
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("4x2") != std::string::npos);
        CHECK(msg.find("3x2") != std::string::npos);
    }
}

TEST_CASE("gradients match central differences on tiny nets") {
    Rng rng = make_rng(6, "fd-unit");
    for (int trial = 0; trial < 10; ++trial) {
        const ModelShape s{1 + trial % 4, 1 + trial % 3, 1 + (trial / 3) % 3};
        const ModelWeights w = random_weights(s, 0.3, rng);
        const auto batch = random_batch(s, 2, rng);
        const DropoutMasks masks =
            trial % 2 ? DropoutMasks::sample(s, 0.3, 2, rng) : DropoutMasks{};
        const auto check = gmpc::testing::check_gradients(w, batch, masks);
        CHECK(check.max_rel_error < 1e-4);
    }
}

TEST_CASE("perfect predictions give zero loss and zero head-bias gradient") {
    const ModelShape s{4, 3, 3};
    Rng rng(7);
    const ModelWeights w = random_weights(s, 0.1, rng);
    auto batch = random_batch(s, 3, rng);
    for (auto& b : batch) b.target = forward(w, b.inputs());
    const auto lg = loss_and_gradients(w, batch, {});
    CHECK(lg.loss < 1e-24);
    CHECK(lg.grads.head_b.isZero(1e-12));
}

TEST_CASE("duplicating the batch leaves the loss unchanged") {
    const ModelShape s{4, 3, 3};
    Rng rng(8);
    const ModelWeights w = random_weights(s, 0.1, rng);
    const auto batch = random_batch(s, 4, rng);
    auto doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    CHECK(loss_and_gradients(w, doubled, {}).loss == doctest::Approx(loss_and_gradients(w, batch, {}).loss).epsilon(1e-14));
    CHECK_THROWS_AS(loss_and_gradients(w, std::vector<WindowSample>{}, {}), ConfigError);
}

TEST_CASE("frozen encoder yields zero encoder gradients") {
    const ModelShape s{3, 3, 2};
    Rng rng(9);
    const ModelWeights w = random_weights(s, 0.1, rng);
    const auto batch = random_batch(s, 2, rng);
    const auto full = loss_and_gradients(w, batch, {});
    const auto dec_only = loss_and_gradients(w, batch, {}, false);
    CHECK(dec_only.grads.encoder.w_input.isZero(0.0));
    CHECK(dec_only.grads.encoder.bias.isZero(0.0));
    CHECK(dec_only.grads.decoder.w_hidden == full.grads.decoder.w_hidden);
    CHECK(dec_only.grads.head_w == full.grads.head_w);
}

TEST_CASE("zero learning rate leaves weights unchanged") {
    const ModelShape s{4, 3, 3};
    Rng rng(10);
    const ModelWeights w = init_weights(s, 0.1, {}, rng);
    const auto train_set = random_batch(s, 10, rng), val = random_batch(s, 3, rng);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    cfg.max_epochs = 3;
    Rng trng(11);
    const TrainResult r = train(w, train_set, val, cfg, trng);
    CHECK(same_params(r.weights.params, w.params));
}

TEST_CASE("constant target is memorized") {
    const ModelShape s{8, 4, 4};
    Rng rng(12);
    const ModelWeights w = init_weights(s, 0.0, {}, rng);
    auto data = random_batch(s, 32, rng);
    for (auto& d : data) d.target.setConstant(0.3);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.max_epochs = 200;
    cfg.patience = 200;
    cfg.batch_size = 8;
    Rng trng(13);
    const TrainResult r = train(w, data, data, cfg, trng);
    CHECK(r.history.train_loss.back() < 1e-3);
    CHECK(evaluate_loss(r.weights, data) < 1e-3);
}

TEST_CASE("returned weights are the best validation checkpoint") {
    const ModelShape s{6, 4, 4};
    Rng rng(14);
    const ModelWeights w = init_weights(s, 0.1, {}, rng);
    const auto train_set = random_batch(s, 40, rng), val = random_batch(s, 8, rng);
    TrainConfig cfg;
    cfg.max_epochs = 25;
    Rng trng(15);
    const TrainResult r = train(w, train_set, val, cfg, trng);
    const double at_best = evaluate_loss(r.weights, val);
    CHECK(at_best == doctest::Approx(r.history.best_validation).epsilon(1e-12));
    CHECK(at_best <= r.history.final_validation);
    CHECK(r.history.validation_loss.size() == r.history.train_loss.size());
}

TEST_CASE("training with the same seed is reproducible") {
    const ModelShape s{4, 3, 3};
    Rng rng(16);
    const ModelWeights w = init_weights(s, 0.1, {}, rng);
    const auto train_set = random_batch(s, 12, rng), val = random_batch(s, 3, rng);
    TrainConfig cfg;
    cfg.max_epochs = 4;
    Rng a(17), b(17);
    CHECK(same_params(train(w, train_set, val, cfg, a).weights.params, train(w, train_set, val, cfg, b).weights.params));
}

TEST_CASE("fine-tuning freezes the encoder and does not lose validation loss") {
    const ModelShape s{6, 4, 4};
    Rng rng(18);
    const ModelWeights foundation = init_weights(s, 0.1, {}, rng);
    const auto train_set = random_batch(s, 24, rng), val = random_batch(s, 6, rng);
    TrainConfig cfg;
    cfg.max_epochs = 15;
    Rng trng(19);
    const TrainResult r = finetune(foundation, train_set, val, cfg, trng);
    CHECK(same_params(r.weights.params, foundation.params, true));
    CHECK_FALSE(same_params(r.weights.params, foundation.params));
    CHECK(evaluate_loss(r.weights, val) <= evaluate_loss(foundation, val));

    const TrainResult same = finetune(foundation, std::vector<WindowSample>{}, val, cfg, trng);
    CHECK(same_params(same.weights.params, foundation.params));
}

TEST_CASE("predict_mc degenerate cases") {
    const ModelShape s{5, 3, 3};
    Rng rng(20);
    ModelWeights w = random_weights(s, 0.0, rng, 0.5);
    const WindowSample ws = random_sample(s, rng);
    const ForecastDistribution f = predict_mc(w, ws.inputs(), 20, rng);
    CHECK(f.sigma.isZero(0.0));
    const Eigen::MatrixXd det = forward(w, ws.inputs());
    CHECK((f.mu - (1.0 + 9.0 * det.array()).matrix()).cwiseAbs().maxCoeff() < 1e-12);

    w.dropout = 0.3;
    const ForecastDistribution one = predict_mc(w, ws.inputs(), 1, rng);
    CHECK(one.sigma.isZero(0.0));
    CHECK(one.passes == 1);
    CHECK_THROWS_AS(predict_mc(w, ws.inputs(), 0, rng), ConfigError);
}

TEST_CASE("predict_mc is reproducible and converges to the large-M mean") {
    const ModelShape s{8, 4, 4};
    Rng rng(21);
    const ModelWeights w = random_weights(s, 0.2, rng, 0.6);
    const WindowSample ws = random_sample(s, rng);
    Rng a(22), b(22);
    const auto fa = predict_mc(w, ws.inputs(), 30, a), fb = predict_mc(w, ws.inputs(), 30, b);
    CHECK(fa.mu == fb.mu);
    CHECK(fa.sigma == fb.sigma);
    CHECK((fa.sigma.array() >= 0.0).all());

    Rng big(23);
    const auto ref = predict_mc(w, ws.inputs(), 10000, big);
    const double m = 30.0;
    for (Eigen::Index i = 0; i < ref.mu.size(); ++i) {
        const double tol = 3.0 * ref.sigma.data()[i] / std::sqrt(m) + 1e-12;
        CHECK(std::abs(fa.mu.data()[i] - ref.mu.data()[i]) <= tol);
    }
}

TEST_CASE("shared-history forecasts match per-window forecasts without dropout") {
    const ModelShape s{5, 4, 3};
    Rng rng(24);
    const ModelWeights w = random_weights(s, 0.0, rng, 0.5);
    const WindowSample base = random_sample(s, rng);
    std::vector<Eigen::MatrixXd> futures;
    for (int j = 0; j < 3; ++j) {
        Eigen::MatrixXd fut(s.t_fut, 2);
        for (Eigen::Index i = 0; i < fut.size(); ++i) fut.data()[i] = uniform(rng, 0.0, 1.0);
        futures.push_back(fut);
    }
    const auto shared = predict_mc_shared(w, base.hist_symptoms, base.combined_inputs.topRows(s.t_hist), futures, 4, rng);
    REQUIRE(shared.size() == 3);
    for (int j = 0; j < 3; ++j) {
        WindowInputs in{base.hist_symptoms, base.combined_inputs};
        in.combined_inputs.bottomRows(s.t_fut) = futures[j];
        const auto single = predict_mc(w, in, 4, rng);
        CHECK((shared[j].mu - single.mu).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(shared[j].sigma.isZero(0.0));
    }
}

TEST_CASE("inverted dropout is unbiased") {
    const ModelShape s{6, 1, 1};
    const double rate = 0.3;
    const Eigen::VectorXd hidden = Eigen::VectorXd::LinSpaced(6, -0.9, 0.8);
    Rng rng(25);
    const int n = 10000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(6), sq = Eigen::VectorXd::Zero(6);
    for (int i = 0; i < n; ++i) {
        const DropoutMasks m = DropoutMasks::sample(s, rate, 1, rng);
        const Eigen::VectorXd v = hidden.cwiseProduct(m.steps[0].col(0));
        sum += v;
        sq += v.cwiseProduct(v);
    }
    for (int k = 0; k < 6; ++k) {
        const double mean = sum(k) / n;
        const double var = sq(k) / n - mean * mean;
        CHECK(std::abs(mean - hidden(k)) <= 3.0 * std::sqrt(var / n));
    }
    CHECK(DropoutMasks::sample(s, 0.0, 1, rng).empty());
}

TEST_CASE("save and load round-trip bit-identically") {
    const ModelShape s{7, 5, 4};
    Rng rng(26);
    ModelWeights w = random_weights(s, 0.15, rng);
    w.norm = {2.75, 1.0};
    std::stringstream buf;
    save_weights(w, buf);
    const std::string bytes = buf.str();
    CHECK(bytes.compare(0, 8, std::string(kWeightMagic, 8)) == 0);

    std::stringstream in(bytes);
    const ModelWeights back = load_weights(in);
    CHECK(back.shape.hidden == 7);
    CHECK(back.shape.t_hist == 5);
    CHECK(back.shape.t_fut == 4);
    CHECK(back.dropout == 0.15);
    CHECK(back.norm.meal_scale == 2.75);
    CHECK(same_params(back.params, w.params));
    const WindowSample ws = random_sample(s, rng);
    CHECK(forward(back, ws.inputs()) == forward(w, ws.inputs()));

    std::stringstream again;
    save_weights(back, again);
    CHECK(again.str() == bytes);

    std::string corrupt = bytes;
    corrupt[0] = 'X';
    std::stringstream bad(corrupt);
    CHECK_THROWS_AS(load_weights(bad), IoError);
    std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_weights(truncated), IoError);
}

}  // TEST_SUITE
