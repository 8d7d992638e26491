#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "gmpc/bnn.hpp"
#include "gmpc/error.hpp"

namespace gmpc::bnn {

using Eigen::MatrixXd;

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
    if (patience < 1) throw ConfigError("patience must be positive");
    if (plateau_epochs < 1) throw ConfigError("plateau_epochs must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
}

namespace {

double global_norm(const Parameters& g, bool include_encoder) {
    double sq = 0.0;
    g.for_each([&](const Eigen::Ref<const MatrixXd>& t, const char*, bool encoder) {
        if (include_encoder || !encoder) sq += t.squaredNorm();
    });
    return std::sqrt(sq);
}

TrainResult run_training(const ModelWeights& init, std::span<const WindowSample> train_set,
                         std::span<const WindowSample> validation_set, const TrainConfig& config, Rng& rng,
                         bool train_encoder) {
    config.validate();
    if (train_set.empty()) throw ConfigError("training set is empty");
    for (const auto& s : train_set) check_sample(init.shape, s);
    for (const auto& s : validation_set) check_sample(init.shape, s);
    // Without a validation split, early stopping watches the training loss.
    const std::span<const WindowSample> monitor = validation_set.empty() ? train_set : validation_set;

    ModelWeights current = init;
    Parameters velocity = init.params.zeros_like();
    TrainResult result{init, {}};
    double best = evaluate_loss(current, monitor);
    result.history.best_validation = best;
    result.history.final_validation = best;
    int since_best = 0;
    int since_plateau = 0;
    double lr = config.learning_rate;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<WindowSample> batch;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t n = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = 0; i < n; ++i) batch.push_back(train_set[order[start + i]]);
            const DropoutMasks masks =
                DropoutMasks::sample(current.shape, current.dropout, static_cast<int>(n), rng);
            LossAndGradients lg;
            try {
                lg = loss_and_gradients(current, batch, masks, train_encoder);
            } catch (const NumericalError&) {
                throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch));
            }
            epoch_loss += lg.loss * static_cast<double>(n);
            seen += n;

            double scale = 1.0;
            if (config.grad_clip > 0.0) {
                const double norm = global_norm(lg.grads, train_encoder);
                if (!std::isfinite(norm))
                    throw DivergenceError(epoch, "non-finite gradient at epoch " + std::to_string(epoch));
                if (norm > config.grad_clip) scale = config.grad_clip / norm;
            }

            // v <- mu v + g ; w <- w - lr v - lr wd w
            std::vector<Eigen::Ref<MatrixXd>> grads, vel;
            lg.grads.for_each([&](Eigen::Ref<MatrixXd> t, const char*, bool) { grads.push_back(t); });
            velocity.for_each([&](Eigen::Ref<MatrixXd> t, const char*, bool) { vel.push_back(t); });
            std::size_t idx = 0;
            current.params.for_each([&](Eigen::Ref<MatrixXd> w, const char*, bool encoder) {
                const std::size_t k = idx++;
                if (encoder && !train_encoder) return;
                vel[k] = config.momentum * vel[k] + scale * grads[k];
                w -= lr * vel[k] + (lr * config.weight_decay) * w;
            });
        }
        const double train_loss = epoch_loss / static_cast<double>(seen);
        const double val_loss = evaluate_loss(current, monitor);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw DivergenceError(epoch, "non-finite loss at epoch " + std::to_string(epoch));
        result.history.train_loss.push_back(train_loss);
        result.history.validation_loss.push_back(val_loss);
        result.history.learning_rate.push_back(lr);
        result.history.final_validation = val_loss;

        if (val_loss < best) {
            best = val_loss;
            result.weights = current;
            result.history.best_epoch = epoch;
            result.history.best_validation = best;
            since_best = 0;
            since_plateau = 0;
        } else {
            ++since_best;
            if (++since_plateau >= config.plateau_epochs) {
                lr *= config.lr_decay;
                since_plateau = 0;
            }
            if (since_best >= config.patience) break;
        }
    }
    return result;
}

}  // namespace

TrainResult train(const ModelWeights& init, std::span<const WindowSample> train_set,
                  std::span<const WindowSample> validation_set, const TrainConfig& config, Rng& rng) {
    return run_training(init, train_set, validation_set, config, rng, true);
}

TrainResult finetune(const ModelWeights& foundation, std::span<const WindowSample> train_set,
                     std::span<const WindowSample> validation_set, const TrainConfig& config, Rng& rng) {
    if (train_set.empty()) {
        std::cerr << "warning: empty patient dataset, returning foundation weights unchanged\n";
        TrainResult r{foundation, {}};
        return r;
    }
    return run_training(foundation, train_set, validation_set, config, rng, false);
}

}  // namespace gmpc::bnn
