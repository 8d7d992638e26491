#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gmpc/random.hpp"

namespace gmpc::bnn {

/// Weights of one LSTM cell. Gate rows are stacked input, forget, cell, output.
struct LstmParams {
    Eigen::MatrixXd w_input;   ///< 4H x input_dim
    Eigen::MatrixXd w_hidden;  ///< 4H x H
    Eigen::VectorXd bias;      ///< 4H
};

/// Trainable tensors of the encoder/decoder network.
struct Parameters {
    LstmParams encoder;
    LstmParams decoder;
    Eigen::MatrixXd head_w;  ///< 2 x H
    Eigen::VectorXd head_b;  ///< 2

    Parameters zeros_like() const;

    /// Visits every tensor in serialization order. The callback gets a
    /// flattened view, a stable name, and whether the tensor is encoder-side.
    void for_each(const std::function<void(Eigen::Ref<Eigen::MatrixXd>, const char*, bool)>& fn);
    void for_each(const std::function<void(const Eigen::Ref<const Eigen::MatrixXd>&, const char*, bool)>& fn) const;

    std::size_t size() const;
};

/// Scaling applied to model inputs. Symptoms always map through (s-1)/9.
struct Normalization {
    double meal_scale = 1.0;
    double dose_scale = 1.0;
};

struct ModelShape {
    int hidden = 64;
    int t_hist = 72;
    int t_fut = 72;

    static constexpr int kEncoderInputs = 4;
    static constexpr int kDecoderInputs = 2;
    static constexpr int kOutputs = 2;
};

struct ModelWeights {
    ModelShape shape;
    double dropout = 0.1;
    Parameters params;
    Normalization norm;
};

/// U(-1/sqrt(H), 1/sqrt(H)) for every tensor.
ModelWeights init_weights(const ModelShape& shape, double dropout, const Normalization& norm, Rng& rng);

inline double normalize_symptom(double score) { return (score - 1.0) / 9.0; }
inline double denormalize_symptom(double y) { return 1.0 + 9.0 * y; }

/// Model inputs for one window, already normalized.
struct WindowInputs {
    Eigen::MatrixXd hist_symptoms;    ///< T_hist x 2 (reflux, digestion)
    Eigen::MatrixXd combined_inputs;  ///< (T_hist + T_fut) x 2 (meal, dose)
};

struct WindowSample {
    Eigen::MatrixXd hist_symptoms;    ///< T_hist x 2
    Eigen::MatrixXd combined_inputs;  ///< (T_hist + T_fut) x 2
    Eigen::MatrixXd target;           ///< T_fut x 2, normalized symptoms

    WindowInputs inputs() const { return {hist_symptoms, combined_inputs}; }
};

/// Throws ShapeError naming the expected and actual dimensions.
void check_window(const ModelShape& shape, const WindowInputs& w);
void check_sample(const ModelShape& shape, const WindowSample& s);

/// Per decoder step, a H x B matrix holding 0 or 1/(1-rate) (inverted dropout).
struct DropoutMasks {
    std::vector<Eigen::MatrixXd> steps;

    bool empty() const { return steps.empty(); }
    static DropoutMasks sample(const ModelShape& shape, double rate, int batch, Rng& rng);
};

/// Normalized predictions (T_fut x 2). With `dropout_rng` null the pass is
/// deterministic; otherwise a fresh inverted-dropout mask is drawn.
Eigen::MatrixXd forward(const ModelWeights& w, const WindowInputs& window, Rng* dropout_rng = nullptr);

/// Batched forward over samples (one output matrix per sample) with explicit masks.
std::vector<Eigen::MatrixXd> forward_batch(const ModelWeights& w, std::span<const WindowInputs> windows,
                                           const DropoutMasks& masks);

struct LossAndGradients {
    double loss = 0.0;
    Parameters grads;
};

/// Mean squared error over samples, steps and both channels, with BPTT
/// gradients. When `encoder_grads` is false the encoder gradients are left at
/// zero and the encoder backward pass is skipped.
LossAndGradients loss_and_gradients(const ModelWeights& w, std::span<const WindowSample> batch,
                                    const DropoutMasks& masks, bool encoder_grads = true);

/// Loss only, no gradients; deterministic (no dropout).
double evaluate_loss(const ModelWeights& w, std::span<const WindowSample> samples, int batch_size = 64);

/// Per-step mean and population standard deviation over M stochastic passes,
/// in score units.
struct ForecastDistribution {
    Eigen::MatrixXd mu;     ///< T_fut x 2
    Eigen::MatrixXd sigma;  ///< T_fut x 2
    int passes = 0;
};

ForecastDistribution predict_mc(const ModelWeights& w, const WindowInputs& window, int passes, Rng& rng);

/// M-pass forecasts for many futures that share one history. `hist_inputs` is
/// T_hist x 2 and each future is T_fut x 2 (normalized meal, dose).
std::vector<ForecastDistribution> predict_mc_shared(const ModelWeights& w, const Eigen::MatrixXd& hist_symptoms,
                                                    const Eigen::MatrixXd& hist_inputs,
                                                    std::span<const Eigen::MatrixXd> futures, int passes, Rng& rng);

// ---- training -------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.5;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 16;
    int max_epochs = 150;
    int patience = 30;
    int plateau_epochs = 10;      ///< epochs without improvement before the rate is halved
    double lr_decay = 0.5;
    double grad_clip = 1.0;      ///< global-norm clip; <= 0 disables

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    std::vector<double> learning_rate;
    int best_epoch = -1;
    double best_validation = 0.0;
    double final_validation = 0.0;  ///< validation loss at the last epoch's weights
};

struct TrainResult {
    ModelWeights weights;
    TrainHistory history;
};

/// SGD with classical momentum and decoupled weight decay, early stopping on
/// the validation loss; returns the best-validation weights.
TrainResult train(const ModelWeights& init, std::span<const WindowSample> train_set,
                  std::span<const WindowSample> validation_set, const TrainConfig& config, Rng& rng);

/// As train(), but the encoder is frozen bit-for-bit. An empty training set
/// returns the foundation unchanged.
TrainResult finetune(const ModelWeights& foundation, std::span<const WindowSample> train_set,
                     std::span<const WindowSample> validation_set, const TrainConfig& config, Rng& rng);

// ---- persistence ----------------------------------------------------------

inline constexpr char kWeightMagic[8] = {'G', 'M', 'P', 'C', '-', 'B', 'N', 'N'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

void save_weights(const ModelWeights& w, std::ostream& out);
ModelWeights load_weights(std::istream& in);
void save_weights(const ModelWeights& w, const std::string& path);
ModelWeights load_weights(const std::string& path);

}  // namespace gmpc::bnn
