#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hlchoice/domain.hpp"

namespace hlchoice::nn {

// Batches are column-major: one sample per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Identity, Relu, Sigmoid, Softmax };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);

struct LayerParams {
    Matrix weights;  // out_dim x in_dim
    Vector biases;   // out_dim
    Activation activation = Activation::Identity;

    std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }

    friend bool operator==(const LayerParams& a, const LayerParams& b) {
        return a.activation == b.activation && a.weights.rows() == b.weights.rows() &&
               a.weights.cols() == b.weights.cols() && a.weights == b.weights && a.biases == b.biases;
    }
};

enum class NetworkKind : std::uint8_t { Classifier, Autoencoder };

/// Feed-forward stack. For an autoencoder the first `encoder_layers` layers map
/// the input to the latent code and the rest decode it.
class Network {
public:
    Network() = default;
    Network(NetworkKind kind, std::vector<LayerParams> layers, std::size_t encoder_layers = 0);

    NetworkKind kind() const { return kind_; }
    const std::vector<LayerParams>& layers() const { return layers_; }
    std::vector<LayerParams>& layers() { return layers_; }
    std::size_t encoder_layers() const { return encoder_layers_; }

    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }
    std::size_t latent_dim() const;
    std::size_t parameter_count() const;

    /// Full forward pass over a batch.
    Matrix forward(const Matrix& x) const;
    /// Forward pass through layers [first, last).
    Matrix forward_range(const Matrix& x, std::size_t first, std::size_t last) const;

    friend bool operator==(const Network&, const Network&) = default;

private:
    NetworkKind kind_ = NetworkKind::Classifier;
    std::vector<LayerParams> layers_;
    std::size_t encoder_layers_ = 0;
};

/// Classifier shape: ReLU hidden layers, softmax output.
struct MlpConfig {
    std::vector<std::size_t> layer_sizes{18, 100, 100, 100, 4};
};

/// Autoencoder shape: ReLU hidden layers, sigmoid latent layer, linear output.
struct AeConfig {
    std::vector<std::size_t> encoder_sizes{18, 500, 250, 100};
    std::vector<std::size_t> decoder_sizes{100, 250, 500, 18};
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    /// Constant multiplier applied to the training objective.
    double loss_scale = 1.0;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class LossKind : std::uint8_t {
    CrossEntropy,      // mean over samples of -log p(target); targets one-hot
    SquaredError,      // mean over samples of ||y_hat - y||^2
    MeanSquaredError,  // mean over samples and outputs of (y_hat - y)^2
};

struct TrainedModel {
    Network network;
    TrainConfig config;
    double initial_loss = 0.0;
    /// Per epoch: batch losses averaged with batch-size weights.
    std::vector<double> loss_trace;

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Zero-initialized networks with the configured shapes. Throw ConfigError on
/// inconsistent sizes.
Network make_classifier(const MlpConfig& config);
Network make_autoencoder(const AeConfig& config);

/// Seeded scaled-uniform fan-in initialization: U(-a, a) with a = sqrt(6 / fan_in)
/// ahead of ReLU and sqrt(3 / fan_in) otherwise. Biases start at zero.
void initialize(Network& net, std::uint64_t seed);

Matrix one_hot(std::span<const int> labels, std::size_t classes);

double loss(const Network& net, const Matrix& x, const Matrix& targets, LossKind kind);

/// Per-layer parameter gradients, same shapes as the network.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

/// Backpropagation. Writes the batch loss into `loss_out` when non-null.
Gradients backprop(const Network& net, const Matrix& x, const Matrix& targets, LossKind kind,
                   double* loss_out = nullptr);

/// Max over all parameters of |g_a - g_n| / max(|g_a|, |g_n|, 1e-8), where g_n is
/// the central difference with step `step`.
double gradient_check(const Network& net, const Matrix& x, const Matrix& targets, LossKind kind, double step = 1e-5);

/// Mini-batch SGD on softmax cross-entropy. `x` is 18 (or latent) x n.
/// Throws DivergenceError on a non-finite loss.
TrainedModel train_classifier(const Matrix& x, std::span<const int> labels, const MlpConfig& mlp,
                              const TrainConfig& train);

/// Mini-batch SGD on mean squared reconstruction error.
TrainedModel train_autoencoder(const Matrix& x, const AeConfig& ae, const TrainConfig& train);

/// Latent code of each column of `x`.
Matrix encode(const Network& ae, const Matrix& x);
Vector encode(const Network& ae, std::span<const double> x);
Matrix decode(const Network& ae, const Matrix& z);
Vector decode(const Network& ae, std::span<const double> z);

double reconstruction_mse(const Network& ae, const Matrix& x);

/// What the classifier consumes when an autoencoder precedes it.
enum class AeFeed : std::uint8_t { Latent, Reconstruction };

/// Index of the largest entry; ties resolve to the smallest index.
std::size_t argmax(std::span<const double> values);

struct Prediction {
    HospitalLevel label = HospitalLevel::Clinic;
    std::array<double, kLevelCount> probabilities{};
};

/// Classifier input for one scaled feature row: the row itself, or the
/// autoencoder's latent code / reconstruction of it.
Matrix classifier_input(const Matrix& x, const Network* ae, AeFeed feed);

/// Throws DataError when the classifier width does not match the chosen path.
Prediction predict(const Network& classifier, std::span<const double> x, const Network* ae = nullptr,
                   AeFeed feed = AeFeed::Latent);

/// Class probabilities for every column of `x` (4 x n).
Matrix predict_proba(const Network& classifier, const Matrix& x, const Network* ae = nullptr,
                     AeFeed feed = AeFeed::Latent);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

}  // namespace hlchoice::nn
