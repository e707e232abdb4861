#include "hlchoice/neuralnet.hpp"

#include <algorithm>
#include <cmath>

#include "hlchoice/error.hpp"
#include "hlchoice/rng.hpp"

namespace hlchoice::nn {

std::string_view activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

Activation activation_from_name(std::string_view name) {
    for (auto a : {Activation::Identity, Activation::Relu, Activation::Sigmoid, Activation::Softmax}) {
        if (activation_name(a) == name) return a;
    }
    throw DataError("unknown activation '" + std::string(name) + "'");
}

namespace {

void apply_activation(Matrix& z, Activation a) {
    switch (a) {
        case Activation::Identity: break;
        case Activation::Relu: z = z.cwiseMax(0.0); break;
        case Activation::Sigmoid: z = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
        case Activation::Softmax:
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                auto col = z.col(c);
                col.array() -= col.maxCoeff();
                col = col.array().exp().matrix();
                col /= col.sum();
            }
            break;
    }
}

Matrix layer_forward(const LayerParams& layer, const Matrix& in) {
    Matrix z = layer.weights * in;
    z.colwise() += layer.biases;
    apply_activation(z, layer.activation);
    return z;
}

struct ForwardCache {
    std::vector<Matrix> pre;   // pre-activation of layer l
    std::vector<Matrix> post;  // post[0] = input, post[l + 1] = output of layer l
};

ForwardCache forward_cached(const Network& net, const Matrix& x) {
    ForwardCache c;
    const auto& layers = net.layers();
    c.pre.reserve(layers.size());
    c.post.reserve(layers.size() + 1);
    c.post.push_back(x);
    for (const auto& layer : layers) {
        Matrix z = layer.weights * c.post.back();
        z.colwise() += layer.biases;
        c.pre.push_back(z);
        apply_activation(z, layer.activation);
        c.post.push_back(std::move(z));
    }
    return c;
}

void check_loss_pairing(const Network& net, LossKind kind) {
    const bool softmax = net.layers().back().activation == Activation::Softmax;
    if ((kind == LossKind::CrossEntropy) != softmax) {
        throw ConfigError("cross-entropy requires a softmax output layer and vice versa");
    }
}

/// Loss from the cached pass; cross-entropy uses the logits for stability.
double loss_from_cache(const ForwardCache& c, const Matrix& targets, LossKind kind) {
    const double batch = static_cast<double>(targets.cols());
    switch (kind) {
        case LossKind::CrossEntropy: {
            const Matrix& logits = c.pre.back();
            double total = 0.0;
            for (Eigen::Index j = 0; j < logits.cols(); ++j) {
                const double m = logits.col(j).maxCoeff();
                const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
                total += targets.col(j).dot((lse - logits.col(j).array()).matrix());
            }
            return total / batch;
        }
        case LossKind::SquaredError: return (c.post.back() - targets).squaredNorm() / batch;
        case LossKind::MeanSquaredError:
            return (c.post.back() - targets).squaredNorm() / (batch * static_cast<double>(targets.rows()));
    }
    return 0.0;
}

void check_batch(const Network& net, const Matrix& x, const Matrix& targets) {
    if (static_cast<std::size_t>(x.rows()) != net.input_dim()) {
        throw DataError("input has " + std::to_string(x.rows()) + " features, network expects " +
                        std::to_string(net.input_dim()));
    }
    if (static_cast<std::size_t>(targets.rows()) != net.output_dim() || targets.cols() != x.cols()) {
        throw DataError("target shape does not match network output");
    }
}

std::vector<LayerParams> stack(const std::vector<std::size_t>& sizes, const std::vector<Activation>& acts) {
    std::vector<LayerParams> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        if (sizes[i] == 0 || sizes[i + 1] == 0) throw ConfigError("layer sizes must be positive");
        LayerParams l;
        l.weights = Matrix::Zero(static_cast<Eigen::Index>(sizes[i + 1]), static_cast<Eigen::Index>(sizes[i]));
        l.biases = Vector::Zero(static_cast<Eigen::Index>(sizes[i + 1]));
        l.activation = acts[i];
        layers.push_back(std::move(l));
    }
    return layers;
}

}  // namespace

Network::Network(NetworkKind kind, std::vector<LayerParams> layers, std::size_t encoder_layers)
    : kind_(kind), layers_(std::move(layers)), encoder_layers_(encoder_layers) {
    if (layers_.empty()) throw ConfigError("a network needs at least one layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
        if (layers_[i].out_dim() != layers_[i + 1].in_dim()) {
            throw ConfigError("layer " + std::to_string(i) + " output width does not match layer " +
                              std::to_string(i + 1) + " input width");
        }
    }
    for (const auto& l : layers_) {
        if (static_cast<std::size_t>(l.biases.size()) != l.out_dim()) throw ConfigError("bias length mismatch");
    }
    if (kind_ == NetworkKind::Autoencoder && (encoder_layers_ == 0 || encoder_layers_ >= layers_.size())) {
        throw ConfigError("autoencoder needs both encoder and decoder layers");
    }
}

std::size_t Network::latent_dim() const {
    if (kind_ != NetworkKind::Autoencoder) throw DataError("latent_dim requested from a classifier");
    return layers_[encoder_layers_ - 1].out_dim();
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
}

Matrix Network::forward(const Matrix& x) const { return forward_range(x, 0, layers_.size()); }

Matrix Network::forward_range(const Matrix& x, std::size_t first, std::size_t last) const {
    if (first < last && static_cast<std::size_t>(x.rows()) != layers_[first].in_dim()) {
        throw DataError("input has " + std::to_string(x.rows()) + " rows, layer expects " +
                        std::to_string(layers_[first].in_dim()));
    }
    Matrix a = x;
    for (std::size_t i = first; i < last; ++i) a = layer_forward(layers_[i], a);
    return a;
}

Network make_classifier(const MlpConfig& config) {
    const auto& s = config.layer_sizes;
    if (s.size() < 2) throw ConfigError("classifier needs at least input and output sizes");
    std::vector<Activation> acts(s.size() - 1, Activation::Relu);
    acts.back() = Activation::Softmax;
    return Network(NetworkKind::Classifier, stack(s, acts));
}

Network make_autoencoder(const AeConfig& config) {
    const auto& enc = config.encoder_sizes;
    const auto& dec = config.decoder_sizes;
    if (enc.size() < 2 || dec.size() < 2) throw ConfigError("autoencoder needs encoder and decoder layers");
    if (enc.back() != dec.front()) throw ConfigError("decoder must start at the latent width");
    if (enc.front() != dec.back()) throw ConfigError("reconstruction width must equal input width");
    std::vector<std::size_t> sizes(enc.begin(), enc.end());
    sizes.insert(sizes.end(), dec.begin() + 1, dec.end());
    const std::size_t encoder_layers = enc.size() - 1;
    std::vector<Activation> acts(sizes.size() - 1, Activation::Relu);
    acts[encoder_layers - 1] = Activation::Sigmoid;
    acts.back() = Activation::Identity;
    return Network(NetworkKind::Autoencoder, stack(sizes, acts), encoder_layers);
}

void initialize(Network& net, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : net.layers()) {
        const double fan_in = static_cast<double>(layer.in_dim());
        const double gain = layer.activation == Activation::Relu ? 6.0 : 3.0;
        const double a = std::sqrt(gain / fan_in);
        // Column-major fill order is part of the determinism contract.
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = rng.uniform(-a, a);
        }
        layer.biases.setZero();
    }
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (labels[j] < 0 || static_cast<std::size_t>(labels[j]) >= classes) throw DataError("label out of range");
        y(labels[j], static_cast<Eigen::Index>(j)) = 1.0;
    }
    return y;
}

double loss(const Network& net, const Matrix& x, const Matrix& targets, LossKind kind) {
    check_loss_pairing(net, kind);
    check_batch(net, x, targets);
    return loss_from_cache(forward_cached(net, x), targets, kind);
}

Gradients backprop(const Network& net, const Matrix& x, const Matrix& targets, LossKind kind, double* loss_out) {
    check_loss_pairing(net, kind);
    check_batch(net, x, targets);
    const auto cache = forward_cached(net, x);
    if (loss_out != nullptr) *loss_out = loss_from_cache(cache, targets, kind);

    const auto& layers = net.layers();
    const std::size_t depth = layers.size();
    const double batch = static_cast<double>(x.cols());
    Gradients g;
    g.weights.resize(depth);
    g.biases.resize(depth);

    // dL/dZ of the output layer.
    Matrix delta;
    const Matrix& out = cache.post.back();
    switch (kind) {
        case LossKind::CrossEntropy: delta = (out - targets) / batch; break;
        case LossKind::SquaredError: delta = 2.0 * (out - targets) / batch; break;
        case LossKind::MeanSquaredError:
            delta = 2.0 * (out - targets) / (batch * static_cast<double>(targets.rows()));
            break;
    }
    if (kind != LossKind::CrossEntropy) {
        const Activation a = layers.back().activation;
        if (a == Activation::Relu) {
            delta.array() *= (cache.pre.back().array() > 0.0).cast<double>();
        } else if (a == Activation::Sigmoid) {
            delta.array() *= out.array() * (1.0 - out.array());
        }
    }

    for (std::size_t l = depth; l-- > 0;) {
        g.weights[l].noalias() = delta * cache.post[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l == 0) break;
        Matrix upstream = layers[l].weights.transpose() * delta;
        switch (layers[l - 1].activation) {
            case Activation::Identity: break;
            case Activation::Relu: upstream.array() *= (cache.pre[l - 1].array() > 0.0).cast<double>(); break;
            case Activation::Sigmoid: {
                const auto& s = cache.post[l].array();
                upstream.array() *= s * (1.0 - s);
                break;
            }
            case Activation::Softmax: throw ConfigError("softmax is only supported on the output layer");
        }
        delta = std::move(upstream);
    }
    return g;
}

double gradient_check(const Network& net, const Matrix& x, const Matrix& targets, LossKind kind, double step) {
    const Gradients analytic = backprop(net, x, targets, kind);
    Network probe = net;
    double worst = 0.0;
    auto compare = [&](double ga, double& param) {
        const double saved = param;
        param = saved + step;
        const double up = loss(probe, x, targets, kind);
        param = saved - step;
        const double down = loss(probe, x, targets, kind);
        param = saved;
        const double gn = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(ga), std::abs(gn), 1e-8});
        worst = std::max(worst, std::abs(ga - gn) / denom);
    };
    for (std::size_t l = 0; l < probe.layers().size(); ++l) {
        auto& layer = probe.layers()[l];
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) compare(analytic.weights[l](r, c), layer.weights(r, c));
        }
        for (Eigen::Index r = 0; r < layer.biases.size(); ++r) compare(analytic.biases[l](r), layer.biases(r));
    }
    return worst;
}

namespace {

TrainedModel train_network(Network net, const Matrix& x, const Matrix& targets, LossKind kind,
                           const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw ConfigError("learning_rate must be a positive finite number");
    }
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(cfg.loss_scale > 0.0) || !std::isfinite(cfg.loss_scale)) throw ConfigError("loss_scale must be positive");
    const auto n = static_cast<std::size_t>(x.cols());
    if (n == 0) throw DataError("cannot train on zero rows");
    if (cfg.batch_size > n) {
        throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds the " + std::to_string(n) +
                          " training rows");
    }

    initialize(net, derive_seed(cfg.seed, "init"));
    TrainedModel model;
    model.config = cfg;
    model.initial_loss = loss(net, x, targets, kind);
    if (!std::isfinite(model.initial_loss)) throw DivergenceError(0, "initial loss is not finite");

    Rng rng(derive_seed(cfg.seed, "batches"));
    const double step = cfg.learning_rate * cfg.loss_scale;
    std::vector<Eigen::Index> idx;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = rng.permutation(n);
        double weighted = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
            const Matrix xb = x(Eigen::all, idx);
            const Matrix yb = targets(Eigen::all, idx);
            double batch_loss = 0.0;
            const Gradients g = backprop(net, xb, yb, kind, &batch_loss);
            if (!std::isfinite(batch_loss)) {
                throw DivergenceError(epoch + 1, "non-finite loss; lower the learning rate");
            }
            weighted += batch_loss * static_cast<double>(end - start);
            for (std::size_t l = 0; l < net.layers().size(); ++l) {
                net.layers()[l].weights.noalias() -= step * g.weights[l];
                net.layers()[l].biases.noalias() -= step * g.biases[l];
            }
        }
        const double epoch_loss = weighted / static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) throw DivergenceError(epoch + 1, "non-finite loss; lower the learning rate");
        model.loss_trace.push_back(epoch_loss);
    }
    model.network = std::move(net);
    return model;
}

}  // namespace

TrainedModel train_classifier(const Matrix& x, std::span<const int> labels, const MlpConfig& mlp,
                              const TrainConfig& train) {
    Network net = make_classifier(mlp);
    if (static_cast<std::size_t>(x.cols()) != labels.size()) throw DataError("feature/label count mismatch");
    Matrix targets = one_hot(labels, net.output_dim());
    return train_network(std::move(net), x, targets, LossKind::CrossEntropy, train);
}

TrainedModel train_autoencoder(const Matrix& x, const AeConfig& ae, const TrainConfig& train) {
    return train_network(make_autoencoder(ae), x, x, LossKind::MeanSquaredError, train);
}

Matrix encode(const Network& ae, const Matrix& x) {
    if (ae.kind() != NetworkKind::Autoencoder) throw DataError("encode requires an autoencoder");
    return ae.forward_range(x, 0, ae.encoder_layers());
}

Vector encode(const Network& ae, std::span<const double> x) {
    Matrix m = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    return encode(ae, m).col(0);
}

Matrix decode(const Network& ae, const Matrix& z) {
    if (ae.kind() != NetworkKind::Autoencoder) throw DataError("decode requires an autoencoder");
    return ae.forward_range(z, ae.encoder_layers(), ae.layers().size());
}

Vector decode(const Network& ae, std::span<const double> z) {
    Matrix m = Eigen::Map<const Vector>(z.data(), static_cast<Eigen::Index>(z.size()));
    return decode(ae, m).col(0);
}

double reconstruction_mse(const Network& ae, const Matrix& x) {
    return loss(ae, x, x, LossKind::MeanSquaredError);
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

Matrix classifier_input(const Matrix& x, const Network* ae, AeFeed feed) {
    if (ae == nullptr) return x;
    return feed == AeFeed::Latent ? encode(*ae, x) : ae->forward(x);
}

Matrix predict_proba(const Network& classifier, const Matrix& x, const Network* ae, AeFeed feed) {
    std::size_t expected = static_cast<std::size_t>(x.rows());
    if (ae != nullptr) expected = feed == AeFeed::Latent ? ae->latent_dim() : ae->output_dim();
    if (classifier.input_dim() != expected) {
        throw DataError("classifier expects " + std::to_string(classifier.input_dim()) +
                        " inputs but the chosen path supplies " + std::to_string(expected));
    }
    return classifier.forward(classifier_input(x, ae, feed));
}

Prediction predict(const Network& classifier, std::span<const double> x, const Network* ae, AeFeed feed) {
    Matrix m = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Matrix p = predict_proba(classifier, m, ae, feed);
    if (p.rows() != static_cast<Eigen::Index>(kLevelCount)) throw DataError("classifier must output 4 classes");
    Prediction out;
    for (std::size_t c = 0; c < kLevelCount; ++c) out.probabilities[c] = p(static_cast<Eigen::Index>(c), 0);
    out.label = static_cast<HospitalLevel>(argmax(out.probabilities));
    return out;
}

nlohmann::json to_json(const TrainedModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : model.network.layers()) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        }
        layers.push_back({{"in", l.in_dim()},
                          {"out", l.out_dim()},
                          {"activation", activation_name(l.activation)},
                          {"weights", w},
                          {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}});
    }
    const auto& c = model.config;
    return {{"format", "hlchoice-model"},
            {"version", 1},
            {"kind", model.network.kind() == NetworkKind::Autoencoder ? "autoencoder" : "classifier"},
            {"encoder_layers", model.network.encoder_layers()},
            {"train_config",
             {{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"loss_scale", c.loss_scale}}},
            {"initial_loss", model.initial_loss},
            {"loss_trace", model.loss_trace},
            {"layers", layers}};
}

TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "hlchoice-model") throw DataError("not a model file");
    if (j.value("version", 0) != 1) throw DataError("unsupported model file version");
    const std::string kind = j.at("kind").get<std::string>();
    std::vector<LayerParams> layers;
    for (const auto& lj : j.at("layers")) {
        const auto in = lj.at("in").get<Eigen::Index>();
        const auto out = lj.at("out").get<Eigen::Index>();
        const auto w = lj.at("weights").get<std::vector<double>>();
        const auto b = lj.at("biases").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
            throw DataError("layer parameter count does not match its declared shape");
        }
        LayerParams l;
        l.weights.resize(out, in);
        for (Eigen::Index r = 0; r < out; ++r) {
            for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
        }
        l.biases = Eigen::Map<const Vector>(b.data(), out);
        l.activation = activation_from_name(lj.at("activation").get<std::string>());
        layers.push_back(std::move(l));
    }
    TrainedModel m;
    m.network = Network(kind == "autoencoder" ? NetworkKind::Autoencoder : NetworkKind::Classifier, std::move(layers),
                        j.value("encoder_layers", std::size_t{0}));
    const auto& c = j.at("train_config");
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.loss_scale = c.value("loss_scale", 1.0);
    m.initial_loss = j.at("initial_loss").get<double>();
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return m;
}

}  // namespace hlchoice::nn
