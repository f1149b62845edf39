#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dxnat/encode.hpp"
#include "dxnat/raster.hpp"
#include "dxnat/rng.hpp"

namespace dxnat::nn {

/// Dense row-major tensor of 64-bit reals.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static std::int64_t count(const std::vector<int>& shape);
    std::size_t size() const { return data.size(); }

    bool operator==(const Tensor& other) const = default;
};

enum class LayerKind {
    kConv2d,
    kRelu,
    kMaxPool2x2,
    kDropout,
    kFlatten,
    kConcatFeatures,
    kDense,
    kSoftmax,
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::kRelu;
    int filters = 0;  // conv2d output channels
    int kernel = 0;   // conv2d kernel size, odd
    double rate = 0.0; // dropout
    int units = 0;    // dense
    int features = 0; // concat_features vector length

    bool operator==(const LayerSpec& other) const = default;
};

LayerSpec conv2d(int filters, int kernel);
LayerSpec relu();
LayerSpec maxpool2x2();
LayerSpec dropout(double rate);
LayerSpec flatten();
LayerSpec concat_features(int features = encode::kInputClasses);
LayerSpec dense(int units);
LayerSpec softmax();

/// conv(8,3) -> relu -> pool -> dropout(0.25) -> conv(16,3) -> relu -> pool
/// -> dropout(0.25) -> flatten -> concat_features(31) -> dense(128) -> relu
/// -> dropout(0.5) -> dense(9) -> softmax.
std::vector<LayerSpec> default_architecture();

std::vector<LayerSpec> parse_architecture(const nlohmann::json& arr);
nlohmann::json architecture_json(const std::vector<LayerSpec>& specs);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    double validation_split = 0.2;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_accuracy = 0.0;
};

// Primitive ops, exposed for direct unit testing.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor maxpool2x2_forward(const Tensor& input);

/// Categorical cross-entropy of a probability vector against a one-hot
/// target, clamped at 1e-12. Throws when the output is not normalized.
double cross_entropy(const Tensor& output, const encode::OutputVector& target);

/// TCI pixels scaled to [0, 1], shape {1, width, width}.
Tensor image_from_tci(const raster::Tci& tci);

/**
 * @brief Feed-forward network over a square single-channel image plus the
 * 31-entry time feature vector spliced in mid-network.
 *
 * Training state (dropout masks, cached activations) lives inside the
 * object; inference via predict() is const and side-effect free.
 */
class Network {
public:
    Network() = default;

    static Network build(std::vector<LayerSpec> specs, int width, std::uint64_t seed);
    static Network build_default(int width, std::uint64_t seed);

    /// Runs the network. training=true applies dropout (unless disabled) and
    /// caches activations for a subsequent backward() call.
    Tensor forward(const Tensor& image, const encode::InputVector& features, bool training = false);

    /// Inference pass, no dropout, no caching.
    Tensor predict(const Tensor& image, const encode::InputVector& features) const;

    /// Gradients of cross_entropy(forward output, target) with respect to
    /// every parameter tensor, in parameters() order. Requires a prior
    /// forward() call with training=true.
    std::vector<Tensor> backward(const encode::OutputVector& target);

    /// Seeded mini-batch gradient descent. Returns the per-epoch log.
    std::vector<EpochStats> train(const std::vector<encode::LabeledSample>& dataset,
                                  const TrainConfig& cfg);

    void save(const std::string& path) const;
    static Network load(const std::string& path);

    const std::vector<LayerSpec>& layers() const { return specs_; }
    int input_width() const { return width_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<Tensor>& parameters() { return params_; }
    const std::vector<Tensor>& parameters() const { return params_; }

    /// Turns dropout off even in training mode; gradient checks need the
    /// forward pass to be a pure function of the parameters.
    void set_dropout_enabled(bool enabled) { dropout_enabled_ = enabled; }

    bool operator==(const Network& other) const;

private:
    struct LayerCache {
        Tensor input;
        std::vector<std::uint32_t> argmax; // maxpool winner indices
        std::vector<double> mask;          // dropout multipliers
    };
    struct Cache {
        bool valid = false;
        std::vector<LayerCache> layers;
        Tensor output;
        encode::InputVector features{};
    };

    Tensor run(const Tensor& image, const encode::InputVector& features, bool training,
               Cache* cache) const;

    std::vector<LayerSpec> specs_;
    std::vector<Tensor> params_;              // conv/dense weight+bias pairs, layer order
    std::vector<std::array<int, 2>> param_of_; // per layer: {weight idx, bias idx} or {-1,-1}
    std::vector<std::vector<int>> shapes_;     // shapes_[i] = input shape of layer i
    int width_ = 0;
    std::uint64_t seed_ = 0;
    bool dropout_enabled_ = true;
    mutable Rng dropout_rng_{0};
    Cache cache_;
};

} // namespace dxnat::nn
