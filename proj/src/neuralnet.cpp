#include "dxnat/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dxnat::nn {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kDropoutStream = 0x64726f70;
constexpr std::uint64_t kSplitStream = 0x73706c74;
constexpr std::uint64_t kShuffleStream = 0x73687566;

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.next_below(i)]);
    }
}

std::size_t argmax_index(const double* p, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (p[i] > p[best]) best = i;
    }
    return best;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("truncated model file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_f64_le(std::ostream& out, double d) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &d, sizeof bits);
    write_u64_le(out, bits);
}

double read_f64_le(std::istream& in) {
    const std::uint64_t bits = read_u64_le(in);
    double d = 0.0;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

Tensor maxpool_impl(const Tensor& in, std::vector<std::uint32_t>* argmax) {
    if (in.shape.size() != 3) throw std::runtime_error("maxpool2x2 needs a 3-d input");
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
    if (H % 2 != 0 || W % 2 != 0) {
        throw std::runtime_error("maxpool2x2 requires even input dimensions");
    }
    Tensor out({C, H / 2, W / 2});
    if (argmax) argmax->resize(out.size());
    std::size_t o = 0;
    for (int c = 0; c < C; ++c) {
        const double* plane = &in.data[static_cast<std::size_t>(c) * H * W];
        for (int y = 0; y < H; y += 2) {
            for (int x = 0; x < W; x += 2, ++o) {
                // row-major scan; first maximum wins ties
                std::size_t best = static_cast<std::size_t>(y) * W + x;
                const std::size_t cands[4] = {best, best + 1, best + W, best + W + 1};
                for (int i = 1; i < 4; ++i) {
                    if (plane[cands[i]] > plane[best]) best = cands[i];
                }
                out.data[o] = plane[best];
                if (argmax) {
                    (*argmax)[o] =
                        static_cast<std::uint32_t>(static_cast<std::size_t>(c) * H * W + best);
                }
            }
        }
    }
    return out;
}

} // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    const std::int64_t n = count(shape);
    if (n < 0) throw std::runtime_error("invalid tensor shape");
    data.assign(static_cast<std::size_t>(n), 0.0);
}

std::int64_t Tensor::count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 1) return -1;
        n *= d;
    }
    return shape.empty() ? -1 : n;
}

std::string to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool2x2: return "maxpool2x2";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kConcatFeatures: return "concat_features";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmax: return "softmax";
    }
    throw std::runtime_error("unknown layer kind");
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "conv2d") return LayerKind::kConv2d;
    if (name == "relu") return LayerKind::kRelu;
    if (name == "maxpool2x2") return LayerKind::kMaxPool2x2;
    if (name == "dropout") return LayerKind::kDropout;
    if (name == "flatten") return LayerKind::kFlatten;
    if (name == "concat_features") return LayerKind::kConcatFeatures;
    if (name == "dense") return LayerKind::kDense;
    if (name == "softmax") return LayerKind::kSoftmax;
    throw std::runtime_error("unknown layer kind '" + name + "'");
}

LayerSpec conv2d(int filters, int kernel) {
    LayerSpec s;
    s.kind = LayerKind::kConv2d;
    s.filters = filters;
    s.kernel = kernel;
    return s;
}

LayerSpec relu() { return LayerSpec{LayerKind::kRelu}; }

LayerSpec maxpool2x2() { return LayerSpec{LayerKind::kMaxPool2x2}; }

LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::kDropout;
    s.rate = rate;
    return s;
}

LayerSpec flatten() { return LayerSpec{LayerKind::kFlatten}; }

LayerSpec concat_features(int features) {
    LayerSpec s;
    s.kind = LayerKind::kConcatFeatures;
    s.features = features;
    return s;
}

LayerSpec dense(int units) {
    LayerSpec s;
    s.kind = LayerKind::kDense;
    s.units = units;
    return s;
}

LayerSpec softmax() { return LayerSpec{LayerKind::kSoftmax}; }

std::vector<LayerSpec> default_architecture() {
    return {
        conv2d(8, 3),  relu(), maxpool2x2(), dropout(0.25),
        conv2d(16, 3), relu(), maxpool2x2(), dropout(0.25),
        flatten(),     concat_features(),
        dense(128),    relu(), dropout(0.5),
        dense(encode::kOutputClasses), softmax(),
    };
}

std::vector<LayerSpec> parse_architecture(const nlohmann::json& arr) {
    if (!arr.is_array() || arr.empty()) {
        throw std::runtime_error("architecture must be a non-empty array");
    }
    std::vector<LayerSpec> out;
    out.reserve(arr.size());
    for (const nlohmann::json& item : arr) {
        if (!item.is_object() || !item.contains("kind")) {
            throw std::runtime_error("layer entry must be an object with a 'kind'");
        }
        LayerSpec s;
        s.kind = layer_kind_from_string(item.at("kind").get<std::string>());
        switch (s.kind) {
        case LayerKind::kConv2d:
            s.filters = item.at("filters").get<int>();
            s.kernel = item.at("kernel").get<int>();
            break;
        case LayerKind::kDropout:
            s.rate = item.at("rate").get<double>();
            break;
        case LayerKind::kDense:
            s.units = item.at("units").get<int>();
            break;
        case LayerKind::kConcatFeatures:
            s.features = item.value("features", static_cast<int>(encode::kInputClasses));
            break;
        default:
            break;
        }
        out.push_back(s);
    }
    return out;
}

nlohmann::json architecture_json(const std::vector<LayerSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const LayerSpec& s : specs) {
        nlohmann::json item;
        item["kind"] = to_string(s.kind);
        switch (s.kind) {
        case LayerKind::kConv2d:
            item["filters"] = s.filters;
            item["kernel"] = s.kernel;
            break;
        case LayerKind::kDropout:
            item["rate"] = s.rate;
            break;
        case LayerKind::kDense:
            item["units"] = s.units;
            break;
        case LayerKind::kConcatFeatures:
            item["features"] = s.features;
            break;
        default:
            break;
        }
        arr.push_back(item);
    }
    return arr;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw std::runtime_error("epochs must be >= 0");
    if (batch_size < 1) throw std::runtime_error("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::runtime_error("learning rate must be positive");
    if (!(validation_split > 0.0 && validation_split < 1.0)) {
        throw std::runtime_error("validation split must be in (0, 1)");
    }
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.shape.size() != 3) throw std::runtime_error("conv2d needs a 3-d input");
    if (weight.shape.size() != 4 || weight.shape[2] != weight.shape[3]) {
        throw std::runtime_error("conv2d weight must be {filters, channels, k, k}");
    }
    const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
    const int F = weight.shape[0], k = weight.shape[2];
    if (weight.shape[1] != C) throw std::runtime_error("conv2d channel mismatch");
    if (k % 2 == 0) throw std::runtime_error("conv2d kernel must be odd");
    if (bias.shape != std::vector<int>{F}) throw std::runtime_error("conv2d bias shape mismatch");
    const int P = k / 2;
    Tensor out({F, H, W});
    for (int f = 0; f < F; ++f) {
        double* op = &out.data[static_cast<std::size_t>(f) * H * W];
        std::fill_n(op, static_cast<std::size_t>(H) * W, bias.data[f]);
        for (int c = 0; c < C; ++c) {
            const double* ip = &input.data[static_cast<std::size_t>(c) * H * W];
            const double* wp = &weight.data[(static_cast<std::size_t>(f) * C + c) * k * k];
            for (int ky = 0; ky < k; ++ky) {
                const int sy = ky - P;
                for (int kx = 0; kx < k; ++kx) {
                    const int sx = kx - P;
                    const double w = wp[ky * k + kx];
                    const int y0 = std::max(0, -sy), y1 = std::min(H, H - sy);
                    const int x0 = std::max(0, -sx), x1 = std::min(W, W - sx);
                    for (int y = y0; y < y1; ++y) {
                        const double* irow = ip + static_cast<std::size_t>(y + sy) * W + sx;
                        double* orow = op + static_cast<std::size_t>(y) * W;
                        for (int x = x0; x < x1; ++x) orow[x] += w * irow[x];
                    }
                }
            }
        }
    }
    return out;
}

Tensor maxpool2x2_forward(const Tensor& input) { return maxpool_impl(input, nullptr); }

double cross_entropy(const Tensor& output, const encode::OutputVector& target) {
    if (output.shape != std::vector<int>{encode::kOutputClasses}) {
        throw std::runtime_error("output must be a 9-entry vector");
    }
    double sum = 0.0;
    for (double v : output.data) {
        if (v < -1e-9) throw std::runtime_error("non-normalized output");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw std::runtime_error("non-normalized output");
    const int cls = encode::class_index(encode::decode_label(target));
    const double p = std::max(output.data[cls], 1e-12);
    return -std::log(p);
}

Tensor image_from_tci(const raster::Tci& tci) {
    Tensor t({1, tci.width, tci.width});
    for (std::size_t i = 0; i < tci.pixels.size(); ++i) {
        t.data[i] = static_cast<double>(tci.pixels[i]) / 255.0;
    }
    return t;
}

Network Network::build(std::vector<LayerSpec> specs, int width, std::uint64_t seed) {
    if (width < 1) throw std::runtime_error("image width must be positive");
    if (specs.empty()) throw std::runtime_error("empty architecture");
    Network net;
    net.specs_ = std::move(specs);
    net.width_ = width;
    net.seed_ = seed;
    net.dropout_rng_ = Rng(derive_seed(seed, kDropoutStream));
    Rng init(derive_seed(seed, kInitStream));
    std::vector<int> shape = {1, width, width};
    int concat_count = 0;
    for (std::size_t i = 0; i < net.specs_.size(); ++i) {
        const LayerSpec& s = net.specs_[i];
        net.shapes_.push_back(shape);
        std::array<int, 2> pidx = {-1, -1};
        switch (s.kind) {
        case LayerKind::kConv2d: {
            if (shape.size() != 3) throw std::runtime_error("conv2d needs a 3-d input");
            if (s.filters < 1) throw std::runtime_error("conv2d needs at least one filter");
            if (s.kernel < 1 || s.kernel % 2 == 0) {
                throw std::runtime_error("conv2d kernel must be odd and positive");
            }
            Tensor w({s.filters, shape[0], s.kernel, s.kernel});
            const double limit = std::sqrt(6.0 / (shape[0] * s.kernel * s.kernel));
            for (double& v : w.data) v = (init.next_double() * 2.0 - 1.0) * limit;
            pidx = {static_cast<int>(net.params_.size()),
                    static_cast<int>(net.params_.size()) + 1};
            net.params_.push_back(std::move(w));
            net.params_.emplace_back(std::vector<int>{s.filters});
            shape = {s.filters, shape[1], shape[2]};
            break;
        }
        case LayerKind::kRelu:
        case LayerKind::kSoftmax:
            if (s.kind == LayerKind::kSoftmax) {
                if (shape.size() != 1) throw std::runtime_error("softmax needs a flat input");
                if (i + 1 != net.specs_.size()) {
                    throw std::runtime_error("softmax must be the final layer");
                }
            }
            break;
        case LayerKind::kMaxPool2x2: {
            if (shape.size() != 3) throw std::runtime_error("maxpool2x2 needs a 3-d input");
            if (shape[1] % 2 != 0 || shape[2] % 2 != 0) {
                throw std::runtime_error("maxpool2x2 requires even input dimensions");
            }
            shape = {shape[0], shape[1] / 2, shape[2] / 2};
            break;
        }
        case LayerKind::kDropout:
            if (!(s.rate >= 0.0 && s.rate < 1.0)) {
                throw std::runtime_error("dropout rate must be in [0, 1)");
            }
            break;
        case LayerKind::kFlatten: {
            const std::int64_t n = Tensor::count(shape);
            shape = {static_cast<int>(n)};
            break;
        }
        case LayerKind::kConcatFeatures:
            if (shape.size() != 1) throw std::runtime_error("concat_features needs a flat input");
            if (s.features != encode::kInputClasses) {
                throw std::runtime_error("concat_features length must be " +
                                         std::to_string(encode::kInputClasses));
            }
            ++concat_count;
            shape = {shape[0] + s.features};
            break;
        case LayerKind::kDense: {
            if (shape.size() != 1) throw std::runtime_error("dense needs a flat input");
            if (s.units < 1) throw std::runtime_error("dense needs at least one unit");
            Tensor w({s.units, shape[0]});
            const double limit = std::sqrt(6.0 / shape[0]);
            for (double& v : w.data) v = (init.next_double() * 2.0 - 1.0) * limit;
            pidx = {static_cast<int>(net.params_.size()),
                    static_cast<int>(net.params_.size()) + 1};
            net.params_.push_back(std::move(w));
            net.params_.emplace_back(std::vector<int>{s.units});
            shape = {s.units};
            break;
        }
        }
        net.param_of_.push_back(pidx);
    }
    if (net.specs_.back().kind != LayerKind::kSoftmax) {
        throw std::runtime_error("softmax must be the final layer");
    }
    if (concat_count != 1) {
        throw std::runtime_error("exactly one concat_features layer required");
    }
    if (shape != std::vector<int>{encode::kOutputClasses}) {
        throw std::runtime_error("output dimension must be " +
                                 std::to_string(encode::kOutputClasses));
    }
    return net;
}

Network Network::build_default(int width, std::uint64_t seed) {
    if (width < 8) throw std::runtime_error("width too small for two pooling stages");
    return build(default_architecture(), width, seed);
}

Tensor Network::run(const Tensor& image, const encode::InputVector& features, bool training,
                    Cache* cache) const {
    if (image.shape != std::vector<int>{1, width_, width_}) {
        throw std::runtime_error("input image shape mismatch");
    }
    if (cache) {
        cache->valid = false;
        cache->layers.assign(specs_.size(), {});
        cache->features = features;
    }
    Tensor x = image;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const LayerSpec& s = specs_[i];
        if (cache) cache->layers[i].input = x;
        switch (s.kind) {
        case LayerKind::kConv2d:
            x = conv2d_forward(x, params_[param_of_[i][0]], params_[param_of_[i][1]]);
            break;
        case LayerKind::kRelu:
            for (double& v : x.data) v = v > 0.0 ? v : 0.0;
            break;
        case LayerKind::kMaxPool2x2:
            x = maxpool_impl(x, cache ? &cache->layers[i].argmax : nullptr);
            break;
        case LayerKind::kDropout:
            if (training && dropout_enabled_ && s.rate > 0.0) {
                const double scale = 1.0 / (1.0 - s.rate);
                std::vector<double>* mask = cache ? &cache->layers[i].mask : nullptr;
                if (mask) mask->resize(x.size());
                for (std::size_t j = 0; j < x.data.size(); ++j) {
                    const double m = dropout_rng_.next_double() < s.rate ? 0.0 : scale;
                    x.data[j] *= m;
                    if (mask) (*mask)[j] = m;
                }
            }
            break;
        case LayerKind::kFlatten:
            x.shape = {static_cast<int>(x.size())};
            break;
        case LayerKind::kConcatFeatures: {
            Tensor y({x.shape[0] + s.features});
            std::copy(x.data.begin(), x.data.end(), y.data.begin());
            for (int j = 0; j < s.features; ++j) {
                y.data[x.data.size() + j] = features[j] ? 1.0 : 0.0;
            }
            x = std::move(y);
            break;
        }
        case LayerKind::kDense: {
            const Tensor& w = params_[param_of_[i][0]];
            const Tensor& b = params_[param_of_[i][1]];
            Tensor y({s.units});
            const int in_len = w.shape[1];
            for (int u = 0; u < s.units; ++u) {
                const double* wr = &w.data[static_cast<std::size_t>(u) * in_len];
                double acc = b.data[u];
                for (int j = 0; j < in_len; ++j) acc += wr[j] * x.data[j];
                y.data[u] = acc;
            }
            x = std::move(y);
            break;
        }
        case LayerKind::kSoftmax: {
            const double mx = *std::max_element(x.data.begin(), x.data.end());
            double sum = 0.0;
            for (double& v : x.data) {
                v = std::exp(v - mx);
                sum += v;
            }
            for (double& v : x.data) v /= sum;
            break;
        }
        }
    }
    if (cache) {
        cache->output = x;
        cache->valid = true;
    }
    return x;
}

Tensor Network::forward(const Tensor& image, const encode::InputVector& features, bool training) {
    if (!training) {
        cache_.valid = false;
        return run(image, features, false, nullptr);
    }
    return run(image, features, true, &cache_);
}

Tensor Network::predict(const Tensor& image, const encode::InputVector& features) const {
    return run(image, features, false, nullptr);
}

std::vector<Tensor> Network::backward(const encode::OutputVector& target) {
    if (!cache_.valid) throw std::runtime_error("backward without a cached forward pass");
    encode::decode_label(target); // validates one-hot
    std::vector<Tensor> grads;
    grads.reserve(params_.size());
    for (const Tensor& p : params_) grads.emplace_back(p.shape);

    // Softmax + cross-entropy fold: gradient at the softmax input.
    Tensor delta({encode::kOutputClasses});
    for (int j = 0; j < encode::kOutputClasses; ++j) {
        delta.data[j] = cache_.output.data[j] - static_cast<double>(target[j]);
    }

    for (std::size_t ii = specs_.size() - 1; ii-- > 0;) {
        const LayerSpec& s = specs_[ii];
        const LayerCache& lc = cache_.layers[ii];
        switch (s.kind) {
        case LayerKind::kConv2d: {
            const Tensor& in = lc.input;
            const Tensor& w = params_[param_of_[ii][0]];
            Tensor& dw = grads[param_of_[ii][0]];
            Tensor& db = grads[param_of_[ii][1]];
            const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
            const int F = w.shape[0], k = w.shape[2], P = k / 2;
            Tensor dx(in.shape);
            for (int f = 0; f < F; ++f) {
                const double* dp = &delta.data[static_cast<std::size_t>(f) * H * W];
                double bsum = 0.0;
                for (std::size_t j = 0; j < static_cast<std::size_t>(H) * W; ++j) bsum += dp[j];
                db.data[f] += bsum;
                for (int c = 0; c < C; ++c) {
                    const double* ip = &in.data[static_cast<std::size_t>(c) * H * W];
                    double* dxp = &dx.data[static_cast<std::size_t>(c) * H * W];
                    const std::size_t wbase = (static_cast<std::size_t>(f) * C + c) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const int sy = ky - P;
                        for (int kx = 0; kx < k; ++kx) {
                            const int sx = kx - P;
                            const double wv = w.data[wbase + ky * k + kx];
                            double wsum = 0.0;
                            const int y0 = std::max(0, -sy), y1 = std::min(H, H - sy);
                            const int x0 = std::max(0, -sx), x1 = std::min(W, W - sx);
                            for (int y = y0; y < y1; ++y) {
                                const double* irow =
                                    ip + static_cast<std::size_t>(y + sy) * W + sx;
                                double* dxrow = dxp + static_cast<std::size_t>(y + sy) * W + sx;
                                const double* drow = dp + static_cast<std::size_t>(y) * W;
                                for (int x = x0; x < x1; ++x) {
                                    wsum += irow[x] * drow[x];
                                    dxrow[x] += wv * drow[x];
                                }
                            }
                            dw.data[wbase + ky * k + kx] += wsum;
                        }
                    }
                }
            }
            delta = std::move(dx);
            break;
        }
        case LayerKind::kRelu: {
            for (std::size_t j = 0; j < delta.data.size(); ++j) {
                if (lc.input.data[j] <= 0.0) delta.data[j] = 0.0;
            }
            delta.shape = lc.input.shape;
            break;
        }
        case LayerKind::kMaxPool2x2: {
            Tensor dx(lc.input.shape);
            for (std::size_t j = 0; j < delta.data.size(); ++j) {
                dx.data[lc.argmax[j]] += delta.data[j];
            }
            delta = std::move(dx);
            break;
        }
        case LayerKind::kDropout:
            if (!lc.mask.empty()) {
                for (std::size_t j = 0; j < delta.data.size(); ++j) {
                    delta.data[j] *= lc.mask[j];
                }
            }
            break;
        case LayerKind::kFlatten:
            delta.shape = lc.input.shape;
            break;
        case LayerKind::kConcatFeatures: {
            Tensor dx(lc.input.shape);
            std::copy_n(delta.data.begin(), dx.data.size(), dx.data.begin());
            delta = std::move(dx);
            break;
        }
        case LayerKind::kDense: {
            const Tensor& w = params_[param_of_[ii][0]];
            Tensor& dw = grads[param_of_[ii][0]];
            Tensor& db = grads[param_of_[ii][1]];
            const int units = w.shape[0], in_len = w.shape[1];
            Tensor dx({in_len});
            for (int u = 0; u < units; ++u) {
                const double d = delta.data[u];
                db.data[u] += d;
                const double* wr = &w.data[static_cast<std::size_t>(u) * in_len];
                double* dwr = &dw.data[static_cast<std::size_t>(u) * in_len];
                const double* xr = lc.input.data.data();
                for (int j = 0; j < in_len; ++j) {
                    dwr[j] += d * xr[j];
                    dx.data[j] += d * wr[j];
                }
            }
            delta = std::move(dx);
            break;
        }
        case LayerKind::kSoftmax:
            throw std::runtime_error("softmax must be the final layer");
        }
    }
    return grads;
}

std::vector<EpochStats> Network::train(const std::vector<encode::LabeledSample>& dataset,
                                       const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::runtime_error("empty dataset");
    const std::size_t n = dataset.size();
    std::vector<Tensor> images;
    std::vector<encode::InputVector> feats;
    std::vector<encode::OutputVector> targets;
    images.reserve(n);
    feats.reserve(n);
    targets.reserve(n);
    for (const encode::LabeledSample& s : dataset) {
        if (s.tci.width != width_) throw std::runtime_error("sample width mismatch");
        images.push_back(image_from_tci(s.tci));
        feats.push_back(encode::encode_features(s.features));
        targets.push_back(encode::encode_label(s.label));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(cfg.seed, kSplitStream));
    shuffle_indices(order, split_rng);
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(cfg.validation_split * static_cast<double>(n)));
    std::vector<std::size_t> train_idx(order.begin(), order.end() - n_val);
    std::vector<std::size_t> val_idx(order.end() - n_val, order.end());
    if (val_idx.empty()) val_idx = order; // tiny datasets validate on everything

    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
    std::vector<EpochStats> log;
    log.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(train_idx, shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Tensor> accum;
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t idx = train_idx[bi];
                const Tensor out = forward(images[idx], feats[idx], true);
                loss_sum += cross_entropy(out, targets[idx]);
                std::vector<Tensor> g = backward(targets[idx]);
                if (accum.empty()) {
                    accum = std::move(g);
                } else {
                    for (std::size_t p = 0; p < accum.size(); ++p) {
                        for (std::size_t j = 0; j < accum[p].data.size(); ++j) {
                            accum[p].data[j] += g[p].data[j];
                        }
                    }
                }
            }
            const double step = cfg.learning_rate / static_cast<double>(stop - start);
            for (std::size_t p = 0; p < params_.size(); ++p) {
                for (std::size_t j = 0; j < params_[p].data.size(); ++j) {
                    params_[p].data[j] -= step * accum[p].data[j];
                }
            }
        }
        std::size_t correct = 0;
        for (std::size_t idx : val_idx) {
            const Tensor out = predict(images[idx], feats[idx]);
            const std::size_t pred = argmax_index(out.data.data(), out.data.size());
            if (static_cast<int>(pred) == encode::class_index(dataset[idx].label)) ++correct;
        }
        EpochStats st;
        st.epoch = epoch;
        st.mean_loss = loss_sum / static_cast<double>(train_idx.size());
        st.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_idx.size());
        log.push_back(st);
    }
    cache_.valid = false;
    return log;
}

void Network::save(const std::string& path) const {
    nlohmann::json header;
    header["version"] = 1;
    header["width"] = width_;
    header["seed"] = seed_;
    header["layers"] = architecture_json(specs_);
    nlohmann::json shapes = nlohmann::json::array();
    for (const Tensor& p : params_) shapes.push_back(p.shape);
    header["params"] = shapes;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out.write("DXNAT1\n", 7);
    write_u64_le(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const Tensor& p : params_) {
        for (double v : p.data) write_f64_le(out, v);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Network Network::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("model not found: " + path);
    char magic[7] = {};
    in.read(magic, 7);
    if (!in || std::memcmp(magic, "DXNAT1\n", 7) != 0) {
        throw std::runtime_error("not a model file (wrong magic): " + path);
    }
    const std::uint64_t hlen = read_u64_le(in);
    if (hlen == 0 || hlen > (1u << 24)) throw std::runtime_error("corrupt model header");
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("truncated model file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("corrupt model header");
    }
    if (!header.contains("version")) throw std::runtime_error("model version missing");
    if (header.at("version").get<int>() != 1) {
        throw std::runtime_error("unsupported model version");
    }
    const int width = header.at("width").get<int>();
    const std::uint64_t seed = header.at("seed").get<std::uint64_t>();
    Network net = build(parse_architecture(header.at("layers")), width, seed);
    const nlohmann::json& shapes = header.at("params");
    if (shapes.size() != net.params_.size()) {
        throw std::runtime_error("parameter list mismatch");
    }
    for (std::size_t p = 0; p < net.params_.size(); ++p) {
        if (shapes[p].get<std::vector<int>>() != net.params_[p].shape) {
            throw std::runtime_error("parameter shape mismatch");
        }
        for (double& v : net.params_[p].data) v = read_f64_le(in);
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
        throw std::runtime_error("trailing data in model file");
    }
    return net;
}

bool Network::operator==(const Network& other) const {
    return specs_ == other.specs_ && width_ == other.width_ && seed_ == other.seed_ &&
           params_ == other.params_;
}

} // namespace dxnat::nn
