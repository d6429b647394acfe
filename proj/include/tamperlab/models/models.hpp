#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tamperlab/nn/layers.hpp"
#include "tamperlab/nn/tape.hpp"
#include "tamperlab/types.hpp"

namespace tamperlab::models {

enum class ModelKind {
    CNN,
    ResNet,
    TranDeepFFN,
    TranCNNFFN,
    FeatCNNTran,
    FeatCNNTranCNN,
    CWTFeatCNNTran,
    SiameseTran,
    SiameseFeatCNNTran
};

inline constexpr std::array<ModelKind, 9> kAllModelKinds = {
    ModelKind::CNN,           ModelKind::ResNet,        ModelKind::TranDeepFFN,
    ModelKind::TranCNNFFN,    ModelKind::FeatCNNTran,   ModelKind::FeatCNNTranCNN,
    ModelKind::CWTFeatCNNTran, ModelKind::SiameseTran,  ModelKind::SiameseFeatCNNTran};

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::CNN: return "cnn";
        case ModelKind::ResNet: return "resnet";
        case ModelKind::TranDeepFFN: return "tran-deepffn";
        case ModelKind::TranCNNFFN: return "tran-cnnffn";
        case ModelKind::FeatCNNTran: return "featcnn-tran";
        case ModelKind::FeatCNNTranCNN: return "featcnn-trancnn";
        case ModelKind::CWTFeatCNNTran: return "cwt-featcnn-tran";
        case ModelKind::SiameseTran: return "siamese-tran";
        case ModelKind::SiameseFeatCNNTran: return "siamese-featcnn-tran";
    }
    return "?";
}

inline ModelKind model_kind_from_string(std::string_view s) {
    for (ModelKind k : kAllModelKinds)
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown model kind: " + std::string(s));
}

inline bool is_siamese(ModelKind k) {
    return k == ModelKind::SiameseTran || k == ModelKind::SiameseFeatCNNTran;
}

// Raw 1-D input vs CWT scalogram input, per the per-model table.
inline bool uses_cwt_input(ModelKind k) {
    switch (k) {
        case ModelKind::TranDeepFFN:
        case ModelKind::TranCNNFFN:
        case ModelKind::CWTFeatCNNTran:
        case ModelKind::SiameseTran: return true;
        default: return false;
    }
}

inline constexpr std::int64_t kEmbeddingDim = 128; // fixed across scales

// scale = 1 is architecture-faithful; smaller values shrink the time extent
// by an integer pooling factor and the layer widths proportionally (floored
// at 8 so every kind stays buildable).
struct ModelConfig {
    double scale = 1.0;
    std::uint64_t seed = 0;
    double conv_dropout = 0.3;
    double attn_dropout = 0.1;
    // true: attention subspaces stay at width 48 (scaled) regardless of the
    // model dim, matching the stated 8x48 configuration; false: head_dim =
    // d_model / heads.
    bool literal_head_dim = true;

    void validate() const {
        if (!(scale > 0.0 && scale <= 4.0)) throw std::invalid_argument("model scale out of range (0, 4]");
        if (conv_dropout < 0.0 || conv_dropout >= 1.0 || attn_dropout < 0.0 || attn_dropout >= 1.0)
            throw std::invalid_argument("dropout rate out of [0, 1)");
    }

    std::int64_t pool_factor() const {
        const auto p = static_cast<std::int64_t>(std::llround(1.0 / scale));
        return std::clamp<std::int64_t>(p, 1, 32);
    }
    std::int64_t time_steps() const { return static_cast<std::int64_t>(kSegmentLen) / pool_factor(); }
    std::int64_t width(std::int64_t w) const {
        return std::max<std::int64_t>(8, std::llround(static_cast<double>(w) * scale));
    }
    std::int64_t cwt_bins() const { return width(96); }
    std::int64_t head_dim(std::int64_t d_model, std::int64_t heads) const {
        return literal_head_dim ? width(48) : std::max<std::int64_t>(8, d_model / heads);
    }
};

template <class T>
struct Model {
    ModelKind kind = ModelKind::CNN;
    ModelConfig cfg;
    nn::Shape input_shape; // {time, channels}, no batch dim
    bool siamese = false;
    std::unique_ptr<nn::Layer<T>> net;

    int forward(nn::Ctx<T>& ctx, int x) { return net->forward(ctx, x); }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> tr, buf;
        net->collect(tr, buf);
        return tr;
    }
    std::vector<nn::Param<T>*> buffers() {
        std::vector<nn::Param<T>*> tr, buf;
        net->collect(tr, buf);
        return buf;
    }
    std::int64_t param_count() {
        std::int64_t n = 0;
        for (auto* p : params()) n += p->size();
        return n;
    }
};

namespace detail {

template <class T>
void add_conv_stage(nn::Sequential<T>& seq, const std::string& nm, tamperlab::Rng& rng,
                    std::int64_t kernel, std::int64_t ci, std::int64_t co, double drop,
                    std::uint64_t& tags) {
    seq.template emplace<nn::Conv1D<T>>(nm, rng, kernel, ci, co, nn::Act::ReLU, false);
    seq.template emplace<nn::BatchNorm1D<T>>(nm + "_bn", co);
    seq.template emplace<nn::MaxPool1D<T>>(nm + "_pool", 2);
    seq.template emplace<nn::Dropout<T>>(nm + "_drop", drop, ++tags);
}

// Three-conv front end shared by the hybrid models; kernels step down,
// filters step up, pooling halves the time extent per stage.
template <class T>
std::int64_t add_extractor(nn::Sequential<T>& seq, tamperlab::Rng& rng, const ModelConfig& cfg,
                           std::int64_t in_ch, std::int64_t k1, double drop, std::uint64_t& tags) {
    add_conv_stage(seq, "feat1", rng, k1, in_ch, cfg.width(64), drop, tags);
    add_conv_stage(seq, "feat2", rng, 5, cfg.width(64), cfg.width(128), drop, tags);
    add_conv_stage(seq, "feat3", rng, 3, cfg.width(128), cfg.width(256), drop, tags);
    return cfg.width(256);
}

template <class T>
void add_encoder_stack(nn::Sequential<T>& seq, tamperlab::Rng& rng, const ModelConfig& cfg,
                       std::int64_t d, std::int64_t heads, nn::FfnKind ffn, std::uint64_t& tags,
                       std::int64_t expand = 0) {
    seq.template emplace<nn::PositionalEncoding<T>>("posenc");
    for (int i = 1; i <= 3; ++i) {
        seq.template emplace<nn::EncoderBlock<T>>(
            "enc" + std::to_string(i), rng, d, heads, cfg.head_dim(d, heads), ffn, cfg.attn_dropout,
            tags, cfg.width(64), cfg.width(128), expand);
    }
}

template <class T>
void add_classifier_head(nn::Sequential<T>& seq, tamperlab::Rng& rng, const ModelConfig& cfg,
                         std::int64_t in) {
    seq.template emplace<nn::Dense<T>>("head1", rng, in, cfg.width(512), nn::Act::ReLU);
    seq.template emplace<nn::Dense<T>>("head2", rng, cfg.width(512), cfg.width(256), nn::Act::ReLU);
    seq.template emplace<nn::Dense<T>>("out", rng, cfg.width(256), 1, nn::Act::Sigmoid);
}

template <class T>
void add_embedding_head(nn::Sequential<T>& seq, tamperlab::Rng& rng, const ModelConfig& cfg,
                        std::int64_t in) {
    seq.template emplace<nn::Dense<T>>("head1", rng, in, cfg.width(512), nn::Act::ReLU);
    seq.template emplace<nn::Dense<T>>("head2", rng, cfg.width(512), cfg.width(256), nn::Act::ReLU);
    // bias-free: a shared additive offset cancels in the embedding distance
    seq.template emplace<nn::Dense<T>>("embed", rng, cfg.width(256), kEmbeddingDim, nn::Act::None, false);
}

} // namespace detail

template <class T>
Model<T> build_model(ModelKind kind, const ModelConfig& cfg) {
    cfg.validate();
    tamperlab::Rng rng(hash_mix(cfg.seed, fnv1a(to_string(kind))));
    std::uint64_t tags = 0;

    Model<T> m;
    m.kind = kind;
    m.cfg = cfg;
    m.siamese = is_siamese(kind);
    const std::int64_t t0 = cfg.time_steps();
    const std::int64_t in_ch = uses_cwt_input(kind) ? cfg.cwt_bins() : 1;
    m.input_shape = {t0, in_ch};

    auto seq = std::make_unique<nn::Sequential<T>>();

    switch (kind) {
        case ModelKind::CNN: {
            detail::add_conv_stage(*seq, "conv1", rng, 7, 1, cfg.width(64), cfg.conv_dropout, tags);
            detail::add_conv_stage(*seq, "conv2", rng, 5, cfg.width(64), cfg.width(128), cfg.conv_dropout, tags);
            detail::add_conv_stage(*seq, "conv3", rng, 3, cfg.width(128), cfg.width(256), cfg.conv_dropout, tags);
            seq->template emplace<nn::Flatten<T>>();
            const std::int64_t flat = (t0 / 8) * cfg.width(256);
            seq->template emplace<nn::Dense<T>>("fc1", rng, flat, cfg.width(128), nn::Act::ReLU);
            seq->template emplace<nn::Dense<T>>("fc2", rng, cfg.width(128), cfg.width(64), nn::Act::ReLU);
            seq->template emplace<nn::Dense<T>>("out", rng, cfg.width(64), 1, nn::Act::Sigmoid);
            break;
        }
        case ModelKind::ResNet: {
            const std::int64_t w1 = cfg.width(64), w2 = cfg.width(128);
            seq->template emplace<nn::ResidualBlock<T>>("block1", rng, 1, w1);
            seq->template emplace<nn::ResidualBlock<T>>("block2", rng, w1, w1);
            seq->template emplace<nn::ResidualBlock<T>>("block3", rng, w1, w2);
            seq->template emplace<nn::ResidualBlock<T>>("block4", rng, w2, w2);
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            seq->template emplace<nn::Dense<T>>("out", rng, w2, 1, nn::Act::Sigmoid);
            break;
        }
        case ModelKind::TranDeepFFN: {
            const std::int64_t d = cfg.cwt_bins();
            detail::add_encoder_stack(*seq, rng, cfg, d, 8, nn::FfnKind::Deep, tags);
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            detail::add_classifier_head(*seq, rng, cfg, d);
            break;
        }
        case ModelKind::TranCNNFFN: {
            const std::int64_t d = cfg.cwt_bins();
            detail::add_encoder_stack(*seq, rng, cfg, d, 8, nn::FfnKind::Conv, tags);
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            detail::add_classifier_head(*seq, rng, cfg, d);
            break;
        }
        case ModelKind::FeatCNNTran: {
            const std::int64_t d = detail::add_extractor(*seq, rng, cfg, 1, 13, cfg.conv_dropout, tags);
            detail::add_encoder_stack(*seq, rng, cfg, d, 8, nn::FfnKind::Deep, tags);
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            detail::add_classifier_head(*seq, rng, cfg, d);
            break;
        }
        case ModelKind::FeatCNNTranCNN: {
            const std::int64_t d = detail::add_extractor(*seq, rng, cfg, 1, 7, cfg.conv_dropout, tags);
            detail::add_encoder_stack(*seq, rng, cfg, d, 8, nn::FfnKind::Conv, tags);
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            detail::add_classifier_head(*seq, rng, cfg, d);
            break;
        }
        case ModelKind::CWTFeatCNNTran: {
            const std::int64_t d =
                detail::add_extractor(*seq, rng, cfg, cfg.cwt_bins(), 7, cfg.conv_dropout, tags);
            detail::add_encoder_stack(*seq, rng, cfg, d, 8, nn::FfnKind::Simple, tags, cfg.width(1024));
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            detail::add_classifier_head(*seq, rng, cfg, d);
            break;
        }
        case ModelKind::SiameseTran: {
            const std::int64_t d = cfg.cwt_bins();
            detail::add_encoder_stack(*seq, rng, cfg, d, 4, nn::FfnKind::Deep, tags);
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            detail::add_embedding_head(*seq, rng, cfg, d);
            break;
        }
        case ModelKind::SiameseFeatCNNTran: {
            const std::int64_t d = detail::add_extractor(*seq, rng, cfg, 1, 13, cfg.conv_dropout, tags);
            detail::add_encoder_stack(*seq, rng, cfg, d, 8, nn::FfnKind::Deep, tags);
            seq->template emplace<nn::GlobalAvgPool<T>>("gap");
            detail::add_embedding_head(*seq, rng, cfg, d);
            break;
        }
    }

    m.net = std::move(seq);

    // wiring check: shapes must be consistent end to end
    const nn::Shape out = m.net->out_shape(m.input_shape);
    if (m.siamese) {
        if (out != nn::Shape{kEmbeddingDim}) throw std::logic_error("siamese branch must emit the embedding dim");
    } else if (out != nn::Shape{1}) {
        throw std::logic_error("detector must emit a single probability");
    }
    return m;
}

// ------------------------------------------------------------- inference

// Stack items (each {T,C}) into one batch tensor [B,T,C].
template <class T>
nn::Tensor<T> make_batch(const std::vector<const nn::Tensor<T>*>& items) {
    if (items.empty()) throw std::invalid_argument("empty batch");
    const nn::Shape& s = items.front()->shape;
    nn::Tensor<T> out({static_cast<std::int64_t>(items.size()), s[0], s[1]});
    const std::size_t stride = items.front()->v.size();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i]->shape != s) throw std::invalid_argument("batch items must share a shape");
        std::copy(items[i]->v.begin(), items[i]->v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(i * stride));
    }
    return out;
}

// Frozen-model probabilities for a batch [B,T,C] -> B values in [0,1].
template <class T>
std::vector<T> predict(Model<T>& m, const nn::Tensor<T>& batch) {
    if (m.siamese) throw std::invalid_argument("predict() is for detector kinds");
    if (batch.shape.size() != 3 || batch.shape[1] != m.input_shape[0] || batch.shape[2] != m.input_shape[1])
        throw std::invalid_argument("input shape " + nn::shape_str(batch.shape) + " does not match model " +
                                    nn::shape_str(m.input_shape));
    nn::Tape<T> tape;
    nn::Ctx<T> ctx{tape, /*training=*/false, /*update_stats=*/false, /*dropout_key=*/0};
    const int out = m.forward(ctx, tape.leaf_input(batch));
    auto& node = tape.at(out);
    return std::vector<T>(node.val, node.val + node.size);
}

// Branch embedding for a batch [B,T,C] -> [B, kEmbeddingDim].
template <class T>
nn::Tensor<T> embed(Model<T>& m, const nn::Tensor<T>& batch) {
    if (!m.siamese) throw std::invalid_argument("embed() is for siamese kinds");
    if (batch.shape.size() != 3 || batch.shape[1] != m.input_shape[0] || batch.shape[2] != m.input_shape[1])
        throw std::invalid_argument("input shape does not match model");
    nn::Tape<T> tape;
    nn::Ctx<T> ctx{tape, false, false, 0};
    const int out = m.forward(ctx, tape.leaf_input(batch));
    auto& node = tape.at(out);
    nn::Tensor<T> e(node.shape);
    std::copy(node.val, node.val + node.size, e.v.begin());
    return e;
}

template <class T>
double embedding_distance(const nn::Tensor<T>& a, const nn::Tensor<T>& b, std::int64_t row_a = 0,
                          std::int64_t row_b = 0) {
    const std::int64_t e = a.shape.back();
    double s = 0.0;
    for (std::int64_t j = 0; j < e; ++j) {
        const double d = static_cast<double>(a.v[static_cast<std::size_t>(row_a * e + j)]) -
                         static_cast<double>(b.v[static_cast<std::size_t>(row_b * e + j)]);
        s += d * d;
    }
    return std::sqrt(s);
}

struct VerifyResult {
    bool same = false;
    double distance = 0.0;
};

// same iff embedding distance < threshold
template <class T>
VerifyResult verify(Model<T>& m, const nn::Tensor<T>& seg_a, const nn::Tensor<T>& seg_b,
                    double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("verification threshold must be positive");
    nn::Tensor<T> batch_a({1, seg_a.shape[0], seg_a.shape[1]}, seg_a.v);
    nn::Tensor<T> batch_b({1, seg_b.shape[0], seg_b.shape[1]}, seg_b.v);
    const auto ea = embed(m, batch_a);
    const auto eb = embed(m, batch_b);
    VerifyResult r;
    r.distance = embedding_distance(ea, eb);
    r.same = r.distance < threshold;
    return r;
}

} // namespace tamperlab::models
