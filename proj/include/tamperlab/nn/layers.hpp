#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tamperlab/nn/ops.hpp"

namespace tamperlab::nn {

enum class Act { None, ReLU, GELU, Sigmoid };

template <class T>
inline int apply_act(Tape<T>& tape, int x, Act act) {
    switch (act) {
        case Act::None: return x;
        case Act::ReLU: return ops::relu(tape, x);
        case Act::GELU: return ops::gelu(tape, x);
        case Act::Sigmoid: return ops::sigmoid(tape, x);
    }
    return x;
}

template <class T>
struct Ctx {
    Tape<T>& tape;
    bool training = false;
    bool update_stats = false;
    std::uint64_t dropout_key = 0;
};

struct LayerCost {
    std::string name;
    std::uint64_t macs = 0;
    std::uint64_t eltwise = 0;
    Shape out;
    std::uint64_t flops() const { return 2 * macs + eltwise; }
};

inline std::uint64_t elems(const Shape& s) { return static_cast<std::uint64_t>(numel(s)); }

template <class T>
struct Layer {
    virtual ~Layer() = default;
    virtual int forward(Ctx<T>& ctx, int x) = 0;
    virtual void collect(std::vector<Param<T>*>& trainable, std::vector<Param<T>*>& buffers) = 0;
    // Appends per-layer cost entries; the last entry's `out` is the output shape
    // for a single item (no batch dim).
    virtual void costs(const Shape& in, std::vector<LayerCost>& out) const = 0;

    Shape out_shape(const Shape& in) const {
        std::vector<LayerCost> c;
        costs(in, c);
        return c.empty() ? in : c.back().out;
    }
};

namespace init {

// Fan-in scaled uniform: U(+-sqrt(3/fan_in)) keeps activation variance flat.
template <class T>
inline void fan_in_uniform(Param<T>& p, std::int64_t fan_in, Rng& rng) {
    const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (auto& v : p.value.v) v = static_cast<T>(rng.uniform(-limit, limit));
}

} // namespace init

// ----------------------------------------------------------------- dense

template <class T>
struct Dense : Layer<T> {
    Param<T> w, b;
    Act act;
    bool use_bias;
    std::string name;

    Dense(std::string nm, Rng& rng, std::int64_t in, std::int64_t out, Act a, bool bias = true)
        : w(nm + ".w", {in, out}), b(nm + ".b", {out}), act(a), use_bias(bias), name(std::move(nm)) {
        init::fan_in_uniform(w, in, rng);
    }

    int forward(Ctx<T>& ctx, int x) override {
        const int wl = ctx.tape.leaf_param(w);
        const int bl = ctx.tape.leaf_param(b); // zero and frozen when use_bias is off
        return apply_act(ctx.tape, ops::dense(ctx.tape, x, wl, bl), act);
    }

    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>&) override {
        tr.push_back(&w);
        if (use_bias) tr.push_back(&b);
    }

    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        const std::int64_t f = w.value.shape[0], u = w.value.shape[1];
        std::uint64_t rows = 1;
        for (std::size_t i = 0; i + 1 < in.size(); ++i) rows *= static_cast<std::uint64_t>(in[i]);
        Shape os = in;
        os.back() = u;
        out.push_back({name, rows * static_cast<std::uint64_t>(f) * static_cast<std::uint64_t>(u),
                       rows * static_cast<std::uint64_t>(u) * (act == Act::None ? 1u : 2u), os});
    }
};

// ----------------------------------------------------------------- conv

template <class T>
struct Conv1D : Layer<T> {
    Param<T> w, b;
    Act act;
    bool use_bias;
    std::string name;

    // Convolutions feeding a batch norm run bias-free; the norm's shift makes
    // a conv bias redundant there.
    Conv1D(std::string nm, Rng& rng, std::int64_t kernel, std::int64_t ci, std::int64_t co, Act a,
           bool bias = true)
        : w(nm + ".w", {kernel, ci, co}), b(nm + ".b", {co}), act(a), use_bias(bias),
          name(std::move(nm)) {
        init::fan_in_uniform(w, kernel * ci, rng);
    }

    int forward(Ctx<T>& ctx, int x) override {
        const int wl = ctx.tape.leaf_param(w);
        const int bl = ctx.tape.leaf_param(b);
        return apply_act(ctx.tape, ops::conv1d_same(ctx.tape, x, wl, bl), act);
    }

    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>&) override {
        tr.push_back(&w);
        if (use_bias) tr.push_back(&b);
    }

    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        const std::int64_t k = w.value.shape[0], ci = w.value.shape[1], co = w.value.shape[2];
        const std::int64_t t = in[in.size() - 2];
        Shape os = in;
        os.back() = co;
        out.push_back({name,
                       static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(co) *
                           static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(ci),
                       static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(co) *
                           (act == Act::None ? 1u : 2u),
                       os});
    }
};

// ----------------------------------------------------------------- pooling

template <class T>
struct MaxPool1D : Layer<T> {
    std::int64_t pool;
    std::string name;
    explicit MaxPool1D(std::string nm, std::int64_t p = 2) : pool(p), name(std::move(nm)) {}

    int forward(Ctx<T>& ctx, int x) override { return ops::maxpool1d(ctx.tape, x, pool); }
    void collect(std::vector<Param<T>*>&, std::vector<Param<T>*>&) override {}
    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        Shape os = in;
        os[os.size() - 2] = in[in.size() - 2] / pool;
        out.push_back({name, 0, elems(os), os});
    }
};

template <class T>
struct GlobalAvgPool : Layer<T> {
    std::string name;
    explicit GlobalAvgPool(std::string nm) : name(std::move(nm)) {}
    int forward(Ctx<T>& ctx, int x) override { return ops::global_avg_pool(ctx.tape, x); }
    void collect(std::vector<Param<T>*>&, std::vector<Param<T>*>&) override {}
    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        out.push_back({name, 0, elems(in), {in.back()}});
    }
};

template <class T>
struct Flatten : Layer<T> {
    int forward(Ctx<T>& ctx, int x) override { return ops::flatten(ctx.tape, x); }
    void collect(std::vector<Param<T>*>&, std::vector<Param<T>*>&) override {}
    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        out.push_back({"flatten", 0, 0, {numel(in)}});
    }
};

// ----------------------------------------------------------------- norms

template <class T>
struct BatchNorm1D : Layer<T> {
    Param<T> gamma, beta;
    Param<T> run_mean, run_var; // buffers: tracked, not trained
    T momentum, eps;
    std::string name;

    BatchNorm1D(std::string nm, std::int64_t c, T mom = T(0.9), T e = T(1e-5))
        : gamma(nm + ".gamma", {c}), beta(nm + ".beta", {c}), run_mean(nm + ".running_mean", {c}),
          run_var(nm + ".running_var", {c}), momentum(mom), eps(e), name(std::move(nm)) {
        std::fill(gamma.value.v.begin(), gamma.value.v.end(), T(1));
        std::fill(run_var.value.v.begin(), run_var.value.v.end(), T(1));
    }

    int forward(Ctx<T>& ctx, int x) override {
        const int g = ctx.tape.leaf_param(gamma);
        const int b = ctx.tape.leaf_param(beta);
        return ops::batchnorm(ctx.tape, x, g, b, ops::BnBuffers<T>{&run_mean.value, &run_var.value},
                              ctx.training, ctx.update_stats, momentum, eps);
    }

    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>& buf) override {
        tr.push_back(&gamma);
        tr.push_back(&beta);
        buf.push_back(&run_mean);
        buf.push_back(&run_var);
    }

    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        out.push_back({name, 0, 2 * elems(in), in});
    }
};

template <class T>
struct LayerNorm : Layer<T> {
    Param<T> gamma, beta;
    T eps;
    std::string name;

    LayerNorm(std::string nm, std::int64_t d, T e = T(1e-5))
        : gamma(nm + ".gamma", {d}), beta(nm + ".beta", {d}), eps(e), name(std::move(nm)) {
        std::fill(gamma.value.v.begin(), gamma.value.v.end(), T(1));
    }

    int forward(Ctx<T>& ctx, int x) override {
        const int g = ctx.tape.leaf_param(gamma);
        const int b = ctx.tape.leaf_param(beta);
        return ops::layernorm(ctx.tape, x, g, b, eps);
    }

    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>&) override {
        tr.push_back(&gamma);
        tr.push_back(&beta);
    }

    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        out.push_back({name, 0, 2 * elems(in), in});
    }
};

// ----------------------------------------------------------------- dropout

template <class T>
struct Dropout : Layer<T> {
    double rate;
    std::uint64_t tag;
    std::string name;
    Dropout(std::string nm, double r, std::uint64_t t) : rate(r), tag(t), name(std::move(nm)) {}

    int forward(Ctx<T>& ctx, int x) override {
        return ops::dropout(ctx.tape, x, rate, ctx.training, hash_mix(ctx.dropout_key, tag));
    }
    void collect(std::vector<Param<T>*>&, std::vector<Param<T>*>&) override {}
    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        out.push_back({name, 0, 0, in}); // identity at inference
    }
};

// ------------------------------------------------------ positional encoding

template <class T>
struct PositionalEncoding : Layer<T> {
    std::string name;
    explicit PositionalEncoding(std::string nm) : name(std::move(nm)) {}
    int forward(Ctx<T>& ctx, int x) override { return ops::positional_encoding_add(ctx.tape, x); }
    void collect(std::vector<Param<T>*>&, std::vector<Param<T>*>&) override {}
    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        out.push_back({name, 0, elems(in), in});
    }
};

// ----------------------------------------------------------------- attention

template <class T>
struct MultiHeadAttention : Layer<T> {
    Param<T> wq, bq, wk, bk, wv, bv, wo, bo;
    std::int64_t heads, head_dim, d_model;
    std::string name;

    MultiHeadAttention(std::string nm, Rng& rng, std::int64_t d, std::int64_t h, std::int64_t hd)
        : wq(nm + ".wq", {d, h * hd}), bq(nm + ".bq", {h * hd}), wk(nm + ".wk", {d, h * hd}),
          bk(nm + ".bk", {h * hd}), wv(nm + ".wv", {d, h * hd}), bv(nm + ".bv", {h * hd}),
          wo(nm + ".wo", {h * hd, d}), bo(nm + ".bo", {d}), heads(h), head_dim(hd), d_model(d),
          name(std::move(nm)) {
        init::fan_in_uniform(wq, d, rng);
        init::fan_in_uniform(wk, d, rng);
        init::fan_in_uniform(wv, d, rng);
        init::fan_in_uniform(wo, h * hd, rng);
    }

    int forward(Ctx<T>& ctx, int x) override {
        auto& tp = ctx.tape;
        const int q = ops::dense(tp, x, tp.leaf_param(wq), tp.leaf_param(bq));
        // key projection is bias-free: softmax scores are invariant to
        // per-row shifts, so a key bias is a dead parameter
        const int k = ops::dense(tp, x, tp.leaf_param(wk), tp.leaf_param(bk));
        const int v = ops::dense(tp, x, tp.leaf_param(wv), tp.leaf_param(bv));
        const int c = ops::attention_core(tp, q, k, v, heads, head_dim);
        return ops::dense(tp, c, tp.leaf_param(wo), tp.leaf_param(bo));
    }

    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>&) override {
        for (Param<T>* p : {&wq, &bq, &wk, &wv, &bv, &wo, &bo}) tr.push_back(p);
    }

    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        const std::uint64_t t = static_cast<std::uint64_t>(in[in.size() - 2]);
        const std::uint64_t d = static_cast<std::uint64_t>(d_model);
        const std::uint64_t hhd = static_cast<std::uint64_t>(heads * head_dim);
        const std::uint64_t proj = 3 * t * d * hhd + t * hhd * d;
        const std::uint64_t core = 2 * t * t * static_cast<std::uint64_t>(head_dim) *
                                   static_cast<std::uint64_t>(heads);
        Shape os = in;
        os.back() = d_model;
        out.push_back({name, proj + core, static_cast<std::uint64_t>(heads) * t * t + 4 * t * hhd, os});
    }
};

// ----------------------------------------------------------------- containers

template <class T>
struct Sequential : Layer<T> {
    std::vector<std::unique_ptr<Layer<T>>> layers;

    int forward(Ctx<T>& ctx, int x) override {
        for (auto& l : layers) x = l->forward(ctx, x);
        return x;
    }
    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>& buf) override {
        for (auto& l : layers) l->collect(tr, buf);
    }
    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        Shape cur = in;
        for (const auto& l : layers) {
            l->costs(cur, out);
            cur = out.back().out;
        }
    }

    template <class L, class... A>
    L* emplace(A&&... args) {
        auto p = std::make_unique<L>(std::forward<A>(args)...);
        L* raw = p.get();
        layers.push_back(std::move(p));
        return raw;
    }
};

enum class FfnKind { Deep, Conv, Simple };

// Pre-norm transformer encoder block:
//   x + Drop(MHA(LN(x))), then y + FFN(LN(y)).
// Deep FFN: 4d -> 2d -> d denses, GELU on the first two, dropout after each.
// Conv FFN: k7/k5/k3 convs (ReLU on the first two) with batch norm and dropout.
// Simple FFN: expand -> d with GELU, dropout after each dense.
template <class T>
struct EncoderBlock : Layer<T> {
    LayerNorm<T> ln1, ln2;
    MultiHeadAttention<T> mha;
    Dropout<T> attn_drop;
    Sequential<T> ffn;
    std::string name;

    EncoderBlock(std::string nm, Rng& rng, std::int64_t d, std::int64_t h, std::int64_t hd,
                 FfnKind kind, double drop_rate, std::uint64_t& tag_counter,
                 std::int64_t conv_f1 = 0, std::int64_t conv_f2 = 0, std::int64_t expand = 0)
        : ln1(nm + ".ln1", d), ln2(nm + ".ln2", d), mha(nm + ".mha", rng, d, h, hd),
          attn_drop(nm + ".drop_attn", drop_rate, ++tag_counter), name(nm) {
        switch (kind) {
            case FfnKind::Deep:
                ffn.template emplace<Dense<T>>(nm + ".ffn1", rng, d, 4 * d, Act::GELU);
                ffn.template emplace<Dropout<T>>(nm + ".ffn1_drop", drop_rate, ++tag_counter);
                ffn.template emplace<Dense<T>>(nm + ".ffn2", rng, 4 * d, 2 * d, Act::GELU);
                ffn.template emplace<Dropout<T>>(nm + ".ffn2_drop", drop_rate, ++tag_counter);
                ffn.template emplace<Dense<T>>(nm + ".ffn3", rng, 2 * d, d, Act::None);
                ffn.template emplace<Dropout<T>>(nm + ".ffn3_drop", drop_rate, ++tag_counter);
                break;
            case FfnKind::Conv:
                ffn.template emplace<Conv1D<T>>(nm + ".ffn_conv1", rng, 7, d, conv_f1, Act::ReLU, false);
                ffn.template emplace<BatchNorm1D<T>>(nm + ".ffn_bn1", conv_f1);
                ffn.template emplace<Dropout<T>>(nm + ".ffn_drop1", drop_rate, ++tag_counter);
                ffn.template emplace<Conv1D<T>>(nm + ".ffn_conv2", rng, 5, conv_f1, conv_f2, Act::ReLU, false);
                ffn.template emplace<BatchNorm1D<T>>(nm + ".ffn_bn2", conv_f2);
                ffn.template emplace<Dropout<T>>(nm + ".ffn_drop2", drop_rate, ++tag_counter);
                ffn.template emplace<Conv1D<T>>(nm + ".ffn_conv3", rng, 3, conv_f2, d, Act::None, false);
                ffn.template emplace<BatchNorm1D<T>>(nm + ".ffn_bn3", d);
                ffn.template emplace<Dropout<T>>(nm + ".ffn_drop3", drop_rate, ++tag_counter);
                break;
            case FfnKind::Simple:
                ffn.template emplace<Dense<T>>(nm + ".ffn1", rng, d, expand, Act::GELU);
                ffn.template emplace<Dropout<T>>(nm + ".ffn1_drop", drop_rate, ++tag_counter);
                ffn.template emplace<Dense<T>>(nm + ".ffn2", rng, expand, d, Act::None);
                ffn.template emplace<Dropout<T>>(nm + ".ffn2_drop", drop_rate, ++tag_counter);
                break;
        }
    }

    int forward(Ctx<T>& ctx, int x) override {
        auto& tp = ctx.tape;
        int a = ln1.forward(ctx, x);
        a = mha.forward(ctx, a);
        a = attn_drop.forward(ctx, a);
        const int y = ops::add(tp, x, a);
        int f = ln2.forward(ctx, y);
        f = ffn.forward(ctx, f);
        return ops::add(tp, y, f);
    }

    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>& buf) override {
        ln1.collect(tr, buf);
        mha.collect(tr, buf);
        ln2.collect(tr, buf);
        ffn.collect(tr, buf);
    }

    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        ln1.costs(in, out);
        mha.costs(in, out);
        out.push_back({name + ".res1", 0, elems(in), in});
        ln2.costs(in, out);
        ffn.costs(in, out);
        out.push_back({name + ".res2", 0, elems(in), in});
    }
};

// ResNet unit: conv-BN-ReLU-conv-BN plus identity (or 1x1 projection) skip,
// ReLU after the sum.
template <class T>
struct ResidualBlock : Layer<T> {
    Conv1D<T> conv1, conv2;
    BatchNorm1D<T> bn1, bn2;
    std::unique_ptr<Conv1D<T>> proj; // when channel width changes
    std::string name;

    ResidualBlock(std::string nm, Rng& rng, std::int64_t ci, std::int64_t co)
        : conv1(nm + ".conv1", rng, 3, ci, co, Act::None, false),
          conv2(nm + ".conv2", rng, 3, co, co, Act::None, false),
          bn1(nm + ".bn1", co), bn2(nm + ".bn2", co), name(nm) {
        if (ci != co) proj = std::make_unique<Conv1D<T>>(nm + ".proj", rng, 1, ci, co, Act::None);
    }

    int forward(Ctx<T>& ctx, int x) override {
        auto& tp = ctx.tape;
        int h = conv1.forward(ctx, x);
        h = bn1.forward(ctx, h);
        h = ops::relu(tp, h);
        h = conv2.forward(ctx, h);
        h = bn2.forward(ctx, h);
        const int skip = proj ? proj->forward(ctx, x) : x;
        return ops::relu(tp, ops::add(tp, skip, h));
    }

    void collect(std::vector<Param<T>*>& tr, std::vector<Param<T>*>& buf) override {
        conv1.collect(tr, buf);
        bn1.collect(tr, buf);
        conv2.collect(tr, buf);
        bn2.collect(tr, buf);
        if (proj) proj->collect(tr, buf);
    }

    void costs(const Shape& in, std::vector<LayerCost>& out) const override {
        conv1.costs(in, out);
        Shape mid = out.back().out;
        bn1.costs(mid, out);
        out.push_back({name + ".relu1", 0, elems(mid), mid});
        conv2.costs(mid, out);
        bn2.costs(mid, out);
        if (proj) proj->costs(in, out);
        out.push_back({name + ".res", 0, 2 * elems(mid), mid});
    }
};

} // namespace tamperlab::nn
