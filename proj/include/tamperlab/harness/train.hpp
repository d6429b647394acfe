#pragma once

#include <algorithm>
#include <optional>

#include "tamperlab/harness/dataset.hpp"
#include "tamperlab/harness/metrics.hpp"
#include "tamperlab/models/models.hpp"
#include "tamperlab/nn/optimizer.hpp"

namespace tamperlab::harness {

struct TrainHyper {
    int max_epochs = 40;
    int batch = 32;
    double lr = 1e-3;
    int patience = 5;
    double margin = 1.0; // contrastive loss
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    double threshold = 0.5; // sigmoid cutoff or verification distance
};

namespace detail {

template <class T>
struct ParamSnapshot {
    std::vector<std::vector<T>> values;

    static ParamSnapshot take(models::Model<T>& m) {
        ParamSnapshot s;
        for (auto* p : m.params()) s.values.push_back(p->value.v);
        for (auto* p : m.buffers()) s.values.push_back(p->value.v);
        return s;
    }
    void restore(models::Model<T>& m) const {
        std::size_t i = 0;
        for (auto* p : m.params()) p->value.v = values[i++];
        for (auto* p : m.buffers()) p->value.v = values[i++];
    }
};

inline std::vector<std::size_t> shuffled(std::vector<std::size_t> idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

} // namespace detail

// ----------------------------------------------------------- detection

template <class T>
std::vector<T> predict_indices(models::Model<T>& m, const DetectionDataset& ds,
                               const std::vector<std::size_t>& idx, std::size_t chunk = 64) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t base = 0; base < idx.size(); base += chunk) {
        const std::size_t n = std::min(chunk, idx.size() - base);
        nn::Tensor<T> batch({static_cast<std::int64_t>(n), m.input_shape[0], m.input_shape[1]});
        const std::size_t stride = static_cast<std::size_t>(m.input_shape[0] * m.input_shape[1]);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& src = ds.items[idx[base + i]].input.v;
            if (src.size() != stride) throw std::invalid_argument("dataset input does not match model shape");
            for (std::size_t j = 0; j < stride; ++j) batch.v[i * stride + j] = static_cast<T>(src[j]);
        }
        for (T p : models::predict(m, batch)) out.push_back(p);
    }
    return out;
}

template <class T>
Metrics evaluate_detector(models::Model<T>& m, const DetectionDataset& ds,
                          const std::vector<std::size_t>& idx, double threshold = 0.5) {
    if (idx.empty()) throw std::invalid_argument("empty test set");
    const auto preds = predict_indices(m, ds, idx);
    ConfusionCounts c;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const bool pred_pos = static_cast<double>(preds[i]) >= threshold;
        const bool is_pos = ds.items[idx[i]].label == 1;
        if (pred_pos && is_pos) ++c.tp;
        else if (pred_pos && !is_pos) ++c.fp;
        else if (!pred_pos && is_pos) ++c.fn;
        else ++c.tn;
    }
    return Metrics::from_confusion(c);
}

// Adam training with early stopping on validation accuracy; returns the model
// restored to its best-validation checkpoint.
template <class T>
TrainResult train_detector(models::Model<T>& m, const DetectionDataset& ds,
                           const std::vector<std::size_t>& train_idx,
                           const std::vector<std::size_t>& val_idx, const TrainHyper& hyper,
                           std::uint64_t seed) {
    if (train_idx.empty() || val_idx.empty()) throw std::invalid_argument("empty train or val split");
    nn::Adam<T> opt(hyper.lr);
    auto params = m.params();
    Rng shuffle_rng(hash_mix(seed, fnv1a("epoch-shuffle")));

    TrainResult result;
    std::optional<detail::ParamSnapshot<T>> best;
    int since_best = 0;
    const std::size_t stride = static_cast<std::size_t>(m.input_shape[0] * m.input_shape[1]);

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        const auto order = detail::shuffled(train_idx, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t base = 0; base < order.size(); base += static_cast<std::size_t>(hyper.batch)) {
            const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(hyper.batch), order.size() - base);
            nn::Tensor<T> batch({static_cast<std::int64_t>(n), m.input_shape[0], m.input_shape[1]});
            auto labels = std::make_shared<std::vector<T>>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& item = ds.items[order[base + i]];
                for (std::size_t j = 0; j < stride; ++j) batch.v[i * stride + j] = static_cast<T>(item.input.v[j]);
                (*labels)[i] = static_cast<T>(item.label);
            }
            nn::Adam<T>::zero_grad(params);
            nn::Tape<T> tape;
            nn::Ctx<T> ctx{tape, /*training=*/true, /*update_stats=*/true,
                           derive_seed(seed, "dropout", static_cast<std::uint64_t>(epoch) * 1000003u + batches)};
            const int out = m.forward(ctx, tape.leaf_input(batch));
            const int loss = nn::ops::bce_mean(tape, out, std::shared_ptr<const std::vector<T>>(labels));
            tape.backward(loss);
            opt.step(params);
            loss_sum += static_cast<double>(tape.at(loss).val[0]);
            ++batches;
        }

        EpochStats es;
        es.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, batches));
        const auto val_preds = predict_indices(m, ds, val_idx);
        double vloss = 0.0;
        std::int64_t correct = 0;
        for (std::size_t i = 0; i < val_idx.size(); ++i) {
            const double p = std::clamp(static_cast<double>(val_preds[i]), 1e-7, 1.0 - 1e-7);
            const int y = ds.items[val_idx[i]].label;
            vloss += -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
            correct += ((p >= 0.5) == (y == 1));
        }
        es.val_loss = vloss / static_cast<double>(val_idx.size());
        es.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_idx.size());
        result.history.push_back(es);

        if (es.val_accuracy > result.best_val_accuracy || !best.has_value()) {
            result.best_val_accuracy = es.val_accuracy;
            result.best_epoch = epoch;
            best = detail::ParamSnapshot<T>::take(m);
            since_best = 0;
        } else if (++since_best >= hyper.patience) {
            break;
        }
    }
    if (best) best->restore(m);
    result.threshold = 0.5;
    return result;
}

// ----------------------------------------------------------- verification

template <class T>
std::vector<double> pair_distances(models::Model<T>& m, const PairDataset& ds,
                                   const std::vector<std::size_t>& idx, std::size_t chunk = 64) {
    std::vector<double> out;
    out.reserve(idx.size());
    const std::size_t stride = static_cast<std::size_t>(m.input_shape[0] * m.input_shape[1]);
    for (std::size_t base = 0; base < idx.size(); base += chunk) {
        const std::size_t n = std::min(chunk, idx.size() - base);
        nn::Tensor<T> ba({static_cast<std::int64_t>(n), m.input_shape[0], m.input_shape[1]});
        nn::Tensor<T> bb(ba.shape);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& item = ds.items[idx[base + i]];
            const auto& sa = ds.pool[item.a].v;
            const auto& sb = ds.pool[item.b].v;
            for (std::size_t j = 0; j < stride; ++j) {
                ba.v[i * stride + j] = static_cast<T>(sa[j]);
                bb.v[i * stride + j] = static_cast<T>(sb[j]);
            }
        }
        const auto ea = models::embed(m, ba);
        const auto eb = models::embed(m, bb);
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(models::embedding_distance(ea, eb, static_cast<std::int64_t>(i),
                                                     static_cast<std::int64_t>(i)));
    }
    return out;
}

// Accuracy-maximizing distance cutoff over 100 candidates from the observed
// range (same person iff distance < threshold).
inline std::pair<double, double> sweep_threshold(const std::vector<double>& dist,
                                                 const std::vector<int>& labels) {
    if (dist.empty()) throw std::invalid_argument("empty distance set");
    const auto [mn, mx] = std::minmax_element(dist.begin(), dist.end());
    double best_thr = *mn, best_acc = -1.0;
    for (int k = 0; k < 100; ++k) {
        const double thr = *mn + (*mx - *mn) * (static_cast<double>(k) + 0.5) / 100.0;
        std::int64_t correct = 0;
        for (std::size_t i = 0; i < dist.size(); ++i) correct += ((dist[i] < thr) == (labels[i] == 1));
        const double acc = static_cast<double>(correct) / static_cast<double>(dist.size());
        if (acc > best_acc) {
            best_acc = acc;
            best_thr = thr;
        }
    }
    return {best_thr, best_acc};
}

template <class T>
Metrics evaluate_siamese(models::Model<T>& m, const PairDataset& ds,
                         const std::vector<std::size_t>& idx, double threshold) {
    if (idx.empty()) throw std::invalid_argument("empty test set");
    const auto dist = pair_distances(m, ds, idx);
    ConfusionCounts c;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const bool pred_same = dist[i] < threshold;
        const bool is_same = ds.items[idx[i]].label == 1;
        if (pred_same && is_same) ++c.tp;
        else if (pred_same && !is_same) ++c.fp;
        else if (!pred_same && is_same) ++c.fn;
        else ++c.tn;
    }
    return Metrics::from_confusion(c);
}

template <class T>
TrainResult train_siamese(models::Model<T>& m, const PairDataset& ds,
                          const std::vector<std::size_t>& train_idx,
                          const std::vector<std::size_t>& val_idx, const TrainHyper& hyper,
                          std::uint64_t seed) {
    if (train_idx.empty() || val_idx.empty()) throw std::invalid_argument("empty train or val split");
    nn::Adam<T> opt(hyper.lr);
    auto params = m.params();
    Rng shuffle_rng(hash_mix(seed, fnv1a("epoch-shuffle")));
    const std::size_t stride = static_cast<std::size_t>(m.input_shape[0] * m.input_shape[1]);

    std::vector<int> val_labels;
    for (std::size_t i : val_idx) val_labels.push_back(ds.items[i].label);

    TrainResult result;
    std::optional<detail::ParamSnapshot<T>> best;
    int since_best = 0;

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        const auto order = detail::shuffled(train_idx, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t base = 0; base < order.size(); base += static_cast<std::size_t>(hyper.batch)) {
            const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(hyper.batch), order.size() - base);
            nn::Tensor<T> ba({static_cast<std::int64_t>(n), m.input_shape[0], m.input_shape[1]});
            nn::Tensor<T> bb(ba.shape);
            auto labels = std::make_shared<std::vector<T>>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& item = ds.items[order[base + i]];
                const auto& sa = ds.pool[item.a].v;
                const auto& sb = ds.pool[item.b].v;
                for (std::size_t j = 0; j < stride; ++j) {
                    ba.v[i * stride + j] = static_cast<T>(sa[j]);
                    bb.v[i * stride + j] = static_cast<T>(sb[j]);
                }
                (*labels)[i] = static_cast<T>(item.label);
            }
            nn::Adam<T>::zero_grad(params);
            nn::Tape<T> tape;
            const std::uint64_t step_key =
                derive_seed(seed, "dropout", static_cast<std::uint64_t>(epoch) * 1000003u + batches);
            // distinct masks per branch
            nn::Ctx<T> ctx_a{tape, true, true, hash_mix(step_key, 1)};
            nn::Ctx<T> ctx_b{tape, true, true, hash_mix(step_key, 2)};
            const int ea = m.forward(ctx_a, tape.leaf_input(ba));
            const int eb = m.forward(ctx_b, tape.leaf_input(bb));
            const int d = nn::ops::pair_distance(tape, ea, eb);
            const int loss = nn::ops::contrastive_mean(tape, d, std::shared_ptr<const std::vector<T>>(labels),
                                                       static_cast<T>(hyper.margin));
            tape.backward(loss);
            opt.step(params);
            loss_sum += static_cast<double>(tape.at(loss).val[0]);
            ++batches;
        }

        EpochStats es;
        es.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, batches));
        const auto vdist = pair_distances(m, ds, val_idx);
        const auto [thr, acc] = sweep_threshold(vdist, val_labels);
        es.val_accuracy = acc;
        es.val_loss = 0.0;
        for (std::size_t i = 0; i < vdist.size(); ++i) {
            const double d = vdist[i];
            const double hinge = std::max(0.0, hyper.margin - d);
            es.val_loss += val_labels[i] == 1 ? d * d : hinge * hinge;
        }
        es.val_loss /= static_cast<double>(vdist.size());
        result.history.push_back(es);

        if (es.val_accuracy > result.best_val_accuracy || !best.has_value()) {
            result.best_val_accuracy = es.val_accuracy;
            result.best_epoch = epoch;
            result.threshold = thr;
            best = detail::ParamSnapshot<T>::take(m);
            since_best = 0;
        } else if (++since_best >= hyper.patience) {
            break;
        }
    }
    if (best) best->restore(m);
    return result;
}

} // namespace tamperlab::harness
