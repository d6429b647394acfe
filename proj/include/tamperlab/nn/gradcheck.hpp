#pragma once

#include <functional>
#include <memory>
#include <string>

#include "tamperlab/models/models.hpp"
#include "tamperlab/nn/ops.hpp"

namespace tamperlab::nn {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    double worst_ad = 0.0, worst_fd = 0.0;
};

// Compares reverse-mode gradients of a scalar loss against central finite
// differences for every parameter element.
//
// `eval(with_grad)` must build a fresh graph, return the loss value, and
// (when with_grad) run backward so Param::grad holds the AD gradients.
inline GradCheckResult grad_check(const std::function<double(bool)>& eval,
                                  const std::vector<Param<double>*>& params, double eps = 1e-4) {
    for (Param<double>* p : params) p->zero_grad();
    eval(true);

    std::vector<std::vector<double>> ad;
    ad.reserve(params.size());
    for (Param<double>* p : params) {
        for (double g : p->grad.v)
            if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in " + p->name);
        ad.push_back(p->grad.v);
    }

    GradCheckResult res;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Param<double>& p = *params[k];
        for (std::size_t i = 0; i < p.value.v.size(); ++i) {
            const double orig = p.value.v[i];
            const double g = ad[k][i];

            // Piecewise-smooth nets (ReLU, max-pool) have kinks; a secant that
            // straddles one misreports the one-sided slope AD computes. When
            // the first difference disagrees, shrink the step: the kink is
            // only straddled while it lies inside the interval.
            double best_rel = std::numeric_limits<double>::infinity();
            double best_fd = 0.0;
            for (const double div : {1.0, 8.0, 64.0}) {
                const double h = eps * std::max(1.0, std::abs(orig)) / div;
                p.value.v[i] = orig + h;
                const double lp = eval(false);
                p.value.v[i] = orig - h;
                const double lm = eval(false);
                p.value.v[i] = orig;
                const double fd = (lp - lm) / (2.0 * h);
                const double rel = std::abs(g - fd) / std::max(1e-8, std::abs(g) + std::abs(fd));
                if (rel < best_rel) {
                    best_rel = rel;
                    best_fd = fd;
                }
                if (best_rel < 1e-5) break;
            }
            if (best_rel > res.max_rel_err) {
                res.max_rel_err = best_rel;
                res.worst_param = p.name + "[" + std::to_string(i) + "]";
                res.worst_ad = g;
                res.worst_fd = best_fd;
            }
        }
    }
    return res;
}

// Whole-model check in 64-bit mode on a seeded random input. Dropout stays
// active with a fixed mask key and batch-norm uses batch statistics without
// touching the running stats, so the evaluated function is deterministic.
//
// `inject_error` perturbs one AD gradient before comparison; the CLI uses it
// as a forced-failure hook.
inline GradCheckResult grad_check_model(models::Model<double>& m, std::uint64_t input_seed,
                                        double eps = 1e-4, double inject_error = 0.0) {
    Rng rng(hash_mix(input_seed, fnv1a("gradcheck-input")));
    Tensor<double> x({1, m.input_shape[0], m.input_shape[1]});
    for (auto& v : x.v) v = rng.uniform(0.0, 1.0);

    const std::uint64_t drop_key = hash_mix(input_seed, fnv1a("gradcheck-dropout"));
    auto labels = std::make_shared<const std::vector<double>>(std::vector<double>{1.0});

    std::function<double(bool)> eval;
    if (!m.siamese) {
        eval = [&m, &x, labels, drop_key](bool with_grad) {
            Tape<double> tape;
            Ctx<double> ctx{tape, /*training=*/true, /*update_stats=*/false, drop_key};
            const int out = m.forward(ctx, tape.leaf_input(x));
            const int loss = ops::bce_mean(tape, out, labels);
            if (with_grad) tape.backward(loss);
            return static_cast<double>(tape.at(loss).val[0]);
        };
    } else {
        // independent second-branch input; a transformed copy of x would be
        // nearly indistinguishable after pooling and starve the check of
        // gradient signal
        Tensor<double> x2({1, m.input_shape[0], m.input_shape[1]});
        for (auto& v : x2.v) v = rng.uniform(0.0, 1.0);

        auto same = std::make_shared<const std::vector<double>>(std::vector<double>{1.0});
        auto diff = std::make_shared<const std::vector<double>>(std::vector<double>{0.0});

        // a pre-pass pins a margin large enough to keep the hinge active and
        // a normalizer that keeps the loss O(1) for well-conditioned
        // finite differences
        double margin = 1.0, norm = 1.0;
        {
            Tape<double> tape;
            Ctx<double> ctx{tape, true, false, drop_key};
            const int ea = m.forward(ctx, tape.leaf_input(x));
            const int eb = m.forward(ctx, tape.leaf_input(x2));
            const int d = ops::pair_distance(tape, ea, eb);
            const double d0 = static_cast<double>(tape.at(d).val[0]);
            margin = d0 + 1.0;
            norm = 1.0 / (1.0 + d0 * d0);
        }

        eval = [&m, x, x2, same, diff, margin, norm, drop_key](bool with_grad) {
            Tape<double> tape;
            Ctx<double> ctx{tape, true, false, drop_key};
            const int ea = m.forward(ctx, tape.leaf_input(x));
            const int eb = m.forward(ctx, tape.leaf_input(x2));
            const int d = ops::pair_distance(tape, ea, eb);
            const int l1 = ops::contrastive_mean(tape, d, same, 1.0);
            const int l2 = ops::contrastive_mean(tape, d, diff, margin);
            const int loss = ops::scale(tape, ops::add(tape, l1, l2), norm);
            if (with_grad) tape.backward(loss);
            return static_cast<double>(tape.at(loss).val[0]);
        };
    }

    auto params = m.params();
    if (inject_error != 0.0) {
        // corrupt the AD side only: wrap eval so the first backward pass is
        // followed by a deliberate perturbation
        auto base = eval;
        eval = [base, &params, inject_error](bool with_grad) {
            const double l = base(with_grad);
            if (with_grad && !params.empty() && params.front()->grad.size() > 0)
                params.front()->grad.v[0] += inject_error;
            return l;
        };
    }
    return grad_check(eval, params, eps);
}

} // namespace tamperlab::nn
