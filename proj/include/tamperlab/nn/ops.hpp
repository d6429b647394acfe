#pragma once

#include <cmath>
#include <memory>
#include <numbers>

#include "tamperlab/nn/tape.hpp"
#include "tamperlab/rng.hpp"

namespace tamperlab::nn::ops {

// ------------------------------------------------------------------ helpers

template <class T>
inline void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline std::int64_t rows_before_last(const Shape& s) {
    std::int64_t r = 1;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
    return r;
}

// Numerically safe row softmax (max subtraction); rows sum to one exactly up
// to rounding.
template <class T>
inline void softmax_rows(T* m, std::int64_t rows, std::int64_t cols) {
    for (std::int64_t r = 0; r < rows; ++r) {
        T* row = m + r * cols;
        T mx = row[0];
        for (std::int64_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        T sum = T(0);
        for (std::int64_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        const T inv = T(1) / sum;
        for (std::int64_t c = 0; c < cols; ++c) row[c] *= inv;
    }
}

// ------------------------------------------------------------------ basics

template <class T>
int add(Tape<T>& tape, int a, int b) {
    auto& na = tape.at(a);
    auto& nb = tape.at(b);
    require<T>(na.shape == nb.shape, "add: shape mismatch");
    const int out = tape.new_node(na.shape);
    auto& no = tape.at(out);
    for (std::int64_t i = 0; i < no.size; ++i) no.val[i] = na.val[i] + nb.val[i];
    tape.set_backward(out, [out, a, b](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xa = tp.at(a);
        auto& xb = tp.at(b);
        for (std::int64_t i = 0; i < o.size; ++i) {
            xa.grad[i] += o.grad[i];
            xb.grad[i] += o.grad[i];
        }
    });
    tape.check_finite(out, "add");
    return out;
}

template <class T>
int scale(Tape<T>& tape, int x, T factor) {
    auto& nx = tape.at(x);
    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    for (std::int64_t i = 0; i < no.size; ++i) no.val[i] = nx.val[i] * factor;
    tape.set_backward(out, [out, x, factor](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t i = 0; i < o.size; ++i) xi.grad[i] += o.grad[i] * factor;
    });
    return out;
}

template <class T>
int relu(Tape<T>& tape, int x) {
    auto& nx = tape.at(x);
    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    for (std::int64_t i = 0; i < no.size; ++i) no.val[i] = nx.val[i] > T(0) ? nx.val[i] : T(0);
    tape.set_backward(out, [out, x](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t i = 0; i < o.size; ++i)
            if (xi.val[i] > T(0)) xi.grad[i] += o.grad[i];
    });
    tape.check_finite(out, "relu");
    return out;
}

// Exact GELU: x * Phi(x) with Phi from erf.
template <class T>
int gelu(Tape<T>& tape, int x) {
    auto& nx = tape.at(x);
    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    for (std::int64_t i = 0; i < no.size; ++i) {
        const T phi = T(0.5) * (T(1) + std::erf(nx.val[i] * inv_sqrt2));
        no.val[i] = nx.val[i] * phi;
    }
    tape.set_backward(out, [out, x, inv_sqrt2](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        const T c = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
        for (std::int64_t i = 0; i < o.size; ++i) {
            const T v = xi.val[i];
            const T phi = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
            const T pdf = c * std::exp(T(-0.5) * v * v);
            xi.grad[i] += o.grad[i] * (phi + v * pdf);
        }
    });
    tape.check_finite(out, "gelu");
    return out;
}

template <class T>
int sigmoid(Tape<T>& tape, int x) {
    auto& nx = tape.at(x);
    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    for (std::int64_t i = 0; i < no.size; ++i) no.val[i] = T(1) / (T(1) + std::exp(-nx.val[i]));
    tape.set_backward(out, [out, x](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t i = 0; i < o.size; ++i) {
            const T s = o.val[i];
            xi.grad[i] += o.grad[i] * s * (T(1) - s);
        }
    });
    tape.check_finite(out, "sigmoid");
    return out;
}

// ------------------------------------------------------------------ dense

// x: [..., F] treated as R rows of F features; w: [F, U]; b: [U] -> [..., U]
template <class T>
int dense(Tape<T>& tape, int x, int w, int b) {
    auto& nx = tape.at(x);
    auto& nw = tape.at(w);
    auto& nb = tape.at(b);
    require<T>(nw.shape.size() == 2, "dense: weight must be 2-d");
    const std::int64_t f = nw.shape[0], u = nw.shape[1];
    require<T>(!nx.shape.empty() && nx.shape.back() == f, "dense: feature dim mismatch");
    require<T>(nb.shape.size() == 1 && nb.shape[0] == u, "dense: bias dim mismatch");
    const std::int64_t rows = rows_before_last(nx.shape);

    Shape out_shape = nx.shape;
    out_shape.back() = u;
    const int out = tape.new_node(std::move(out_shape));
    auto& no = tape.at(out);

    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = nx.val + r * f;
        T* yr = no.val + r * u;
        for (std::int64_t j = 0; j < u; ++j) yr[j] = nb.val[j];
        for (std::int64_t i = 0; i < f; ++i) {
            const T xi = xr[i];
            const T* wr = nw.val + i * u;
            for (std::int64_t j = 0; j < u; ++j) yr[j] += xi * wr[j];
        }
    }

    tape.set_backward(out, [out, x, w, b, rows, f, u](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        auto& wi = tp.at(w);
        auto& bi = tp.at(b);
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* dy = o.grad + r * u;
            const T* xr = xi.val + r * f;
            T* dx = xi.grad + r * f;
            for (std::int64_t i = 0; i < f; ++i) {
                const T* wr = wi.val + i * u;
                T* dwr = wi.grad + i * u;
                T acc = T(0);
                const T xv = xr[i];
                for (std::int64_t j = 0; j < u; ++j) {
                    acc += dy[j] * wr[j];
                    dwr[j] += xv * dy[j];
                }
                dx[i] += acc;
            }
            for (std::int64_t j = 0; j < u; ++j) bi.grad[j] += dy[j];
        }
    });
    tape.check_finite(out, "dense");
    return out;
}

// ------------------------------------------------------------------ conv1d

// x: [B, T, Ci]; w: [K, Ci, Co] (K odd); b: [Co] -> [B, T, Co], zero padded.
template <class T>
int conv1d_same(Tape<T>& tape, int x, int w, int b) {
    auto& nx = tape.at(x);
    auto& nw = tape.at(w);
    auto& nb = tape.at(b);
    require<T>(nx.shape.size() == 3, "conv1d: input must be [B,T,C]");
    require<T>(nw.shape.size() == 3, "conv1d: weight must be [K,Ci,Co]");
    const std::int64_t bsz = nx.shape[0], tlen = nx.shape[1], ci = nx.shape[2];
    const std::int64_t k = nw.shape[0], co = nw.shape[2];
    require<T>(k % 2 == 1, "conv1d: kernel must be odd for same padding");
    require<T>(nw.shape[1] == ci, "conv1d: channel mismatch");
    require<T>(nb.shape.size() == 1 && nb.shape[0] == co, "conv1d: bias mismatch");
    const std::int64_t half = k / 2;

    const int out = tape.new_node({bsz, tlen, co});
    auto& no = tape.at(out);

    for (std::int64_t bb = 0; bb < bsz; ++bb) {
        const T* xb = nx.val + bb * tlen * ci;
        T* yb = no.val + bb * tlen * co;
        for (std::int64_t t = 0; t < tlen; ++t) {
            T* yt = yb + t * co;
            for (std::int64_t j = 0; j < co; ++j) yt[j] = nb.val[j];
            const std::int64_t k_lo = std::max<std::int64_t>(0, half - t);
            const std::int64_t k_hi = std::min<std::int64_t>(k, tlen + half - t);
            for (std::int64_t kk = k_lo; kk < k_hi; ++kk) {
                const T* xt = xb + (t + kk - half) * ci;
                const T* wk = nw.val + kk * ci * co;
                for (std::int64_t i = 0; i < ci; ++i) {
                    const T xv = xt[i];
                    const T* wr = wk + i * co;
                    for (std::int64_t j = 0; j < co; ++j) yt[j] += xv * wr[j];
                }
            }
        }
    }

    tape.set_backward(out, [out, x, w, b, bsz, tlen, ci, k, co, half](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        auto& wi = tp.at(w);
        auto& bi = tp.at(b);
        for (std::int64_t bb = 0; bb < bsz; ++bb) {
            const T* xb = xi.val + bb * tlen * ci;
            T* dxb = xi.grad + bb * tlen * ci;
            const T* dyb = o.grad + bb * tlen * co;
            for (std::int64_t t = 0; t < tlen; ++t) {
                const T* dyt = dyb + t * co;
                for (std::int64_t j = 0; j < co; ++j) bi.grad[j] += dyt[j];
                const std::int64_t k_lo = std::max<std::int64_t>(0, half - t);
                const std::int64_t k_hi = std::min<std::int64_t>(k, tlen + half - t);
                for (std::int64_t kk = k_lo; kk < k_hi; ++kk) {
                    const std::int64_t tt = t + kk - half;
                    const T* xt = xb + tt * ci;
                    T* dxt = dxb + tt * ci;
                    const T* wk = wi.val + kk * ci * co;
                    T* dwk = wi.grad + kk * ci * co;
                    for (std::int64_t i = 0; i < ci; ++i) {
                        const T* wr = wk + i * co;
                        T* dwr = dwk + i * co;
                        const T xv = xt[i];
                        T acc = T(0);
                        for (std::int64_t j = 0; j < co; ++j) {
                            acc += dyt[j] * wr[j];
                            dwr[j] += xv * dyt[j];
                        }
                        dxt[i] += acc;
                    }
                }
            }
        }
    });
    tape.check_finite(out, "conv1d_same");
    return out;
}

// ------------------------------------------------------------------ pooling

template <class T>
int maxpool1d(Tape<T>& tape, int x, std::int64_t pool = 2) {
    auto& nx = tape.at(x);
    require<T>(nx.shape.size() == 3, "maxpool1d: input must be [B,T,C]");
    require<T>(pool >= 1, "maxpool1d: pool must be >= 1");
    const std::int64_t bsz = nx.shape[0], tlen = nx.shape[1], c = nx.shape[2];
    const std::int64_t tout = tlen / pool;
    require<T>(tout >= 1, "maxpool1d: input shorter than pool window");

    const int out = tape.new_node({bsz, tout, c});
    auto& no = tape.at(out);
    auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(no.size));

    for (std::int64_t bb = 0; bb < bsz; ++bb)
        for (std::int64_t t = 0; t < tout; ++t)
            for (std::int64_t j = 0; j < c; ++j) {
                std::int64_t best = (bb * tlen + t * pool) * c + j;
                T bv = nx.val[best];
                for (std::int64_t p = 1; p < pool; ++p) {
                    const std::int64_t idx = (bb * tlen + t * pool + p) * c + j;
                    if (nx.val[idx] > bv) {
                        bv = nx.val[idx];
                        best = idx;
                    }
                }
                const std::int64_t oi = (bb * tout + t) * c + j;
                no.val[oi] = bv;
                (*argmax)[static_cast<std::size_t>(oi)] = best;
            }

    tape.set_backward(out, [out, x, argmax](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t i = 0; i < o.size; ++i)
            xi.grad[(*argmax)[static_cast<std::size_t>(i)]] += o.grad[i];
    });
    tape.check_finite(out, "maxpool1d");
    return out;
}

template <class T>
int global_avg_pool(Tape<T>& tape, int x) {
    auto& nx = tape.at(x);
    require<T>(nx.shape.size() == 3, "global_avg_pool: input must be [B,T,D]");
    const std::int64_t bsz = nx.shape[0], tlen = nx.shape[1], d = nx.shape[2];
    require<T>(tlen >= 1, "global_avg_pool: empty time axis");
    const int out = tape.new_node({bsz, d});
    auto& no = tape.at(out);
    const T inv = T(1) / static_cast<T>(tlen);
    for (std::int64_t bb = 0; bb < bsz; ++bb) {
        T* ob = no.val + bb * d;
        const T* xb = nx.val + bb * tlen * d;
        for (std::int64_t t = 0; t < tlen; ++t)
            for (std::int64_t j = 0; j < d; ++j) ob[j] += xb[t * d + j];
        for (std::int64_t j = 0; j < d; ++j) ob[j] *= inv;
    }
    tape.set_backward(out, [out, x, bsz, tlen, d, inv](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t bb = 0; bb < bsz; ++bb)
            for (std::int64_t t = 0; t < tlen; ++t)
                for (std::int64_t j = 0; j < d; ++j)
                    xi.grad[(bb * tlen + t) * d + j] += o.grad[bb * d + j] * inv;
    });
    tape.check_finite(out, "global_avg_pool");
    return out;
}

template <class T>
int flatten(Tape<T>& tape, int x) {
    auto& nx = tape.at(x);
    require<T>(nx.shape.size() >= 2, "flatten: input must have a batch dim");
    const std::int64_t bsz = nx.shape[0];
    const std::int64_t feat = nx.size / bsz;
    const int out = tape.new_node({bsz, feat});
    auto& no = tape.at(out);
    std::copy(nx.val, nx.val + nx.size, no.val);
    tape.set_backward(out, [out, x](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t i = 0; i < o.size; ++i) xi.grad[i] += o.grad[i];
    });
    return out;
}

// ------------------------------------------------------------------ norms

// Batch statistics over all axes but the last (channels-last layout).
template <class T>
struct BnBuffers {
    Tensor<T>* running_mean = nullptr;
    Tensor<T>* running_var = nullptr;
};

template <class T>
int batchnorm(Tape<T>& tape, int x, int gamma, int beta, BnBuffers<T> stats, bool training,
              bool update_stats, T momentum, T eps) {
    auto& nx = tape.at(x);
    auto& ng = tape.at(gamma);
    const std::int64_t c = nx.shape.back();
    require<T>(ng.shape.size() == 1 && ng.shape[0] == c, "batchnorm: gamma mismatch");
    const std::int64_t rows = rows_before_last(nx.shape);

    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    auto& nb = tape.at(beta);

    auto xhat = std::make_shared<std::vector<T>>(static_cast<std::size_t>(nx.size));
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
    std::vector<double> mean(static_cast<std::size_t>(c), 0.0), var(static_cast<std::size_t>(c), 0.0);

    if (training) {
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < c; ++j) mean[static_cast<std::size_t>(j)] += nx.val[r * c + j];
        for (std::int64_t j = 0; j < c; ++j) mean[static_cast<std::size_t>(j)] /= static_cast<double>(rows);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < c; ++j) {
                const double d = nx.val[r * c + j] - mean[static_cast<std::size_t>(j)];
                var[static_cast<std::size_t>(j)] += d * d;
            }
        for (std::int64_t j = 0; j < c; ++j) var[static_cast<std::size_t>(j)] /= static_cast<double>(rows);
        if (update_stats && stats.running_mean) {
            for (std::int64_t j = 0; j < c; ++j) {
                auto& rm = stats.running_mean->v[static_cast<std::size_t>(j)];
                auto& rv = stats.running_var->v[static_cast<std::size_t>(j)];
                rm = momentum * rm + (T(1) - momentum) * static_cast<T>(mean[static_cast<std::size_t>(j)]);
                rv = momentum * rv + (T(1) - momentum) * static_cast<T>(var[static_cast<std::size_t>(j)]);
            }
        }
    } else {
        for (std::int64_t j = 0; j < c; ++j) {
            mean[static_cast<std::size_t>(j)] = stats.running_mean->v[static_cast<std::size_t>(j)];
            var[static_cast<std::size_t>(j)] = stats.running_var->v[static_cast<std::size_t>(j)];
        }
    }

    for (std::int64_t j = 0; j < c; ++j)
        (*inv_std)[static_cast<std::size_t>(j)] =
            static_cast<T>(1.0 / std::sqrt(var[static_cast<std::size_t>(j)] + static_cast<double>(eps)));

    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < c; ++j) {
            const std::int64_t i = r * c + j;
            const T xh = (nx.val[i] - static_cast<T>(mean[static_cast<std::size_t>(j)])) *
                         (*inv_std)[static_cast<std::size_t>(j)];
            (*xhat)[static_cast<std::size_t>(i)] = xh;
            no.val[i] = ng.val[j] * xh + nb.val[j];
        }

    tape.set_backward(out, [out, x, gamma, beta, rows, c, xhat, inv_std, training](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        auto& gi = tp.at(gamma);
        auto& bi = tp.at(beta);
        if (!training) {
            // frozen statistics: plain affine map
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < c; ++j) {
                    const std::int64_t i = r * c + j;
                    gi.grad[j] += o.grad[i] * (*xhat)[static_cast<std::size_t>(i)];
                    bi.grad[j] += o.grad[i];
                    xi.grad[i] += o.grad[i] * gi.val[j] * (*inv_std)[static_cast<std::size_t>(j)];
                }
            return;
        }
        std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0), sum_dy_xh(static_cast<std::size_t>(c), 0.0);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < c; ++j) {
                const std::int64_t i = r * c + j;
                sum_dy[static_cast<std::size_t>(j)] += o.grad[i];
                sum_dy_xh[static_cast<std::size_t>(j)] += o.grad[i] * (*xhat)[static_cast<std::size_t>(i)];
            }
        const double inv_rows = 1.0 / static_cast<double>(rows);
        for (std::int64_t j = 0; j < c; ++j) {
            gi.grad[j] += static_cast<T>(sum_dy_xh[static_cast<std::size_t>(j)]);
            bi.grad[j] += static_cast<T>(sum_dy[static_cast<std::size_t>(j)]);
        }
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < c; ++j) {
                const std::int64_t i = r * c + j;
                const double term = o.grad[i] - sum_dy[static_cast<std::size_t>(j)] * inv_rows -
                                    (*xhat)[static_cast<std::size_t>(i)] *
                                        sum_dy_xh[static_cast<std::size_t>(j)] * inv_rows;
                xi.grad[i] += static_cast<T>(gi.val[j] * (*inv_std)[static_cast<std::size_t>(j)] * term);
            }
    });
    tape.check_finite(out, "batchnorm");
    return out;
}

// Row-wise normalization over the last dimension.
template <class T>
int layernorm(Tape<T>& tape, int x, int gamma, int beta, T eps) {
    auto& nx = tape.at(x);
    auto& ng = tape.at(gamma);
    const std::int64_t d = nx.shape.back();
    require<T>(ng.shape.size() == 1 && ng.shape[0] == d, "layernorm: gamma mismatch");
    const std::int64_t rows = rows_before_last(nx.shape);

    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    auto& nb = tape.at(beta);
    auto xhat = std::make_shared<std::vector<T>>(static_cast<std::size_t>(nx.size));
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));

    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = nx.val + r * d;
        double mu = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double dv = xr[j] - mu;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        const T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        (*inv_std)[static_cast<std::size_t>(r)] = is;
        for (std::int64_t j = 0; j < d; ++j) {
            const T xh = (xr[j] - static_cast<T>(mu)) * is;
            (*xhat)[static_cast<std::size_t>(r * d + j)] = xh;
            no.val[r * d + j] = ng.val[j] * xh + nb.val[j];
        }
    }

    tape.set_backward(out, [out, x, gamma, beta, rows, d, xhat, inv_std](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        auto& gi = tp.at(gamma);
        auto& bi = tp.at(beta);
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* dy = o.grad + r * d;
            const T* xh = xhat->data() + r * d;
            double s1 = 0.0, s2 = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                const double g = dy[j] * gi.val[j];
                s1 += g;
                s2 += g * xh[j];
                gi.grad[j] += dy[j] * xh[j];
                bi.grad[j] += dy[j];
            }
            const double inv_d = 1.0 / static_cast<double>(d);
            const T is = (*inv_std)[static_cast<std::size_t>(r)];
            T* dx = xi.grad + r * d;
            for (std::int64_t j = 0; j < d; ++j) {
                const double g = dy[j] * gi.val[j];
                dx[j] += static_cast<T>(is * (g - s1 * inv_d - xh[j] * s2 * inv_d));
            }
        }
    });
    tape.check_finite(out, "layernorm");
    return out;
}

// ------------------------------------------------------------------ dropout

// Inverted dropout with an order-independent counter-based mask.
template <class T>
int dropout(Tape<T>& tape, int x, double rate, bool training, std::uint64_t key) {
    auto& nx = tape.at(x);
    if (!training || rate <= 0.0) {
        const int out = tape.new_node(nx.shape);
        auto& no = tape.at(out);
        std::copy(nx.val, nx.val + nx.size, no.val);
        tape.set_backward(out, [out, x](Tape<T>& tp) {
            auto& o = tp.at(out);
            auto& xi = tp.at(x);
            for (std::int64_t i = 0; i < o.size; ++i) xi.grad[i] += o.grad[i];
        });
        return out;
    }
    require<T>(rate < 1.0, "dropout: rate must be < 1");
    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(nx.size));
    for (std::int64_t i = 0; i < nx.size; ++i) {
        const bool keep = hash_unit(key, static_cast<std::uint64_t>(i)) >= rate;
        (*mask)[static_cast<std::size_t>(i)] = keep;
        no.val[i] = keep ? nx.val[i] * scale : T(0);
    }
    tape.set_backward(out, [out, x, mask, scale](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t i = 0; i < o.size; ++i)
            if ((*mask)[static_cast<std::size_t>(i)]) xi.grad[i] += o.grad[i] * scale;
    });
    return out;
}

// ------------------------------------------------------- positional encoding

// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(...), added to x.
template <class T>
int positional_encoding_add(Tape<T>& tape, int x) {
    auto& nx = tape.at(x);
    require<T>(nx.shape.size() == 3, "positional encoding: input must be [B,T,D]");
    const std::int64_t bsz = nx.shape[0], tlen = nx.shape[1], d = nx.shape[2];
    require<T>(d % 2 == 0, "positional encoding: model dim must be even");

    const int out = tape.new_node(nx.shape);
    auto& no = tape.at(out);
    std::vector<T> pe(static_cast<std::size_t>(tlen * d));
    for (std::int64_t t = 0; t < tlen; ++t)
        for (std::int64_t i = 0; i < d / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            pe[static_cast<std::size_t>(t * d + 2 * i)] = static_cast<T>(std::sin(t * freq));
            pe[static_cast<std::size_t>(t * d + 2 * i + 1)] = static_cast<T>(std::cos(t * freq));
        }
    for (std::int64_t bb = 0; bb < bsz; ++bb)
        for (std::int64_t i = 0; i < tlen * d; ++i) no.val[bb * tlen * d + i] = nx.val[bb * tlen * d + i] + pe[static_cast<std::size_t>(i)];

    tape.set_backward(out, [out, x](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xi = tp.at(x);
        for (std::int64_t i = 0; i < o.size; ++i) xi.grad[i] += o.grad[i];
    });
    tape.check_finite(out, "positional_encoding");
    return out;
}

// Standalone PE table (tested against the closed form).
template <class T>
Tensor<T> positional_encoding_table(std::int64_t tlen, std::int64_t d) {
    if (d % 2 != 0) throw std::invalid_argument("positional encoding: model dim must be even");
    Tensor<T> pe({tlen, d});
    for (std::int64_t t = 0; t < tlen; ++t)
        for (std::int64_t i = 0; i < d / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            pe.v[static_cast<std::size_t>(t * d + 2 * i)] = static_cast<T>(std::sin(t * freq));
            pe.v[static_cast<std::size_t>(t * d + 2 * i + 1)] = static_cast<T>(std::cos(t * freq));
        }
    return pe;
}

// ------------------------------------------------------------------ attention

// Scaled dot-product over packed heads. q,k,v: [B, T, H*hd] -> [B, T, H*hd].
template <class T>
int attention_core(Tape<T>& tape, int q, int k, int v, std::int64_t heads, std::int64_t head_dim) {
    auto& nq = tape.at(q);
    auto& nk = tape.at(k);
    auto& nv = tape.at(v);
    require<T>(nq.shape.size() == 3, "attention: q must be [B,T,H*hd]");
    require<T>(nq.shape == nk.shape && nq.shape == nv.shape, "attention: q/k/v shape mismatch");
    const std::int64_t bsz = nq.shape[0], tlen = nq.shape[1], hd = head_dim, h = heads;
    require<T>(nq.shape[2] == h * hd, "attention: packed head dim mismatch");

    const int out = tape.new_node(nq.shape);
    auto& no = tape.at(out);
    auto attn = std::make_shared<std::vector<T>>(static_cast<std::size_t>(bsz * h * tlen * tlen));
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
    const std::int64_t stride = h * hd;

    for (std::int64_t bb = 0; bb < bsz; ++bb)
        for (std::int64_t hh = 0; hh < h; ++hh) {
            const T* qb = nq.val + bb * tlen * stride + hh * hd;
            const T* kb = nk.val + bb * tlen * stride + hh * hd;
            const T* vb = nv.val + bb * tlen * stride + hh * hd;
            T* a = attn->data() + (bb * h + hh) * tlen * tlen;
            for (std::int64_t i = 0; i < tlen; ++i) {
                const T* qi = qb + i * stride;
                T* ai = a + i * tlen;
                for (std::int64_t j = 0; j < tlen; ++j) {
                    const T* kj = kb + j * stride;
                    T s = T(0);
                    for (std::int64_t dd = 0; dd < hd; ++dd) s += qi[dd] * kj[dd];
                    ai[j] = s * inv_sqrt;
                }
            }
            softmax_rows(a, tlen, tlen);
            T* ob = no.val + bb * tlen * stride + hh * hd;
            for (std::int64_t i = 0; i < tlen; ++i) {
                T* oi = ob + i * stride;
                const T* ai = a + i * tlen;
                for (std::int64_t j = 0; j < tlen; ++j) {
                    const T aij = ai[j];
                    const T* vj = vb + j * stride;
                    for (std::int64_t dd = 0; dd < hd; ++dd) oi[dd] += aij * vj[dd];
                }
            }
        }

    tape.set_backward(out, [out, q, k, v, bsz, tlen, h, hd, stride, attn, inv_sqrt](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& qi_n = tp.at(q);
        auto& ki_n = tp.at(k);
        auto& vi_n = tp.at(v);
        std::vector<T> da(static_cast<std::size_t>(tlen * tlen));
        for (std::int64_t bb = 0; bb < bsz; ++bb)
            for (std::int64_t hh = 0; hh < h; ++hh) {
                const T* a = attn->data() + (bb * h + hh) * tlen * tlen;
                const T* dy = o.grad + bb * tlen * stride + hh * hd;
                const T* vb = vi_n.val + bb * tlen * stride + hh * hd;
                const T* qb = qi_n.val + bb * tlen * stride + hh * hd;
                const T* kb = ki_n.val + bb * tlen * stride + hh * hd;
                T* dvb = vi_n.grad + bb * tlen * stride + hh * hd;
                T* dqb = qi_n.grad + bb * tlen * stride + hh * hd;
                T* dkb = ki_n.grad + bb * tlen * stride + hh * hd;

                // dA = dy . V^T ; dV += A^T . dy
                for (std::int64_t i = 0; i < tlen; ++i) {
                    const T* dyi = dy + i * stride;
                    const T* ai = a + i * tlen;
                    T* dai = da.data() + i * tlen;
                    for (std::int64_t j = 0; j < tlen; ++j) {
                        const T* vj = vb + j * stride;
                        T s = T(0);
                        for (std::int64_t dd = 0; dd < hd; ++dd) s += dyi[dd] * vj[dd];
                        dai[j] = s;
                        T* dvj = dvb + j * stride;
                        const T aij = ai[j];
                        for (std::int64_t dd = 0; dd < hd; ++dd) dvj[dd] += aij * dyi[dd];
                    }
                }
                // softmax backward, then dQ/dK
                for (std::int64_t i = 0; i < tlen; ++i) {
                    const T* ai = a + i * tlen;
                    T* dai = da.data() + i * tlen;
                    T dot = T(0);
                    for (std::int64_t j = 0; j < tlen; ++j) dot += dai[j] * ai[j];
                    for (std::int64_t j = 0; j < tlen; ++j) dai[j] = ai[j] * (dai[j] - dot) * inv_sqrt;

                    const T* qi = qb + i * stride;
                    T* dqi = dqb + i * stride;
                    for (std::int64_t j = 0; j < tlen; ++j) {
                        const T ds = dai[j];
                        const T* kj = kb + j * stride;
                        T* dkj = dkb + j * stride;
                        for (std::int64_t dd = 0; dd < hd; ++dd) {
                            dqi[dd] += ds * kj[dd];
                            dkj[dd] += ds * qi[dd];
                        }
                    }
                }
            }
    });
    tape.check_finite(out, "attention_core");
    return out;
}

// ------------------------------------------------------------------ losses

// Mean binary cross-entropy; predictions clamped to [1e-7, 1-1e-7].
template <class T>
int bce_mean(Tape<T>& tape, int pred, std::shared_ptr<const std::vector<T>> labels) {
    auto& np = tape.at(pred);
    require<T>(static_cast<std::size_t>(np.size) == labels->size(), "bce: label count mismatch");
    const int out = tape.new_node({1});
    auto& no = tape.at(out);
    const T lo = static_cast<T>(1e-7), hi = static_cast<T>(1.0 - 1e-7);
    double sum = 0.0;
    for (std::int64_t i = 0; i < np.size; ++i) {
        const T p = std::clamp(np.val[i], lo, hi);
        const T y = (*labels)[static_cast<std::size_t>(i)];
        sum += -(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
    }
    no.val[0] = static_cast<T>(sum / static_cast<double>(np.size));

    tape.set_backward(out, [out, pred, labels, lo, hi](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& pi = tp.at(pred);
        const T g = o.grad[0] / static_cast<T>(pi.size);
        for (std::int64_t i = 0; i < pi.size; ++i) {
            const T raw = pi.val[i];
            if (raw <= lo || raw >= hi) continue; // clamped region: zero slope
            const T y = (*labels)[static_cast<std::size_t>(i)];
            pi.grad[i] += g * (-y / raw + (T(1) - y) / (T(1) - raw));
        }
    });
    return out;
}

// Euclidean distance between paired embeddings: a,b: [B,E] -> [B].
template <class T>
int pair_distance(Tape<T>& tape, int a, int b) {
    auto& na = tape.at(a);
    auto& nb = tape.at(b);
    require<T>(na.shape == nb.shape && na.shape.size() == 2, "pair_distance: need matching [B,E]");
    const std::int64_t bsz = na.shape[0], e = na.shape[1];
    const int out = tape.new_node({bsz});
    auto& no = tape.at(out);
    const T eps = static_cast<T>(1e-12);
    for (std::int64_t i = 0; i < bsz; ++i) {
        T s = T(0);
        for (std::int64_t j = 0; j < e; ++j) {
            const T d = na.val[i * e + j] - nb.val[i * e + j];
            s += d * d;
        }
        no.val[i] = std::sqrt(s + eps);
    }
    tape.set_backward(out, [out, a, b, bsz, e](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& xa = tp.at(a);
        auto& xb = tp.at(b);
        for (std::int64_t i = 0; i < bsz; ++i) {
            const T scale = o.grad[i] / o.val[i];
            for (std::int64_t j = 0; j < e; ++j) {
                const T d = xa.val[i * e + j] - xb.val[i * e + j];
                xa.grad[i * e + j] += scale * d;
                xb.grad[i * e + j] -= scale * d;
            }
        }
    });
    tape.check_finite(out, "pair_distance");
    return out;
}

// label 1 = same identity: d^2 ; label 0 = different: max(0, margin-d)^2.
template <class T>
int contrastive_mean(Tape<T>& tape, int dist, std::shared_ptr<const std::vector<T>> labels, T margin) {
    auto& nd = tape.at(dist);
    require<T>(static_cast<std::size_t>(nd.size) == labels->size(), "contrastive: label count mismatch");
    require<T>(margin > T(0), "contrastive: margin must be positive");
    const int out = tape.new_node({1});
    auto& no = tape.at(out);
    double sum = 0.0;
    for (std::int64_t i = 0; i < nd.size; ++i) {
        const T d = nd.val[i];
        if (d < T(0)) throw std::invalid_argument("contrastive: negative distance");
        const T y = (*labels)[static_cast<std::size_t>(i)];
        const T hinge = std::max(T(0), margin - d);
        sum += y * d * d + (T(1) - y) * hinge * hinge;
    }
    no.val[0] = static_cast<T>(sum / static_cast<double>(nd.size));
    tape.set_backward(out, [out, dist, labels, margin](Tape<T>& tp) {
        auto& o = tp.at(out);
        auto& di = tp.at(dist);
        const T g = o.grad[0] / static_cast<T>(di.size);
        for (std::int64_t i = 0; i < di.size; ++i) {
            const T d = di.val[i];
            const T y = (*labels)[static_cast<std::size_t>(i)];
            const T hinge = std::max(T(0), margin - d);
            di.grad[i] += g * (y * T(2) * d - (T(1) - y) * T(2) * hinge);
        }
    });
    return out;
}

} // namespace tamperlab::nn::ops
