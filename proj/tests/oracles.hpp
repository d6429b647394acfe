#pragma once

// Test-only reference implementations, deliberately brute-force and
// independent of the library's computation paths.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "tamperlab/harness/metrics.hpp"

namespace oracles {

// O(n^2) DFT
inline std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
            s += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = s;
    }
    return out;
}

// Amplitude of the closest DFT bin to freq_hz
inline double tone_amplitude(const std::vector<double>& x, double freq_hz, double fs) {
    std::vector<std::complex<double>> cx(x.begin(), x.end());
    const auto spec = dft(cx);
    const auto bin = static_cast<std::size_t>(std::llround(freq_hz * static_cast<double>(x.size()) / fs));
    return 2.0 * std::abs(spec[bin]) / static_cast<double>(x.size());
}

// Direct same-padded 1-D convolution, [T,Ci] x [K,Ci,Co] -> [T,Co]
inline std::vector<double> conv1d_same(const std::vector<double>& x, std::size_t tlen, std::size_t ci,
                                       const std::vector<double>& w, std::size_t k, std::size_t co,
                                       const std::vector<double>& bias) {
    std::vector<double> y(tlen * co, 0.0);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
    for (std::size_t t = 0; t < tlen; ++t)
        for (std::size_t o = 0; o < co; ++o) {
            double acc = bias[o];
            for (std::size_t kk = 0; kk < k; ++kk) {
                const std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t + kk) - half;
                if (tt < 0 || tt >= static_cast<std::ptrdiff_t>(tlen)) continue;
                for (std::size_t i = 0; i < ci; ++i)
                    acc += x[static_cast<std::size_t>(tt) * ci + i] * w[(kk * ci + i) * co + o];
            }
            y[t * co + o] = acc;
        }
    return y;
}

// Reference multi-head attention on one batch item, [T, H*hd] inputs
inline std::vector<double> attention(const std::vector<double>& q, const std::vector<double>& k,
                                     const std::vector<double>& v, std::size_t tlen, std::size_t heads,
                                     std::size_t hd) {
    const std::size_t stride = heads * hd;
    std::vector<double> out(tlen * stride, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < tlen; ++i) {
            std::vector<double> scores(tlen);
            double mx = -1e300;
            for (std::size_t j = 0; j < tlen; ++j) {
                double s = 0.0;
                for (std::size_t d = 0; d < hd; ++d)
                    s += q[i * stride + h * hd + d] * k[j * stride + h * hd + d];
                scores[j] = s / std::sqrt(static_cast<double>(hd));
                mx = std::max(mx, scores[j]);
            }
            double z = 0.0;
            for (auto& s : scores) {
                s = std::exp(s - mx);
                z += s;
            }
            for (auto& s : scores) s /= z;
            for (std::size_t j = 0; j < tlen; ++j)
                for (std::size_t d = 0; d < hd; ++d)
                    out[i * stride + h * hd + d] += scores[j] * v[j * stride + h * hd + d];
        }
    }
    return out;
}

// Threshold-and-refractory R-peak counter for clean synthetic ECG
inline int count_beats(const std::vector<double>& x, double fs, double min_rr_s = 0.25) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double mx = 0.0;
    for (double v : x) mx = std::max(mx, v - mean);
    const double thresh = 0.5 * mx;
    const auto refractory = static_cast<std::size_t>(min_rr_s * fs);
    int count = 0;
    std::size_t last = 0;
    bool armed = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] - mean;
        if (armed && v > thresh) {
            ++count;
            last = i;
            armed = false;
        } else if (!armed && i - last > refractory && v < 0.2 * mx) {
            armed = true;
        }
    }
    return count;
}

// Confusion-matrix counter (positives = label 1, predicted positive = p >= thr)
inline tamperlab::harness::Metrics metrics_by_counting(const std::vector<double>& preds,
                                                       const std::vector<int>& labels, double thr) {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pp = preds[i] >= thr;
        const bool ip = labels[i] == 1;
        tp += (pp && ip);
        fp += (pp && !ip);
        fn += (!pp && ip);
        tn += (!pp && !ip);
    }
    tamperlab::harness::Metrics m;
    const double total = static_cast<double>(tp + fp + fn + tn);
    m.accuracy = (tp + tn) / total;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

} // namespace oracles
