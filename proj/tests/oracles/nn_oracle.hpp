#pragma once

// Scalar-loop forward pass and loss, independent of the library's Eigen code,
// used for finite-difference gradients and golden forward values.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

enum class Act { Identity, Relu, Sigmoid, Softmax };

struct Layer {
    std::vector<std::vector<double>> w;  // out x in
    std::vector<double> b;
    Act act;
};

inline std::vector<double> forward(const std::vector<Layer>& net, std::vector<double> a) {
    for (const auto& L : net) {
        std::vector<double> z(L.b);
        for (std::size_t o = 0; o < z.size(); ++o) {
            for (std::size_t i = 0; i < a.size(); ++i) z[o] += L.w[o][i] * a[i];
        }
        switch (L.act) {
            case Act::Identity:
                break;
            case Act::Relu:
                for (auto& v : z) v = v > 0.0 ? v : 0.0;
                break;
            case Act::Sigmoid:
                for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
                break;
            case Act::Softmax: {
                const double m = *std::max_element(z.begin(), z.end());
                double s = 0.0;
                for (auto& v : z) s += (v = std::exp(v - m));
                for (auto& v : z) v /= s;
                break;
            }
        }
        a = std::move(z);
    }
    return a;
}

/// Mean cross-entropy when the last layer is softmax, else mean over samples of
/// the summed squared error.
inline double loss(const std::vector<Layer>& net, const std::vector<std::vector<double>>& xs,
                   const std::vector<std::vector<double>>& ys) {
    double total = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const auto out = forward(net, xs[s]);
        for (std::size_t k = 0; k < out.size(); ++k) {
            if (net.back().act == Act::Softmax) {
                if (ys[s][k] > 0.0) total -= ys[s][k] * std::log(out[k]);
            } else {
                total += (out[k] - ys[s][k]) * (out[k] - ys[s][k]);
            }
        }
    }
    return total / static_cast<double>(xs.size());
}

/// Central differences for every weight and bias, layer by layer, weights row-major.
inline std::vector<double> numeric_gradient(std::vector<Layer> net, const std::vector<std::vector<double>>& xs,
                                            const std::vector<std::vector<double>>& ys, double h) {
    std::vector<double> g;
    auto probe = [&](double& p) {
        const double keep = p;
        p = keep + h;
        const double up = loss(net, xs, ys);
        p = keep - h;
        const double down = loss(net, xs, ys);
        p = keep;
        g.push_back((up - down) / (2.0 * h));
    };
    for (auto& L : net) {
        for (auto& row : L.w) {
            for (auto& v : row) probe(v);
        }
        for (auto& v : L.b) probe(v);
    }
    return g;
}

}  // namespace oracle
