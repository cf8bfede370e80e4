#include "kangc/kan.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kangc/rng.hpp"

namespace kangc {

namespace {

void apply_base(BaseActivation base, const Eigen::MatrixXd& x, Eigen::MatrixXd& act,
                Eigen::MatrixXd& deriv) {
    act.resizeLike(x);
    deriv.resizeLike(x);
    switch (base) {
        case BaseActivation::kSilu:
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                for (Eigen::Index i = 0; i < x.rows(); ++i) {
                    const double v = x(i, j);
                    const double s = 1.0 / (1.0 + std::exp(-v));
                    act(i, j) = v * s;
                    deriv(i, j) = s * (1.0 + v * (1.0 - s));
                }
            }
            break;
        case BaseActivation::kIdentity:
            act = x;
            deriv.setOnes();
            break;
    }
}

}  // namespace

Eigen::MatrixXd layer_forward(const KanLayer& layer, const Eigen::MatrixXd& batch,
                              LayerCache* cache) {
    if (batch.cols() != layer.in_dim()) {
        throw std::invalid_argument("layer_forward: batch has " + std::to_string(batch.cols()) +
                                    " columns, layer expects " + std::to_string(layer.in_dim()));
    }
    LayerCache local;
    LayerCache& c = cache != nullptr ? *cache : local;
    c.inputs = batch;
    apply_base(layer.base, batch, c.base_act, c.base_deriv);
    layer.grid.basis_and_derivative_matrix(batch, c.basis, c.basis_deriv);
    return c.base_act * layer.base_weights.transpose() +
           c.basis * layer.spline_weights.transpose();
}

LayerGrads layer_backward(const KanLayer& layer, const LayerCache& cache,
                          const Eigen::MatrixXd& grad_out) {
    const int nb = layer.num_basis();
    if (cache.inputs.cols() != layer.in_dim() ||
        cache.basis.cols() != static_cast<Eigen::Index>(layer.in_dim()) * nb) {
        throw std::invalid_argument("layer_backward: cache does not match this layer");
    }
    if (grad_out.rows() != cache.inputs.rows() || grad_out.cols() != layer.out_dim()) {
        throw std::invalid_argument("layer_backward: grad_out is " +
                                    std::to_string(grad_out.rows()) + "x" +
                                    std::to_string(grad_out.cols()) + ", expected " +
                                    std::to_string(cache.inputs.rows()) + "x" +
                                    std::to_string(layer.out_dim()));
    }
    LayerGrads g;
    g.base_weights.noalias() = grad_out.transpose() * cache.base_act;
    g.spline_weights.noalias() = grad_out.transpose() * cache.basis;

    // grad wrt inputs: base path plus the spline path contracted over basis index.
    g.inputs.noalias() = grad_out * layer.base_weights;
    g.inputs.array() *= cache.base_deriv.array();
    Eigen::MatrixXd expanded = grad_out * layer.spline_weights;  // B x in*nb
    expanded.array() *= cache.basis_deriv.array();
    for (int j = 0; j < layer.in_dim(); ++j) {
        g.inputs.col(j) += expanded.middleCols(static_cast<Eigen::Index>(j) * nb, nb).rowwise().sum();
    }
    return g;
}

KanNetwork init_network(const std::vector<int>& layer_dims, const InitOptions& opts,
                        std::uint64_t seed) {
    if (layer_dims.size() < 2) throw std::invalid_argument("init_network needs >= 2 layer dims");
    for (int d : layer_dims) {
        if (d < 1) throw std::invalid_argument("layer dims must be >= 1");
    }
    const SplineGrid grid(opts.grid_size, opts.order, opts.grid_lo, opts.grid_hi);
    const int nb = grid.num_basis();

    Rng rng(seed);
    KanNetwork net;
    net.layers.reserve(layer_dims.size() - 1);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int in = layer_dims[l];
        const int out = layer_dims[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));

        int tie = (l == 0) ? opts.first_layer_tie_width : 1;
        if (tie < 1) throw std::invalid_argument("first_layer_tie_width must be >= 1");
        if (tie > 1 && in % tie != 0) {
            throw std::invalid_argument("first_layer_tie_width must divide the input dimension");
        }

        KanLayer layer{Eigen::MatrixXd(out, in), Eigen::MatrixXd(out, in * nb), grid, opts.base};
        // Tied columns receive the same draw, one per block of `tie` columns.
        const int blocks = in / tie;
        for (int o = 0; o < out; ++o) {
            for (int blk = 0; blk < blocks; ++blk) {
                const double w = rng.uniform(-scale, scale);
                for (int r = 0; r < tie; ++r) layer.base_weights(o, blk * tie + r) = w;
            }
        }
        for (int o = 0; o < out; ++o) {
            for (int blk = 0; blk < blocks; ++blk) {
                for (int k = 0; k < nb; ++k) {
                    const double w = rng.normal(0.0, 0.1 * scale);
                    for (int r = 0; r < tie; ++r) {
                        layer.spline_weights(o, (blk * tie + r) * nb + k) = w;
                    }
                }
            }
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Eigen::MatrixXd network_forward(const KanNetwork& net, const Eigen::MatrixXd& batch,
                                ForwardCache* cache) {
    if (net.layers.empty()) throw std::invalid_argument("network has no layers");
    if (cache != nullptr) {
        cache->layers.assign(net.layers.size(), LayerCache{});
    }
    Eigen::MatrixXd x = batch;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        try {
            x = layer_forward(net.layers[l], x, cache != nullptr ? &cache->layers[l] : nullptr);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": " + e.what());
        }
    }
    if (cache != nullptr) cache->output = x;
    return x;
}

NetworkGrads network_backward(const KanNetwork& net, const ForwardCache& cache,
                              const Eigen::MatrixXd& grad_out) {
    if (cache.layers.size() != net.layers.size()) {
        throw std::invalid_argument("network_backward: cache has wrong layer count");
    }
    NetworkGrads grads;
    grads.layers.resize(net.layers.size());
    Eigen::MatrixXd g = grad_out;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        grads.layers[l] = layer_backward(net.layers[l], cache.layers[l], g);
        g = grads.layers[l].inputs;
    }
    return grads;
}

}  // namespace kangc
