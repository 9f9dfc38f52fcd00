#include "idealtsf/attention.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "idealtsf/rng.hpp"
#include "json.hpp"

namespace idealtsf {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

ConstMapMat as_matrix(const Tensor& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.rows()),
            static_cast<Eigen::Index>(t.cols())};
}

MapMat as_matrix(Tensor& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.rows()),
            static_cast<Eigen::Index>(t.cols())};
}

const Tensor& named(const ParamSet& params, const char* name) {
    const auto it = params.find(name);
    if (it == params.end()) {
        throw std::invalid_argument(std::string("ParamSet: missing tensor '") + name + "'");
    }
    return it->second;
}

void require_finite(const Tensor3& t, const char* what) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(what) + ": non-finite input");
        }
    }
}

struct Dims {
    std::size_t lookback, horizon, d_model;
};

Dims dims_from(const ParamSet& params) {
    const Tensor& w_in = named(params, "W_in");
    const Tensor& w_head = named(params, "W_head");
    if (w_in.rows() != 2) {
        throw std::invalid_argument("ParamSet: W_in must have 2 rows (dual channel)");
    }
    return {w_head.rows(), w_head.cols(), w_in.cols()};
}

}  // namespace

void ModelConfig::validate() const {
    if (lookback == 0 || horizon == 0 || d_model == 0 || channels == 0) {
        throw std::invalid_argument("ModelConfig: all dimensions must be positive");
    }
    if (d_model % 2 != 0) {
        throw std::invalid_argument("ModelConfig: d_model must be even");
    }
}

ParamSet init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t l = config.lookback, h = config.horizon, d = config.d_model;

    ParamSet params;
    params["W_in"] = Tensor::matrix(2, d);
    params["W_q"] = Tensor::matrix(d, d);
    params["W_k"] = Tensor::matrix(d, d);
    params["W_v"] = Tensor::matrix(d, d);
    params["W_out"] = Tensor::vector(d);
    params["W_head"] = Tensor::matrix(l, h);
    params["b_in"] = Tensor::vector(d);
    params["b_q"] = Tensor::vector(d);
    params["b_k"] = Tensor::vector(d);
    params["b_v"] = Tensor::vector(d);
    params["b_out"] = Tensor::vector(1);
    params["b_head"] = Tensor::vector(h);

    RngStream rng(derive_stream_seed(seed, 0x6d6f64656c, 0));
    for (auto& [name, tensor] : params) {
        if (name[0] != 'W') continue;  // biases stay zero
        const std::size_t fan_in = tensor.rows();
        const std::size_t fan_out = tensor.cols();
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : tensor.data) v = rng.uniform(-bound, bound);
    }
    return params;
}

std::pair<Tensor3, ForwardTrace> forward(const ParamSet& params, const Tensor3& z_orig,
                                         const Tensor3& z_aug) {
    if (!z_orig.same_shape(z_aug)) {
        throw std::invalid_argument("forward: z_orig/z_aug shape mismatch");
    }
    require_finite(z_orig, "forward(z_orig)");
    require_finite(z_aug, "forward(z_aug)");

    const auto [l, h, d] = dims_from(params);
    if (z_orig.d2 != l) {
        throw std::invalid_argument("forward: input length does not match W_head");
    }
    const std::size_t batch = z_orig.d0, channels = z_orig.d1;
    const std::size_t pairs = batch * channels;
    const std::size_t rows = pairs * l;

    ForwardTrace trace;
    trace.batch = batch;
    trace.channels = channels;
    trace.lookback = l;
    trace.horizon = h;
    trace.d_model = d;
    trace.x2.resize(rows * 2);
    trace.embed.resize(rows * d);
    trace.q.resize(rows * d);
    trace.k.resize(rows * d);
    trace.v.resize(rows * d);
    trace.logits.resize(pairs * l * l);
    trace.weights.resize(pairs * l * l);
    trace.context.resize(rows * d);
    trace.readout.resize(pairs * l);
    trace.pred = Tensor3(batch, channels, h);

    MapMat x2(trace.x2.data(), rows, 2);
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t b = p / channels, c = p % channels;
        for (std::size_t t = 0; t < l; ++t) {
            x2(p * l + t, 0) = z_orig.at(b, c, t);
            x2(p * l + t, 1) = z_aug.at(b, c, t);
        }
    }

    const auto w_in = as_matrix(named(params, "W_in"));
    const auto w_q = as_matrix(named(params, "W_q"));
    const auto w_k = as_matrix(named(params, "W_k"));
    const auto w_v = as_matrix(named(params, "W_v"));
    const ConstMapVec w_out(named(params, "W_out").data.data(), d);
    const auto w_head = as_matrix(named(params, "W_head"));
    const ConstMapVec b_in(named(params, "b_in").data.data(), d);
    const ConstMapVec b_q(named(params, "b_q").data.data(), d);
    const ConstMapVec b_k(named(params, "b_k").data.data(), d);
    const ConstMapVec b_v(named(params, "b_v").data.data(), d);
    const double b_out = named(params, "b_out").data[0];
    const ConstMapVec b_head(named(params, "b_head").data.data(), h);

    MapMat embed(trace.embed.data(), rows, d);
    MapMat q(trace.q.data(), rows, d);
    MapMat k(trace.k.data(), rows, d);
    MapMat v(trace.v.data(), rows, d);
    MapMat context(trace.context.data(), rows, d);

    embed.noalias() = x2 * w_in;
    embed.rowwise() += b_in.transpose();
    q.noalias() = embed * w_q;
    q.rowwise() += b_q.transpose();
    k.noalias() = embed * w_k;
    k.rowwise() += b_k.transpose();
    v.noalias() = embed * w_v;
    v.rowwise() += b_v.transpose();

    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const auto li = static_cast<Eigen::Index>(l);
    for (std::size_t p = 0; p < pairs; ++p) {
        const auto qp = q.middleRows(p * l, l);
        const auto kp = k.middleRows(p * l, l);
        const auto vp = v.middleRows(p * l, l);
        MapMat logits(trace.logits.data() + p * l * l, li, li);
        MapMat weights(trace.weights.data() + p * l * l, li, li);

        logits.noalias() = qp * kp.transpose() * scale;
        for (Eigen::Index row = 0; row < li; ++row) {
            const double row_max = logits.row(row).maxCoeff();
            weights.row(row) = (logits.row(row).array() - row_max).exp();
            weights.row(row) /= weights.row(row).sum();
        }
        context.middleRows(p * l, l).noalias() = weights * vp;

        MapVec readout(trace.readout.data() + p * l, li);
        readout.noalias() = context.middleRows(p * l, l) * w_out;
        readout.array() += b_out;

        const std::size_t b = p / channels, c = p % channels;
        Eigen::VectorXd y = w_head.transpose() * readout + b_head;
        for (std::size_t t = 0; t < h; ++t) trace.pred.at(b, c, t) = y(static_cast<Eigen::Index>(t));
    }

    return {trace.pred, std::move(trace)};
}

BackwardResult backward_full(const ParamSet& params, const ForwardTrace& trace,
                             const Tensor3& pred, const Tensor3& target) {
    if (!pred.same_shape(trace.pred) || pred.data != trace.pred.data) {
        throw std::invalid_argument("backward: prediction does not match the trace (stale trace?)");
    }
    if (!pred.same_shape(target)) {
        throw std::invalid_argument("backward: pred/target shape mismatch");
    }

    const std::size_t l = trace.lookback, h = trace.horizon, d = trace.d_model;
    const std::size_t pairs = trace.pairs();
    const std::size_t rows = pairs * l;
    const auto li = static_cast<Eigen::Index>(l);

    BackwardResult result;
    result.grads = params;
    for (auto& [name, tensor] : result.grads) {
        std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
    }
    result.grad_z_orig = Tensor3(pred.d0, pred.d1, l);
    result.grad_z_aug = Tensor3(pred.d0, pred.d1, l);

    const double inv_n = 1.0 / static_cast<double>(pred.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred.data[i] - target.data[i];
        loss += r * r;
    }
    result.loss = loss * inv_n;

    const auto w_in = as_matrix(named(params, "W_in"));
    const auto w_q = as_matrix(named(params, "W_q"));
    const auto w_k = as_matrix(named(params, "W_k"));
    const auto w_v = as_matrix(named(params, "W_v"));
    const ConstMapVec w_out(named(params, "W_out").data.data(), d);
    const auto w_head = as_matrix(named(params, "W_head"));

    ConstMapMat x2(trace.x2.data(), rows, 2);
    ConstMapMat embed(trace.embed.data(), rows, d);
    ConstMapMat q(trace.q.data(), rows, d);
    ConstMapMat k(trace.k.data(), rows, d);
    ConstMapMat v(trace.v.data(), rows, d);
    ConstMapMat context(trace.context.data(), rows, d);

    auto g_w_in = as_matrix(result.grads.at("W_in"));
    auto g_w_q = as_matrix(result.grads.at("W_q"));
    auto g_w_k = as_matrix(result.grads.at("W_k"));
    auto g_w_v = as_matrix(result.grads.at("W_v"));
    MapVec g_w_out(result.grads.at("W_out").data.data(), d);
    auto g_w_head = as_matrix(result.grads.at("W_head"));
    MapVec g_b_in(result.grads.at("b_in").data.data(), d);
    MapVec g_b_q(result.grads.at("b_q").data.data(), d);
    MapVec g_b_k(result.grads.at("b_k").data.data(), d);
    MapVec g_b_v(result.grads.at("b_v").data.data(), d);
    MapVec g_b_head(result.grads.at("b_head").data.data(), h);
    double g_b_out = 0.0;

    RowMat d_q(rows, d), d_k(rows, d), d_v(rows, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t b = p / trace.channels, c = p % trace.channels;

        Eigen::VectorXd dy(static_cast<Eigen::Index>(h));
        for (std::size_t t = 0; t < h; ++t) {
            dy(static_cast<Eigen::Index>(t)) =
                2.0 * (pred.at(b, c, t) - target.at(b, c, t)) * inv_n;
        }

        const ConstMapVec readout(trace.readout.data() + p * l, li);
        g_w_head.noalias() += readout * dy.transpose();
        g_b_head.noalias() += dy;

        const Eigen::VectorXd d_readout = w_head * dy;
        const auto ctx_p = context.middleRows(p * l, l);
        g_w_out.noalias() += ctx_p.transpose() * d_readout;
        g_b_out += d_readout.sum();

        const RowMat d_ctx = d_readout * w_out.transpose();

        const ConstMapMat weights(trace.weights.data() + p * l * l, li, li);
        const auto vp = v.middleRows(p * l, l);
        const RowMat d_weights = d_ctx * vp.transpose();
        d_v.middleRows(p * l, l).noalias() = weights.transpose() * d_ctx;

        // Softmax backward, row by row.
        RowMat d_logits(li, li);
        for (Eigen::Index row = 0; row < li; ++row) {
            const double dot = d_weights.row(row).cwiseProduct(weights.row(row)).sum();
            d_logits.row(row) =
                (weights.row(row).array() * (d_weights.row(row).array() - dot)).matrix();
        }

        const auto qp = q.middleRows(p * l, l);
        const auto kp = k.middleRows(p * l, l);
        d_q.middleRows(p * l, l).noalias() = d_logits * kp * scale;
        d_k.middleRows(p * l, l).noalias() = d_logits.transpose() * qp * scale;
    }

    result.grads.at("b_out").data[0] = g_b_out;

    g_w_q.noalias() = embed.transpose() * d_q;
    g_w_k.noalias() = embed.transpose() * d_k;
    g_w_v.noalias() = embed.transpose() * d_v;
    g_b_q = d_q.colwise().sum().transpose();
    g_b_k = d_k.colwise().sum().transpose();
    g_b_v = d_v.colwise().sum().transpose();

    RowMat d_embed = d_q * w_q.transpose();
    d_embed.noalias() += d_k * w_k.transpose();
    d_embed.noalias() += d_v * w_v.transpose();

    g_w_in.noalias() = x2.transpose() * d_embed;
    g_b_in = d_embed.colwise().sum().transpose();

    const RowMat d_x2 = d_embed * w_in.transpose();
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t b = p / trace.channels, c = p % trace.channels;
        for (std::size_t t = 0; t < l; ++t) {
            result.grad_z_orig.at(b, c, t) = d_x2(p * l + t, 0);
            result.grad_z_aug.at(b, c, t) = d_x2(p * l + t, 1);
        }
    }

    return result;
}

std::pair<double, GradSet> backward(const ParamSet& params, const ForwardTrace& trace,
                                    const Tensor3& pred, const Tensor3& target) {
    BackwardResult full = backward_full(params, trace, pred, target);
    return {full.loss, std::move(full.grads)};
}

Tensor3 grad_wrt_input(const ParamSet& params, const ForwardTrace& trace, const Tensor3& pred,
                       const Tensor3& target) {
    BackwardResult full = backward_full(params, trace, pred, target);
    return std::move(full.grad_z_orig);
}

std::vector<double> dump_attention(const ForwardTrace& trace) {
    const std::size_t l = trace.lookback;
    const std::size_t pairs = trace.pairs();
    if (pairs == 0) {
        throw std::invalid_argument("dump_attention: empty trace");
    }
    std::vector<double> avg(l * l, 0.0);
    for (std::size_t p = 0; p < pairs; ++p) {
        const double* block = trace.weights.data() + p * l * l;
        for (std::size_t i = 0; i < l * l; ++i) avg[i] += block[i];
    }
    for (double& v : avg) v /= static_cast<double>(pairs);
    return avg;
}

void write_attention_csv(const std::string& path, const std::vector<double>& matrix,
                         std::size_t lookback) {
    if (matrix.size() != lookback * lookback) {
        throw std::invalid_argument("write_attention_csv: matrix is not lookback x lookback");
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_attention_csv: cannot open '" + path + "'");
    }
    out.precision(17);
    for (std::size_t i = 0; i < lookback; ++i) {
        for (std::size_t j = 0; j < lookback; ++j) {
            out << matrix[i * lookback + j] << (j + 1 < lookback ? "," : "\n");
        }
    }
}

void save_checkpoint(const std::string& path, const ParamSet& params) {
    nlohmann::json j;
    for (const auto& [name, tensor] : params) {
        j[name] = {{"shape", tensor.shape}, {"data", tensor.data}};
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
    }
    out << j.dump(2) << "\n";
}

ParamSet load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
    }
    nlohmann::json j;
    in >> j;
    ParamSet params;
    for (const auto& [name, entry] : j.items()) {
        Tensor t;
        t.shape = entry.at("shape").get<std::vector<std::size_t>>();
        t.data = entry.at("data").get<std::vector<double>>();
        std::size_t expect = 1;
        for (std::size_t s : t.shape) expect *= s;
        if (t.data.size() != expect) {
            throw std::runtime_error("load_checkpoint: shape/data mismatch for '" + name + "'");
        }
        params[name] = std::move(t);
    }
    return params;
}

}  // namespace idealtsf
