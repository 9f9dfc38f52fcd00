#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "idealtsf/tensor.hpp"

namespace idealtsf {

/// Dual-channel attention forecaster dimensions. One single-head
/// self-attention layer over time positions, shared across channels, with a
/// linear lookback->horizon head.
struct ModelConfig {
    std::size_t lookback = 96;
    std::size_t horizon = 24;
    std::size_t d_model = 32;  // even; reserved for future head splitting
    std::size_t channels = 1;

    void validate() const;
};

/// Cached activations from one forward call, laid out per (batch, channel)
/// pair. Everything backward needs lives here.
struct ForwardTrace {
    std::size_t batch = 0, channels = 0, lookback = 0, horizon = 0, d_model = 0;

    std::vector<double> x2;       // [pairs*L x 2], stacked (orig, aug) features
    std::vector<double> embed;    // [pairs*L x d]
    std::vector<double> q, k, v;  // [pairs*L x d]
    std::vector<double> logits;   // [pairs x L x L]
    std::vector<double> weights;  // [pairs x L x L], rows sum to 1
    std::vector<double> context;  // [pairs*L x d]
    std::vector<double> readout;  // [pairs x L]
    Tensor3 pred;                 // [batch x channels x horizon]

    std::size_t pairs() const { return batch * channels; }
};

/// Deterministic scaled-uniform initialization, bound = sqrt(6/(fan_in+fan_out));
/// biases start at zero.
ParamSet init_params(const ModelConfig& config, std::uint64_t seed);

/// Stacks (z_orig, z_aug) as a [L x 2] feature sequence per (batch, channel),
/// embeds it, runs softmax(Q K^T / sqrt(d)) V over the L time positions, reads
/// out a scalar per position and maps the L-vector to H outputs. Channels are
/// processed independently with shared parameters.
std::pair<Tensor3, ForwardTrace> forward(const ParamSet& params, const Tensor3& z_orig,
                                         const Tensor3& z_aug);

struct BackwardResult {
    double loss = 0.0;
    GradSet grads;
    Tensor3 grad_z_orig;
    Tensor3 grad_z_aug;
};

/// MSE loss (mean over all B*C*H elements) plus exact reverse-mode gradients
/// for every parameter and both input channels. pred must be the tensor the
/// trace produced.
BackwardResult backward_full(const ParamSet& params, const ForwardTrace& trace,
                             const Tensor3& pred, const Tensor3& target);

/// (loss, parameter gradients) — see backward_full.
std::pair<double, GradSet> backward(const ParamSet& params, const ForwardTrace& trace,
                                    const Tensor3& pred, const Tensor3& target);

/// Gradient of the MSE loss w.r.t. the z_orig entries.
Tensor3 grad_wrt_input(const ParamSet& params, const ForwardTrace& trace, const Tensor3& pred,
                       const Tensor3& target);

/// Row-stochastic [L x L] attention matrix averaged over batch and channels,
/// row-major.
std::vector<double> dump_attention(const ForwardTrace& trace);

void write_attention_csv(const std::string& path, const std::vector<double>& matrix,
                         std::size_t lookback);

/// JSON checkpoint: name -> {shape, row-major values}. Round-trips exactly.
void save_checkpoint(const std::string& path, const ParamSet& params);
ParamSet load_checkpoint(const std::string& path);

}  // namespace idealtsf
