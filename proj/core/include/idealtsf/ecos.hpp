#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "idealtsf/attention.hpp"
#include "idealtsf/tensor.hpp"

namespace idealtsf {

enum class AttackKind { none, fgsm, pgd };
enum class BaseOptimizer { sgd, adam };

std::string to_string(AttackKind kind);
std::string to_string(BaseOptimizer base);
AttackKind attack_from_string(const std::string& s);
BaseOptimizer base_from_string(const std::string& s);

/// EcoSystem Optimizer knobs. rho/lr/epsilon/fgsm_alpha admit zero so the
/// degenerate configurations (pure base optimizer, no-op attacks) stay
/// expressible; step counts must be positive.
struct EcosConfig {
    double rho = 0.1;          // parameter-perturbation magnitude
    int n_steps = 3;           // phase II fine-tuning steps
    double lr = 1e-3;          // base-optimizer learning rate
    double epsilon = 0.1;      // adversarial ball radius
    double fgsm_alpha = 0.05;  // attack step size (absolute)
    AttackKind attack = AttackKind::pgd;
    int pgd_iters = 3;
    BaseOptimizer base = BaseOptimizer::adam;

    void validate() const;
};

/// Optimizer state owned by one training driver. The stashed perturbation is
/// present exactly between phase I and phase III of one step.
struct EcosState {
    std::optional<GradSet> stashed_perturbation;
    bool last_perturbation_skipped = false;  // zero-gradient event in phase I
    ParamSet adam_m, adam_v;                 // lazily sized to the ParamSet
    long adam_t = 0;
    long step_count = 0;
};

/// Per-step record, emitted as one JSON line:
/// {step, loss_clean, loss_perturbed, loss_adv, grad_norm, e_theta_norm,
///  skipped_perturbation}. Non-finite values serialize as null.
struct StepDiagnostics {
    long step = 0;
    double loss_clean = std::numeric_limits<double>::quiet_NaN();
    double loss_perturbed = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> loss_adv;
    double grad_norm = std::numeric_limits<double>::quiet_NaN();
    double e_theta_norm = 0.0;
    bool skipped_perturbation = false;
    bool aborted = false;
};

std::string to_json_string(const StepDiagnostics& diag);

struct EvalResult {
    double loss = 0.0;
    GradSet grads;
};

/// Fresh forward/backward on the current batch at the given parameters.
using LossFn = std::function<EvalResult(const ParamSet&)>;

/// Thrown when a loss evaluation goes non-finite mid-step; ecos_step converts
/// it into a transactional abort.
struct NonFiniteLossError : std::runtime_error {
    explicit NonFiniteLossError(const std::string& what) : std::runtime_error(what) {}
};

/// Binds the optimizer to one batch of a model: loss/gradients at arbitrary
/// parameters, plus input gradients for adversarial sample generation.
class BatchProblem {
public:
    virtual ~BatchProblem() = default;
    virtual EvalResult eval(const ParamSet& params) const = 0;
    /// Loss/gradients with x substituted for the attackable input channel.
    virtual EvalResult eval_at(const ParamSet& params, const Tensor3& x) const = 0;
    /// dLoss/dx at the substituted input x.
    virtual Tensor3 input_grad(const ParamSet& params, const Tensor3& x) const = 0;
    virtual const Tensor3& clean_input() const = 0;
};

/// The dual-channel attention forecaster on one window batch. Adversarial
/// perturbations apply to the z_orig channel; z_aug stays fixed.
class AttentionBatchProblem final : public BatchProblem {
public:
    AttentionBatchProblem(Tensor3 z_orig, Tensor3 z_aug, Tensor3 targets);

    EvalResult eval(const ParamSet& params) const override;
    EvalResult eval_at(const ParamSet& params, const Tensor3& x) const override;
    Tensor3 input_grad(const ParamSet& params, const Tensor3& x) const override;
    const Tensor3& clean_input() const override { return z_orig_; }
    const Tensor3& targets() const { return targets_; }

private:
    Tensor3 z_orig_, z_aug_, targets_;
};

/// x + alpha * sign(grad), with sign(0) = 0.
Tensor3 fgsm_attack(const Tensor3& x, const Tensor3& input_grad, double alpha);

/// Iterated FGSM with per-coordinate projection onto [x - eps, x + eps],
/// starting from the clean input and recomputing the input gradient each
/// iteration.
Tensor3 pgd_attack(const BatchProblem& problem, const ParamSet& params, const EcosConfig& cfg);

ParamSet sgd_step(const ParamSet& params, const GradSet& grads, double lr);
ParamSet adam_step(const ParamSet& params, const GradSet& grads, EcosState& state, double lr);
ParamSet base_step(const ParamSet& params, const GradSet& grads, const EcosConfig& cfg,
                   EcosState& state);

double global_grad_norm(const GradSet& grads);

/// Phase I: e_theta = (rho / ||grad||_2) * grad, stashed in state; returns
/// theta + e_theta. A zero gradient norm skips the perturbation (recorded in
/// state); non-finite gradients are a hard error.
ParamSet phase1_perturb(const ParamSet& params, const GradSet& grads, const EcosConfig& cfg,
                        EcosState& state);

/// Phase II: n_steps sequential base-optimizer updates, each on a fresh
/// loss/gradient evaluation. Throws NonFiniteLossError if a loss goes
/// non-finite mid-sequence.
ParamSet phase2_finetune(const ParamSet& params, const LossFn& loss_fn, const EcosConfig& cfg,
                         EcosState& state);

/// Phase III: subtracts the stashed perturbation, then applies one base
/// update with the supplied gradients. Clears the stash.
ParamSet phase3_restore_and_update(const ParamSet& params, const GradSet& grads_at_current,
                                   const EcosConfig& cfg, EcosState& state);

/// Builds the adversarial input, evaluates loss/gradients on it, and applies
/// one base update. Returns the updated parameters and the adversarial loss.
std::pair<ParamSet, double> adversarial_update(const ParamSet& params,
                                               const BatchProblem& problem,
                                               const EcosConfig& cfg, EcosState& state);

/// One full optimizer step: clean eval -> phase I -> phase II -> fresh eval
/// -> phase III -> adversarial update (when attack != none). Transactional:
/// a non-finite loss anywhere aborts the step, leaves the parameters and
/// state at their pre-step values and reports via the diagnostics.
std::pair<ParamSet, StepDiagnostics> ecos_step(const ParamSet& params,
                                               const BatchProblem& problem,
                                               const EcosConfig& cfg, EcosState& state);

}  // namespace idealtsf
