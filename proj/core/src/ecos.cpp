#include "idealtsf/ecos.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace idealtsf {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

std::string to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::none: return "none";
        case AttackKind::fgsm: return "fgsm";
        case AttackKind::pgd: return "pgd";
    }
    return "none";
}

std::string to_string(BaseOptimizer base) {
    return base == BaseOptimizer::sgd ? "sgd" : "adam";
}

AttackKind attack_from_string(const std::string& s) {
    if (s == "none") return AttackKind::none;
    if (s == "fgsm") return AttackKind::fgsm;
    if (s == "pgd") return AttackKind::pgd;
    throw std::invalid_argument("unknown attack kind '" + s + "'");
}

BaseOptimizer base_from_string(const std::string& s) {
    if (s == "sgd") return BaseOptimizer::sgd;
    if (s == "adam") return BaseOptimizer::adam;
    throw std::invalid_argument("unknown base optimizer '" + s + "'");
}

void EcosConfig::validate() const {
    if (rho < 0.0 || lr < 0.0 || epsilon < 0.0 || fgsm_alpha < 0.0) {
        throw std::invalid_argument("EcosConfig: rho/lr/epsilon/fgsm_alpha must be non-negative");
    }
    if (n_steps < 1) {
        throw std::invalid_argument("EcosConfig: n_steps must be >= 1");
    }
    if (pgd_iters < 1) {
        throw std::invalid_argument("EcosConfig: pgd_iters must be >= 1");
    }
    if (attack == AttackKind::pgd && fgsm_alpha > epsilon) {
        throw std::invalid_argument("EcosConfig: fgsm_alpha must be <= epsilon for pgd");
    }
}

std::string to_json_string(const StepDiagnostics& diag) {
    nlohmann::json j;
    j["step"] = diag.step;
    j["loss_clean"] = finite_or_null(diag.loss_clean);
    j["loss_perturbed"] = finite_or_null(diag.loss_perturbed);
    j["loss_adv"] = diag.loss_adv ? finite_or_null(*diag.loss_adv) : nlohmann::json(nullptr);
    j["grad_norm"] = finite_or_null(diag.grad_norm);
    j["e_theta_norm"] = finite_or_null(diag.e_theta_norm);
    j["skipped_perturbation"] = diag.skipped_perturbation;
    if (diag.aborted) j["aborted"] = true;
    return j.dump();
}

AttentionBatchProblem::AttentionBatchProblem(Tensor3 z_orig, Tensor3 z_aug, Tensor3 targets)
    : z_orig_(std::move(z_orig)), z_aug_(std::move(z_aug)), targets_(std::move(targets)) {
    if (!z_orig_.same_shape(z_aug_)) {
        throw std::invalid_argument("AttentionBatchProblem: channel shape mismatch");
    }
    if (targets_.d0 != z_orig_.d0 || targets_.d1 != z_orig_.d1) {
        throw std::invalid_argument("AttentionBatchProblem: target shape mismatch");
    }
}

EvalResult AttentionBatchProblem::eval(const ParamSet& params) const {
    return eval_at(params, z_orig_);
}

EvalResult AttentionBatchProblem::eval_at(const ParamSet& params, const Tensor3& x) const {
    auto [pred, trace] = forward(params, x, z_aug_);
    auto [loss, grads] = backward(params, trace, pred, targets_);
    return {loss, std::move(grads)};
}

Tensor3 AttentionBatchProblem::input_grad(const ParamSet& params, const Tensor3& x) const {
    auto [pred, trace] = forward(params, x, z_aug_);
    return grad_wrt_input(params, trace, pred, targets_);
}

Tensor3 fgsm_attack(const Tensor3& x, const Tensor3& input_grad, double alpha) {
    if (!x.same_shape(input_grad)) {
        throw std::invalid_argument("fgsm_attack: shape mismatch");
    }
    if (alpha < 0.0) {
        throw std::invalid_argument("fgsm_attack: alpha must be non-negative");
    }
    Tensor3 out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = x.data[i] + alpha * sign(input_grad.data[i]);
    }
    return out;
}

Tensor3 pgd_attack(const BatchProblem& problem, const ParamSet& params, const EcosConfig& cfg) {
    cfg.validate();
    if (cfg.attack != AttackKind::pgd) {
        throw std::invalid_argument("pgd_attack: cfg.attack must be pgd");
    }
    const Tensor3& x = problem.clean_input();
    Tensor3 x_adv = x;
    for (int it = 0; it < cfg.pgd_iters; ++it) {
        const Tensor3 grad = problem.input_grad(params, x_adv);
        for (std::size_t i = 0; i < x_adv.size(); ++i) {
            const double stepped = x_adv.data[i] + cfg.fgsm_alpha * sign(grad.data[i]);
            const double lo = x.data[i] - cfg.epsilon;
            const double hi = x.data[i] + cfg.epsilon;
            x_adv.data[i] = std::min(std::max(stepped, lo), hi);
        }
    }
    return x_adv;
}

ParamSet sgd_step(const ParamSet& params, const GradSet& grads, double lr) {
    check_isomorphic(params, grads, "sgd_step");
    ParamSet out = params;
    auto gi = grads.begin();
    for (auto& [name, tensor] : out) {
        const auto& g = gi->second.data;
        for (std::size_t i = 0; i < tensor.data.size(); ++i) {
            tensor.data[i] -= lr * g[i];
        }
        ++gi;
    }
    return out;
}

ParamSet adam_step(const ParamSet& params, const GradSet& grads, EcosState& state, double lr) {
    check_isomorphic(params, grads, "adam_step");
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

    if (state.adam_m.empty()) {
        state.adam_m = params;
        state.adam_v = params;
        for (auto& [name, t] : state.adam_m) std::fill(t.data.begin(), t.data.end(), 0.0);
        for (auto& [name, t] : state.adam_v) std::fill(t.data.begin(), t.data.end(), 0.0);
        state.adam_t = 0;
    }
    check_isomorphic(params, state.adam_m, "adam_step(state)");

    state.adam_t += 1;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.adam_t));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.adam_t));

    ParamSet out = params;
    auto gi = grads.begin();
    auto mi = state.adam_m.begin();
    auto vi = state.adam_v.begin();
    for (auto& [name, tensor] : out) {
        const auto& g = gi->second.data;
        auto& m = mi->second.data;
        auto& v = vi->second.data;
        for (std::size_t i = 0; i < tensor.data.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            tensor.data[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
        }
        ++gi;
        ++mi;
        ++vi;
    }
    return out;
}

ParamSet base_step(const ParamSet& params, const GradSet& grads, const EcosConfig& cfg,
                   EcosState& state) {
    if (cfg.base == BaseOptimizer::sgd) return sgd_step(params, grads, cfg.lr);
    return adam_step(params, grads, state, cfg.lr);
}

double global_grad_norm(const GradSet& grads) {
    double ss = 0.0;
    for (const auto& [name, tensor] : grads) {
        for (double g : tensor.data) ss += g * g;
    }
    return std::sqrt(ss);
}

ParamSet phase1_perturb(const ParamSet& params, const GradSet& grads, const EcosConfig& cfg,
                        EcosState& state) {
    cfg.validate();
    check_isomorphic(params, grads, "phase1_perturb");
    if (state.stashed_perturbation) {
        throw std::logic_error("phase1_perturb: a perturbation is already stashed");
    }
    for (const auto& [name, tensor] : grads) {
        for (double g : tensor.data) {
            if (!std::isfinite(g)) {
                throw std::invalid_argument("phase1_perturb: non-finite gradient in '" + name +
                                            "'");
            }
        }
    }

    const double norm = global_grad_norm(grads);
    state.last_perturbation_skipped = norm == 0.0;

    GradSet stash = grads;
    if (norm == 0.0 || cfg.rho == 0.0) {
        // Degenerate step: stash exact zeros and leave the parameters
        // untouched so the bit pattern is preserved.
        for (auto& [name, tensor] : stash) std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
        state.stashed_perturbation = std::move(stash);
        return params;
    }

    const double factor = cfg.rho / norm;
    ParamSet out = params;
    auto si = stash.begin();
    for (auto& [name, tensor] : out) {
        auto& e = si->second.data;
        for (std::size_t i = 0; i < tensor.data.size(); ++i) {
            e[i] *= factor;
            tensor.data[i] += e[i];
        }
        ++si;
    }
    state.stashed_perturbation = std::move(stash);
    return out;
}

ParamSet phase2_finetune(const ParamSet& params, const LossFn& loss_fn, const EcosConfig& cfg,
                         EcosState& state) {
    cfg.validate();
    ParamSet current = params;
    for (int s = 0; s < cfg.n_steps; ++s) {
        EvalResult eval = loss_fn(current);
        if (!std::isfinite(eval.loss)) {
            throw NonFiniteLossError("phase2_finetune: non-finite loss at step " +
                                     std::to_string(s + 1));
        }
        current = base_step(current, eval.grads, cfg, state);
    }
    return current;
}

ParamSet phase3_restore_and_update(const ParamSet& params, const GradSet& grads_at_current,
                                   const EcosConfig& cfg, EcosState& state) {
    cfg.validate();
    if (!state.stashed_perturbation) {
        throw std::logic_error("phase3_restore_and_update: no stashed perturbation");
    }
    check_isomorphic(params, *state.stashed_perturbation, "phase3_restore_and_update");

    ParamSet recovered = params;
    auto si = state.stashed_perturbation->begin();
    for (auto& [name, tensor] : recovered) {
        const auto& e = si->second.data;
        for (std::size_t i = 0; i < tensor.data.size(); ++i) {
            tensor.data[i] -= e[i];
        }
        ++si;
    }
    state.stashed_perturbation.reset();
    return base_step(recovered, grads_at_current, cfg, state);
}

std::pair<ParamSet, double> adversarial_update(const ParamSet& params,
                                               const BatchProblem& problem,
                                               const EcosConfig& cfg, EcosState& state) {
    cfg.validate();
    if (cfg.attack == AttackKind::none) {
        throw std::logic_error("adversarial_update: attack is none");
    }
    Tensor3 x_adv;
    if (cfg.attack == AttackKind::fgsm) {
        const Tensor3 grad = problem.input_grad(params, problem.clean_input());
        x_adv = fgsm_attack(problem.clean_input(), grad, cfg.fgsm_alpha);
    } else {
        x_adv = pgd_attack(problem, params, cfg);
    }
    EvalResult eval = problem.eval_at(params, x_adv);
    if (!std::isfinite(eval.loss)) {
        throw NonFiniteLossError("adversarial_update: non-finite adversarial loss");
    }
    ParamSet updated = base_step(params, eval.grads, cfg, state);
    return {std::move(updated), eval.loss};
}

std::pair<ParamSet, StepDiagnostics> ecos_step(const ParamSet& params,
                                               const BatchProblem& problem,
                                               const EcosConfig& cfg, EcosState& state) {
    cfg.validate();
    const EcosState snapshot = state;

    StepDiagnostics diag;
    diag.step = state.step_count + 1;
    try {
        EvalResult clean = problem.eval(params);
        if (!std::isfinite(clean.loss)) {
            throw NonFiniteLossError("ecos_step: non-finite clean loss");
        }
        diag.loss_clean = clean.loss;
        diag.grad_norm = global_grad_norm(clean.grads);

        ParamSet perturbed = phase1_perturb(params, clean.grads, cfg, state);
        diag.skipped_perturbation = state.last_perturbation_skipped;
        diag.e_theta_norm = global_grad_norm(*state.stashed_perturbation);

        bool first_eval = true;
        const LossFn recording_loss_fn = [&](const ParamSet& p) {
            EvalResult eval = problem.eval(p);
            if (first_eval) {
                diag.loss_perturbed = eval.loss;
                first_eval = false;
            }
            return eval;
        };
        ParamSet tuned = phase2_finetune(perturbed, recording_loss_fn, cfg, state);

        EvalResult fresh = problem.eval(tuned);
        if (!std::isfinite(fresh.loss)) {
            throw NonFiniteLossError("ecos_step: non-finite loss after fine-tuning");
        }
        ParamSet updated = phase3_restore_and_update(tuned, fresh.grads, cfg, state);

        if (cfg.attack != AttackKind::none) {
            auto [after_adv, adv_loss] = adversarial_update(updated, problem, cfg, state);
            diag.loss_adv = adv_loss;
            updated = std::move(after_adv);
        }

        state.step_count += 1;
        diag.step = state.step_count;
        return {std::move(updated), diag};
    } catch (const NonFiniteLossError&) {
        state = snapshot;
        diag.aborted = true;
        return {params, diag};
    } catch (...) {
        state = snapshot;
        throw;
    }
}

}  // namespace idealtsf
