#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "idealtsf/attention.hpp"
#include "idealtsf/rng.hpp"
#include "support/fixtures.hpp"

using namespace idealtsf;

namespace {

double mse_loss(const Tensor3& pred, const Tensor3& target) {
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred.data[i] - target.data[i];
        loss += r * r;
    }
    return loss / static_cast<double>(pred.size());
}

double loss_at(const ParamSet& params, const Tensor3& z_orig, const Tensor3& z_aug,
               const Tensor3& target) {
    auto [pred, trace] = forward(params, z_orig, z_aug);
    return mse_loss(pred, target);
}

bool gradients_close(double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return std::abs(analytic - numeric) <= std::max(1e-7, 1e-4 * scale);
}

struct SmallSetup {
    ModelConfig config{8, 4, 8, 2};
    ParamSet params;
    Tensor3 z_orig, z_aug, target;
};

SmallSetup make_setup(std::uint64_t seed) {
    SmallSetup s;
    s.params = init_params(s.config, seed);
    RngStream rng(derive_stream_seed(seed, 0xda7a, 0));
    s.z_orig = testsupport::random_tensor(rng, 2, 2, 8);
    s.z_aug = testsupport::random_tensor(rng, 2, 2, 8);
    s.target = testsupport::random_tensor(rng, 2, 2, 4);
    return s;
}

}  // namespace

TEST_CASE("init_params is deterministic and bounded") {
    const ModelConfig config{16, 8, 8, 3};
    const ParamSet a = init_params(config, 7);
    const ParamSet b = init_params(config, 7);
    const ParamSet c = init_params(config, 8);

    CHECK(flatten(a) == flatten(b));
    CHECK(flatten(a) != flatten(c));

    for (const auto& [name, tensor] : a) {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(tensor.rows() + tensor.cols()));
        for (double v : tensor.data) {
            CHECK(std::abs(v) <= bound);
            if (name[0] == 'b') CHECK(v == 0.0);
        }
    }
    CHECK(a.at("W_in").shape == std::vector<std::size_t>{2, 8});
    CHECK(a.at("W_head").shape == std::vector<std::size_t>{16, 8});
    CHECK(a.at("W_out").shape == std::vector<std::size_t>{8});
}

TEST_CASE("all-zero parameters give the zero prediction") {
    SmallSetup s = make_setup(3);
    for (auto& [name, tensor] : s.params) {
        std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
    }
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
    for (double v : pred.data) CHECK(v == 0.0);
}

TEST_CASE("zero query/key weights give uniform attention") {
    SmallSetup s = make_setup(4);
    std::fill(s.params.at("W_q").data.begin(), s.params.at("W_q").data.end(), 0.0);
    std::fill(s.params.at("W_k").data.begin(), s.params.at("W_k").data.end(), 0.0);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);

    const double uniform = 1.0 / static_cast<double>(trace.lookback);
    for (double w : trace.weights) {
        CHECK(w == doctest::Approx(uniform).epsilon(1e-12));
    }
}

TEST_CASE("duplicated channels equal a single-channel model with summed embedding") {
    SmallSetup s = make_setup(5);
    auto [pred_dual, trace_dual] = forward(s.params, s.z_orig, s.z_orig);

    ParamSet tied = s.params;
    for (std::size_t j = 0; j < tied.at("W_in").cols(); ++j) {
        tied.at("W_in").at(0, j) = s.params.at("W_in").at(0, j) + s.params.at("W_in").at(1, j);
        tied.at("W_in").at(1, j) = 0.0;
    }
    const Tensor3 zeros(s.z_orig.d0, s.z_orig.d1, s.z_orig.d2);
    auto [pred_single, trace_single] = forward(tied, s.z_orig, zeros);

    REQUIRE(pred_dual.size() == pred_single.size());
    for (std::size_t i = 0; i < pred_dual.size(); ++i) {
        CHECK(pred_dual.data[i] ==
              doctest::Approx(pred_single.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects non-finite input and mismatched shapes") {
    SmallSetup s = make_setup(6);
    Tensor3 bad = s.z_orig;
    bad.data[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(s.params, bad, s.z_aug), std::invalid_argument);

    Tensor3 wrong(2, 2, 7);
    CHECK_THROWS_AS(forward(s.params, wrong, wrong), std::invalid_argument);
}

TEST_CASE("backward at the optimum is exactly zero") {
    SmallSetup s = make_setup(8);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
    auto [loss, grads] = backward(s.params, trace, pred, pred);
    CHECK(loss == 0.0);
    for (const auto& [name, g] : grads) {
        for (double v : g.data) CHECK(v == 0.0);
    }
}

TEST_CASE("doubling the residual quadruples the loss") {
    SmallSetup s = make_setup(9);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
    auto [loss1, g1] = backward(s.params, trace, pred, s.target);

    Tensor3 doubled = s.target;
    for (std::size_t i = 0; i < doubled.size(); ++i) {
        doubled.data[i] = 2.0 * s.target.data[i] - pred.data[i];
    }
    auto [loss2, g2] = backward(s.params, trace, pred, doubled);
    CHECK(loss2 == doctest::Approx(4.0 * loss1).epsilon(1e-12));
}

TEST_CASE("parameter gradients match central finite differences") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        SmallSetup s = make_setup(seed);
        auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
        auto [loss, grads] = backward(s.params, trace, pred, s.target);

        const double eps = 1e-5;
        for (auto& [name, tensor] : s.params) {
            for (std::size_t i = 0; i < tensor.data.size(); ++i) {
                ParamSet probe = s.params;
                probe.at(name).data[i] = tensor.data[i] + eps;
                const double up = loss_at(probe, s.z_orig, s.z_aug, s.target);
                probe.at(name).data[i] = tensor.data[i] - eps;
                const double down = loss_at(probe, s.z_orig, s.z_aug, s.target);
                const double numeric = (up - down) / (2.0 * eps);
                CHECK_MESSAGE(gradients_close(grads.at(name).data[i], numeric),
                              name << "[" << i << "]: " << grads.at(name).data[i]
                                   << " vs " << numeric);
            }
        }
    }
}

TEST_CASE("input gradients match central finite differences") {
    SmallSetup s = make_setup(31);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
    const Tensor3 analytic = grad_wrt_input(s.params, trace, pred, s.target);

    const double eps = 1e-5;
    for (std::size_t i = 0; i < s.z_orig.size(); ++i) {
        Tensor3 probe = s.z_orig;
        probe.data[i] = s.z_orig.data[i] + eps;
        const double up = loss_at(s.params, probe, s.z_aug, s.target);
        probe.data[i] = s.z_orig.data[i] - eps;
        const double down = loss_at(s.params, probe, s.z_aug, s.target);
        const double numeric = (up - down) / (2.0 * eps);
        CHECK_MESSAGE(gradients_close(analytic.data[i], numeric),
                      "z_orig[" << i << "]: " << analytic.data[i] << " vs " << numeric);
    }
}

TEST_CASE("input gradient edge cases") {
    SmallSetup s = make_setup(33);

    SUBCASE("zero parameters give a zero input gradient") {
        for (auto& [name, tensor] : s.params) {
            std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
        }
        auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
        const Tensor3 g = grad_wrt_input(s.params, trace, pred, s.target);
        for (double v : g.data) CHECK(v == 0.0);
    }

    SUBCASE("a zero readout head kills the input gradient") {
        std::fill(s.params.at("W_head").data.begin(), s.params.at("W_head").data.end(), 0.0);
        auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
        const Tensor3 g = grad_wrt_input(s.params, trace, pred, s.target);
        for (double v : g.data) CHECK(v == 0.0);
    }
}

TEST_CASE("backward rejects a stale trace") {
    SmallSetup s = make_setup(34);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
    Tensor3 tampered = pred;
    tampered.data[0] += 1.0;
    CHECK_THROWS_AS(backward(s.params, trace, tampered, s.target), std::invalid_argument);
}

TEST_CASE("channel permutation permutes predictions identically") {
    SmallSetup s = make_setup(35);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);

    Tensor3 z_orig_p = s.z_orig, z_aug_p = s.z_aug;
    for (std::size_t b = 0; b < s.z_orig.d0; ++b) {
        for (std::size_t t = 0; t < s.z_orig.d2; ++t) {
            z_orig_p.at(b, 0, t) = s.z_orig.at(b, 1, t);
            z_orig_p.at(b, 1, t) = s.z_orig.at(b, 0, t);
            z_aug_p.at(b, 0, t) = s.z_aug.at(b, 1, t);
            z_aug_p.at(b, 1, t) = s.z_aug.at(b, 0, t);
        }
    }
    auto [pred_p, trace_p] = forward(s.params, z_orig_p, z_aug_p);
    for (std::size_t b = 0; b < pred.d0; ++b) {
        for (std::size_t t = 0; t < pred.d2; ++t) {
            CHECK(pred.at(b, 0, t) == pred_p.at(b, 1, t));
            CHECK(pred.at(b, 1, t) == pred_p.at(b, 0, t));
        }
    }
}

TEST_CASE("forward and backward are bit-deterministic") {
    SmallSetup s = make_setup(36);
    auto [pred1, trace1] = forward(s.params, s.z_orig, s.z_aug);
    auto [pred2, trace2] = forward(s.params, s.z_orig, s.z_aug);
    CHECK(pred1.data == pred2.data);

    auto [loss1, g1] = backward(s.params, trace1, pred1, s.target);
    auto [loss2, g2] = backward(s.params, trace2, pred2, s.target);
    CHECK(loss1 == loss2);
    CHECK(flatten(g1) == flatten(g2));
}

TEST_CASE("attention rows are stochastic and dumps average correctly") {
    SmallSetup s = make_setup(37);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);

    const std::size_t l = trace.lookback;
    for (std::size_t p = 0; p < trace.pairs(); ++p) {
        for (std::size_t row = 0; row < l; ++row) {
            double sum = 0.0;
            for (std::size_t col = 0; col < l; ++col) {
                const double w = trace.weights[(p * l + row) * l + col];
                CHECK(w >= 0.0);
                sum += w;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }

    const auto avg = dump_attention(trace);
    for (std::size_t row = 0; row < l; ++row) {
        double sum = 0.0;
        for (std::size_t col = 0; col < l; ++col) sum += avg[row * l + col];
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }

    // Two identical windows average to the single-window dump.
    Tensor3 z1(1, 1, 8), t1(1, 1, 4);
    for (std::size_t t = 0; t < 8; ++t) z1.at(0, 0, t) = s.z_orig.at(0, 0, t);
    Tensor3 z2(2, 1, 8);
    for (std::size_t t = 0; t < 8; ++t) {
        z2.at(0, 0, t) = z1.at(0, 0, t);
        z2.at(1, 0, t) = z1.at(0, 0, t);
    }
    auto [p_one, tr_one] = forward(s.params, z1, z1);
    auto [p_two, tr_two] = forward(s.params, z2, z2);
    const auto dump_one = dump_attention(tr_one);
    const auto dump_two = dump_attention(tr_two);
    for (std::size_t i = 0; i < dump_one.size(); ++i) {
        CHECK(dump_two[i] == doctest::Approx(dump_one[i]).epsilon(1e-12));
    }
}

TEST_CASE("uniform attention dumps to 1/L entries") {
    SmallSetup s = make_setup(38);
    std::fill(s.params.at("W_q").data.begin(), s.params.at("W_q").data.end(), 0.0);
    std::fill(s.params.at("W_k").data.begin(), s.params.at("W_k").data.end(), 0.0);
    std::fill(s.params.at("b_q").data.begin(), s.params.at("b_q").data.end(), 0.0);
    std::fill(s.params.at("b_k").data.begin(), s.params.at("b_k").data.end(), 0.0);
    auto [pred, trace] = forward(s.params, s.z_orig, s.z_aug);
    const auto avg = dump_attention(trace);
    for (double v : avg) CHECK(v == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip losslessly") {
    SmallSetup s = make_setup(39);
    const std::string path = testsupport::scratch_dir("ckpt") + "/params.json";
    save_checkpoint(path, s.params);
    const ParamSet loaded = load_checkpoint(path);

    REQUIRE(loaded.size() == s.params.size());
    CHECK(flatten(loaded) == flatten(s.params));

    auto [pred1, tr1] = forward(s.params, s.z_orig, s.z_aug);
    auto [pred2, tr2] = forward(loaded, s.z_orig, s.z_aug);
    CHECK(pred1.data == pred2.data);
}

TEST_CASE("flatten and set_from_flat are inverse") {
    SmallSetup s = make_setup(40);
    const std::vector<double> flat = flatten(s.params);
    ParamSet other = init_params(s.config, 999);
    set_from_flat(other, flat);
    CHECK(flatten(other) == flat);

    std::vector<double> wrong(flat.size() + 1, 0.0);
    CHECK_THROWS_AS(set_from_flat(other, wrong), std::invalid_argument);
}
