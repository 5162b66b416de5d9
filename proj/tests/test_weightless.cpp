#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "quweit/ops.hpp"
#include "quweit/random.hpp"
#include "quweit/tape.hpp"
#include "quweit/weightless.hpp"
#include "support/gradcheck.hpp"

using namespace quweit;
using DTensor = TensorT<double>;
using DTape = TapeT<double>;

namespace {

/// XOR truth table as LUT entries for addresses 00,01,10,11.
template <typename T>
LutLayerT<T> xor_layer() {
    LutLayerT<T> layer;
    layer.num_luts = 1;
    layer.fan_in = 2;
    layer.input_width = 2;
    layer.mapping = {0, 1};
    layer.theta = TensorT<T>::from_data({1, 4}, {-1, 1, 1, -1}, /*requires_grad=*/true);
    return layer;
}

/// Independent oracle: analytic derivative of the multilinear polynomial
///   y(p) = sum_a h(theta_a) prod_j p_j^{a_j} (1-p_j)^{1-a_j}
/// with h the hard 0/1 read (the tau -> 0 limit of the soft relaxation).
double multilinear_input_grad(const LutLayerT<double>& layer, std::size_t lut,
                              const std::vector<double>& p, std::size_t j) {
    const std::size_t n = layer.fan_in, ts = layer.table_size();
    double acc = 0;
    for (std::size_t a = 0; a < ts; ++a) {
        const double h = layer.theta.at(lut * ts + a) > 0 ? 1.0 : 0.0;
        double prod = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == j) continue;
            const double pk = p[std::size_t(layer.mapping[lut * n + k])];
            prod *= (a >> (n - 1 - k)) & 1u ? pk : 1.0 - pk;
        }
        const double sign = (a >> (n - 1 - j)) & 1u ? 1.0 : -1.0;
        acc += h * sign * prod;
    }
    return acc;
}

}  // namespace

TEST_CASE("thermometer fit places gaussian quantiles") {
    // feature ~ N(0,1) synthetic calibration: construct data with exact mean 0, std 1
    std::vector<double> vals;
    for (int i = 0; i < 500; ++i) {
        const double u = (i + 0.5) / 500.0;
        vals.push_back(normal_quantile(u));
    }
    // normalize to exact zero mean, unit std
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= vals.size();
    for (auto& v : vals) v = (v - mean) / std::sqrt(var);

    const std::size_t count = vals.size();
    auto calib = DTensor::from_data({count, 1}, std::move(vals));
    auto enc = ThermometerEncoderT<double>::fit(calib, 3);
    CHECK(enc.threshold(0, 0) == doctest::Approx(-0.674489).epsilon(1e-4));
    CHECK(enc.threshold(0, 1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(enc.threshold(0, 2) == doctest::Approx(0.674489).epsilon(1e-4));
}

TEST_CASE("thermometer fit T=1 gives the mean, constant features fall back to a uniform span") {
    auto calib = DTensor::from_data({4, 2}, {8, 3, 12, 3, 9, 3, 11, 3});
    auto enc = ThermometerEncoderT<double>::fit(calib, 1);
    CHECK(enc.threshold(0, 0) == doctest::Approx(10.0));
    CHECK(enc.threshold(1, 0) == doctest::Approx(3.0));  // constant: center of [c-1, c+1]

    auto enc3 = ThermometerEncoderT<double>::fit(calib, 3);
    CHECK(enc3.threshold(1, 0) == doctest::Approx(2.5));
    CHECK(enc3.threshold(1, 1) == doctest::Approx(3.0));
    CHECK(enc3.threshold(1, 2) == doctest::Approx(3.5));

    CHECK_THROWS_AS(ThermometerEncoderT<double>::fit(calib, 0), std::invalid_argument);
    CHECK_THROWS_AS(ThermometerEncoderT<double>::fit(DTensor::zeros({1, 2}), 2), std::invalid_argument);
}

TEST_CASE("thermometer encode: comparisons, saturation and monotonicity") {
    ThermometerEncoderT<double> enc;
    enc.num_features = 1;
    enc.bits_per_feature = 3;
    enc.thresholds = {-1, 0, 1};
    enc.surrogate_width = 1.0;

    auto bits = thermometer_encode_hard(DTensor::from_data({1, 1}, {0.5}), enc);
    CHECK(bits.at(0) == 1.0);
    CHECK(bits.at(1) == 1.0);
    CHECK(bits.at(2) == 0.0);

    auto lo = thermometer_encode_hard(DTensor::from_data({1, 1}, {-5.0}), enc);
    auto hi = thermometer_encode_hard(DTensor::from_data({1, 1}, {5.0}), enc);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(lo.at(t) == 0.0);
        CHECK(hi.at(t) == 1.0);
    }

    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        auto x = DTensor::from_data({1, 1}, {rng.normal(0.0, 2.0)});
        auto b = thermometer_encode_hard(x, enc);
        for (std::size_t t = 0; t + 1 < 3; ++t) CHECK(b.at(t) >= b.at(t + 1));
    }

    CHECK_THROWS_AS(thermometer_encode_hard(DTensor::zeros({1, 2}), enc), std::invalid_argument);
}

TEST_CASE("surrogate gradient peaks at 1/w on the threshold") {
    ThermometerEncoderT<double> enc;
    enc.num_features = 1;
    enc.bits_per_feature = 1;
    enc.thresholds = {0.25};
    enc.surrogate_width = 0.5;

    auto x = DTensor::from_data({1, 1}, {0.25});
    x.set_requires_grad(true);
    DTape tape;
    {
        DTape::Scope scope(tape);
        auto bits = thermometer_encode_hard(x, enc);
        tape.backward(sum(bits));
    }
    CHECK(x.grad()[0] == doctest::Approx(1.0 / enc.surrogate_width));
}

TEST_CASE("hard LUT lookup: XOR truth table, saturation, determinism") {
    auto layer = xor_layer<double>();
    auto out = lut_forward_hard(DTensor::from_data({1, 2}, {1, 0}), layer);
    CHECK(out.at(0) == 1.0);
    CHECK(lut_forward_hard(DTensor::from_data({1, 2}, {0, 0}), layer).at(0) == 0.0);
    CHECK(lut_forward_hard(DTensor::from_data({1, 2}, {1, 1}), layer).at(0) == 0.0);

    LutLayerT<double> ones = xor_layer<double>();
    ones.theta = DTensor::from_data({1, 4}, {0.2, 0.4, 0.9, 0.1});
    for (int a = 0; a < 4; ++a) {
        auto in = DTensor::from_data({1, 2}, {double(a >> 1), double(a & 1)});
        CHECK(lut_forward_hard(in, ones).at(0) == 1.0);
    }

    auto again = lut_forward_hard(DTensor::from_data({1, 2}, {1, 0}), layer);
    CHECK(again.at(0) == out.at(0));
    CHECK_THROWS_AS(lut_forward_hard(DTensor::zeros({1, 3}), layer), std::invalid_argument);
}

TEST_CASE("soft LUT relaxation: vertex consistency is exhaustive up to n = 6") {
    Rng rng(21);
    for (std::size_t n = 1; n <= 6; ++n) {
        LutLayerT<double> layer;
        layer.num_luts = 3;
        layer.fan_in = n;
        layer.input_width = n;
        layer.mapping.clear();
        for (std::size_t l = 0; l < 3; ++l)
            for (std::size_t j = 0; j < n; ++j) layer.mapping.push_back(std::int32_t(j));
        std::vector<double> th(3 << n);
        for (auto& v : th) v = rng.uniform(-1.0, 1.0);
        layer.theta = DTensor::from_data({3, std::size_t{1} << n}, std::move(th));

        for (std::uint32_t a = 0; a < (1u << n); ++a) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = (a >> (n - 1 - j)) & 1u ? 1.0 : 0.0;
            auto soft = lut_forward_soft(DTensor::from_data({1, n}, p), layer, 1.0 / 3.0);
            auto hard = lut_forward_hard(DTensor::from_data({1, n}, p), layer);
            for (std::size_t l = 0; l < 3; ++l) {
                const double sigma = 1.0 / (1.0 + std::exp(-layer.theta.at2(l, a) * 3.0));
                CHECK(soft.at2(0, l) == doctest::Approx(sigma).epsilon(1e-12));
                CHECK((soft.at2(0, l) > 0.5 ? 1.0 : 0.0) == hard.at2(0, l));
            }
        }
    }
}

TEST_CASE("soft XOR at the center gives exactly 1/2") {
    auto layer = xor_layer<double>();
    auto out = lut_forward_soft(DTensor::from_data({1, 2}, {0.5, 0.5}), layer, 1.0 / 3.0);
    CHECK(out.at(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(lut_forward_soft(DTensor::from_data({1, 2}, {1.5, 0.5}), layer, 1.0 / 3.0),
                    std::invalid_argument);
}

TEST_CASE("soft LUT gradients match finite differences") {
    Rng rng(31);
    LutLayerT<double> layer;
    layer.num_luts = 4;
    layer.fan_in = 3;
    layer.input_width = 5;
    layer.mapping = {0, 1, 2, 2, 3, 4, 4, 0, 1, 1, 3, 0};
    std::vector<double> th(4 * 8);
    for (auto& v : th) v = rng.uniform(-1.0, 1.0);
    layer.theta = DTensor::from_data({4, 8}, th);

    std::vector<double> p(10);
    for (auto& v : p) v = rng.uniform(0.05, 0.95);
    auto probs = DTensor::from_data({2, 5}, p);

    auto fn = [&layer](std::vector<DTensor>& in) {
        LutLayerT<double> local = layer;
        local.theta = in[1];
        return sum(mul(lut_forward_soft(in[0], local, 1.0 / 3.0), in[2]));
    };
    Rng rng2(32);
    std::vector<double> w(8);
    for (auto& v : w) v = rng2.normal(0.0, 1.0);
    auto weights = DTensor::from_data({2, 4}, w);
    auto r = gradcheck::compare(fn, {probs, layer.theta, weights});
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("EFD backward: truth-table differences for inputs, straight-through for entries") {
    auto layer = xor_layer<double>();
    auto bits = DTensor::from_data({1, 2}, {1, 0});
    bits.set_requires_grad(true);
    DTape tape;
    {
        DTape::Scope scope(tape);
        auto out = lut_forward_hard(bits, layer);
        tape.backward(sum(out));
    }
    // observed address 10; flipping bit 1 (MSB): h(10) - h(00) = 1 - 0 = +1
    CHECK(bits.grad()[0] == doctest::Approx(1.0));
    // flipping bit 2 (LSB): h(11) - h(10) = 0 - 1 = -1
    CHECK(bits.grad()[1] == doctest::Approx(-1.0));
    // straight-through entry gradient lands on the addressed entry only
    CHECK(layer.theta.grad()[2] == doctest::Approx(1.0));
    CHECK(layer.theta.grad()[0] == doctest::Approx(0.0));
    CHECK(layer.theta.grad()[1] == doctest::Approx(0.0));
    CHECK(layer.theta.grad()[3] == doctest::Approx(0.0));
}

TEST_CASE("EFD entry gradient is clipped outside |theta| <= 1") {
    auto layer = xor_layer<double>();
    layer.theta = DTensor::from_data({1, 4}, {-1, 1, 1.75, -1}, /*requires_grad=*/true);
    auto bits = DTensor::from_data({1, 2}, {1, 0});  // addresses entry 2 (theta 1.75)
    DTape tape;
    {
        DTape::Scope scope(tape);
        auto out = lut_forward_hard(bits, layer);
        tape.backward(sum(out));
    }
    CHECK(layer.theta.grad()[2] == doctest::Approx(0.0));
}

TEST_CASE("constant LUT produces zero input gradient") {
    LutLayerT<double> layer = xor_layer<double>();
    layer.theta = DTensor::from_data({1, 4}, {0.7, 0.7, 0.7, 0.7});
    auto bits = DTensor::from_data({1, 2}, {1, 0});
    bits.set_requires_grad(true);
    DTape tape;
    {
        DTape::Scope scope(tape);
        tape.backward(sum(lut_forward_hard(bits, layer)));
    }
    CHECK(bits.grad()[0] == 0.0);
    CHECK(bits.grad()[1] == 0.0);
}

TEST_CASE("EFD input gradients equal multilinear gradients exhaustively for n <= 4") {
    Rng rng(77);
    for (std::size_t n = 1; n <= 4; ++n) {
        LutLayerT<double> layer;
        layer.num_luts = 2;
        layer.fan_in = n;
        layer.input_width = n;
        layer.mapping.clear();
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t j = 0; j < n; ++j) layer.mapping.push_back(std::int32_t(j));
        std::vector<double> th(2 << n);
        for (auto& v : th) v = rng.uniform(-1.0, 1.0);
        layer.theta = DTensor::from_data({2, std::size_t{1} << n}, std::move(th));

        for (std::uint32_t a = 0; a < (1u << n); ++a) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = (a >> (n - 1 - j)) & 1u ? 1.0 : 0.0;
            auto bits = DTensor::from_data({1, n}, p);
            bits.set_requires_grad(true);
            DTape tape;
            {
                DTape::Scope scope(tape);
                auto out = lut_forward_hard(bits, layer);
                tape.backward(sum(out));
            }
            for (std::size_t j = 0; j < n; ++j) {
                double expect = 0;
                for (std::size_t l = 0; l < 2; ++l) expect += multilinear_input_grad(layer, l, p, j);
                CHECK(bits.grad()[j] == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("conditional summation forward and skip-semantics gradients") {
    Rng rng(9);
    ConditionalSummationT<double> cs;
    cs.output_dim = 1;
    cs.group_size = 3;
    cs.encoded = DTensor::from_data({1, 3}, {0.5, -1.0, 2.0});

    auto zero = cond_sum_forward(DTensor::zeros({1, 3}), cs);
    CHECK(zero.at(0) == 0.0);

    auto bits = DTensor::from_data({1, 3}, {1, 0, 1});
    auto out = cond_sum_forward(bits, cs);
    CHECK(out.at(0) == doctest::Approx(2.5));

    cs.encoded.set_requires_grad(true);
    DTape tape;
    {
        DTape::Scope scope(tape);
        tape.backward(sum(cond_sum_forward(bits, cs)));
    }
    CHECK(cs.encoded.grad()[0] == doctest::Approx(1.0));
    CHECK(cs.encoded.grad()[1] == doctest::Approx(0.0));  // gated off by its bit
    CHECK(cs.encoded.grad()[2] == doctest::Approx(1.0));

    CHECK_THROWS_AS(cond_sum_forward(DTensor::zeros({1, 4}), cs), std::invalid_argument);
}

TEST_CASE("quantize_encodings: scale, round-to-nearest-even, error bound") {
    ConditionalSummationT<double> cs;
    cs.output_dim = 1;
    cs.group_size = 3;
    cs.encoded = DTensor::from_data({1, 3}, {0.5, -1.0, 2.0});
    auto q = quantize_encodings(cs);
    REQUIRE(q.quant.has_value());
    CHECK(q.quant->scale == doctest::Approx(2.0 / 127.0));
    CHECK(int(q.quant->levels[0]) == 32);  // 31.75 rounds up
    CHECK(int(q.quant->levels[1]) == -64);
    CHECK(int(q.quant->levels[2]) == 127);

    ConditionalSummationT<double> zeros;
    zeros.output_dim = 2;
    zeros.group_size = 1;
    zeros.encoded = DTensor::zeros({2, 1});
    auto qz = quantize_encodings(zeros);
    CHECK(qz.quant->scale == 1.0);
    CHECK(int(qz.quant->levels[0]) == 0);

    Rng rng(55);
    for (int rep = 0; rep < 50; ++rep) {
        ConditionalSummationT<double> r;
        r.output_dim = 4;
        r.group_size = 2;
        std::vector<double> e(8);
        for (auto& v : e) v = rng.normal(0.0, 1.5);
        r.encoded = DTensor::from_data({4, 2}, e);
        auto rq = quantize_encodings(r);
        for (std::size_t i = 0; i < 8; ++i)
            CHECK(std::abs(rq.quant->dequant[i] - e[i]) <= rq.quant->scale / 2 + 1e-12);
    }
}

namespace {

WeightlessBlockT<double> make_block(const WeightlessBlockConfig& cfg, std::uint64_t seed,
                                    double calib_spread = 1.0) {
    Rng rng(seed);
    WeightlessBlockT<double> block(cfg, rng);
    std::vector<double> calib(64 * cfg.num_features);
    for (auto& v : calib) v = rng.normal(0.0, calib_spread);
    block.fit_encoder(DTensor::from_data({64, cfg.num_features}, std::move(calib)));
    return block;
}

}  // namespace

TEST_CASE("block forward shape contract and zero-encoding identity") {
    WeightlessBlockConfig cfg;
    cfg.num_features = 6;
    cfg.bits_per_feature = 4;
    cfg.layer_widths = {10, 8};
    cfg.fan_in = 3;
    cfg.output_dim = 4;
    cfg.group_size = 2;
    auto block = make_block(cfg, 17);

    Rng rng(18);
    std::vector<double> x(5 * 6);
    for (auto& v : x) v = rng.normal(0.0, 1.0);
    auto out = block.forward(DTensor::from_data({5, 6}, x), TrainingMode::HardEfd);
    CHECK(out.shape() == Shape{5, 4});

    // zero encoded values -> zero output regardless of input
    std::fill(block.summation().encoded.data().begin(), block.summation().encoded.data().end(), 0.0);
    auto zero = block.forward(DTensor::from_data({5, 6}, x), TrainingMode::HardEfd);
    for (std::size_t i = 0; i < zero.size(); ++i) CHECK(zero.at(i) == 0.0);
}

TEST_CASE("unfitted encoder is rejected") {
    WeightlessBlockConfig cfg;
    cfg.num_features = 4;
    cfg.bits_per_feature = 2;
    cfg.layer_widths = {6, 4};
    cfg.fan_in = 2;
    cfg.output_dim = 4;
    cfg.group_size = 1;
    Rng rng(3);
    WeightlessBlockT<double> block(cfg, rng);
    CHECK_THROWS_WITH_AS(block.forward(DTensor::zeros({1, 4}), TrainingMode::HardEfd),
                         doctest::Contains("not fitted"), std::runtime_error);
}

TEST_CASE("hard and thresholded-soft layers agree when soft values sit at vertices") {
    WeightlessBlockConfig cfg;
    cfg.num_features = 5;
    cfg.bits_per_feature = 3;
    cfg.layer_widths = {12, 6};
    cfg.fan_in = 4;
    cfg.output_dim = 6;
    cfg.group_size = 1;
    auto block = make_block(cfg, 23);
    // keep LUT entries away from zero so sigmoid(theta/tau) is not near 1/2
    Rng rng(24);
    for (auto& layer : block.layers())
        for (auto& v : layer.theta.data())
            v = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.15, 1.0);

    // inputs far from every threshold saturate the soft encoding to exact 0/1
    std::vector<double> x(3 * 5);
    Rng rng2(25);
    for (auto& v : x) v = (rng2.below(2) ? 40.0 : -40.0) + rng2.normal(0.0, 0.5);
    auto xs = DTensor::from_data({3, 5}, x);

    auto soft_bits = thermometer_encode_soft(xs, block.encoder());
    auto hard_bits = thermometer_encode_hard(xs, block.encoder());
    std::vector<double> enc_vertex(soft_bits.size());
    for (std::size_t i = 0; i < soft_bits.size(); ++i) {
        enc_vertex[i] = soft_bits.at(i) > 0.5 ? 1.0 : 0.0;
        CHECK(enc_vertex[i] == hard_bits.at(i));
    }

    auto soft_cur = DTensor::from_data(soft_bits.shape(), std::move(enc_vertex));
    auto hard_cur = hard_bits;
    for (auto& layer : block.layers()) {
        auto soft_out = lut_forward_soft(soft_cur, layer, cfg.temperature);
        hard_cur = lut_forward_hard(hard_cur, layer);
        // threshold the soft activations at 1/2 before the next layer
        std::vector<double> thresholded(soft_out.size());
        for (std::size_t i = 0; i < soft_out.size(); ++i) {
            thresholded[i] = soft_out.at(i) > 0.5 ? 1.0 : 0.0;
            CHECK(thresholded[i] == hard_cur.at(i));
        }
        soft_cur = DTensor::from_data(soft_out.shape(), std::move(thresholded));
    }
}

TEST_CASE("soft-mode end-to-end gradient of a two-layer block matches finite differences") {
    WeightlessBlockConfig cfg;
    cfg.num_features = 4;
    cfg.bits_per_feature = 2;
    cfg.layer_widths = {6, 4};
    cfg.fan_in = 2;
    cfg.output_dim = 2;
    cfg.group_size = 2;
    auto block = make_block(cfg, 41);

    Rng rng(42);
    std::vector<double> x(3 * 4);
    for (auto& v : x) v = rng.normal(0.0, 1.0);
    std::vector<double> w(3 * 2);
    for (auto& v : w) v = rng.normal(0.0, 1.0);

    auto fn = [&block](std::vector<DTensor>& in) {
        block.layers()[0].theta = in[1];
        block.layers()[1].theta = in[2];
        block.summation().encoded = in[3];
        return sum(mul(block.forward(in[0], TrainingMode::Soft), in[4]));
    };
    auto r = gradcheck::compare(fn, {DTensor::from_data({3, 4}, x), block.layers()[0].theta,
                                     block.layers()[1].theta, block.summation().encoded,
                                     DTensor::from_data({3, 2}, w)});
    CHECK(r.checked > 0);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("bit-exact inference equals the hard training forward on 10^4 rows") {
    WeightlessBlockConfig cfg;
    cfg.num_features = 8;
    cfg.bits_per_feature = 4;
    cfg.layer_widths = {24, 12};
    cfg.fan_in = 5;
    cfg.output_dim = 12;
    cfg.group_size = 1;
    auto block = make_block(cfg, 51);

    Rng rng(52);
    std::size_t mismatches = 0;
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<double> x(8);
        for (auto& v : x) v = rng.normal(0.0, 1.5);
        auto train_out = block.forward(DTensor::from_data({1, 8}, x), TrainingMode::HardEfd);
        auto infer_out = block.infer_row(x);
        for (std::size_t d = 0; d < 12; ++d)
            if (train_out.at(d) != infer_out[d]) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("quantized block stays within the summed rounding bound of the float path") {
    WeightlessBlockConfig cfg;
    cfg.num_features = 6;
    cfg.bits_per_feature = 3;
    cfg.layer_widths = {16, 8};
    cfg.fan_in = 4;
    cfg.output_dim = 4;
    cfg.group_size = 2;
    auto block = make_block(cfg, 61);

    // snap thresholds first so the float and int8 paths see identical bits;
    // the bound isolates the encoded-value rounding error
    block.encoder().snap_to_fixed_point();
    auto qblock = block;
    qblock.summation() = quantize_encodings(qblock.summation());

    const double s = double(qblock.summation().quant->scale);
    const double bound = double(cfg.group_size) * s / 2 + 1e-9;

    Rng rng3(62);
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<double> x(6);
        for (auto& v : x) v = rng3.normal(0.0, 1.0);
        auto fp = block.infer_row(x);
        auto q = qblock.infer_row(x);
        for (std::size_t d = 0; d < 4; ++d) CHECK(std::abs(fp[d] - q[d]) <= bound);
    }
}

TEST_CASE("seeded mapping covers every source bit") {
    Rng rng(71);
    for (auto [l_count, fan_in, width] : {std::tuple<std::size_t, std::size_t, std::size_t>{40, 6, 48},
                                          {16, 3, 100},
                                          {256, 6, 512},
                                          {5, 2, 4}}) {
        auto layer = LutLayerT<double>::seeded(l_count, fan_in, width, rng);
        layer.validate();
        std::vector<std::size_t> uses(width, 0);
        for (auto m : layer.mapping) ++uses[std::size_t(m)];
        const std::size_t floor_uses = (l_count * fan_in) / width;
        for (std::size_t b = 0; b < width; ++b) CHECK(uses[b] >= floor_uses);
    }
}
