#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "topodetect/model_io.hpp"
#include "topodetect/network.hpp"
#include "topodetect/rng.hpp"

using namespace topodetect;

namespace {

NetworkModel tiny_mlp(std::uint64_t seed, std::size_t h = 2, std::size_t w = 3,
                      std::size_t hidden = 5, std::size_t classes = 4) {
    Rng rng(seed);
    return make_network(h, w,
                        {LayerSpec::fully_connected(h * w, hidden, Activation::ReLU),
                         LayerSpec::fully_connected(hidden, classes, Activation::None)},
                        rng);
}

} // namespace

TEST(Softmax, ConstantLogitsGiveUniformProbabilities) {
    const std::vector<double> probs = softmax(std::vector<double>(10, 0.0));
    for (double p : probs) EXPECT_DOUBLE_EQ(p, 0.1);
}

TEST(Forward, ProbabilitiesSumToOne) {
    Rng rng(11);
    const NetworkModel model = tiny_mlp(3);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor input({2, 3});
        for (double& v : input.data) v = rng.uniform();
        const ForwardTrace trace = forward(model, input);
        double sum = 0.0;
        for (double p : trace.probabilities) {
            sum += p;
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        EXPECT_EQ(trace.predicted_class,
                  static_cast<std::size_t>(
                      std::max_element(trace.probabilities.begin(),
                                       trace.probabilities.end()) -
                      trace.probabilities.begin()));
    }
}

TEST(Forward, MatchesDenseMatmulOracle) {
    // Reference 2-layer model with fixed seed against an independently coded
    // matrix multiply.
    Rng rng(42);
    const std::size_t in = 6, hidden = 5, classes = 4;
    const NetworkModel model = tiny_mlp(42, 2, 3, hidden, classes);
    Tensor input({2, 3});
    for (double& v : input.data) v = rng.uniform();

    const Layer& l0 = model.layers[0];
    const Layer& l1 = model.layers[1];
    std::vector<double> h(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        double acc = l0.bias[j];
        for (std::size_t i = 0; i < in; ++i) acc += input.data[i] * l0.weights.data[i * hidden + j];
        h[j] = std::max(0.0, acc);
    }
    std::vector<double> logits(classes);
    for (std::size_t j = 0; j < classes; ++j) {
        double acc = l1.bias[j];
        for (std::size_t i = 0; i < hidden; ++i) acc += h[i] * l1.weights.data[i * classes + j];
        logits[j] = acc;
    }

    const ForwardTrace trace = forward(model, input);
    ASSERT_EQ(trace.logits.size(), classes);
    for (std::size_t j = 0; j < classes; ++j) EXPECT_NEAR(trace.logits[j], logits[j], 1e-12);
}

TEST(Forward, RejectsShapeMismatch) {
    const NetworkModel model = tiny_mlp(1);
    EXPECT_THROW(forward(model, Tensor({3, 3})), std::invalid_argument);
}

TEST(Forward, PureFunctionOfModelAndInput) {
    const NetworkModel model = tiny_mlp(5);
    Rng rng(6);
    Tensor input({2, 3});
    for (double& v : input.data) v = rng.uniform();
    const ForwardTrace a = forward(model, input);
    const ForwardTrace b = forward(model, input);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.probabilities, b.probabilities);
    for (std::size_t l = 0; l < a.post_activations.size(); ++l)
        EXPECT_EQ(a.post_activations[l].data, b.post_activations[l].data);
}

TEST(Forward, ReluPostActivationsNonNegative) {
    const NetworkModel model = tiny_mlp(7);
    Rng rng(8);
    Tensor input({2, 3});
    for (double& v : input.data) v = rng.uniform();
    const ForwardTrace trace = forward(model, input);
    for (double v : trace.post_activations[0].data) EXPECT_GE(v, 0.0);
}

TEST(Gradient, ConstantLossHasZeroGradient) {
    // A loss that ignores the input: attack objective fully saturated.
    const NetworkModel model = tiny_mlp(9);
    Tensor input({2, 3});
    for (double& v : input.data) v = 0.5;
    const ForwardTrace trace = forward(model, input);
    // Targeting the already-predicted class saturates the hinge at -kappa:
    // the loss is locally constant and the gradient must be exactly zero.
    const Tensor grad =
        input_gradient(model, input, AttackObjectiveLoss{trace.predicted_class, 0.0});
    for (double g : grad.data) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(Gradient, CrossEntropyLogitGradientIsProbMinusOneHot) {
    const NetworkModel model = tiny_mlp(10);
    Rng rng(12);
    Tensor input({2, 3});
    for (double& v : input.data) v = rng.uniform();
    const ForwardTrace trace = forward(model, input);
    const std::vector<double> grad = logit_gradient(trace, CrossEntropyLoss{2});
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double expected = trace.probabilities[i] - (i == 2 ? 1.0 : 0.0);
        EXPECT_NEAR(grad[i], expected, 1e-12);
    }
}

TEST(Gradient, MatchesCentralFiniteDifferences) {
    Rng rng(2024);
    for (int trial = 0; trial < 8; ++trial) {
        const oracles::SmallModelCase c = oracles::random_small_model(rng);
        const std::size_t target = (trial % c.model.class_count);
        const LossDescriptor losses[2] = {CrossEntropyLoss{target},
                                          AttackObjectiveLoss{target, 0.0}};
        for (const LossDescriptor& loss : losses) {
            const Tensor analytic = input_gradient(c.model, c.input, loss);
            const Tensor numeric = oracles::finite_difference_gradient(
                c.input,
                [&](const Tensor& x) { return loss_value(forward(c.model, x), loss); });
            for (std::size_t i = 0; i < analytic.size(); ++i) {
                const double denom = std::max({std::fabs(numeric.data[i]),
                                               std::fabs(analytic.data[i]), 1e-6});
                EXPECT_LT(std::fabs(analytic.data[i] - numeric.data[i]) / denom, 1e-4)
                    << "coordinate " << i;
            }
        }
    }
}

TEST(Train, ZeroEpochsLeavesWeightsUnchanged) {
    NetworkModel model = tiny_mlp(20);
    const std::vector<double> before = model.layers[0].weights.data;
    std::vector<Tensor> images(4, Tensor({2, 3}));
    std::vector<std::size_t> labels = {0, 1, 2, 3};
    TrainConfig cfg;
    cfg.epochs = 0;
    train(model, images, labels, cfg);
    EXPECT_EQ(model.layers[0].weights.data, before);
}

TEST(Train, RejectsEmptyDatasetAndBadLabels) {
    NetworkModel model = tiny_mlp(21);
    TrainConfig cfg;
    EXPECT_THROW(train(model, {}, {}, cfg), std::invalid_argument);
    std::vector<Tensor> images(1, Tensor({2, 3}));
    EXPECT_THROW(train(model, images, {99}, cfg), std::invalid_argument);
}

TEST(Train, SeparableToyProblemReaches99Percent) {
    // Two linearly separable clusters in a 1x2 "image".
    Rng rng(31);
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
    for (int i = 0; i < 80; ++i) {
        Tensor x({1, 2});
        const bool positive = i % 2 == 0;
        x.data[0] = rng.uniform(0.0, 0.4) + (positive ? 0.5 : 0.0);
        x.data[1] = rng.uniform(0.0, 0.4) + (positive ? 0.0 : 0.5);
        images.push_back(x);
        labels.push_back(positive ? 1 : 0);
    }
    Rng mrng(32);
    NetworkModel model =
        make_network(1, 2,
                     {LayerSpec::fully_connected(2, 8, Activation::ReLU),
                      LayerSpec::fully_connected(8, 2, Activation::None)},
                     mrng);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.5;
    cfg.seed = 33;
    const TrainReport report = train(model, images, labels, cfg);
    EXPECT_GE(report.final_train_accuracy, 0.99);
}

TEST(Train, DeterministicGivenSeed) {
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
    Rng rng(41);
    for (int i = 0; i < 12; ++i) {
        Tensor x({2, 3});
        for (double& v : x.data) v = rng.uniform();
        images.push_back(x);
        labels.push_back(i % 4);
    }
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 77;
    NetworkModel a = tiny_mlp(50);
    NetworkModel b = tiny_mlp(50);
    train(a, images, labels, cfg);
    train(b, images, labels, cfg);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        EXPECT_EQ(a.layers[l].weights.data, b.layers[l].weights.data);
}

TEST(ModelIo, RoundTripIsByteIdentical) {
    const NetworkModel model = tiny_mlp(60);
    const std::string path = testing::TempDir() + "model_roundtrip.tdnm";
    save_model(model, path);
    const NetworkModel loaded = load_model(path);
    ASSERT_EQ(loaded.layers.size(), model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        EXPECT_EQ(loaded.layers[l].weights.data, model.layers[l].weights.data);
        EXPECT_EQ(loaded.layers[l].bias.data, model.layers[l].bias.data);
    }
    EXPECT_EQ(loaded.neuron_count, model.neuron_count);
    std::remove(path.c_str());
}

TEST(ModelIo, TruncatedFileIsCorrupt) {
    const NetworkModel model = tiny_mlp(61);
    const std::string path = testing::TempDir() + "model_truncated.tdnm";
    save_model(model, path);
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    bytes.resize(bytes.size() / 2);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    EXPECT_THROW(load_model(path), ModelCorruptError);
    std::remove(path.c_str());
}

TEST(ModelIo, FlippedMagicIsVersionError) {
    const NetworkModel model = tiny_mlp(62);
    const std::string path = testing::TempDir() + "model_magic.tdnm";
    save_model(model, path);
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.put('X');
    f.close();
    EXPECT_THROW(load_model(path), ModelVersionError);
    std::remove(path.c_str());
}

TEST(ModelIo, UnknownVersionRefused) {
    const NetworkModel model = tiny_mlp(63);
    const std::string path = testing::TempDir() + "model_version.tdnm";
    save_model(model, path);
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    f.put(static_cast<char>(0xEE)); // bump version field
    f.close();
    EXPECT_THROW(load_model(path), ModelVersionError);
    std::remove(path.c_str());
}
