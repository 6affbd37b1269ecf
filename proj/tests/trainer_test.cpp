#include <cmath>
#include <filesystem>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "regemb/trainer.hpp"
#include "synthetic.hpp"

using namespace regemb;
namespace fs = std::filesystem;

namespace {

ModelSpec small_spec(const synthetic::Corpus& corpus, Method method = Method::Are,
                     int h = 8) {
  ModelSpec spec;
  spec.method = method;
  spec.meta = MetaNetKind::Cnn;
  spec.h = h;
  spec.c = 1;
  spec.n = corpus.classes;
  spec.v = corpus.vocab.size();
  return spec;
}

std::vector<double> flatten_params(ModelParams& params) {
  std::vector<double> out;
  for (auto& [name, t] : named_parameters(params)) {
    out.insert(out.end(), t->values().begin(), t->values().end());
  }
  for (auto& [name, s] : named_bn_states(params)) {
    out.insert(out.end(), s->running_mean.begin(), s->running_mean.end());
    out.insert(out.end(), s->running_var.begin(), s->running_var.end());
  }
  return out;
}

}  // namespace

TEST(Adam, ZeroGradientIsFixedPoint) {
  Rng rng(1);
  Tensor theta({3}, {1.0, -2.0, 0.5}, true);
  std::vector<std::pair<std::string, Tensor*>> params = {{"theta", &theta}};
  TrainState state;
  state.slots.push_back({"theta", std::vector<double>(3, 0.0),
                         std::vector<double>(3, 0.0)});
  TrainConfig config;
  const std::vector<double> before = theta.values();
  for (int i = 0; i < 10; ++i) adam_step(params, state, config);
  EXPECT_EQ(theta.values(), before);
  EXPECT_EQ(state.step, 10u);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  Tensor theta({1}, {5.0}, true);
  theta.grad()[0] = 1.0;
  std::vector<std::pair<std::string, Tensor*>> params = {{"theta", &theta}};
  TrainState state;
  state.slots.push_back({"theta", {0.0}, {0.0}});
  TrainConfig config;
  config.learning_rate = 1e-4;
  adam_step(params, state, config);
  EXPECT_NEAR(5.0 - theta.data()[0], 1e-4, 1e-9);
}

TEST(Adam, QuadraticBowlConvergesAndMatchesReference) {
  Tensor theta({1}, {1.0}, true);
  std::vector<std::pair<std::string, Tensor*>> params = {{"theta", &theta}};
  TrainState state;
  state.slots.push_back({"theta", {0.0}, {0.0}});
  TrainConfig config;
  config.learning_rate = 0.1;

  oracle::AdamRef ref;
  double ref_theta = 1.0;
  for (int step = 0; step < 200; ++step) {
    const double grad = 2.0 * theta.data()[0];
    theta.grad()[0] = grad;
    adam_step(params, state, config);
    ref_theta -= ref.step(2.0 * ref_theta, 0.1);
    ASSERT_NEAR(theta.data()[0], ref_theta, 1e-12) << "step " << step;
  }
  EXPECT_LT(std::fabs(theta.data()[0]), 0.01);
}

TEST(Adam, NonFiniteGradientNamesTensor) {
  Tensor theta({2}, {1.0, 2.0}, true);
  theta.grad()[1] = std::nan("");
  std::vector<std::pair<std::string, Tensor*>> params = {{"fc.weight", &theta}};
  TrainState state;
  state.slots.push_back({"fc.weight", {0.0, 0.0}, {0.0, 0.0}});
  TrainConfig config;
  try {
    adam_step(params, state, config);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("fc.weight"), std::string::npos);
  }
}

TEST(Adam, UpdateDirectionInvariantToGradientScale) {
  TrainConfig config;
  config.learning_rate = 1e-3;
  std::vector<double> grads = {0.3, -1.7, 0.02, -0.4};
  std::vector<double> update1, update2;
  for (double factor : {1.0, 2.0}) {
    Tensor theta({4}, {1.0, 1.0, 1.0, 1.0}, true);
    auto& g = theta.grad();
    for (std::size_t i = 0; i < 4; ++i) g[i] = grads[i] * factor;
    std::vector<std::pair<std::string, Tensor*>> params = {{"t", &theta}};
    TrainState state;
    state.slots.push_back({"t", std::vector<double>(4, 0.0),
                           std::vector<double>(4, 0.0)});
    adam_step(params, state, config);
    auto& target = factor == 1.0 ? update1 : update2;
    for (std::size_t i = 0; i < 4; ++i) target.push_back(1.0 - theta.data()[i]);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(update1[i] > 0, update2[i] > 0);
    EXPECT_NEAR(update1[i], update2[i], 1e-6 * config.learning_rate);
  }
}

TEST(Train, DeterministicReplayProducesIdenticalLogsAndParams) {
  synthetic::Corpus corpus = synthetic::keyword_corpus(17, 8);
  ModelSpec spec = small_spec(corpus);

  auto run = [&]() {
    Rng rng(99);
    ModelParams params = init_model(spec, rng);
    TrainState state = init_train_state(params);
    TrainConfig config;
    config.batch_size = 4;
    config.learning_rate = 1e-3;
    config.epochs = 3;
    config.seed = 41;
    config.eval_every = 2;
    config.val_fraction = 0.25;
    TrainResult result = train(params, spec, corpus.train, config, state);
    return std::make_pair(result, flatten_params(params));
  };

  auto [result_a, params_a] = run();
  auto [result_b, params_b] = run();
  EXPECT_EQ(params_a, params_b);
  ASSERT_EQ(result_a.log.size(), result_b.log.size());
  for (std::size_t i = 0; i < result_a.log.size(); ++i) {
    EXPECT_EQ(result_a.log[i].step, result_b.log[i].step);
    EXPECT_EQ(result_a.log[i].epoch, result_b.log[i].epoch);
    EXPECT_EQ(result_a.log[i].train_loss, result_b.log[i].train_loss);  // bitwise
    EXPECT_EQ(result_a.log[i].val_acc, result_b.log[i].val_acc);
  }
}

TEST(Train, FixedBatchLossIsMonotoneWithinTolerance) {
  synthetic::Corpus corpus = synthetic::keyword_corpus(5, 8);  // 16 docs
  ModelSpec spec = small_spec(corpus);
  Rng rng(7);
  ModelParams params = init_model(spec, rng);
  TrainState state = init_train_state(params);
  TrainConfig config;
  config.batch_size = 16;  // whole corpus in one fixed batch
  config.learning_rate = 1e-3;
  config.epochs = 100;
  config.seed = 3;
  config.eval_every = 1;  // log every step
  config.val_fraction = 0.0;
  TrainResult result = train(params, spec, corpus.train, config, state);
  ASSERT_EQ(result.log.size(), 100u);
  int increases = 0;
  for (std::size_t i = 1; i < result.log.size(); ++i) {
    ASSERT_TRUE(std::isfinite(result.log[i].train_loss));
    if (result.log[i].train_loss > result.log[i - 1].train_loss + 1e-12) ++increases;
  }
  EXPECT_LE(increases, 5);
  EXPECT_LT(result.log.back().train_loss, result.log.front().train_loss);
}

TEST(Train, CheckpointResumeEqualsUninterruptedRun) {
  synthetic::Corpus corpus = synthetic::keyword_corpus(23, 10);
  ModelSpec spec = small_spec(corpus);
  TrainConfig config;
  config.batch_size = 4;
  config.learning_rate = 1e-3;
  config.epochs = 50;
  config.seed = 77;
  config.eval_every = 0;
  config.val_fraction = 0.2;

  // uninterrupted: 10 steps
  Rng rng_a(123);
  ModelParams params_a = init_model(spec, rng_a);
  TrainState state_a = init_train_state(params_a);
  TrainConfig config_a = config;
  config_a.max_steps = 10;
  train(params_a, spec, corpus.train, config_a, state_a);

  // 5 steps, serialize, restore, 5 more
  Rng rng_b(123);
  ModelParams params_b = init_model(spec, rng_b);
  TrainState state_b = init_train_state(params_b);
  TrainConfig config_b = config;
  config_b.max_steps = 5;
  train(params_b, spec, corpus.train, config_b, state_b);

  const fs::path path = fs::temp_directory_path() / "regemb_resume.ckpt";
  write_checkpoint_file(path.string(), pack_training(spec, params_b, state_b, nullptr));
  CheckpointData data = read_checkpoint_file(path.string());
  ModelParams params_c = unpack_model(data);
  TrainState state_c = unpack_training(data, params_c);
  EXPECT_EQ(state_c.step, 5u);
  TrainConfig config_c = config;
  config_c.max_steps = 10;
  train(params_c, spec, corpus.train, config_c, state_c);
  fs::remove(path);

  EXPECT_EQ(flatten_params(params_a), flatten_params(params_c));
  ASSERT_EQ(state_a.slots.size(), state_c.slots.size());
  for (std::size_t i = 0; i < state_a.slots.size(); ++i) {
    EXPECT_EQ(state_a.slots[i].m, state_c.slots[i].m);
    EXPECT_EQ(state_a.slots[i].v, state_c.slots[i].v);
  }
}

TEST(Train, EmptyCorpusAndBadLabelsThrow) {
  synthetic::Corpus corpus = synthetic::keyword_corpus(3, 4);
  ModelSpec spec = small_spec(corpus);
  Rng rng(1);
  ModelParams params = init_model(spec, rng);
  TrainState state = init_train_state(params);
  TrainConfig config;
  EXPECT_THROW(train(params, spec, {}, config, state), EmptyCorpusError);

  std::vector<EncodedDocument> bad = corpus.train;
  bad[0].label = 9;
  EXPECT_THROW(train(params, spec, bad, config, state), LabelError);
}

TEST(Evaluate, MajorityPredictorScoresSplitFraction) {
  synthetic::Corpus corpus = synthetic::keyword_corpus(31, 10);  // 20 docs
  ModelSpec spec = small_spec(corpus);
  Rng rng(2);
  ModelParams params = init_model(spec, rng);
  // rig the head to always pick class 0
  for (auto& v : params.fc_weight.values()) v = 0.0;
  params.fc_bias.values() = {5.0, 0.0};

  std::vector<EncodedDocument> docs;
  for (int i = 0; i < 20; ++i) {
    EncodedDocument d = corpus.train[static_cast<std::size_t>(i)];
    d.label = i < 18 ? 0 : 1;  // 90/10 split
    docs.push_back(d);
  }
  EvalResult result = evaluate(docs, params, spec);
  EXPECT_DOUBLE_EQ(result.accuracy, 0.9);
  EXPECT_EQ(result.confusion[0][0], 18u);
  EXPECT_EQ(result.confusion[1][0], 2u);
}

TEST(Evaluate, OracleLabelsScorePerfectly) {
  synthetic::Corpus corpus = synthetic::keyword_corpus(37, 6);
  ModelSpec spec = small_spec(corpus);
  Rng rng(3);
  ModelParams params = init_model(spec, rng);
  std::vector<EncodedDocument> docs = corpus.train;
  for (auto& doc : docs) doc.label = predict(doc, params, spec).label;
  EXPECT_DOUBLE_EQ(evaluate(docs, params, spec).accuracy, 1.0);
}

TEST(Evaluate, InvariantUnderDocumentOrder) {
  synthetic::Corpus corpus = synthetic::keyword_corpus(41, 8);
  ModelSpec spec = small_spec(corpus);
  Rng rng(4);
  ModelParams params = init_model(spec, rng);
  std::vector<EncodedDocument> docs = corpus.train;
  const double base = evaluate(docs, params, spec).accuracy;
  std::reverse(docs.begin(), docs.end());
  EXPECT_DOUBLE_EQ(evaluate(docs, params, spec).accuracy, base);
  EXPECT_THROW(evaluate({}, params, spec), EmptyCorpusError);
}

TEST(MetricLog, JsonRecordsCarryAllFields) {
  MetricRecord rec{12, 3, 0.5, 0.75, 1234};
  const std::string line = metric_record_json(rec);
  EXPECT_NE(line.find("\"step\":12"), std::string::npos);
  EXPECT_NE(line.find("\"epoch\":3"), std::string::npos);
  EXPECT_NE(line.find("\"train_loss\":0.5"), std::string::npos);
  EXPECT_NE(line.find("\"val_acc\":0.75"), std::string::npos);
  EXPECT_NE(line.find("\"wall_ms\""), std::string::npos);
}
