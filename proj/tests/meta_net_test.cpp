#include <cmath>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "regemb/analysis.hpp"
#include "regemb/meta_net.hpp"

using namespace regemb;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  std::vector<double> data(shape_size(shape));
  for (auto& x : data) x = rng.uniform(-scale, scale);
  return Tensor(std::move(shape), std::move(data));
}

FilterBank single_bank(MetaNetParams& meta, const Tensor& e, bool training) {
  return meta_filter_banks(meta, {e}, training, nullptr)[0];
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(AcuCnn, ZeroWeightsGiveConstantBeta) {
  Rng rng(1);
  const int h = 3, c = 1;
  MetaNetParams meta = init_meta_net(MetaNetKind::Cnn, h, c, 0, rng);
  for (auto& v : meta.conv->weight.values()) v = 0.0;
  for (auto& v : meta.conv->bias.values()) v = 0.0;
  for (std::size_t i = 0; i < meta.conv->beta.size(); ++i) {
    meta.conv->beta.values()[i] = 0.1 * static_cast<double>(i) - 0.3;
  }
  Tensor e = random_tensor({3, 5}, rng);
  for (bool training : {true, false}) {
    FilterBank bank = single_bank(meta, e, training);
    const std::size_t r = bank.window();
    for (std::size_t j = 0; j < bank.channels(); ++j) {
      for (std::size_t t = 0; t < r; ++t) {
        for (std::size_t i = 0; i < bank.length(); ++i) {
          EXPECT_NEAR(bank.k.at({j, t, i}),
                      meta.conv->beta.data()[j * r + t], 1e-12);
        }
      }
    }
  }
}

TEST(AcuCnn, FullScaleOutputShape) {
  Rng rng(2);
  const int h = 256, c = 4;
  MetaNetParams meta = init_meta_net(MetaNetKind::Cnn, h, c, 0, rng);
  Tensor e = random_tensor({256, 37}, rng, 0.1);
  FilterBank bank = single_bank(meta, e, true);
  EXPECT_EQ(bank.channels(), 256u);
  EXPECT_EQ(bank.window(), 9u);
  EXPECT_EQ(bank.length(), 37u);
}

TEST(AcuCnn, FullScaleParameterCount) {
  Rng rng(3);
  MetaNetParams meta = init_meta_net(MetaNetKind::Cnn, 256, 4, 0, rng);
  long long live = 0;
  for (auto& [name, t] : meta_named_parameters(meta)) {
    live += static_cast<long long>(t->size());
  }
  EXPECT_EQ(live, 5315328);

  ModelSpec spec;
  spec.method = Method::Are;
  spec.meta = MetaNetKind::Cnn;
  spec.h = 256;
  spec.c = 4;
  spec.n = 4;
  spec.v = 100;
  EXPECT_EQ(count_params(spec).context_unit_only(), 5315328);
}

TEST(AcuSmallCnn, WindowColumnsIdenticalPerPosition) {
  Rng rng(5);
  const int h = 4, c = 2;
  MetaNetParams meta = init_meta_net(MetaNetKind::SmallCnn, h, c, 0, rng);
  Tensor e = random_tensor({4, 6}, rng);
  FilterBank bank = single_bank(meta, e, true);
  EXPECT_EQ(bank.channels(), 4u);
  EXPECT_EQ(bank.window(), 5u);
  EXPECT_EQ(bank.length(), 6u);
  for (std::size_t j = 0; j < bank.channels(); ++j) {
    for (std::size_t i = 0; i < bank.length(); ++i) {
      const double first = bank.k.at({j, 0, i});
      for (std::size_t t = 1; t < bank.window(); ++t) {
        EXPECT_EQ(bank.k.at({j, t, i}), first);
      }
    }
  }
}

TEST(AcuSmallCnn, StrictlyFewerParametersThanCnn) {
  for (int h : {1, 4, 256}) {
    for (int c : {1, 4}) {
      ModelSpec cnn{Method::Are, MetaNetKind::Cnn, h, c, 2, 10, 32};
      ModelSpec small{Method::Are, MetaNetKind::SmallCnn, h, c, 2, 10, 32};
      EXPECT_LT(count_params(small).context_unit_only(),
                count_params(cnn).context_unit_only())
          << "h=" << h << " c=" << c;
    }
  }
}

TEST(AcuFactoredCnn, RankOneWithUnitFactorIsConstantPerPosition) {
  Rng rng(7);
  const int h = 3, c = 1;
  MetaNetParams meta = init_meta_net(MetaNetKind::FactoredCnn, h, c, 1, rng);
  for (auto& v : meta.factor.values()) v = 1.0;
  Tensor e = random_tensor({3, 4}, rng);
  FilterBank bank = single_bank(meta, e, true);
  for (std::size_t i = 0; i < bank.length(); ++i) {
    const double v0 = bank.k.at({0, 0, i});
    for (std::size_t j = 0; j < bank.channels(); ++j) {
      for (std::size_t t = 0; t < bank.window(); ++t) {
        EXPECT_NEAR(bank.k.at({j, t, i}), v0, 1e-12);
      }
    }
  }
}

TEST(AcuFactoredCnn, FlattenedFiltersLieInRankUSubspace) {
  Rng rng(11);
  const int h = 4, c = 1, u = 2;
  const std::size_t hr = 12;
  MetaNetParams meta = init_meta_net(MetaNetKind::FactoredCnn, h, c, u, rng);
  Tensor e = random_tensor({4, 9}, rng);
  FilterBank bank = single_bank(meta, e, true);

  // orthonormal basis of the factor's row space via Gram-Schmidt
  std::vector<std::vector<double>> basis;
  for (int row = 0; row < u; ++row) {
    std::vector<double> b(hr);
    for (std::size_t k = 0; k < hr; ++k) b[k] = meta.factor.at({(std::size_t)row, k});
    for (const auto& q : basis) {
      double dot = 0.0;
      for (std::size_t k = 0; k < hr; ++k) dot += b[k] * q[k];
      for (std::size_t k = 0; k < hr; ++k) b[k] -= dot * q[k];
    }
    double norm = 0.0;
    for (double x : b) norm += x * x;
    norm = std::sqrt(norm);
    ASSERT_GT(norm, 1e-12);
    for (auto& x : b) x /= norm;
    basis.push_back(std::move(b));
  }
  // every per-position filter must project fully onto the basis
  for (std::size_t i = 0; i < bank.length(); ++i) {
    std::vector<double> col(hr);
    for (std::size_t j = 0; j < bank.channels(); ++j) {
      for (std::size_t t = 0; t < bank.window(); ++t) {
        col[j * bank.window() + t] = bank.k.at({j, t, i});
      }
    }
    std::vector<double> residual = col;
    for (const auto& q : basis) {
      double dot = 0.0;
      for (std::size_t k = 0; k < hr; ++k) dot += residual[k] * q[k];
      for (std::size_t k = 0; k < hr; ++k) residual[k] -= dot * q[k];
    }
    double res_norm = 0.0;
    for (double x : residual) res_norm += x * x;
    EXPECT_LT(std::sqrt(res_norm), 1e-9);
  }
}

TEST(AcuFactoredCnn, RankBoundValidation) {
  Rng rng(13);
  EXPECT_THROW(init_meta_net(MetaNetKind::FactoredCnn, 2, 1, 6, rng), ConfigError);
  EXPECT_THROW(init_meta_net(MetaNetKind::FactoredCnn, 2, 1, 0, rng), ConfigError);
  EXPECT_NO_THROW(init_meta_net(MetaNetKind::FactoredCnn, 2, 1, 5, rng));
}

TEST(AcuRecurrent, ZeroInputFirstHiddenStateFromBiasesOnly) {
  Rng rng(17);
  const int h = 2, c = 1;
  const std::size_t hidden = 6;
  MetaNetParams meta = init_meta_net(MetaNetKind::Lstm, h, c, 0, rng);
  for (std::size_t g = 0; g < 4; ++g) {
    for (auto& v : meta.rec->gates[g].b.values()) v = rng.uniform(-1.0, 1.0);
  }
  Tensor e = Tensor::zeros({2, 3});
  FilterBank bank = single_bank(meta, e, false);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double bi = meta.rec->gates[0].b.data()[k];
    const double bg = meta.rec->gates[2].b.data()[k];
    const double bo = meta.rec->gates[3].b.data()[k];
    const double cell = sigmoid_ref(bi) * std::tanh(bg);
    const double expect = sigmoid_ref(bo) * std::tanh(cell);
    const std::size_t j = k / bank.window();
    const std::size_t t = k % bank.window();
    EXPECT_NEAR(bank.k.at({j, t, 0}), expect, 1e-12);
  }
}

TEST(AcuRecurrent, CausalityIsExact) {
  Rng rng(19);
  const int h = 3, c = 1;
  for (MetaNetKind kind : {MetaNetKind::Lstm, MetaNetKind::Gru}) {
    MetaNetParams meta = init_meta_net(kind, h, c, 0, rng);
    Tensor e = random_tensor({3, 6}, rng);
    FilterBank base = single_bank(meta, e, false);

    Tensor edited = Tensor(e.shape(), e.values());
    const std::size_t changed_pos = 4;
    for (std::size_t j = 0; j < 3; ++j) {
      edited.values()[j * 6 + changed_pos] += 1.5;
    }
    FilterBank after = single_bank(meta, edited, false);
    // positions before the edit are bitwise identical, the edited one is not
    for (std::size_t i = 0; i < changed_pos; ++i) {
      for (std::size_t j = 0; j < base.channels(); ++j) {
        for (std::size_t t = 0; t < base.window(); ++t) {
          EXPECT_EQ(base.k.at({j, t, i}), after.k.at({j, t, i}));
        }
      }
    }
    bool differs = false;
    for (std::size_t j = 0; j < base.channels() && !differs; ++j) {
      for (std::size_t t = 0; t < base.window() && !differs; ++t) {
        differs = base.k.at({j, t, changed_pos}) != after.k.at({j, t, changed_pos});
      }
    }
    EXPECT_TRUE(differs);
  }
}

TEST(AcuEnsemble, ZeroRecurrentBranchAnnihilates) {
  Rng rng(23);
  const int h = 2, c = 1;
  MetaNetParams meta = init_meta_net(MetaNetKind::EnsembleCnnLstm, h, c, 0, rng);
  // zero LSTM parameters give identically zero hidden states
  for (auto& gate : meta.rec->gates) {
    for (auto& v : gate.wx.values()) v = 0.0;
    for (auto& v : gate.wh.values()) v = 0.0;
    for (auto& v : gate.b.values()) v = 0.0;
  }
  Tensor e = random_tensor({2, 4}, rng);
  FilterBank bank = single_bank(meta, e, true);
  for (double v : bank.k.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(AcuEnsemble, AllOnesConvBranchPassesRecurrentBranchThrough) {
  Rng rng(27);
  const int h = 2, c = 1;
  MetaNetParams meta = init_meta_net(MetaNetKind::EnsembleCnnLstm, h, c, 0, rng);
  // gamma = 0, beta = 1 pins the normalized conv branch to exactly one
  for (auto& v : meta.conv->gamma.values()) v = 0.0;
  for (auto& v : meta.conv->beta.values()) v = 1.0;
  Tensor e = random_tensor({2, 4}, rng);
  FilterBank ensemble = single_bank(meta, e, true);

  MetaNetParams lstm_only = init_meta_net(MetaNetKind::Lstm, h, c, 0, rng);
  for (std::size_t g = 0; g < 4; ++g) {
    lstm_only.rec->gates[g].wx.values() = meta.rec->gates[g].wx.values();
    lstm_only.rec->gates[g].wh.values() = meta.rec->gates[g].wh.values();
    lstm_only.rec->gates[g].b.values() = meta.rec->gates[g].b.values();
  }
  FilterBank rec = single_bank(lstm_only, e, true);
  ASSERT_EQ(ensemble.k.size(), rec.k.size());
  for (std::size_t i = 0; i < rec.k.size(); ++i) {
    EXPECT_DOUBLE_EQ(ensemble.k.values()[i], rec.k.values()[i]);
  }
}

TEST(AcuEnsemble, GradientFlowsToBothBranches) {
  Rng rng(29);
  const int h = 2, c = 1;
  MetaNetParams meta = init_meta_net(MetaNetKind::EnsembleCnnLstm, h, c, 0, rng);
  Tensor e = random_tensor({2, 4}, rng);
  e.set_requires_grad(true);

  Tape tape;
  std::vector<FilterBank> banks = meta_filter_banks(meta, {e}, true, &tape);
  Tensor flat = reshape(banks[0].k, {banks[0].k.size()}, &tape);
  Tensor loss = reduce(flat, 0, Reduce::Sum, &tape);
  tape.backward(loss);

  auto grad_norm = [](Tensor& t) {
    if (!t.has_grad()) return 0.0;
    double s = 0.0;
    for (double g : t.grad_view()) s += std::fabs(g);
    return s;
  };
  EXPECT_GT(grad_norm(meta.conv->weight), 0.0);
  EXPECT_GT(grad_norm(meta.rec->gates[0].wx), 0.0);
}

TEST(AllVariants, ShapeContractForAnyLength) {
  Rng rng(31);
  const int h = 3, c = 2;
  for (MetaNetKind kind :
       {MetaNetKind::Cnn, MetaNetKind::SmallCnn, MetaNetKind::FactoredCnn,
        MetaNetKind::Lstm, MetaNetKind::Gru, MetaNetKind::EnsembleCnnLstm}) {
    MetaNetParams meta = init_meta_net(kind, h, c, 2, rng);
    for (std::size_t len : {1u, 2u, 7u}) {
      Tensor e = random_tensor({3, len}, rng);
      FilterBank bank = single_bank(meta, e, true);
      EXPECT_EQ(bank.channels(), 3u) << meta_net_kind_name(kind);
      EXPECT_EQ(bank.window(), 5u) << meta_net_kind_name(kind);
      EXPECT_EQ(bank.length(), len) << meta_net_kind_name(kind);
    }
  }
}

TEST(AllVariants, EmptyDocumentThrows) {
  Rng rng(37);
  MetaNetParams meta = init_meta_net(MetaNetKind::Cnn, 2, 1, 0, rng);
  Tensor e({2, 0}, 0.0);
  EXPECT_THROW(meta_filter_banks(meta, {e}, true, nullptr), EmptyDocumentError);
}

// Shifting the input by one position shifts the bank by one position for
// interior positions. Eval mode keeps the normalization affine so the
// arithmetic is identical.
TEST(AcuCnn, TranslationAwareness) {
  Rng rng(41);
  const int h = 3, c = 1;
  const std::size_t len = 9;
  MetaNetParams meta = init_meta_net(MetaNetKind::Cnn, h, c, 0, rng);
  Tensor e = random_tensor({3, len}, rng);

  Tensor shifted({3, len}, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i + 1 < len; ++i) {
      shifted.values()[j * len + i + 1] = e.at({j, i});
    }
    shifted.values()[j * len + 0] = rng.uniform(-1.0, 1.0);
  }
  FilterBank base = single_bank(meta, e, false);
  FilterBank moved = single_bank(meta, shifted, false);
  for (std::size_t i = c; i + c + 1 < len; ++i) {
    for (std::size_t j = 0; j < base.channels(); ++j) {
      for (std::size_t t = 0; t < base.window(); ++t) {
        EXPECT_EQ(base.k.at({j, t, i}), moved.k.at({j, t, i + 1}))
            << "position " << i;
      }
    }
  }
}

// Batch statistics pool over all positions of all documents: splitting the
// same positions into two documents must reproduce the single-document result.
TEST(ConvStack, BatchNormPoolsAcrossDocuments) {
  Rng rng(43);
  const int h = 2, c = 0;  // kernel width 1 keeps per-position conv independent
  MetaNetParams meta = init_meta_net(MetaNetKind::Cnn, h, c, 0, rng);
  Tensor whole = random_tensor({2, 8}, rng);
  Tensor left({2, 5}, 0.0), right({2, 3}, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 5; ++i) left.values()[j * 5 + i] = whole.at({j, i});
    for (std::size_t i = 0; i < 3; ++i) right.values()[j * 3 + i] = whole.at({j, 5 + i});
  }
  MetaNetParams meta_copy = init_meta_net(MetaNetKind::Cnn, h, c, 0, rng);
  meta_copy.conv->weight.values() = meta.conv->weight.values();
  meta_copy.conv->bias.values() = meta.conv->bias.values();

  FilterBank single = meta_filter_banks(meta, {whole}, true, nullptr)[0];
  std::vector<FilterBank> pair = meta_filter_banks(meta_copy, {left, right}, true, nullptr);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(single.k.at({j, 0, i}), pair[0].k.at({j, 0, i}), 1e-12);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(single.k.at({j, 0, 5 + i}), pair[1].k.at({j, 0, i}), 1e-12);
    }
  }
}
