#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "naive_oracle.hpp"
#include "posergcn/gradcheck.hpp"
#include "posergcn/training.hpp"

using namespace posergcn;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m[i] = dist(rng);
  return m;
}

std::vector<Var> as_vars(Tape& tape, const std::vector<std::vector<double>>& feats) {
  std::vector<Var> vars;
  for (const auto& f : feats) {
    Matrix m(1, static_cast<int>(f.size()));
    for (size_t c = 0; c < f.size(); ++c) m(0, static_cast<int>(c)) = f[c];
    vars.push_back(tape.constant(m));
  }
  return vars;
}

}  // namespace

TEST_CASE("triplet loss: separated clusters give zero, coincident boundary gives zero") {
  Tape tape;
  // Two tight clusters far apart: intra + margin < inter for every anchor.
  std::vector<std::vector<double>> feats{{0.0, 0.0}, {0.1, 0.0}, {10.0, 0.0}, {10.1, 0.0}};
  std::vector<int> labels{0, 0, 1, 1};
  Var loss = triplet_batch_hard(as_vars(tape, feats), labels, 0.3);
  CHECK(loss.value()(0, 0) == 0.0);

  // All points coincide across classes, margin 0: hinge sits on the boundary.
  std::vector<std::vector<double>> same{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  Var zero = triplet_batch_hard(as_vars(tape, same), labels, 0.0);
  CHECK(zero.value()(0, 0) == 0.0);
}

TEST_CASE("triplet loss: hand-set 2-D features match the hinge sum") {
  Tape tape;
  std::vector<std::vector<double>> feats{{0.0, 0.0}, {3.0, 0.0}, {0.0, 1.0}, {3.0, 1.0}};
  std::vector<int> labels{0, 0, 1, 1};
  const double margin = 0.5;
  Var loss = triplet_batch_hard(as_vars(tape, feats), labels, margin);
  const double expect = naive::triplet_all_triples(feats, labels, margin);
  CHECK(loss.value()(0, 0) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(loss.value()(0, 0) > 0.0);
}

TEST_CASE("triplet loss equals the all-triples brute force on random batches") {
  std::mt19937_64 rng(199);
  std::uniform_int_distribution<int> batch_size(2, 8);
  std::uniform_int_distribution<int> label_of(0, 2);
  std::normal_distribution<double> coord(0.0, 1.0);
  int nontrivial = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = batch_size(rng);
    std::vector<std::vector<double>> feats;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      feats.push_back({coord(rng), coord(rng), coord(rng)});
      labels.push_back(label_of(rng));
    }
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) continue;
    Tape tape;
    int skipped_lib = 0;
    int skipped_naive = 0;
    Var loss = triplet_batch_hard(as_vars(tape, feats), labels, 0.3, &skipped_lib);
    const double expect = naive::triplet_all_triples(feats, labels, 0.3, &skipped_naive);
    CHECK(std::abs(loss.value()(0, 0) - expect) <= 1e-12);
    CHECK(skipped_lib == skipped_naive);
    if (expect > 0.0) ++nontrivial;
  }
  CHECK(nontrivial > 100);
}

TEST_CASE("triplet loss edge cases: skipped anchors and single identity") {
  Tape tape;
  std::vector<std::vector<double>> feats{{0.0}, {1.0}, {2.0}};
  {
    std::vector<int> labels{0, 0, 1};  // anchor 2 has no positive
    int skipped = 0;
    triplet_batch_hard(as_vars(tape, feats), labels, 0.3, &skipped);
    CHECK(skipped == 1);
  }
  {
    std::vector<int> labels{0, 0, 0};
    CHECK_THROWS_AS(triplet_batch_hard(as_vars(tape, feats), labels, 0.3), ArgumentError);
  }
}

TEST_CASE("identity loss closed forms") {
  std::mt19937_64 rng(211);
  {
    // C=2 with zero logits: ln 2 per sample.
    ClassifierHead head = ClassifierHead::init(3, 2, rng);
    head.weight.value = Matrix(3, 2);
    head.bias.value = Matrix(1, 2);
    Tape tape;
    std::vector<Var> fused{tape.constant(random_matrix(1, 3, rng)),
                           tape.constant(random_matrix(1, 3, rng))};
    std::vector<int> labels{0, 1};
    Var loss = identity_loss(head, fused, labels);
    CHECK(loss.value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  {
    // Saturated true-class logit drives the loss to zero.
    ClassifierHead head = ClassifierHead::init(1, 2, rng);
    head.weight.value = Matrix::from_rows({{1000.0, -1000.0}});
    head.bias.value = Matrix(1, 2);
    Tape tape;
    std::vector<Var> fused{tape.constant(Matrix(1, 1, 1.0))};
    std::vector<int> labels{0};
    Var loss = identity_loss(head, fused, labels);
    CHECK(loss.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    // N=3, C=3 hand-set logits vs a hand softmax.
    ClassifierHead head = ClassifierHead::init(3, 3, rng);
    head.weight.value = Matrix::identity(3);
    head.bias.value = Matrix(1, 3);
    Tape tape;
    std::vector<std::vector<double>> rows{{1.0, 0.0, -1.0}, {0.5, 0.5, 0.0}, {-2.0, 0.0, 2.0}};
    std::vector<Var> fused = as_vars(tape, rows);
    std::vector<int> labels{0, 1, 2};
    Var loss = identity_loss(head, fused, labels);

    double expect = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
      std::vector<double> p = naive::softmax(rows[i]);
      expect += -std::log(p[static_cast<size_t>(labels[i])]);
    }
    expect /= 3.0;
    CHECK(loss.value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
  }
  {
    ClassifierHead head = ClassifierHead::init(2, 2, rng);
    Tape tape;
    std::vector<Var> fused{tape.constant(random_matrix(1, 2, rng))};
    std::vector<int> labels{5};
    CHECK_THROWS_AS(identity_loss(head, fused, labels), ArgumentError);
  }
}

TEST_CASE("adaptive lambda closed forms and errors") {
  CHECK(adaptive_lambda(2.5, 2.5) == 0.5);
  CHECK(adaptive_lambda(3.0, 1.0) == 0.75);
  CHECK(adaptive_lambda(0.0, 0.0) == 0.5);
  CHECK(adaptive_lambda(0.0, 4.0) == 0.0);
  CHECK_THROWS_AS(adaptive_lambda(-1.0, 1.0), ArgumentError);
}

TEST_CASE("total loss algebra and the coefficient-ordering claim") {
  std::mt19937_64 rng(223);
  const int dim = 3;
  ClassifierHead head = ClassifierHead::init(2 * dim, 4, rng);

  for (int trial = 0; trial < 30; ++trial) {
    Tape tape;
    std::vector<Var> f_a;
    std::vector<Var> f_p;
    std::vector<Var> fused;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
      Var a = tape.constant(random_matrix(1, dim, rng));
      Var p = tape.constant(random_matrix(1, dim, rng));
      f_a.push_back(a);
      f_p.push_back(p);
      fused.push_back(concat_cols(a, p));
      labels.push_back(i / 2);
    }
    BatchLoss loss = total_loss(f_a, f_p, fused, labels, head, 0.3, LambdaMode{true, 0.5});
    const LossReport& r = loss.report;
    CHECK(r.lambda >= 0.0);
    CHECK(r.lambda <= 1.0);
    CHECK(r.lambda + (1.0 - r.lambda) == 1.0);
    CHECK((r.l_tri_a >= r.l_tri_p) == (r.lambda >= 0.5));
    // Identical floating-point expression, bitwise.
    CHECK(r.total == r.l_id + r.lambda * r.l_tri_a + (1.0 - r.lambda) * r.l_tri_p);
    CHECK(loss.total.value()(0, 0) == doctest::Approx(r.total).epsilon(1e-15));
  }

  // l_tri_a == l_tri_p means lambda = 0.5 and total = l_id + l_tri.
  {
    Tape tape;
    std::vector<std::vector<double>> pts{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {5.0, 0.0, 0.0},
                                         {6.0, 0.0, 0.0}};
    std::vector<Var> f = as_vars(tape, pts);
    std::vector<Var> fused;
    for (const Var& v : f) fused.push_back(concat_cols(v, v));
    std::vector<int> labels{0, 0, 1, 1};
    BatchLoss loss = total_loss(f, f, fused, labels, head, 0.3, LambdaMode{true, 0.5});
    CHECK(loss.report.lambda == 0.5);
    CHECK(loss.report.total ==
          doctest::Approx(loss.report.l_id + loss.report.l_tri_a).epsilon(1e-15));
  }
}

TEST_CASE("gradients flow through the combined objective") {
  std::mt19937_64 rng(227);
  const int dim = 2;
  ClassifierHead head = ClassifierHead::init(2 * dim, 2, rng);
  Param feat_a(random_matrix(4, dim, rng));
  Param feat_p(random_matrix(4, dim, rng));
  std::vector<int> labels{0, 0, 1, 1};

  auto forward = [&](Tape& tape, const LambdaMode& mode) {
    Var a_all = tanh(tape.leaf(feat_a));
    Var p_all = tanh(tape.leaf(feat_p));
    std::vector<Var> f_a;
    std::vector<Var> f_p;
    std::vector<Var> fused;
    for (int i = 0; i < 4; ++i) {
      f_a.push_back(row(a_all, i));
      f_p.push_back(row(p_all, i));
      fused.push_back(concat_cols(f_a.back(), f_p.back()));
    }
    return total_loss(f_a, f_p, fused, labels, head, 0.3, mode);
  };

  // Lambda is a detached constant per step: the checked function must hold
  // it at its base-point value, like the training step does.
  double lambda0;
  {
    Tape tape;
    lambda0 = forward(tape, LambdaMode{true, 0.5}).report.lambda;
  }
  auto build = [&](Tape& tape) { return forward(tape, LambdaMode{false, lambda0}).total; };
  std::vector<Param*> params{&feat_a, &feat_p, &head.weight, &head.bias};
  CHECK(finite_diff_check(build, params) < 1e-4);
}

TEST_CASE("pk_sample shapes, determinism, and label multiset") {
  std::vector<int> labels;
  for (int id = 0; id < 10; ++id)
    for (int k = 0; k < 5; ++k) labels.push_back(id);

  {
    std::mt19937_64 rng(5);
    auto batch = pk_sample(labels, 8, 4, rng);
    CHECK(batch.size() == 32);
    std::map<int, int> count;
    for (int idx : batch) ++count[labels[static_cast<size_t>(idx)]];
    CHECK(count.size() == 8);
    for (const auto& [id, c] : count) CHECK(c == 4);
  }
  {
    std::mt19937_64 rng1(7);
    std::mt19937_64 rng2(7);
    auto a = pk_sample(labels, 2, 2, rng1);
    auto b = pk_sample(labels, 2, 2, rng2);
    CHECK(a == b);
  }
  {
    std::mt19937_64 rng(9);
    CHECK_THROWS_AS(pk_sample(labels, 11, 2, rng), ArgumentError);
  }
  {
    // Identity with fewer than K tracks: replacement draws are counted.
    std::vector<int> few{0, 0, 1};
    std::mt19937_64 rng(11);
    int replaced = 0;
    auto batch = pk_sample(few, 2, 2, rng, &replaced);
    CHECK(batch.size() == 4);
    CHECK(replaced == 2);
  }
}

TEST_CASE("adam: zero grad is a fixed point, constant grad approaches lr steps") {
  {
    Param p(Matrix(2, 2, 1.5));
    Adam adam({&p});
    p.zero_grad();
    adam.step(0.1);
    for (int i = 0; i < 4; ++i) CHECK(p.value[i] == 1.5);
  }
  {
    Param p(Matrix(1, 1, 0.0));
    Adam adam({&p});
    const double g = 0.37;
    double prev = 0.0;
    double step_size = 0.0;
    for (int it = 0; it < 500; ++it) {
      p.grad(0, 0) = g;
      adam.step(0.01);
      step_size = prev - p.value(0, 0);
      prev = p.value(0, 0);
    }
    CHECK(step_size == doctest::Approx(0.01).epsilon(1e-3));
  }
  {
    // One step on a scalar quadratic against hand Adam arithmetic.
    Param p(Matrix(1, 1, 3.0));
    Adam adam({&p});
    p.grad(0, 0) = 6.0;  // d/dx x^2 at 3
    adam.step(0.5);
    const double m_hat = (0.1 * 6.0) / (1.0 - 0.9);
    const double v_hat = (0.001 * 36.0) / (1.0 - 0.999);
    const double expect = 3.0 - 0.5 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(p.value(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(p.grad(0, 0) == 0.0);  // grads reset by the step
  }
}

TEST_CASE("lr schedule decade steps") {
  CHECK(lr_schedule(0) == 3e-4);
  CHECK(lr_schedule(199) == 3e-4);
  CHECK(lr_schedule(200) == doctest::Approx(3e-5).epsilon(1e-12));
  CHECK(lr_schedule(799) == doctest::Approx(3e-7).epsilon(1e-12));
  CHECK(lr_schedule(100, 1e-2) == 1e-2);
  CHECK_THROWS_AS(lr_schedule(-1), ArgumentError);
}
