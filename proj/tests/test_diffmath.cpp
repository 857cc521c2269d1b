#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "posergcn/gradcheck.hpp"
#include "posergcn/matrix.hpp"
#include "posergcn/tape.hpp"

using namespace posergcn;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m[i] = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("matmul against hand products") {
  Matrix id3 = Matrix::identity(3);
  Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  Matrix out = matmul(id3, m);
  for (int i = 0; i < m.size(); ++i) CHECK(out[i] == m[i]);

  Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix b = Matrix::from_rows({{0}, {1}});
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 2);
  CHECK(c(1, 0) == 4);

  Matrix bad(2, 2);
  CHECK_THROWS_AS(matmul(Matrix(2, 3), bad), DimensionError);
}

TEST_CASE("hadamard basics") {
  Matrix a = Matrix::from_rows({{1, 2}});
  CHECK(hadamard(a, Matrix::full(1, 2, 1.0))(0, 0) == 1);
  CHECK(sum_all(hadamard(a, Matrix(1, 2))) == 0.0);
  Matrix c = hadamard(a, Matrix::from_rows({{3, 4}}));
  CHECK(c(0, 0) == 3);
  CHECK(c(0, 1) == 8);
  CHECK_THROWS_AS(hadamard(a, Matrix(2, 2)), DimensionError);
}

TEST_CASE("softmax_vector normalization and stability") {
  auto uniform = softmax_vector({7.5, 7.5, 7.5});
  for (double v : uniform) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-14));

  auto closed = softmax_vector({0.0, std::log(3.0)});
  CHECK(closed[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(closed[1] == doctest::Approx(0.75).epsilon(1e-12));

  auto large = softmax_vector({1000.0, 0.0});
  CHECK(large[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(large[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(large[0]));

  CHECK_THROWS_AS(softmax_vector({}), ArgumentError);
}

TEST_CASE("softmax_vector sums to one and shift-invariant") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(1 + trial % 13);
    for (double& s : scores) s = dist(rng);
    auto w = softmax_vector(scores);
    double sum = 0.0;
    for (double v : w) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    std::vector<double> shifted = scores;
    for (double& s : shifted) s += 11.25;
    auto w2 = softmax_vector(shifted);
    for (size_t i = 0; i < w.size(); ++i) CHECK(std::abs(w[i] - w2[i]) <= 1e-12);
  }
}

TEST_CASE("elementwise activations") {
  Tape tape;
  Var zero = tape.constant(Matrix(2, 3));
  CHECK(sum_all(tanh(zero).value()) == 0.0);

  Var x = tape.constant(Matrix::from_rows({{-1, 2}}));
  Var r = relu(x);
  CHECK(r.value()(0, 0) == 0.0);
  CHECK(r.value()(0, 1) == 2.0);

  Var s = sigmoid(zero);
  for (int i = 0; i < 6; ++i) CHECK(s.value()[i] == 0.5);
}

TEST_CASE("backward: sum gives ones, half square norm gives value") {
  std::mt19937_64 rng(3);
  Param w(random_matrix(3, 4, rng));

  {
    Tape tape;
    w.zero_grad();
    Var root = sum_all(tape.leaf(w));
    tape.backward(root);
    for (int i = 0; i < w.grad.size(); ++i) CHECK(w.grad[i] == 1.0);
  }
  {
    Tape tape;
    w.zero_grad();
    Var leaf = tape.leaf(w);
    Var root = scale(sum_all(hadamard(leaf, leaf)), 0.5);
    tape.backward(root);
    for (int i = 0; i < w.grad.size(); ++i)
      CHECK(w.grad[i] == doctest::Approx(w.value[i]).epsilon(1e-15));
  }
}

TEST_CASE("backward twice accumulates exactly twice") {
  std::mt19937_64 rng(5);
  Param w(random_matrix(2, 2, rng));
  Tape tape;
  Var leaf = tape.leaf(w);
  Var root = sum_all(hadamard(leaf, leaf));
  w.zero_grad();
  tape.backward(root);
  Matrix once = w.grad;
  tape.backward(root);
  for (int i = 0; i < once.size(); ++i) CHECK(w.grad[i] == 2.0 * once[i]);
}

TEST_CASE("backward requires a scalar root") {
  Param w(Matrix(2, 2, 1.0));
  Tape tape;
  Var leaf = tape.leaf(w);
  CHECK_THROWS_AS(tape.backward(leaf), ArgumentError);
}

TEST_CASE("finite differences: linear loss is exact") {
  std::mt19937_64 rng(11);
  Param w(random_matrix(1, 6, rng));
  Matrix x = random_matrix(6, 1, rng);
  auto build = [&](Tape& tape) { return matmul(tape.leaf(w), tape.constant(x)); };
  Param* params[] = {&w};
  CHECK(finite_diff_check(build, params) < 1e-9);
}

TEST_CASE("finite differences: tanh composite") {
  std::mt19937_64 rng(13);
  Param w(random_matrix(4, 4, rng, 0.5));
  Matrix x = random_matrix(4, 1, rng);
  auto build = [&](Tape& tape) {
    Var t = tanh(tape.leaf(w));
    return sum_all(matmul(t, tape.constant(x)));
  };
  Param* params[] = {&w};
  CHECK(finite_diff_check(build, params) < 1e-6);
}

TEST_CASE("finite differences flag a corrupted backward rule") {
  std::mt19937_64 rng(17);
  Param w(random_matrix(3, 3, rng, 0.5));
  auto build = [&](Tape& tape) { return sum_all(tanh(tape.leaf(w))); };
  Param* params[] = {&w};
  debug::inject_backward_fault(true);
  const double err = finite_diff_check(build, params);
  debug::inject_backward_fault(false);
  CHECK(err > 1e-2);
  CHECK(finite_diff_check(build, params) < 1e-8);
}

TEST_CASE("gradcheck covers every tape op") {
  std::mt19937_64 rng(19);
  Param a(random_matrix(3, 4, rng, 0.7));
  Param b(random_matrix(3, 4, rng, 0.7));
  Param w(random_matrix(4, 3, rng, 0.7));
  Param bias(random_matrix(1, 4, rng, 0.3));
  Param col(random_matrix(3, 1, rng, 0.7));

  auto build = [&](Tape& tape) {
    Var va = tape.leaf(a);
    Var vb = tape.leaf(b);
    Var mixed = add(hadamard(sigmoid(va), tanh(vb)), scale(sub(va, vb), 0.25));
    Var biased = add_rowvec(mixed, tape.leaf(bias));
    Var prod = relu(matmul(biased, tape.leaf(w)));          // 3x3
    Var weights = softmax_col(matmul(prod, tape.leaf(col)));  // 3x1
    Var pooled = matmul(transpose(weights), prod);            // 1x3
    Var stacked = stack_rows(std::vector<Var>{pooled, row(prod, 1)});
    Var joined = concat_cols(rows_mean(stacked), pooled);     // 1x6
    Var dist = euclidean(joined, tape.constant(Matrix(1, 6, 0.1)));
    Var ce = cross_entropy(pooled, 1);
    return add(add(dist, ce), cross_entropy(rows_mean(prod), 2));
  };
  Param* params[] = {&a, &b, &w, &bias, &col};
  CHECK(finite_diff_check(build, params) < 1e-6);
}

TEST_CASE("dimension errors name both shapes") {
  try {
    matmul(Matrix(2, 3), Matrix(2, 2));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("2x2") != std::string::npos);
  }
}
