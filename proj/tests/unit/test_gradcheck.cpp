// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <regex>

#include "../support/helpers.hpp"
#include "dcuc/complex_nn.hpp"
#include "dcuc/error.hpp"
#include "dcuc/gradcheck.hpp"

using namespace dcuc;
using gradcheck::Options;
using testing::random_tensor;

TEST_CASE("square: central differences are exact") {
  Rng rng(1);
  ag::Var x = ag::parameter(random_tensor({5, 7}, rng));
  Options o;
  o.eps = 1e-5;
  auto r = gradcheck::check_gradients(
      "square", [&] { return ag::sum(ag::square(x)); }, {{"x", x}}, o);
  CHECK(r.max_rel_err <= 1e-8);
  CHECK(r.pass);
  CHECK(r.coords == 35);
  CHECK(r.eps == 1e-5);
}

TEST_CASE("prelu away from the kink") {
  Rng rng(2);
  Tensor xv = random_tensor({2, 3, 10}, rng, 0.1, 1.0);
  for (std::size_t i = 0; i < xv.size(); i += 2) xv[i] = -xv[i];
  ag::Var x = ag::parameter(xv);
  ag::Var a = ag::parameter(Tensor({3}, {0.25, -0.1, 0.7}));
  Options o;
  o.tol = 1e-6;
  auto r = gradcheck::check_gradients(
      "prelu", [&] { return ag::sum(ag::square(ag::prelu(x, a, 1))); },
      {{"x", x}, {"slope", a}}, o);
  CHECK(r.max_rel_err <= 1e-6);
  CHECK(r.kinks_skipped == 0);
}

TEST_CASE("complex_conv2d on a [1,1,4,4] input") {
  Rng rng(3);
  nn::ParamStore store;
  auto p = cnn::make_complex_conv(store, "c", 1, 2, 3, 3, rng);
  p.pad_freq = p.pad_time = 1;
  for (auto& [n, v] : store.trainable_params()) {
    ag::Var w = v;
    for (double& e : w.value().values()) e = rng.uniform(-1, 1);
  }
  ag::CVar x{ag::parameter(random_tensor({1, 1, 4, 4}, rng)),
             ag::parameter(random_tensor({1, 1, 4, 4}, rng))};
  auto loss = [&] {
    auto y = cnn::complex_conv2d(x, p);
    return ag::add(ag::sum(ag::square(y.re)), ag::sum(ag::mul(y.im, y.re)));
  };
  std::vector<gradcheck::Param> params{{"x.real", x.re}, {"x.imag", x.im},
                                       {"w_real", p.w_real}, {"w_imag", p.w_imag},
                                       {"bias_real", p.bias_real}, {"bias_imag", p.bias_imag}};
  for (const auto& prm : params) {
    auto r = gradcheck::check_gradients("complex_conv2d", loss, {prm}, {});
    CHECK_MESSAGE(r.max_rel_err <= 1e-4, prm.name);
  }
}

TEST_CASE("wrong gradient is caught") {
  Rng rng(4);
  ag::Var x = ag::parameter(random_tensor({6}, rng));
  auto bad_square = [&] {
    Tensor v = x.value();
    for (double& e : v.values()) e = e * e;
    return ag::make_op(std::move(v), {x}, [](ag::Node& n) {
      const Tensor& xv = n.parents[0]->value;
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= 2.0 * xv[i] * n.grad[i];
    });
  };
  auto r = gradcheck::check_gradients(
      "bad", [&] { return ag::sum(bad_square()); }, {{"x", x}}, {});
  CHECK_FALSE(r.pass);
  CHECK(r.max_rel_err == doctest::Approx(2.0));  // |-2x - 2x| / |2x|
}

TEST_CASE("nondeterministic loss is rejected") {
  Rng rng(5);
  ag::Var x = ag::parameter(random_tensor({4}, rng));
  int calls = 0;
  auto loss = [&] { return ag::add_scalar(ag::sum(x), 1e-3 * ++calls); };
  CHECK_THROWS_AS(gradcheck::check_gradients("drift", loss, {{"x", x}}, {}),
                  NondeterminismError);
}

TEST_CASE("coordinate sampling caps the work per input") {
  Rng rng(6);
  ag::Var x = ag::parameter(random_tensor({400}, rng));
  Options o;
  o.coords_per_param = 50;
  auto r = gradcheck::check_gradients(
      "sample", [&] { return ag::sum(ag::tanh(x)); }, {{"x", x}}, o);
  CHECK(r.coords == 50);
  CHECK(r.pass);
}

TEST_CASE("kernel registry passes and reports one line per check") {
  const auto checks = gradcheck::registered_checks(gradcheck::Scope::kernel);
  REQUIRE(checks.size() >= 10);
  const std::regex line(
      R"(op=\S+ param=\S+ max_rel_err=\S+ tol=\S+ eps=\S+ coords=\d+ kinks_skipped=\d+ pass=[01])");
  for (const auto& c : checks) {
    CHECK(c.scope == gradcheck::Scope::kernel);
    const auto r = c.run();
    const std::string s = gradcheck::format_report(r);
    CHECK(std::regex_match(s, line));
    CHECK(s.find('\n') == std::string::npos);
    CHECK_MESSAGE(r.pass, s);
    CHECK(r.tol <= 1e-4);
    CHECK(r.eps == 1e-5);
    CHECK(r.max_rel_err >= 0.0);
  }
}

TEST_CASE("faulty fixture is appended and fails") {
  const auto plain = gradcheck::registered_checks(gradcheck::Scope::kernel);
  const auto with = gradcheck::registered_checks(gradcheck::Scope::kernel, true);
  REQUIRE(with.size() == plain.size() + 1);
  CHECK_FALSE(with.back().run().pass);
}
