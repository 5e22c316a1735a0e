#include <cmath>
#include <set>

#include "doctest.h"
#include "mirror/model.hpp"

using namespace mirror;

namespace {

ModelConfig tiny(Version v, StageIndexSet shared = {5}) {
  ModelConfig c;
  c.version = v;
  c.shared = std::move(shared);
  c.widths = {2, 4, 4, 8, 8};
  c.in_patch = {16, 16, 16};
  if (v == Version::v4) c.theta = Theta{0.3, false};
  return c;
}

int64_t count(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

std::set<const void*> storages(const torch::nn::Module& m) {
  std::set<const void*> s;
  for (const auto& p : m.parameters()) s.insert(p.data_ptr());
  return s;
}

}  // namespace

TEST_CASE("stage index sets parse, print and reject out-of-range indices") {
  CHECK((StageIndexSet::parse("4+5+6") == StageIndexSet{4, 5, 6}));
  CHECK((StageIndexSet::parse("{4,5,6}") == StageIndexSet{4, 5, 6}));
  CHECK(StageIndexSet::parse("none").empty());
  CHECK((StageIndexSet{3, 4, 5, 6, 7}.to_string() == "3+4+5+6+7"));
  CHECK_THROWS_WITH_AS(StageIndexSet::parse("9"), doctest::Contains("invalid stage index"), ConfigError);
  CHECK_THROWS_WITH_AS(StageIndexSet::parse("0"), doctest::Contains("invalid stage index"), ConfigError);
  CHECK(table2_shared_sets().size() == 7);
}

TEST_CASE("no tying: twin branches have equal parameter counts and disjoint storage") {
  auto m = build_model(tiny(Version::v1, {}));
  CHECK(count(*m->branch_a()) == count(*m->branch_b()));
  const auto a = storages(*m->branch_a());
  for (const void* p : storages(*m->branch_b())) CHECK(a.count(p) == 0);
}

TEST_CASE("tying stage 5 removes exactly one copy of its parameters") {
  auto none = build_model(tiny(Version::v1, {}));
  auto five = build_model(tiny(Version::v1, {5}));
  const int64_t s5 = count(*none->branch_a()->stage(5));
  CHECK(s5 > 0);
  CHECK(parameter_count(*none) - parameter_count(*five) == s5);
  CHECK(five->verify_tying());
  CHECK(five->branch_a()->stage(5).ptr() == five->branch_b()->stage(5).ptr());
  CHECK(five->branch_a()->stage(4).ptr() != five->branch_b()->stage(4).ptr());
  // unique_named_parameters lists the tied tensors once.
  std::set<const void*> seen;
  for (const auto& [name, p] : unique_named_parameters(*five)) CHECK(seen.insert(p.data_ptr()).second);
  CHECK(seen.size() == storages(*five).size());
}

TEST_CASE("invalid model configs") {
  auto c = tiny(Version::v1);
  c.shared = StageIndexSet{};
  CHECK_THROWS_WITH_AS(c.shared.insert(9), doctest::Contains("invalid stage index"), ConfigError);
  auto p = tiny(Version::v1);
  p.in_patch = {20, 16, 16};
  CHECK_THROWS_AS(build_model(p), ConfigError);
  auto t = tiny(Version::v2);
  t.theta = Theta{0.3, false};
  CHECK_THROWS_WITH_AS(build_model(t), doctest::Contains("θ undefined for v2"), ConfigError);
  auto v4 = tiny(Version::v4);
  v4.theta = Theta{};
  CHECK_THROWS_AS(build_model(v4), ConfigError);
}

TEST_CASE("version output contracts") {
  torch::NoGradGuard ng;
  const auto x = torch::rand({2, 1, 16, 16, 16});
  auto v1 = build_model(tiny(Version::v1));
  const auto o1 = v1->forward(x, x);
  CHECK(o1.out_a.sizes() == x.sizes());
  CHECK(o1.out_b.sizes() == x.sizes());
  CHECK_FALSE(o1.out_btl.has_value());
  CHECK_FALSE(o1.class_logit.has_value());

  auto v3 = build_model(tiny(Version::v3));
  const auto o3 = v3->forward(x, x);
  REQUIRE(o3.out_btl.has_value());
  REQUIRE(o3.class_logit.has_value());
  CHECK(o3.out_btl->sizes() == x.sizes());
  CHECK(o3.class_logit->sizes() == torch::IntArrayRef{2});

  auto rb = build_model(tiny(Version::v2_rec_brain));
  CHECK(rb->forward(x, x).out_b.size(1) == 3);
  auto v4 = build_model(tiny(Version::v4));
  REQUIRE(v4->forward(x, x).theta.has_value());
  CHECK(v4->forward(x, x).theta->item<double>() == doctest::Approx(0.3));
}

TEST_CASE("zeroing the bottleneck decoder leaves the branches untouched") {
  torch::NoGradGuard ng;
  auto m = build_model(tiny(Version::v2));
  const auto x_a = torch::rand({1, 1, 16, 16, 16});
  const auto x_b = torch::rand({1, 1, 16, 16, 16});
  const auto before = m->forward(x_a, x_b);
  for (auto& p : m->btl_decoder()->parameters()) p.zero_();
  const auto after = m->forward(x_a, x_b);
  CHECK(torch::equal(before.out_a, after.out_a));
  CHECK(torch::equal(before.out_b, after.out_b));
  CHECK(torch::equal(*after.out_btl, torch::zeros_like(*after.out_btl)));
}

TEST_CASE("shared representation: width, order and tied-encoder symmetry") {
  torch::NoGradGuard ng;
  auto c = tiny(Version::v3, {1, 2, 3, 4, 5});
  c.widths = {4, 8, 16, 32, 64};
  c.in_patch = {32, 32, 32};
  auto m = build_model(c);
  const auto x_a = torch::rand({1, 1, 32, 32, 32});
  const auto x_b = torch::rand({1, 1, 32, 32, 32});
  const auto r = m->shared_representation(x_a, x_b);
  CHECK((r.sizes() == torch::IntArrayRef{1, 128, 2, 2, 2}));
  const auto swapped = m->shared_representation(x_b, x_a);
  CHECK(torch::equal(r.slice(1, 0, 64), swapped.slice(1, 64, 128)));
  CHECK(torch::equal(r.slice(1, 64, 128), swapped.slice(1, 0, 64)));
  const auto same = m->shared_representation(x_a, x_a);
  CHECK(torch::equal(same.slice(1, 0, 64), same.slice(1, 64, 128)));
}

TEST_CASE("fusion arithmetic") {
  const auto ct = torch::randn({1, 1, 4, 4, 4});
  const auto pet = torch::randn({1, 1, 4, 4, 4});
  CHECK(torch::equal(fuse_logits(ct, pet, 0.0), pet));
  CHECK(torch::allclose(fuse_logits(ct, pet, 0.5), (ct + pet) / 2));
  const auto f = fuse_logits(torch::tensor({2.0}, torch::kFloat64), torch::tensor({0.0}, torch::kFloat64), 0.3);
  CHECK(f.item<double>() == 0.6);
  CHECK_THROWS(fuse_logits(ct, torch::zeros({2}), 0.3));
}

TEST_CASE("classifier: zero last layer gives 0.5, outputs in (0,1), duplicates agree") {
  torch::NoGradGuard ng;
  auto m = build_model(tiny(Version::v3));
  const auto x = torch::rand({1, 1, 16, 16, 16});
  const auto rep = m->shared_representation(torch::cat({x, x}), torch::cat({x, x}));
  const auto p = m->classify(rep);
  CHECK((p.gt(0).all().item<bool>() && p.lt(1).all().item<bool>()));
  CHECK(p[0].item<float>() == p[1].item<float>());
  m->classifier()->fc2->weight.zero_();
  m->classifier()->fc2->bias.zero_();
  CHECK(torch::equal(m->classify(rep), torch::full({2}, 0.5)));
}

TEST_CASE("initialisation is seed-deterministic and learnable theta starts at 0.25") {
  auto a = build_model(tiny(Version::v3));
  auto b = build_model(tiny(Version::v3));
  const auto pa = a->named_parameters();
  const auto pb = b->named_parameters();
  bool equal = true;
  for (const auto& item : pa) equal = equal && torch::equal(item.value(), pb[item.key()]);
  CHECK(equal);

  auto c = tiny(Version::v4);
  c.theta = Theta{std::nullopt, true};
  auto m = build_model(c);
  CHECK(m->theta().item<double>() == doctest::Approx(kLearnableThetaInit).epsilon(1e-6));
}

TEST_CASE("volume/tensor conversion round trips") {
  Volume v(Shape3{3, 4, 5}, Vec3{2.0, 2.0, 3.0});
  for (int64_t n = 0; n < v.size(); ++n) v[n] = static_cast<float>(n);
  const auto t = to_tensor(v);
  CHECK((t.sizes() == torch::IntArrayRef{1, 1, 5, 4, 3}));
  CHECK(t[0][0][4][3][2].item<float>() == v.at(2, 3, 4));
  const auto back = to_volume(t, v.spacing());
  CHECK(back.shape() == v.shape());
  CHECK(std::equal(back.values().begin(), back.values().end(), v.values().begin()));
}
