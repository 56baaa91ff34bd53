#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ella/dataset.hpp"

using namespace ella;

namespace {

std::vector<double> sorted_first_col(const Dataset& ds) {
  std::vector<double> v;
  for (long i = 0; i < ds.size(); ++i) v.push_back(ds.X(i, 0));
  std::sort(v.begin(), v.end());
  return v;
}

std::string tmpname(const char* stem) {
  return std::string("/tmp/ella_dstest_") + stem + "_" + std::to_string(getpid());
}

}  // namespace

TEST_CASE("sine generator") {
  CHECK(gen_sine_regression(0, 1).size() == 0);

  Dataset a = gen_sine_regression(20, 5), b = gen_sine_regression(20, 5);
  CHECK((a.X - b.X).norm() == 0.0);
  CHECK((a.Y - b.Y).norm() == 0.0);
  CHECK(!a.classification);
  CHECK(a.C == 1);
  CHECK(a.X.minCoeff() >= -2.0);
  CHECK(a.X.maxCoeff() <= 2.0);
  a.check();

  // residual variance approaches the declared noise variance
  Dataset big = gen_sine_regression(100000, 11);
  double s = 0, s2 = 0;
  for (long i = 0; i < big.size(); ++i) {
    double r = big.Y(i, 0) - std::sin(2.0 * big.X(i, 0));
    s += r;
    s2 += r * r;
  }
  double mean = s / big.size();
  double var = s2 / big.size() - mean * mean;
  CHECK(std::abs(var - 0.2) < 3.0 * 0.2 * std::sqrt(2.0 / big.size()));

  Dataset shifted = gen_sine_regression(50, 3, 1.0, 4.0, 0.01);
  CHECK(shifted.X.minCoeff() >= 1.0);
  CHECK(shifted.X.maxCoeff() <= 4.0);
}

TEST_CASE("two moons") {
  Dataset ds = gen_two_moons(200, 7);
  ds.check();
  CHECK(ds.classification);
  CHECK(ds.C == 2);
  CHECK(ds.X.cols() == 2);
  long ones = std::count(ds.labels.begin(), ds.labels.end(), 1);
  CHECK(ones > 60);
  CHECK(ones < 140);
  Dataset again = gen_two_moons(200, 7);
  CHECK((ds.X - again.X).norm() == 0.0);
  CHECK(ds.labels == again.labels);
}

TEST_CASE("digit glyphs") {
  Dataset ds = gen_digit_glyphs(200, 3);
  ds.check();
  CHECK(ds.classification);
  CHECK(ds.C == 10);
  CHECK(ds.input == Shape{1, 28, 28});
  CHECK(ds.X.cols() == 28 * 28);
  CHECK(ds.X.minCoeff() >= 0.0);
  CHECK(ds.X.maxCoeff() <= 1.0);
  std::set<int> seen(ds.labels.begin(), ds.labels.end());
  CHECK(seen.size() == 10);  // all classes appear at this size
  Dataset again = gen_digit_glyphs(200, 3);
  CHECK((ds.X - again.X).norm() == 0.0);
}

TEST_CASE("idx roundtrip of a handcrafted 1x1x1 file") {
  std::string imgs = tmpname("i1"), labs = tmpname("l1");
  {
    std::ofstream f(imgs, std::ios::binary);
    const unsigned char bytes[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 128};
    f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
  }
  {
    std::ofstream f(labs, std::ios::binary);
    const unsigned char bytes[] = {0, 0, 8, 1, 0, 0, 0, 1, 4};
    f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
  }
  Dataset ds = load_idx(imgs, labs);
  CHECK(ds.size() == 1);
  CHECK(ds.input == Shape{1, 1, 1});
  CHECK(ds.C == 10);
  CHECK(ds.label(0) == 4);
  CHECK(ds.X(0, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-14));
  std::remove(imgs.c_str());
  std::remove(labs.c_str());
}

TEST_CASE("idx error paths") {
  std::string imgs = tmpname("i2"), labs = tmpname("l2");
  {
    std::ofstream f(imgs, std::ios::binary);
    const unsigned char bytes[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1};  // truncated header
    f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
  }
  {
    std::ofstream f(labs, std::ios::binary);
    const unsigned char bytes[] = {0, 0, 8, 1, 0, 0, 0, 1, 0};
    f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
  }
  CHECK_THROWS(load_idx(imgs, labs));
  {
    std::ofstream f(imgs, std::ios::binary);
    const unsigned char bytes[] = {0, 0, 9, 9, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 7};
    f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
  }
  CHECK_THROWS_WITH_AS(load_idx(imgs, labs), doctest::Contains("magic"), std::runtime_error);
  CHECK_THROWS(load_idx("/nonexistent/file", labs));
  std::remove(imgs.c_str());
  std::remove(labs.c_str());
}

TEST_CASE("idx save and reload of generated glyphs") {
  Dataset ds = gen_digit_glyphs(16, 9);
  std::string imgs = tmpname("i3"), labs = tmpname("l3");
  save_idx(ds, imgs, labs);
  Dataset back = load_idx(imgs, labs);
  CHECK(back.size() == 16);
  CHECK(back.input == ds.input);
  CHECK(back.labels == ds.labels);
  CHECK((back.X - ds.X).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);  // byte quantization
  std::remove(imgs.c_str());
  std::remove(labs.c_str());
}

TEST_CASE("select, take, subsample, split") {
  Dataset ds = gen_sine_regression(40, 13);

  Dataset sel = select(ds, {5, 2, 2});
  CHECK(sel.size() == 3);
  CHECK(sel.X(0, 0) == ds.X(5, 0));
  CHECK(sel.X(1, 0) == ds.X(2, 0));
  CHECK(sel.X(2, 0) == ds.X(2, 0));
  CHECK_THROWS(select(ds, {40}));
  CHECK_THROWS(select(ds, {-1}));

  Dataset mid = take(ds, 10, 5);
  CHECK(mid.size() == 5);
  CHECK(mid.X(0, 0) == ds.X(10, 0));
  CHECK(mid.X(4, 0) == ds.X(14, 0));

  Dataset everything = subsample(ds, 40, 21);
  CHECK(sorted_first_col(everything) == sorted_first_col(ds));  // a permutation
  CHECK_THROWS(subsample(ds, 41, 21));
  Dataset few1 = subsample(ds, 10, 21), few2 = subsample(ds, 10, 21);
  CHECK((few1.X - few2.X).norm() == 0.0);

  auto parts = split(ds, {0.5, 0.5}, 31);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() + parts[1].size() == 40);
  std::vector<double> all = sorted_first_col(parts[0]);
  for (double v : sorted_first_col(parts[1])) all.push_back(v);
  std::sort(all.begin(), all.end());
  CHECK(all == sorted_first_col(ds));  // disjoint halves, union preserves the multiset
  std::set<double> left(parts[0].X.col(0).begin(), parts[0].X.col(0).end());
  for (long i = 0; i < parts[1].size(); ++i) CHECK(left.count(parts[1].X(i, 0)) == 0);

  CHECK_THROWS(split(ds, {0.8, 0.4}, 1));
}

TEST_CASE("gaussian corruption clamps image data") {
  Dataset ds = gen_digit_glyphs(8, 5);
  Dataset noisy = gaussian_corrupt(ds, 0.5, 17);
  CHECK(noisy.X.minCoeff() >= 0.0);
  CHECK(noisy.X.maxCoeff() <= 1.0);
  CHECK((noisy.X - ds.X).cwiseAbs().maxCoeff() > 0.0);
  CHECK(noisy.labels == ds.labels);
  Dataset again = gaussian_corrupt(ds, 0.5, 17);
  CHECK((noisy.X - again.X).norm() == 0.0);
}

TEST_CASE("check rejects inconsistent data") {
  Dataset ds = gen_two_moons(6, 1);
  ds.labels.pop_back();
  CHECK_THROWS(ds.check());
  Dataset ds2 = gen_two_moons(6, 1);
  ds2.labels[0] = 2;
  CHECK_THROWS(ds2.check());
  Dataset ds3 = gen_sine_regression(6, 1);
  ds3.Y = Matrix::Zero(5, 1);
  CHECK_THROWS(ds3.check());
}
