#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "basis/rng.hpp"

using namespace basis;

TEST_CASE("fnv1a64 matches the published test vectors") {
  // reference values from the FNV specification
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("identical seeds replay the same sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("streams are independent of sibling consumption") {
  Rng root(7);
  Rng s1 = root.stream("alpha");
  uint64_t first = s1.next_u64();

  // consuming another stream must not perturb alpha's draws
  Rng root2(7);
  Rng other = root2.stream("beta");
  for (int i = 0; i < 10; ++i) other.next_u64();
  Rng s2 = root2.stream("alpha");
  CHECK(s2.next_u64() == first);
}

TEST_CASE("distinct stream names and indices give distinct sequences") {
  Rng root(7);
  std::set<uint64_t> firsts;
  firsts.insert(root.stream("a").next_u64());
  firsts.insert(root.stream("b").next_u64());
  firsts.insert(root.stream("a", 0).next_u64());
  firsts.insert(root.stream("a", 1).next_u64());
  firsts.insert(root.stream("b", 1).next_u64());
  CHECK(firsts.size() == 5);
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
  Rng rng(3);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("uniform_int covers every bucket roughly evenly") {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_int(7)];
  for (int c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
}

TEST_CASE("normal has near-zero mean and unit variance") {
  Rng rng(11);
  double sum = 0.0, sumsq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("choice follows the given weights") {
  Rng rng(13);
  std::vector<double> probs{1.0, 3.0, 0.0, 4.0};  // normalized internally
  std::vector<int> counts(4, 0);
  const int n = 80000;
  for (int i = 0; i < n; ++i) ++counts[rng.choice(probs)];
  CHECK(counts[2] == 0);
  CHECK(std::abs(counts[0] / double(n) - 0.125) < 0.01);
  CHECK(std::abs(counts[1] / double(n) - 0.375) < 0.01);
  CHECK(std::abs(counts[3] / double(n) - 0.5) < 0.01);
}

TEST_CASE("shuffle is a uniform permutation on a small case") {
  Rng rng(17);
  std::map<std::vector<int>, int> seen;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    std::vector<int> v{0, 1, 2};
    rng.shuffle(v);
    ++seen[v];
  }
  CHECK(seen.size() == 6);
  for (const auto& [perm, count] : seen)
    CHECK(std::abs(count / double(n) - 1.0 / 6) < 0.01);
}
