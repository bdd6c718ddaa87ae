#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "rnnt/metrics.hpp"

using namespace rnnt;

namespace {

std::vector<int> to_tokens(const char* s) {
  std::vector<int> out;
  for (; *s; ++s) out.push_back(*s);
  return out;
}

// Cost-only Levenshtein oracle, no backtrace.
std::uint64_t lev_cost(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::uint64_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::uint64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<int> random_tokens(std::mt19937_64& rng, std::size_t max_len,
                               int alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> tok(1, alphabet);
  std::vector<int> out(len(rng));
  for (int& v : out) v = tok(rng);
  return out;
}

}  // namespace

TEST_CASE("edit_distance fixed cases") {
  CHECK(edit_distance(to_tokens("abc"), to_tokens("abc")).total() == 0);

  EditOps del = edit_distance({}, to_tokens("ab"));
  CHECK(del.total() == 2);
  CHECK(del.deletions == 2);

  EditOps ins = edit_distance(to_tokens("ab"), {});
  CHECK(ins.total() == 2);
  CHECK(ins.insertions == 2);

  CHECK(edit_distance(to_tokens("kitten"), to_tokens("sitting")).total() == 3);

  // Pure substitution when lengths match and all tokens differ.
  EditOps sub = edit_distance(to_tokens("aa"), to_tokens("bb"));
  CHECK(sub.total() == 2);
  CHECK(sub.substitutions == 2);
}

TEST_CASE("edit_distance breakdown is consistent") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    auto hyp = random_tokens(rng, 12, 4);
    auto ref = random_tokens(rng, 12, 4);
    EditOps ops = edit_distance(hyp, ref);
    CHECK(ops.total() == ops.substitutions + ops.insertions + ops.deletions);
    // The op counts must connect the two lengths.
    CHECK(hyp.size() + ops.deletions ==
          ref.size() + ops.insertions);
  }
}

TEST_CASE("edit_distance matches DP oracle on 1000 random pairs") {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 1000; ++iter) {
    auto hyp = random_tokens(rng, 15, 5);
    auto ref = random_tokens(rng, 15, 5);
    CHECK(edit_distance(hyp, ref).total() == lev_cost(hyp, ref));
  }
}

TEST_CASE("edit_distance symmetry and triangle inequality of total") {
  std::mt19937_64 rng(123);
  for (int iter = 0; iter < 200; ++iter) {
    auto a = random_tokens(rng, 10, 3);
    auto b = random_tokens(rng, 10, 3);
    auto c = random_tokens(rng, 10, 3);
    CHECK(edit_distance(a, b).total() == edit_distance(b, a).total());
    CHECK(edit_distance(a, c).total() <=
          edit_distance(a, b).total() + edit_distance(b, c).total());
  }
}

TEST_CASE("error_rate arithmetic") {
  EditOps none;
  CHECK(error_rate(none, 10) == 0.0);
  CHECK(error_rate(none, 0) == 0.0);

  EditOps three;
  three.substitutions = 2;
  three.deletions = 1;
  CHECK(error_rate(three, 10) == doctest::Approx(0.3));
  CHECK(error_rate(three, 0) == doctest::Approx(3.0));  // divide by 1
}

TEST_CASE("corpus rate pools edits, not per-utterance means") {
  // Three utterances: (1 edit / 2 ref), (0 / 4), (3 / 4).
  std::vector<std::pair<std::uint64_t, std::uint64_t>> corpus{
      {1, 2}, {0, 4}, {3, 4}};
  std::uint64_t edits = 0, ref = 0;
  double mean_of_rates = 0.0;
  for (auto [e, r] : corpus) {
    edits += e;
    ref += r;
    mean_of_rates += static_cast<double>(e) / static_cast<double>(r);
  }
  mean_of_rates /= 3.0;
  double pooled = static_cast<double>(edits) / static_cast<double>(ref);
  CHECK(pooled == doctest::Approx(0.4));
  CHECK(mean_of_rates == doctest::Approx((0.5 + 0.0 + 0.75) / 3.0));
  CHECK(pooled != doctest::Approx(mean_of_rates));
}

TEST_CASE("rtf") {
  CHECK(rtf({0.5, 1.0}) == doctest::Approx(0.5));
  CHECK(rtf({2.0, 2.0}) == doctest::Approx(1.0));
  CHECK(rtf({2.740, 1.0}) == doctest::Approx(2.740));
  CHECK_THROWS_AS(rtf({0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(rtf({1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("percentile nearest-rank") {
  std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(percentile(ten, 90.0) == 9.0);
  CHECK(percentile(ten, 100.0) == 10.0);
  CHECK(percentile(ten, 0.0) == 1.0);
  CHECK(percentile({5.0}, 37.0) == 5.0);
  CHECK_THROWS_AS(percentile({}, 50.0), std::invalid_argument);
  CHECK_THROWS_AS(percentile({1.0}, 101.0), std::invalid_argument);
}

TEST_CASE("percentile monotone in p and permutation invariant") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(0.0, 100.0);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<double> values(1 + iter % 20);
    for (double& v : values) v = d(rng);
    double last = -1.0;
    for (double p : {0.0, 25.0, 50.0, 75.0, 90.0, 100.0}) {
      double v = percentile(values, p);
      CHECK(v >= last);
      last = v;
    }
    auto shuffled = values;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(percentile(shuffled, 90.0) == percentile(values, 90.0));
  }
}
