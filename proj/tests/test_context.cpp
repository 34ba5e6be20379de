#include <catch_amalgamated.hpp>

#include <vector>

#include "did/context.hpp"
#include "did/rng.hpp"

using namespace did;

namespace {

struct Start {
  std::uint64_t t_us;
  std::uint32_t src, dst;
};

// full-history rescan applying the N-most-recent and T-window definitions
ContextFeatures brute_force(const std::vector<Start>& history, const Start& q,
                            std::size_t n, std::uint64_t t_ms) {
  ContextFeatures f;
  if (!history.empty())
    f.gap_ms = static_cast<double>(q.t_us - history.back().t_us) / 1000.0;
  std::size_t first_bucket = history.size() > n ? history.size() - n : 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i >= first_bucket) {
      if (history[i].src == q.src) ++f.src_count_bucket;
      if (history[i].dst == q.dst) ++f.dst_count_bucket;
    }
    bool in_window = q.t_us < t_ms * 1000 ||
                     history[i].t_us > q.t_us - t_ms * 1000;
    if (in_window) {
      if (history[i].src == q.src) ++f.src_count_time;
      if (history[i].dst == q.dst) ++f.dst_count_time;
    }
  }
  return f;
}

}  // namespace

TEST_CASE("first flow has all-zero features") {
  ContextTracker ctx(4, 10'000);
  auto f = ctx.observe_flow(1, 2, 123456);
  CHECK(f == ContextFeatures{});
}

TEST_CASE("destination repetition inside bucket and window") {
  ContextTracker ctx(4, 10'000);
  ctx.observe_flow(1, 9, 0);
  ctx.observe_flow(2, 9, 1'000'000);
  ctx.observe_flow(3, 9, 2'000'000);
  auto f = ctx.observe_flow(4, 9, 3'000'000);
  CHECK(f.dst_count_bucket == 3);
  CHECK(f.dst_count_time == 3);
  CHECK(f.gap_ms == 1000.0);
  CHECK(f.src_count_bucket == 0);
}

TEST_CASE("time window forgets, bucket does not") {
  ContextTracker ctx(4, 10'000);
  ctx.observe_flow(1, 9, 0);
  ctx.observe_flow(2, 9, 1'000'000);
  ctx.observe_flow(3, 9, 2'000'000);
  auto f = ctx.observe_flow(4, 9, 13'000'000);  // starts at t <= 3 s all aged out
  CHECK(f.dst_count_time == 0);
  CHECK(f.dst_count_bucket == 3);
}

TEST_CASE("out-of-order flow starts are rejected") {
  ContextTracker ctx(4, 1000);
  ctx.observe_flow(1, 2, 100);
  CHECK_THROWS_AS(ctx.observe_flow(1, 2, 99), OutOfOrderTimestamp);
}

TEST_CASE("brute-force equivalence on random streams") {
  did::rng::Engine eng(99);
  for (int rep = 0; rep < 10; ++rep) {
    std::size_t n = 1 + did::rng::uniform_int(eng, 64);
    std::uint64_t t_ms = 1 + did::rng::uniform_int(eng, 60'000);
    ContextTracker ctx(n, t_ms);
    std::vector<Start> history;
    std::uint64_t ts = 0;
    for (int i = 0; i < 1500; ++i) {
      ts += did::rng::uniform_int(eng, 40'000);
      Start q{ts, static_cast<std::uint32_t>(did::rng::uniform_int(eng, 8)),
              static_cast<std::uint32_t>(did::rng::uniform_int(eng, 8))};
      auto got = ctx.observe_flow(q.src, q.dst, q.t_us);
      auto want = brute_force(history, q, n, t_ms);
      REQUIRE(got == want);
      history.push_back(q);
    }
  }
}

TEST_CASE("with an unbounded window, time counts dominate bucket counts") {
  std::size_t n = 8;
  ContextTracker ctx(n, 100'000'000);  // effectively infinite here
  did::rng::Engine eng(5);
  std::uint64_t ts = 0;
  for (int i = 0; i < 500; ++i) {
    ts += did::rng::uniform_int(eng, 10'000);
    auto f = ctx.observe_flow(
        static_cast<std::uint32_t>(did::rng::uniform_int(eng, 4)),
        static_cast<std::uint32_t>(did::rng::uniform_int(eng, 4)), ts);
    CHECK(f.src_count_time >= f.src_count_bucket);
    CHECK(f.dst_count_time >= f.dst_count_bucket);
    CHECK(f.src_count_bucket <= n);
    CHECK(f.dst_count_bucket <= n);
  }
}

TEST_CASE("gap is the difference of consecutive flow starts") {
  ContextTracker ctx(4, 1000);
  ctx.observe_flow(1, 1, 1'000'000);
  auto f = ctx.observe_flow(9, 9, 1'234'567);
  CHECK(f.gap_ms == Catch::Approx(234.567));
}
