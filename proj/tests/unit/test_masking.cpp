// Semantics-guided dynamic masking: tier selection, whole-word atomicity,
// the 80/10/10 corruption split, and the never-mask-specials guarantee.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "sara/masking.hpp"
#include "support/oracles.hpp"

using namespace sara;
using sara::testing::base_vocab_tokens;

namespace {

struct Fixture {
  Vocabulary vocab = Vocabulary::from_tokens(base_vocab_tokens(
      {"alice", "bob", "hello", "there", "walk", "##ing"}));
  DialogueInstance inst;
  TokenSequence seq;

  Fixture() {
    inst.id = "fix";
    inst.turns = {{"alice", "hello there"}, {"bob", "walking"}};
    inst.graphs = {parse_penman("(h / greet-01 :arg0 (p / person))"),
                   parse_penman("(w / walk-01)")};
    inst.alignments = {{{"h", {0}}, {"p", {1}}}, {{"w", {0}}}};
    seq = format_dialogue(inst, vocab);
    // Layout: [CLS] [Utter_1] alice hello there [Utter_2] bob walk ##ing [SEP]
    // Text positions: 3 "hello", 4 "there", 7 "walk", 8 "##ing".
  }

  Alignment align(std::map<std::string, std::set<std::size_t>> pairs) const {
    Alignment a;
    a.pairs = std::move(pairs);
    return a;
  }
};

void check_consistent(const MaskPattern& p, const TokenSequence& seq,
                      const Vocabulary& vocab) {
  REQUIRE(p.original_ids.size() == p.count());
  REQUIRE(p.actions.size() == p.count());
  REQUIRE(p.from_semantic.size() == p.count());
  REQUIRE(p.corrupted_ids.size() == seq.length());
  CHECK(std::is_sorted(p.positions.begin(), p.positions.end()));
  std::set<std::size_t> at(p.positions.begin(), p.positions.end());
  CHECK(at.size() == p.count());  // no duplicates
  for (std::size_t i = 0; i < p.count(); ++i) {
    const std::size_t pos = p.positions[i];
    CHECK(seq.maskable(pos, vocab));
    CHECK(p.original_ids[i] == seq.ids[pos]);
    switch (p.actions[i]) {
      case MaskAction::Mask:
        CHECK(p.corrupted_ids[pos] == vocab.mask_id());
        break;
      case MaskAction::Random:
        CHECK(!vocab.is_special_id(p.corrupted_ids[pos]));
        break;
      case MaskAction::Keep:
        CHECK(p.corrupted_ids[pos] == seq.ids[pos]);
        break;
    }
  }
  for (std::size_t pos = 0; pos < seq.length(); ++pos)
    if (!at.count(pos)) CHECK(p.corrupted_ids[pos] == seq.ids[pos]);
}

}  // namespace

TEST_SUITE("masking") {

TEST_CASE("config validation") {
  MaskingConfig ok;
  CHECK_NOTHROW(ok.validate());
  MaskingConfig c;
  c.semantic_rate = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MaskingConfig{};
  c.base_rate = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MaskingConfig{};
  c.mask_prob = 0.7;  // 0.7 + 0.1 + 0.1 != 1
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MaskingConfig{};
  c.mask_prob = 0.3;
  c.random_prob = 0.3;
  c.keep_prob = 0.4;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("same seed reproduces the same pattern") {
  const Fixture f;
  const Alignment a =
      f.align({{"u0.h", {3}}, {"u0.p", {4}}, {"u1.w", {7, 8}}});
  MaskingConfig cfg;
  cfg.semantic_rate = 0.5;
  cfg.base_rate = 0.3;
  Rng r1(derive_seed(42, 17, 3));
  Rng r2(derive_seed(42, 17, 3));
  const MaskPattern p1 = sample_semantic_mask(f.seq, f.vocab, a, cfg, r1);
  const MaskPattern p2 = sample_semantic_mask(f.seq, f.vocab, a, cfg, r2);
  CHECK(p1.positions == p2.positions);
  CHECK(p1.actions == p2.actions);
  CHECK(p1.corrupted_ids == p2.corrupted_ids);

  // Different steps re-sample: at least one of 100 steps must differ.
  bool any_different = false;
  for (std::uint64_t step = 0; step < 100 && !any_different; ++step) {
    Rng r(derive_seed(42, step, 3));
    const MaskPattern p = sample_semantic_mask(f.seq, f.vocab, a, cfg, r);
    any_different = p.positions != p1.positions || p.actions != p1.actions;
  }
  CHECK(any_different);
}

TEST_CASE("aligned words are masked as whole units") {
  const Fixture f;
  // "walking" is aligned only through its first subword (position 7); the
  // sampler must pull in "##ing" (position 8) so the word stays atomic.
  const Alignment a = f.align({{"u1.w", {7}}});
  MaskingConfig cfg;
  cfg.semantic_rate = 0.5;
  cfg.base_rate = 0.0;
  bool saw_masked_word = false;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    Rng rng(seed);
    const MaskPattern p = sample_semantic_mask(f.seq, f.vocab, a, cfg, rng);
    check_consistent(p, f.seq, f.vocab);
    const bool has7 = std::count(p.positions.begin(), p.positions.end(), 7);
    const bool has8 = std::count(p.positions.begin(), p.positions.end(), 8);
    CHECK(has7 == has8);
    if (has7) {
      saw_masked_word = true;
      for (bool sem : p.from_semantic) CHECK(sem);
    }
  }
  CHECK(saw_masked_word);
}

TEST_CASE("semantic tier selects exactly the aligned words at rate 1") {
  const Fixture f;
  const Alignment a = f.align({{"u0.h", {3}}});
  MaskingConfig cfg;
  cfg.semantic_rate = 1.0;
  cfg.base_rate = 0.0;
  Rng rng(7);
  const MaskPattern p = sample_semantic_mask(f.seq, f.vocab, a, cfg, rng);
  CHECK(p.positions == std::vector<std::size_t>{3});
  CHECK(p.from_semantic == std::vector<bool>{true});
}

TEST_CASE("base tier skips tokens that belong to aligned words") {
  const Fixture f;
  const Alignment a = f.align({{"u1.w", {7}}});
  MaskingConfig cfg;
  cfg.semantic_rate = 0.0;  // never take the aligned word itself
  cfg.base_rate = 1.0;      // take every remaining candidate
  Rng rng(7);
  const MaskPattern p = sample_semantic_mask(f.seq, f.vocab, a, cfg, rng);
  CHECK(p.positions == std::vector<std::size_t>{3, 4});
  CHECK(p.from_semantic == std::vector<bool>{false, false});
}

TEST_CASE("special, marker and speaker tokens are never selected") {
  const Fixture f;
  const Alignment a =
      f.align({{"u0.h", {3}}, {"u0.p", {4}}, {"u1.w", {7, 8}}});
  MaskingConfig cfg;
  cfg.semantic_rate = 1.0;
  cfg.base_rate = 1.0;
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    Rng rng(seed);
    const MaskPattern p = sample_semantic_mask(f.seq, f.vocab, a, cfg, rng);
    CHECK(p.positions == std::vector<std::size_t>{3, 4, 7, 8});
    check_consistent(p, f.seq, f.vocab);
  }
}

TEST_CASE("corruption honours degenerate splits") {
  const Fixture f;
  const Alignment a = f.align({{"u0.h", {3}}, {"u0.p", {4}}});
  MaskingConfig all_mask;
  all_mask.semantic_rate = 1.0;
  all_mask.mask_prob = 1.0;
  all_mask.random_prob = 0.0;
  all_mask.keep_prob = 0.0;
  Rng r1(3);
  const MaskPattern pm = sample_semantic_mask(f.seq, f.vocab, a, all_mask, r1);
  for (MaskAction act : pm.actions) CHECK(act == MaskAction::Mask);
  CHECK(pm.corrupted_ids[3] == f.vocab.mask_id());

  MaskingConfig all_keep = all_mask;
  all_keep.mask_prob = 0.0;
  all_keep.keep_prob = 1.0;
  Rng r2(3);
  const MaskPattern pk = sample_semantic_mask(f.seq, f.vocab, a, all_keep, r2);
  CHECK(pk.corrupted_ids == f.seq.ids);
  for (MaskAction act : pk.actions) CHECK(act == MaskAction::Keep);

  MaskingConfig all_random = all_mask;
  all_random.mask_prob = 0.0;
  all_random.random_prob = 1.0;
  Rng r3(3);
  const MaskPattern pr =
      sample_semantic_mask(f.seq, f.vocab, a, all_random, r3);
  for (std::size_t i = 0; i < pr.count(); ++i) {
    CHECK(pr.actions[i] == MaskAction::Random);
    CHECK(!f.vocab.is_special_id(pr.corrupted_ids[pr.positions[i]]));
  }
}

TEST_CASE("corruption split is near 80/10/10 in the long run") {
  const Fixture f;
  const Alignment a = f.align({{"u0.h", {3}}});
  MaskingConfig cfg;
  cfg.semantic_rate = 1.0;
  std::size_t mask = 0, random = 0, keep = 0, total = 0;
  Rng rng(99);
  for (int trial = 0; trial < 20000; ++trial) {
    const MaskPattern p = sample_semantic_mask(f.seq, f.vocab, a, cfg, rng);
    REQUIRE(p.count() == 1);
    ++total;
    switch (p.actions[0]) {
      case MaskAction::Mask: ++mask; break;
      case MaskAction::Random: ++random; break;
      case MaskAction::Keep: ++keep; break;
    }
  }
  CHECK(std::abs(double(mask) / total - 0.8) < 0.02);
  CHECK(std::abs(double(random) / total - 0.1) < 0.02);
  CHECK(std::abs(double(keep) / total - 0.1) < 0.02);
}

TEST_CASE("vanilla masking hits every maskable token at rate 1") {
  const Fixture f;
  MaskingConfig cfg;
  Rng r1(5);
  const MaskPattern all = sample_vanilla_mask(f.seq, f.vocab, 1.0, cfg, r1);
  CHECK(all.positions == std::vector<std::size_t>{3, 4, 7, 8});
  CHECK(all.from_semantic == std::vector<bool>{false, false, false, false});
  check_consistent(all, f.seq, f.vocab);

  Rng r2(5);
  const MaskPattern none = sample_vanilla_mask(f.seq, f.vocab, 0.0, cfg, r2);
  CHECK(none.count() == 0);
  CHECK(none.corrupted_ids == f.seq.ids);

  Rng r3(5);
  CHECK_THROWS_AS(sample_vanilla_mask(f.seq, f.vocab, 1.2, cfg, r3),
                  ConfigError);
}

TEST_CASE("out-of-range alignment tokens are rejected") {
  const Fixture f;
  const Alignment a = f.align({{"u0.h", {99}}});
  MaskingConfig cfg;
  Rng rng(1);
  CHECK_THROWS_AS(sample_semantic_mask(f.seq, f.vocab, a, cfg, rng),
                  DataError);
}

TEST_CASE("a specials-only vocabulary cannot support corruption") {
  const Vocabulary specials = Vocabulary::from_tokens(base_vocab_tokens({}));
  DialogueInstance inst;
  inst.id = "s";
  inst.turns = {{"alice", "hi"}};
  const TokenSequence seq = format_dialogue(inst, specials);
  MaskingConfig cfg;
  Rng rng(1);
  CHECK_THROWS_AS(sample_vanilla_mask(seq, specials, 0.5, cfg, rng),
                  ConfigError);
}

}  // TEST_SUITE
