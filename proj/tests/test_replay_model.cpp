#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "seqdec/replay_model.hpp"
#include "seqdec/scorers.hpp"

using namespace seqdec;

namespace {

SyntheticConfig base_config(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.vocab_size = 6;
  cfg.transcript_length = 8;
  cfg.sharpness = 20.0;
  cfg.distractor_count = 2;
  return cfg;
}

std::string serialize(const PrefixTableModel& m) {
  std::ostringstream oss;
  m.save(oss);
  return oss.str();
}

}  // namespace

TEST_CASE("step looks up the table and falls back uniformly") {
  Vocabulary v = Vocabulary::synthetic(4);
  std::map<std::vector<int>, PrefixTableModel::Entry> table;
  table[{}] = {{1.0, 2.0, 3.0, 0.0}, {1.0, 0.0}};
  PrefixTableModel strict(v, 2, table, {}, /*fallback=*/false);
  CHECK(strict.step(std::vector<int>{}).logits[2] == 3.0);
  CHECK_THROWS(strict.step(std::vector<int>{0}));

  PrefixTableModel loose(v, 2, table, {}, /*fallback=*/true);
  auto e = loose.step(std::vector<int>{0, 1});
  auto d = normalize_logits(e.logits);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK_THAT(std::exp(d.logp[i]), Catch::Matchers::WithinAbs(0.25, 1e-12));
  CHECK_THAT(e.attention[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("same seed produces byte-identical serialized models") {
  auto cfg = base_config(7);
  CHECK(serialize(generate_synthetic(cfg)) == serialize(generate_synthetic(cfg)));
  cfg.seed = 8;
  CHECK(serialize(generate_synthetic(base_config(7))) != serialize(generate_synthetic(cfg)));
}

TEST_CASE("sharp models put >0.99 on the correct token at every reference step") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    auto model = generate_synthetic(base_config(seed));
    const auto& ref = model.reference();
    for (std::size_t i = 0; i <= ref.size(); ++i) {
      std::vector<int> prefix(ref.begin(), ref.begin() + static_cast<long>(std::min(i, ref.size())));
      auto d = normalize_logits(model.step(prefix).logits);
      const int correct = i < ref.size() ? ref[i] : model.vocab().eos_index();
      CHECK(d.prob(correct) > 0.99);
      CHECK(d.argmax() == correct);
    }
  }
}

TEST_CASE("full reference prefix emits EOS as argmax") {
  auto model = generate_synthetic(base_config(11));
  auto d = normalize_logits(model.step(model.reference()).logits);
  CHECK(d.argmax() == model.vocab().eos_index());
}

TEST_CASE("truncation trap plants an early EOS within 0.5 nats of the top") {
  auto cfg = base_config(21);
  cfg.truncation_trap = true;
  auto model = generate_synthetic(cfg);
  bool found = false;
  for (std::size_t i = 1; i < model.reference().size(); ++i) {
    std::vector<int> prefix(model.reference().begin(),
                            model.reference().begin() + static_cast<long>(i));
    auto d = normalize_logits(model.step(prefix).logits);
    const double top = d.logp[static_cast<std::size_t>(d.argmax())];
    const double gap = top - d.logp[static_cast<std::size_t>(model.vocab().eos_index())];
    if (d.argmax() != model.vocab().eos_index() && gap < 0.5) {
      CHECK(eos_allowed(d, 1.0, model.vocab().eos_index()));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("reference log-probability is log-additive over step lookups") {
  auto model = generate_synthetic(base_config(33));
  const auto& ref = model.reference();
  double total = 0.0;
  double product = 1.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    std::vector<int> prefix(ref.begin(), ref.begin() + static_cast<long>(i));
    auto d = normalize_logits(model.step(prefix).logits);
    total += d.logp[static_cast<std::size_t>(ref[i])];
    product *= d.prob(ref[i]);
  }
  CHECK_THAT(std::exp(total), Catch::Matchers::WithinAbs(product, 1e-9));
}

TEST_CASE("reference path covers at least 90% of frames at tau=0.5") {
  for (std::uint64_t seed : {3ull, 14ull, 159ull}) {
    auto model = generate_synthetic(base_config(seed));
    AttentionTrace trace;
    trace.frame_count = model.frame_count();
    const auto& ref = model.reference();
    for (std::size_t i = 0; i <= ref.size(); ++i) {
      std::vector<int> prefix(ref.begin(), ref.begin() + static_cast<long>(std::min(i, ref.size())));
      trace.append(model.step(prefix).attention);
    }
    CHECK(coverage(trace, 0.5) >= static_cast<int>(0.9 * model.frame_count()));
  }
}

TEST_CASE("save/load round trip") {
  auto cfg = base_config(55);
  cfg.truncation_trap = true;
  auto model = generate_synthetic(cfg);
  std::string bytes = serialize(model);
  std::istringstream iss(bytes);
  auto copy = PrefixTableModel::load(iss);
  CHECK(copy.reference() == model.reference());
  CHECK(copy.frame_count() == model.frame_count());
  REQUIRE(copy.table().size() == model.table().size());
  for (const auto& [prefix, entry] : model.table()) {
    const auto& other = copy.table().at(prefix);
    CHECK(other.logits == entry.logits);  // shortest-repr doubles round-trip exactly
    CHECK(other.attention == entry.attention);
  }
}

TEST_CASE("malformed model files are rejected with the violated invariant") {
  auto model = generate_synthetic(base_config(70));
  std::istringstream stream(serialize(model));
  std::string header, first;
  std::getline(stream, header);
  std::getline(stream, first);

  SECTION("missing empty prefix") {
    // the first record after the header is the empty prefix
    std::string rest((std::istreambuf_iterator<char>(stream)), {});
    std::istringstream bad(header + "\n" + rest);
    CHECK_THROWS_WITH(PrefixTableModel::load(bad),
                      Catch::Matchers::ContainsSubstring("empty prefix"));
  }
  SECTION("duplicate prefix") {
    std::istringstream bad(header + "\n" + first + "\n" + first + "\n");
    CHECK_THROWS_WITH(PrefixTableModel::load(bad),
                      Catch::Matchers::ContainsSubstring("duplicate prefix"));
  }
  SECTION("ragged attention row") {
    nlohmann::json rec = nlohmann::json::parse(first);
    rec["attention"].push_back(0.0);
    std::istringstream bad(header + "\n" + rec.dump() + "\n");
    CHECK_THROWS(PrefixTableModel::load(bad));
  }
  SECTION("missing header") {
    std::istringstream bad("");
    CHECK_THROWS(PrefixTableModel::load(bad));
  }
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  cfg.transcript_length = 0;
  CHECK_THROWS(generate_synthetic(cfg));
  cfg = SyntheticConfig{};
  cfg.vocab_size = 1;
  CHECK_THROWS(generate_synthetic(cfg));
  cfg = SyntheticConfig{};
  cfg.sharpness = 0.0;
  CHECK_THROWS(generate_synthetic(cfg));
  cfg = SyntheticConfig{};
  cfg.transcript_length = 4;
  cfg.truncation_trap = true;
  CHECK_THROWS(generate_synthetic(cfg));
}
