#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "adact/checkpoint.hpp"
#include "adact/gradcheck.hpp"

using namespace adact;

TEST_CASE("checkpoint round trip is exact for every preset and kind") {
  const auto dir = std::filesystem::temp_directory_path() / "adact_ckpt_test";
  std::filesystem::create_directories(dir);
  Rng rng(1);
  for (const auto& preset : preset_names())
    for (const auto& kind : all_activation_kinds()) {
      Model m = init(gradcheck_spec(preset, kind), rng);
      randomise_for_gradcheck(m, rng);
      const auto path = dir / "ck.json";
      save_checkpoint(path, m, 987654321012345ULL);
      auto loaded = load_checkpoint(path);
      CHECK(loaded.seed == 987654321012345ULL);
      CHECK(loaded.model.spec() == m.spec());
      auto a = m.parameters(), b = loaded.model.parameters();
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(*a[i].value == *b[i].value);
      }
    }
  std::filesystem::remove_all(dir);
}

TEST_CASE("awkward doubles survive") {
  Rng rng(2);
  Model m = init(make_preset("mlp-2", {2}, 2, ActivationKind::atanh()), rng);
  m.activation_sites()[0]->set_adaptive_params({0.1, 1.0 / 3.0, 5e-324, -1.7976931348623157e308});
  const auto back = checkpoint_from_json(nlohmann::json::parse(checkpoint_to_json(m, 3).dump()));
  CHECK(back.model.activation_sites()[0]->adaptive_params() == m.activation_sites()[0]->adaptive_params());
}

TEST_CASE("malformed checkpoints are format errors") {
  Rng rng(3);
  Model m = init(make_preset("mlp-2", {2}, 2, ActivationKind::arelu()), rng);
  const auto good = checkpoint_to_json(m, 1);

  auto wrong_format = good;
  wrong_format["format"] = "something-else";
  CHECK_THROWS_AS(checkpoint_from_json(wrong_format), FormatError);

  auto wrong_version = good;
  wrong_version["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(wrong_version), FormatError);

  auto short_values = good;
  short_values["params"][0]["values"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(short_values), FormatError);

  auto renamed = good;
  renamed["params"][1]["name"] = "layer9.b";
  CHECK_THROWS_AS(checkpoint_from_json(renamed), FormatError);

  auto bad_spec = good;
  bad_spec["spec"]["classes"] = 7;
  CHECK_THROWS_AS(checkpoint_from_json(bad_spec), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "adact_bad_ckpt.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}
