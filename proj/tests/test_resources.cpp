#include <gtest/gtest.h>

#include <fstream>

#include "fairenc/check/criteria.hpp"
#include "fairenc/datamodel.hpp"
#include "fairenc/notes.hpp"
#include "fairenc/runner.hpp"

using namespace fairenc;
namespace fs = std::filesystem;

namespace {

const fs::path kRes = FAIRENC_RESOURCES_DIR;

nlohmann::json read(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

// The shipped files are documentation of the in-code defaults; keep them in sync.
TEST(Resources, TemplateBankMatchesBuiltin) {
  EXPECT_EQ(TemplateBank::load(kRes / "note_templates.json"), TemplateBank::builtin());
}

TEST(Resources, SchemasMatchDefaults) {
  EXPECT_EQ(AttributeSchema::load(kRes / "schema_race_gender.json"), AttributeSchema::two_attribute_default());
  EXPECT_EQ(AttributeSchema::load(kRes / "schema_four_attributes.json"), AttributeSchema::four_attribute_default());
}

TEST(Resources, DefaultSpecAndConfig) {
  const AttributeSchema s = AttributeSchema::two_attribute_default();
  EXPECT_EQ(SyntheticSpec::from_json(read(kRes / "synthetic_default.json"), s), SyntheticSpec{});
  RunConfig expected;
  expected.dataset = (kRes / "configs/../data/synthetic_default.jsonl").lexically_normal().string();
  EXPECT_EQ(RunConfig::load(kRes / "configs/default.json").to_json(false), expected.to_json(false));
}

TEST(Resources, DemoConfigsMatchCode) {
  const check::DemoOptions opt;
  const AttributeSchema s = AttributeSchema::two_attribute_default();
  EXPECT_EQ(SyntheticSpec::from_json(read(kRes / "demo/synthetic_demo.json"), s), check::demo_synthetic_spec(opt));
  for (const auto& [file, full] : {std::pair{"demo/full.json", true}, {"demo/baseline.json", false}}) {
    RunConfig c = RunConfig::from_json(read(kRes / file));
    RunConfig e = check::demo_run_config(opt, 0, full);
    c.dataset = e.dataset = c.out_dir = e.out_dir = "";
    EXPECT_EQ(c, e) << file;
  }
}
