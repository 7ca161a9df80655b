#include <gtest/gtest.h>

#include <random>

#include "editroom/command.hpp"
#include "editroom/error.hpp"

using namespace editroom;

namespace {

ParseError::Kind parse_error_kind(std::string_view text) {
  try {
    parse_template_command(text);
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a parse error for: " << text;
  return ParseError::Kind::UnknownTemplate;
}

std::size_t parse_error_offset(std::string_view text) {
  try {
    parse_template_command(text);
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected a parse error for: " << text;
  return 0;
}

std::string random_desc(std::mt19937_64& rng) {
  static const char* words[] = {"a", "the", "red", "wooden", "double", "bed", "chair", "lamp", "3-seat", "sofa",
                                "Oak", "desk", "with", "drawers", "to", "location"};
  std::uniform_int_distribution<int> len(1, 5), pick(0, std::size(words) - 1);
  std::string out;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += words[pick(rng)];
  }
  return out;
}

std::optional<RelativeLocation> random_rel(std::mt19937_64& rng, bool required = false, bool horizontal = false) {
  std::bernoulli_distribution coin(0.5);
  if (!required && coin(rng)) return std::nullopt;
  std::uniform_int_distribution<int> rel(0, horizontal ? 7 : 9);
  return RelativeLocation{static_cast<SpatialRelation>(rel(rng)), random_desc(rng)};
}

EditCommand random_command(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto ref = [&] { return ObjectRef{random_desc(rng), random_rel(rng)}; };
  switch (kind(rng)) {
    case 0: {
      double a = std::round((u(rng) * 360.0 - 180.0) * 1000.0) / 1000.0;
      if (a == 0.0) a = 15.0;
      return RotateCmd{ref(), a};
    }
    case 1: {
      std::uniform_int_distribution<int> d(0, 3);
      return TranslateCmd{ref(), static_cast<Direction>(d(rng)), 0.01 + u(rng) * 19.99};
    }
    case 2: return ScaleCmd{ref(), 0.05 + u(rng) * 9.95};
    case 3: return ReplaceCmd{ref(), random_desc(rng)};
    case 4: return AddCmd{random_desc(rng), *random_rel(rng, true, true)};
    default: return RemoveCmd{ref()};
  }
}

}  // namespace

TEST(ParseTemplate, TranslateExample) {
  const auto cmd = parse_template_command("Move object towards the left direction for 0.5 meters : a wooden double bed");
  const auto& t = std::get<TranslateCmd>(cmd);
  EXPECT_EQ(t.direction, Direction::Left);
  EXPECT_EQ(t.distance_m, 0.5);
  EXPECT_EQ(t.target.description, "a wooden double bed");
  EXPECT_FALSE(t.target.relative.has_value());
}

TEST(ParseTemplate, RotateExample) {
  const auto cmd = parse_template_command("Rotate object 90 degrees : a red armchair");
  EXPECT_EQ(std::get<RotateCmd>(cmd).angle_degrees, 90.0);
  EXPECT_EQ(std::get<RotateCmd>(cmd).target.description, "a red armchair");
}

TEST(ParseTemplate, EnlargeExample) {
  const auto cmd = parse_template_command("Enlarge object by 1.3 times : a round coffee table");
  EXPECT_EQ(std::get<ScaleCmd>(cmd).factor, 1.3);
}

TEST(ParseTemplate, UnknownTemplate) {
  EXPECT_EQ(parse_error_kind("Translate object sideways : bed"), ParseError::Kind::UnknownTemplate);
  EXPECT_EQ(parse_error_kind(""), ParseError::Kind::UnknownTemplate);
  EXPECT_EQ(parse_error_kind("Move the bed"), ParseError::Kind::UnknownTemplate);
}

TEST(ParseTemplate, MalformedFieldsCarryOffsets) {
  const std::string text = "Rotate object ninety degrees : a chair";
  EXPECT_EQ(parse_error_kind(text), ParseError::Kind::MalformedField);
  EXPECT_EQ(parse_error_offset(text), text.find("ninety"));
  const std::string dir = "Move object towards the up direction for 1 meters : a bed";
  EXPECT_EQ(parse_error_kind(dir), ParseError::Kind::MalformedField);
  EXPECT_EQ(parse_error_offset(dir), dir.find("up"));
  EXPECT_EQ(parse_error_kind("Remove [a bed"), ParseError::Kind::MalformedField);
  EXPECT_EQ(parse_error_kind("Remove []"), ParseError::Kind::MalformedField);
  EXPECT_EQ(parse_error_kind("Remove [a bed] extra"), ParseError::Kind::MalformedField);
  EXPECT_EQ(parse_error_kind("Add [a lamp] location: [on top of] [the bed]"), ParseError::Kind::MalformedField);
  EXPECT_EQ(parse_error_kind("Add [a lamp]"), ParseError::Kind::MalformedField);
  EXPECT_EQ(parse_error_kind("Rotate object 30 degrees : "), ParseError::Kind::MalformedField);
}

TEST(ParseTemplate, OutOfRangeValues) {
  EXPECT_EQ(parse_error_kind("Rotate object 0 degrees : a chair"), ParseError::Kind::OutOfRangeValue);
  EXPECT_EQ(parse_error_kind("Rotate object 181 degrees : a chair"), ParseError::Kind::OutOfRangeValue);
  EXPECT_EQ(parse_error_kind("Move object towards the left direction for 0 meters : a bed"),
            ParseError::Kind::OutOfRangeValue);
  EXPECT_EQ(parse_error_kind("Move object towards the left direction for 20.5 meters : a bed"),
            ParseError::Kind::OutOfRangeValue);
  EXPECT_EQ(parse_error_kind("Enlarge object by 11 times : a bed"), ParseError::Kind::OutOfRangeValue);
  EXPECT_EQ(parse_error_kind("Shrink object by 1.2 times : a bed"), ParseError::Kind::OutOfRangeValue);
  EXPECT_EQ(parse_error_kind("Enlarge object by 0.5 times : a bed"), ParseError::Kind::OutOfRangeValue);
  EXPECT_EQ(parse_error_kind("Add [a lamp] location: [above] [the bed]"), ParseError::Kind::OutOfRangeValue);
  EXPECT_NO_THROW(parse_template_command("Rotate object -180 degrees : a chair"));
  EXPECT_NO_THROW(parse_template_command("Move object towards the back direction for 20 meters : a bed"));
  EXPECT_NO_THROW(parse_template_command("Enlarge object by 10 times : a bed"));
}

TEST(ParseTemplate, WhitespaceAndCaseInsensitive) {
  const auto a = parse_template_command("Move object towards the left direction for 0.5 meters : a wooden double bed");
  const auto b =
      parse_template_command("  move   OBJECT towards THE Left direction\tfor 0.5 meters:   a  wooden double bed  ");
  EXPECT_EQ(a, b);
}

TEST(ParseTemplate, RelativeReference) {
  const auto cmd = parse_template_command(
      "Rotate object -45 degrees : a black dining chair location: [closely left of] [the wooden writing desk]");
  const auto& r = std::get<RotateCmd>(cmd);
  EXPECT_EQ(r.target.description, "a black dining chair");
  ASSERT_TRUE(r.target.relative.has_value());
  EXPECT_EQ(r.target.relative->relation, SpatialRelation::CloselyLeftOf);
  EXPECT_EQ(r.target.relative->reference_desc, "the wooden writing desk");
}

TEST(ParseTemplate, AddReplaceRemove) {
  const auto add = std::get<AddCmd>(parse_template_command("Add [a brass floor lamp] location: [right of] [a bed]"));
  EXPECT_EQ(add.target_desc, "a brass floor lamp");
  EXPECT_EQ(add.location.relation, SpatialRelation::RightOf);
  EXPECT_EQ(add.location.reference_desc, "a bed");
  const auto rep =
      std::get<ReplaceCmd>(parse_template_command("Replace source with target : [a red office chair] to [a black chair]"));
  EXPECT_EQ(rep.source.description, "a red office chair");
  EXPECT_EQ(rep.target_desc, "a black chair");
  const auto rem = std::get<RemoveCmd>(parse_template_command("Remove [a pendant lamp]"));
  EXPECT_EQ(rem.target.description, "a pendant lamp");
}

TEST(FormatTemplate, Examples) {
  EXPECT_EQ(format_template_command(RemoveCmd{{"a pendant lamp", {}}}), "Remove [a pendant lamp]");
  EXPECT_EQ(format_template_command(ReplaceCmd{{"a red chair", {}}, "a blue armchair"}),
            "Replace source with target : [a red chair] to [a blue armchair]");
  EXPECT_EQ(format_template_command(TranslateCmd{{"a wooden double bed", {}}, Direction::Left, 0.5}),
            "Move object towards the left direction for 0.5 meters : a wooden double bed");
  EXPECT_EQ(format_template_command(ScaleCmd{{"a bed", {}}, 0.7}), "Shrink object by 0.7 times : a bed");
  EXPECT_EQ(format_template_command(ScaleCmd{{"a bed", {}}, 1.0}), "Enlarge object by 1 times : a bed");
  EXPECT_EQ(format_template_command(RotateCmd{{"a bed", RelativeLocation{SpatialRelation::Behind, "a desk"}}, -90}),
            "Rotate object -90 degrees : a bed location: [behind] [a desk]");
  EXPECT_EQ(format_template_command(AddCmd{"a lamp", {SpatialRelation::CloselyLeftOf, "the bed"}}),
            "Add [a lamp] location: [closely left of] [the bed]");
}

TEST(FormatTemplate, RejectsInvalidCommands) {
  EXPECT_THROW(format_template_command(RotateCmd{{"a bed", {}}, 0.0}), ParseError);
  EXPECT_THROW(format_template_command(ScaleCmd{{"a bed", {}}, 0.0}), ParseError);
  EXPECT_THROW(format_template_command(RemoveCmd{{"", {}}}), ParseError);
  EXPECT_THROW(format_template_command(RemoveCmd{{"a [bed]", {}}}), ParseError);
  EXPECT_THROW(format_template_command(AddCmd{"a lamp", {SpatialRelation::Below, "the bed"}}), ParseError);
}

TEST(FormatTemplate, RoundTripRandomCommands) {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const EditCommand cmd = random_command(rng);
    const std::string text = format_template_command(cmd);
    const EditCommand back = parse_template_command(text);
    ASSERT_EQ(back, cmd) << text;
    // Canonical strings are fixed points of format . parse.
    ASSERT_EQ(format_template_command(back), text);
  }
}

TEST(FormatDecimal, ShortestRoundTrip) {
  EXPECT_EQ(format_decimal(0.5), "0.5");
  EXPECT_EQ(format_decimal(90.0), "90");
  EXPECT_EQ(format_decimal(-12.25), "-12.25");
  EXPECT_EQ(format_decimal(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_decimal(1e-5), "0.00001");
}

TEST(EditType, Names) {
  for (int i = 0; i < kNumEditTypes; ++i) {
    const auto t = static_cast<EditType>(i);
    EXPECT_EQ(edit_type_from_string(to_string(t)), t);
  }
  EXPECT_EQ(edit_type(EditCommand{RemoveCmd{}}), EditType::Remove);
}
