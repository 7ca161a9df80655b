#include <gtest/gtest.h>

#include <random>

#include "editroom/error.hpp"
#include "editroom/executor.hpp"
#include "editroom/geometry.hpp"
#include "test_support.hpp"

using namespace editroom;
using editroom::testing::cat;
using editroom::testing::make_object;

namespace {

const ObjectCatalog& catalog() { return builtin_catalog(); }

SceneObject from_caption(std::string id, std::string_view caption, Vec3 xz_pos, double yaw = 0.0) {
  for (const auto& p : catalog().prototypes)
    if (p.caption == caption) {
      SceneObject o;
      o.id = std::move(id);
      o.category = p.category;
      o.caption = p.caption;
      o.feature_indices = p.feature_indices;
      o.half_extents = p.half_extents;
      o.position = {xz_pos.x, p.half_extents.y, xz_pos.z};
      o.yaw = yaw;
      return o;
    }
  throw std::runtime_error("no prototype " + std::string(caption));
}

Scene bedroom() {
  Scene s;
  s.objects.push_back(from_caption("bed_0", "a wooden double bed", {-1.0, 0, 0.5}));
  s.objects.push_back(from_caption("floor_lamp_0", "a brass floor lamp", {1.5, 0, 1.5}));
  s.objects.push_back(from_caption("desk_0", "a wooden writing desk", {1.0, 0, -1.5}));
  return s;
}

EditError::Kind edit_error_kind(const Scene& s, const EditCommand& cmd, const EditOptions& opt = {}) {
  try {
    apply_edit(s, cmd, catalog(), opt);
  } catch (const EditError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an edit error";
  return EditError::Kind::NoMatch;
}

// Number of objects whose fields differ between two equally sized scenes.
int changed_objects(const Scene& a, const Scene& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.objects.size(); ++i) n += !(a.objects[i] == b.objects[i]);
  return n;
}

ObjectRef ref(std::string d) { return {std::move(d), {}}; }

}  // namespace

TEST(ResolveObject, Examples) {
  const Scene s = bedroom();
  EXPECT_EQ(resolve_object(s, ref("bed"), catalog()), "bed_0");
  EXPECT_EQ(resolve_object(s, ref("the lamp"), catalog()), "floor_lamp_0");
  EXPECT_EQ(resolve_object(s, ref("a wooden writing desk"), catalog()), "desk_0");
  EXPECT_THROW(resolve_object(s, ref("piano"), catalog()), EditError);
  try {
    resolve_object(s, ref("piano"), catalog());
  } catch (const EditError& e) {
    EXPECT_EQ(e.kind(), EditError::Kind::NoMatch);
  }
}

TEST(ResolveObject, PrefersFewerExtraTokens) {
  Scene s;
  s.objects.push_back(from_caption("a", "a wooden writing desk", {-1, 0, 0}));
  s.objects.push_back(from_caption("b", "a wooden folding chair", {1, 0, 0}));
  // "wooden" ties on overlap; the chair caption has the same extras, so lowest index wins.
  EXPECT_EQ(resolve_object(s, ref("wooden"), catalog()), "a");
  EXPECT_EQ(resolve_object(s, ref("wooden chair"), catalog()), "b");
}

TEST(ResolveObject, RelativeDisambiguation) {
  Scene s;
  s.objects.push_back(from_caption("desk_0", "a wooden writing desk", {0, 0, -1.2}));
  s.objects.push_back(from_caption("chair_0", "a black dining chair", {1.0, 0, -1.0}));
  s.objects.push_back(from_caption("chair_1", "a black dining chair", {-0.9, 0, -1.0}));
  ObjectRef r{"a black dining chair", RelativeLocation{SpatialRelation::CloselyLeftOf, "the desk"}};
  EXPECT_EQ(resolve_object(s, r, catalog()), "chair_1");
  r.relative->relation = SpatialRelation::CloselyRightOf;
  EXPECT_EQ(resolve_object(s, r, catalog()), "chair_0");
  // Without a relative, the lowest index wins.
  EXPECT_EQ(resolve_object(s, ref("a black dining chair"), catalog()), "chair_0");
  EXPECT_EQ(match_candidates(s, "a black dining chair", catalog()).size(), 2u);
}

TEST(ApplyEdit, TranslateInverseFieldExact) {
  const Scene s = bedroom();
  const auto moved = apply_edit(s, TranslateCmd{ref("the bed"), Direction::Left, 0.5}, catalog());
  EXPECT_EQ(moved.objects[0].position.x, -1.5);
  EXPECT_EQ(changed_objects(s, moved), 1);
  const auto back = apply_edit(moved, TranslateCmd{ref("the bed"), Direction::Right, 0.5}, catalog());
  EXPECT_EQ(back, s);
}

TEST(ApplyEdit, TranslateAxes) {
  const Scene s = bedroom();
  const Vec3 p = s.objects[1].position;
  auto moved = [&](Direction d) {
    return apply_edit(s, TranslateCmd{ref("lamp"), d, 0.25}, catalog()).objects[1].position;
  };
  EXPECT_EQ(moved(Direction::Front), (Vec3{p.x, p.y, p.z + 0.25}));
  EXPECT_EQ(moved(Direction::Back), (Vec3{p.x, p.y, p.z - 0.25}));
  EXPECT_EQ(moved(Direction::Left), (Vec3{p.x - 0.25, p.y, p.z}));
  EXPECT_EQ(moved(Direction::Right), (Vec3{p.x + 0.25, p.y, p.z}));
}

TEST(ApplyEdit, RotateHalfTurnTwice) {
  Scene s = bedroom();
  s.objects[0].yaw = 0.3;
  const auto once = apply_edit(s, RotateCmd{ref("bed"), 180}, catalog());
  EXPECT_NEAR(once.objects[0].yaw, 0.3 - kPi, 1e-12);
  const auto twice = apply_edit(once, RotateCmd{ref("bed"), 180}, catalog());
  EXPECT_NEAR(twice.objects[0].yaw, 0.3, 1e-12);
  EXPECT_EQ(changed_objects(s, twice), s.objects[0].yaw == twice.objects[0].yaw ? 0 : 1);
}

TEST(ApplyEdit, RotatePositiveIsCounterClockwise) {
  const Scene s = bedroom();
  const auto r = apply_edit(s, RotateCmd{ref("bed"), 90}, catalog());
  EXPECT_NEAR(r.objects[0].yaw, kPi / 2, 1e-15);
}

TEST(ApplyEdit, ScaleKeepsFloorContact) {
  Scene s;
  s.objects.push_back(make_object("box", cat("cabinet"), {0, 0.5, 0}, {0.5, 0.5, 0.5}));
  const auto r = apply_edit(s, ScaleCmd{ref("cabinet"), 2.0}, catalog());
  EXPECT_EQ(r.objects[0].half_extents, (Vec3{1, 1, 1}));
  EXPECT_EQ(r.objects[0].position.y, 1.0);
  EXPECT_EQ(r.objects[0].min_y(), 0.0);
}

TEST(ApplyEdit, ScaleInverseByReciprocal) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> f(0.2, 5.0);
  for (int t = 0; t < 200; ++t) {
    Scene s = editroom::testing::random_scene(rng, 4);
    const double factor = f(rng);
    const std::string desc = s.objects[2].caption;
    const auto id = resolve_object(s, ref(desc), catalog());
    const auto idx = *s.find(id);
    const auto a = apply_edit(s, ScaleCmd{ref(desc), factor}, catalog());
    EXPECT_NEAR(a.objects[idx].min_y(), s.objects[idx].min_y(), 1e-12);
    const auto b = apply_edit(a, ScaleCmd{ref(desc), 1.0 / factor}, catalog());
    EXPECT_NEAR(b.objects[idx].half_extents.x, s.objects[idx].half_extents.x, 1e-9);
    EXPECT_NEAR(b.objects[idx].half_extents.y, s.objects[idx].half_extents.y, 1e-9);
    EXPECT_NEAR(b.objects[idx].half_extents.z, s.objects[idx].half_extents.z, 1e-9);
    EXPECT_NEAR(b.objects[idx].position.y, s.objects[idx].position.y, 1e-9);
    EXPECT_LE(changed_objects(s, a), 1);
  }
}

TEST(ApplyEdit, TranslateAndRotateInvertibleOnRandomScenes) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.01, 3.0), ang(-180.0, 180.0);
  for (int t = 0; t < 200; ++t) {
    Scene s = editroom::testing::random_scene(rng, 5);
    const std::string desc = s.objects[t % 5].caption;
    const auto idx = *s.find(resolve_object(s, ref(desc), catalog()));
    const double d = dist(rng);
    const auto a = apply_edit(s, TranslateCmd{ref(desc), Direction::Front, d}, catalog());
    const auto b = apply_edit(a, TranslateCmd{ref(desc), Direction::Back, d}, catalog());
    EXPECT_NEAR(b.objects[idx].position.z, s.objects[idx].position.z, 1e-9);
    EXPECT_EQ(changed_objects(s, a), 1);
    const double deg = ang(rng);
    const auto c = apply_edit(s, RotateCmd{ref(desc), deg}, catalog());
    const auto e = apply_edit(c, RotateCmd{ref(desc), -deg}, catalog());
    EXPECT_NEAR(std::remainder(e.objects[idx].yaw - s.objects[idx].yaw, 2 * kPi), 0.0, 1e-9);
    EXPECT_GE(c.objects[idx].yaw, -kPi);
    EXPECT_LT(c.objects[idx].yaw, kPi);
  }
}

TEST(ApplyEdit, RemoveDeletesOneObject) {
  const Scene s = bedroom();
  const auto r = apply_edit(s, RemoveCmd{ref("the floor lamp")}, catalog());
  ASSERT_EQ(r.objects.size(), 2u);
  EXPECT_EQ(r.objects[0], s.objects[0]);
  EXPECT_EQ(r.objects[1], s.objects[2]);
}

TEST(ApplyEdit, AddPlacesAdjacentInRelationDirection) {
  Scene s;
  s.objects.push_back(from_caption("bed_0", "a wooden double bed", {-0.5, 0, 0}));
  const auto r = apply_edit(s, AddCmd{"a small oak nightstand", {SpatialRelation::CloselyRightOf, "the bed"}},
                            catalog());
  ASSERT_EQ(r.objects.size(), 2u);
  EXPECT_EQ(r.objects[0], s.objects[0]);
  const auto& n = r.objects[1];
  EXPECT_EQ(n.caption, "a small oak nightstand");
  EXPECT_EQ(n.id, "nightstand_0");
  EXPECT_EQ(n.yaw, 0.0);
  // bed half width 0.8 + nightstand half width 0.25 + gap 0.1.
  EXPECT_NEAR(n.position.x, -0.5 + 0.8 + 0.25 + 0.1, 1e-12);
  EXPECT_EQ(n.position.z, 0.0);
  EXPECT_EQ(n.min_y(), 0.0);
  // Centers end up 1.15 m apart, so the realized relation is the far variant.
  EXPECT_EQ(classify_relation(n, r.objects[0]), SpatialRelation::RightOf);
}

TEST(ApplyEdit, AddFarRelationKeepsDistance) {
  Scene s;
  s.objects.push_back(from_caption("desk_0", "a wooden writing desk", {0, 0, -1.2}));
  const auto r = apply_edit(s, AddCmd{"a red office chair", {SpatialRelation::InFrontOf, "desk"}}, catalog());
  EXPECT_EQ(classify_relation(r.objects[1], r.objects[0]), SpatialRelation::InFrontOf);
}

TEST(ApplyEdit, AddStepsAroundObstacle) {
  Scene s;
  s.objects.push_back(from_caption("bed_0", "a wooden double bed", {-1.0, 0, 0}));
  s.objects.push_back(from_caption("chair_0", "a red office chair", {0.2, 0, 0}));
  const auto r = apply_edit(s, AddCmd{"a small oak nightstand", {SpatialRelation::CloselyRightOf, "the bed"}},
                            catalog());
  const auto& n = r.objects.back();
  EXPECT_GT(n.position.x, 0.2 + 0.28 + 0.25);
  EXPECT_TRUE(geometry::scene_collisions(r).empty());
  const double steps = (n.position.x - (-1.0 + 0.8 + 0.25 + 0.1)) / 0.1;
  EXPECT_NEAR(steps, std::round(steps), 1e-9);
}

TEST(ApplyEdit, AddFailures) {
  Scene s;
  s.objects.push_back(from_caption("bed_0", "a wooden double bed", {1.0, 0, 0}));
  EXPECT_EQ(edit_error_kind(s, AddCmd{"a tall white wardrobe", {SpatialRelation::RightOf, "bed"}}),
            EditError::Kind::PlacementFailed);
  EXPECT_EQ(edit_error_kind(s, AddCmd{"a piano", {SpatialRelation::LeftOf, "bed"}}), EditError::Kind::NoMatch);
  EXPECT_EQ(edit_error_kind(s, AddCmd{"a lamp", {SpatialRelation::LeftOf, "piano"}}), EditError::Kind::NoMatch);
  Scene full;
  for (int i = 0; i < 8; ++i)
    full.objects.push_back(from_caption("stool_" + std::to_string(i), "a round bar stool", {-1.75 + 0.5 * i, 0, 0}));
  EXPECT_EQ(edit_error_kind(full, AddCmd{"a brass floor lamp", {SpatialRelation::InFrontOf, "stool"}}),
            EditError::Kind::RoomFull);
}

TEST(ApplyEdit, ReplaceKeepsPoseAndId) {
  Scene s = bedroom();
  s.objects[0].yaw = 0.5;
  const auto r =
      apply_edit(s, ReplaceCmd{ref("the wooden double bed"), "a white single bed"}, catalog());
  const auto& b = r.objects[0];
  EXPECT_EQ(b.id, "bed_0");
  EXPECT_EQ(b.caption, "a white single bed");
  EXPECT_EQ(b.yaw, 0.5);
  EXPECT_EQ(b.position.x, s.objects[0].position.x);
  EXPECT_EQ(b.position.z, s.objects[0].position.z);
  EXPECT_EQ(b.min_y(), 0.0);
  EXPECT_EQ(b.half_extents, (Vec3{0.50, 0.25, 1.00}));
  EXPECT_EQ(changed_objects(s, r), 1);
}

TEST(ApplyEdit, ReplaceShrinksWhenBlocked) {
  Scene s;
  s.objects.push_back(from_caption("bed_0", "a white single bed", {0, 0, 0}));
  s.objects.push_back(from_caption("nightstand_0", "a small oak nightstand", {0.9, 0, 0}));
  const auto r = apply_edit(s, ReplaceCmd{ref("the bed"), "a grey upholstered king bed"}, catalog());
  const auto& b = r.objects[0];
  EXPECT_EQ(b.caption, "a grey upholstered king bed");
  EXPECT_TRUE(geometry::scene_collisions(r, {}, 1e-4).empty());
  EXPECT_LE(geometry::OrientedBox::of(b).footprint_area(),
            geometry::OrientedBox::of(s.objects[0]).footprint_area() + 1e-12);
  EXPECT_EQ(b.min_y(), 0.0);
  // Uniform shrink keeps the prototype's aspect ratio.
  EXPECT_NEAR(b.half_extents.x / b.half_extents.z, 1.00 / 1.05, 1e-12);
}

TEST(ApplyEdit, ReplaceUnknownPrototype) {
  EXPECT_EQ(edit_error_kind(bedroom(), ReplaceCmd{ref("bed"), "a grand piano"}), EditError::Kind::NoMatch);
}

TEST(ApplyEdit, StrictModeRejectsCollisions) {
  EditOptions strict;
  strict.strict = true;
  const Scene s = bedroom();
  EXPECT_EQ(edit_error_kind(s, TranslateCmd{ref("desk"), Direction::Back, 5.0}, strict), EditError::Kind::Collision);
  EXPECT_EQ(edit_error_kind(s, TranslateCmd{ref("bed"), Direction::Right, 2.3}, strict), EditError::Kind::Collision);
  EXPECT_NO_THROW(apply_edit(s, TranslateCmd{ref("bed"), Direction::Right, 2.3}, catalog()));
}

TEST(BestPrototype, ExactCaptionWins) {
  EXPECT_EQ(best_prototype(catalog(), "A Brass Floor Lamp").caption, "a brass floor lamp");
  EXPECT_EQ(best_prototype(catalog(), "black chair").caption, "a black dining chair");
  EXPECT_EQ(best_prototype(catalog(), "oak", cat("cabinet")).caption, "an oak sideboard cabinet");
}

TEST(FreshObjectId, SkipsUsedIds) {
  Scene s = bedroom();
  EXPECT_EQ(fresh_object_id(s, catalog(), cat("bed")), "bed_1");
  EXPECT_EQ(fresh_object_id(s, catalog(), cat("chair")), "chair_0");
}
