#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "editroom/scene.hpp"

namespace editroom {

enum class Direction { Front, Back, Left, Right };

std::string_view to_string(Direction d);
std::optional<Direction> direction_from_string(std::string_view word);
/// Unit world-frame vector (front=+z, back=-z, left=-x, right=+x).
Vec3 direction_vector(Direction d);

struct RelativeLocation {
  SpatialRelation relation = SpatialRelation::LeftOf;
  std::string reference_desc;

  friend bool operator==(const RelativeLocation&, const RelativeLocation&) = default;
};

struct ObjectRef {
  std::string description;
  /// Disambiguates between objects that match `description` equally well.
  std::optional<RelativeLocation> relative;

  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};

struct RotateCmd {
  ObjectRef target;
  double angle_degrees = 0.0;
  friend bool operator==(const RotateCmd&, const RotateCmd&) = default;
};

struct TranslateCmd {
  ObjectRef target;
  Direction direction = Direction::Front;
  double distance_m = 0.0;
  friend bool operator==(const TranslateCmd&, const TranslateCmd&) = default;
};

struct ScaleCmd {
  ObjectRef target;
  double factor = 1.0;
  friend bool operator==(const ScaleCmd&, const ScaleCmd&) = default;
};

struct ReplaceCmd {
  ObjectRef source;
  std::string target_desc;
  friend bool operator==(const ReplaceCmd&, const ReplaceCmd&) = default;
};

struct AddCmd {
  std::string target_desc;
  RelativeLocation location;
  friend bool operator==(const AddCmd&, const AddCmd&) = default;
};

struct RemoveCmd {
  ObjectRef target;
  friend bool operator==(const RemoveCmd&, const RemoveCmd&) = default;
};

using EditCommand = std::variant<RotateCmd, TranslateCmd, ScaleCmd, ReplaceCmd, AddCmd, RemoveCmd>;

enum class EditType { Rotate, Translate, Scale, Replace, Add, Remove };

inline constexpr int kNumEditTypes = 6;

EditType edit_type(const EditCommand& cmd);
std::string_view to_string(EditType t);
EditType edit_type_from_string(std::string_view name);

inline constexpr double kMaxScaleFactor = 10.0;
inline constexpr double kMaxDistance = 20.0;
inline constexpr double kMaxAngle = 180.0;

/// Throws ParseError(OutOfRangeValue / MalformedField) on invariant violations.
void validate_command(const EditCommand& cmd);

/// Parses one canonical template line. Keywords are case-insensitive and runs
/// of whitespace are insignificant. Throws ParseError.
EditCommand parse_template_command(std::string_view text);

/// Canonical single-line template form; parse_template_command inverts it.
std::string format_template_command(const EditCommand& cmd);

/// Shortest fixed-notation decimal that parses back to exactly `value`.
std::string format_decimal(double value);

/// Trims and collapses whitespace runs to single spaces.
std::string collapse_whitespace(std::string_view text);

}  // namespace editroom
