#include "editroom/command.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

#include "editroom/error.hpp"

namespace editroom {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Front: return "front";
    case Direction::Back: return "back";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "front";
}

std::optional<Direction> direction_from_string(std::string_view word) {
  if (word == "front") return Direction::Front;
  if (word == "back") return Direction::Back;
  if (word == "left") return Direction::Left;
  if (word == "right") return Direction::Right;
  return std::nullopt;
}

Vec3 direction_vector(Direction d) {
  switch (d) {
    case Direction::Front: return {0.0, 0.0, 1.0};
    case Direction::Back: return {0.0, 0.0, -1.0};
    case Direction::Left: return {-1.0, 0.0, 0.0};
    case Direction::Right: return {1.0, 0.0, 0.0};
  }
  return {};
}

EditType edit_type(const EditCommand& cmd) { return static_cast<EditType>(cmd.index()); }

std::string_view to_string(EditType t) {
  switch (t) {
    case EditType::Rotate: return "rotate";
    case EditType::Translate: return "translate";
    case EditType::Scale: return "scale";
    case EditType::Replace: return "replace";
    case EditType::Add: return "add";
    case EditType::Remove: return "remove";
  }
  return "rotate";
}

EditType edit_type_from_string(std::string_view name) {
  for (int i = 0; i < kNumEditTypes; ++i)
    if (to_string(static_cast<EditType>(i)) == name) return static_cast<EditType>(i);
  throw ValidationError("unknown edit type '" + std::string(name) + "'");
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

std::string format_decimal(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

namespace {

using Kind = ParseError::Kind;

void check_desc(const std::string& d, const char* what) {
  if (d.empty()) throw ParseError(Kind::MalformedField, std::string(what) + " must be non-empty");
  if (d.find_first_of("[]\n\r") != std::string::npos)
    throw ParseError(Kind::MalformedField, std::string(what) + " must not contain brackets or line breaks");
}

void check_ref(const ObjectRef& r) {
  check_desc(r.description, "object description");
  if (r.relative) {
    if (r.relative->relation == SpatialRelation::None)
      throw ParseError(Kind::OutOfRangeValue, "relative location needs a relation other than none");
    check_desc(r.relative->reference_desc, "reference description");
  }
}

// Recursive-descent scanner over the raw input; offsets refer to that input.
class Scanner {
public:
  explicit Scanner(std::string_view text) : text_(text) {}

  std::size_t pos() const { return pos_; }
  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  /// Next run of non-space characters, without consuming it.
  std::string_view peek_word() {
    skip_ws();
    std::size_t end = pos_;
    while (end < text_.size() && !std::isspace(static_cast<unsigned char>(text_[end]))) ++end;
    return text_.substr(pos_, end - pos_);
  }

  std::string_view take_word() {
    auto w = peek_word();
    pos_ += w.size();
    return w;
  }

  /// Case-insensitive keyword; `colon` also splits "location:" from what follows.
  bool accept_keyword(std::string_view kw) {
    skip_ws();
    if (text_.size() - pos_ < kw.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i)
      if (std::tolower(static_cast<unsigned char>(text_[pos_ + i])) != kw[i]) return false;
    const std::size_t end = pos_ + kw.size();
    const bool boundary = end == text_.size() || std::isspace(static_cast<unsigned char>(text_[end])) ||
                          kw.back() == ':' || text_[end] == '[' || text_[end] == ':';
    if (!boundary) return false;
    pos_ = end;
    return true;
  }

  void expect_keyword(std::string_view kw) {
    const std::size_t at = (skip_ws(), pos_);
    if (!accept_keyword(kw))
      throw ParseError(Kind::UnknownTemplate, "expected '" + std::string(kw) + "' at offset " + std::to_string(at), at);
  }

  bool accept_char(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_char(char c, Kind kind = Kind::MalformedField) {
    const std::size_t at = (skip_ws(), pos_);
    if (!accept_char(c))
      throw ParseError(kind, std::string("expected '") + c + "' at offset " + std::to_string(at), at);
  }

  double number(const char* what) {
    const std::size_t at = (skip_ws(), pos_);
    std::size_t end = pos_;
    while (end < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                                  text_[end] == '-' || text_[end] == '+' || text_[end] == 'e' || text_[end] == 'E'))
      ++end;
    std::string_view tok = text_.substr(pos_, end - pos_);
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
      throw ParseError(Kind::MalformedField,
                       std::string("malformed ") + what + " '" + std::string(tok) + "' at offset " + std::to_string(at),
                       at);
    pos_ = end;
    if (!std::isfinite(value)) throw ParseError(Kind::OutOfRangeValue, std::string(what) + " must be finite", at);
    return value;
  }

  std::string bracketed(const char* what) {
    const std::size_t at = (skip_ws(), pos_);
    if (!accept_char('['))
      throw ParseError(Kind::MalformedField, std::string("expected '[' before ") + what + " at offset " +
                                                 std::to_string(at), at);
    const std::size_t close = text_.find_first_of("[]", pos_);
    if (close == std::string_view::npos || text_[close] != ']')
      throw ParseError(Kind::MalformedField, std::string("unterminated ") + what + " starting at offset " +
                                                 std::to_string(at), at);
    std::string body = collapse_whitespace(text_.substr(pos_, close - pos_));
    if (body.empty())
      throw ParseError(Kind::MalformedField, std::string("empty ") + what + " at offset " + std::to_string(at), at);
    pos_ = close + 1;
    return body;
  }

  /// Free text up to an optional " location: [" clause or the end of input.
  std::string free_text(const char* what) {
    const std::size_t at = (skip_ws(), pos_);
    std::size_t end = text_.size();
    for (std::size_t i = pos_; i < text_.size(); ++i) {
      if (text_[i] == '[' || text_[i] == ']')
        throw ParseError(Kind::MalformedField, std::string("unexpected bracket in ") + what + " at offset " +
                                                   std::to_string(i), i);
      if (starts_location(i)) {
        end = i;
        break;
      }
    }
    std::string body = collapse_whitespace(text_.substr(pos_, end - pos_));
    if (body.empty())
      throw ParseError(Kind::MalformedField, std::string("empty ") + what + " at offset " + std::to_string(at), at);
    pos_ = end;
    return body;
  }

  std::optional<RelativeLocation> location_clause() {
    const std::size_t save = pos_;
    if (!accept_keyword("location:")) {
      pos_ = save;
      return std::nullopt;
    }
    const std::size_t at = (skip_ws(), pos_);
    const std::string phrase = bracketed("relation");
    std::string lowered;
    for (char ch : phrase) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    const auto rel = relation_from_phrase(lowered);
    if (!rel || *rel == SpatialRelation::None)
      throw ParseError(Kind::MalformedField, "unknown relation '" + phrase + "' at offset " + std::to_string(at), at);
    RelativeLocation loc;
    loc.relation = *rel;
    loc.reference_desc = bracketed("reference description");
    return loc;
  }

private:
  bool starts_location(std::size_t i) const {
    static constexpr std::string_view kw = "location:";
    if (i > 0 && !std::isspace(static_cast<unsigned char>(text_[i - 1]))) return false;
    if (text_.size() - i < kw.size()) return false;
    for (std::size_t k = 0; k < kw.size(); ++k)
      if (std::tolower(static_cast<unsigned char>(text_[i + k])) != kw[k]) return false;
    std::size_t j = i + kw.size();
    while (j < text_.size() && std::isspace(static_cast<unsigned char>(text_[j]))) ++j;
    return j < text_.size() && text_[j] == '[';
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string lower(std::string_view s) {
  std::string out;
  for (char ch : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return out;
}

ObjectRef unbracketed_ref(Scanner& sc) {
  ObjectRef ref;
  ref.description = sc.free_text("object description");
  ref.relative = sc.location_clause();
  return ref;
}

ObjectRef bracketed_ref(Scanner& sc) {
  ObjectRef ref;
  ref.description = sc.bracketed("object description");
  ref.relative = sc.location_clause();
  return ref;
}

void expect_colon(Scanner& sc) { sc.expect_char(':', Kind::UnknownTemplate); }

std::string format_ref_suffix(const ObjectRef& r) {
  if (!r.relative) return {};
  return " location: [" + std::string(to_phrase(r.relative->relation)) + "] [" + r.relative->reference_desc + "]";
}

}  // namespace

void validate_command(const EditCommand& cmd) {
  std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, RotateCmd>) {
          check_ref(c.target);
          if (!(std::abs(c.angle_degrees) <= kMaxAngle) || c.angle_degrees == 0.0)
            throw ParseError(Kind::OutOfRangeValue, "angle must lie in [-180, 180] and be non-zero");
        } else if constexpr (std::is_same_v<T, TranslateCmd>) {
          check_ref(c.target);
          if (!(c.distance_m > 0.0 && c.distance_m <= kMaxDistance))
            throw ParseError(Kind::OutOfRangeValue, "distance must lie in (0, 20] meters");
        } else if constexpr (std::is_same_v<T, ScaleCmd>) {
          check_ref(c.target);
          if (!(c.factor > 0.0 && c.factor <= kMaxScaleFactor))
            throw ParseError(Kind::OutOfRangeValue, "scale factor must lie in (0, 10]");
        } else if constexpr (std::is_same_v<T, ReplaceCmd>) {
          check_ref(c.source);
          check_desc(c.target_desc, "target description");
        } else if constexpr (std::is_same_v<T, AddCmd>) {
          check_desc(c.target_desc, "target description");
          check_desc(c.location.reference_desc, "reference description");
          const auto r = c.location.relation;
          if (r == SpatialRelation::None || r == SpatialRelation::Above || r == SpatialRelation::Below)
            throw ParseError(Kind::OutOfRangeValue, "added objects can only be placed by a horizontal relation");
        } else {
          check_ref(c.target);
        }
      },
      cmd);
}

EditCommand parse_template_command(std::string_view text) {
  Scanner sc(text);
  const std::size_t head_at = (sc.skip_ws(), sc.pos());
  const std::string head = lower(sc.peek_word());
  EditCommand cmd;

  auto fail_unknown = [&] {
    throw ParseError(Kind::UnknownTemplate, "unrecognized command template", head_at);
  };

  if (head == "move") {
    sc.expect_keyword("move");
    sc.expect_keyword("object");
    sc.expect_keyword("towards");
    sc.expect_keyword("the");
    const std::size_t at = (sc.skip_ws(), sc.pos());
    const auto dir = direction_from_string(lower(sc.take_word()));
    if (!dir) throw ParseError(Kind::MalformedField, "unknown direction at offset " + std::to_string(at), at);
    sc.expect_keyword("direction");
    sc.expect_keyword("for");
    TranslateCmd c;
    c.direction = *dir;
    const std::size_t num_at = (sc.skip_ws(), sc.pos());
    c.distance_m = sc.number("distance");
    if (!(sc.accept_keyword("meters") || sc.accept_keyword("meter") || sc.accept_keyword("m"))) {
      // unit is optional
    }
    expect_colon(sc);
    c.target = unbracketed_ref(sc);
    if (!(c.distance_m > 0.0 && c.distance_m <= kMaxDistance))
      throw ParseError(Kind::OutOfRangeValue, "distance must lie in (0, 20] meters", num_at);
    cmd = std::move(c);
  } else if (head == "rotate") {
    sc.expect_keyword("rotate");
    sc.expect_keyword("object");
    RotateCmd c;
    const std::size_t num_at = (sc.skip_ws(), sc.pos());
    c.angle_degrees = sc.number("angle");
    sc.expect_keyword("degrees");
    expect_colon(sc);
    c.target = unbracketed_ref(sc);
    if (!(std::abs(c.angle_degrees) <= kMaxAngle) || c.angle_degrees == 0.0)
      throw ParseError(Kind::OutOfRangeValue, "angle must lie in [-180, 180] and be non-zero", num_at);
    cmd = std::move(c);
  } else if (head == "shrink" || head == "enlarge") {
    const bool shrink = head == "shrink";
    sc.expect_keyword(shrink ? "shrink" : "enlarge");
    sc.expect_keyword("object");
    sc.expect_keyword("by");
    ScaleCmd c;
    const std::size_t num_at = (sc.skip_ws(), sc.pos());
    c.factor = sc.number("scale factor");
    sc.expect_keyword("times");
    expect_colon(sc);
    c.target = unbracketed_ref(sc);
    if (!(c.factor > 0.0 && c.factor <= kMaxScaleFactor))
      throw ParseError(Kind::OutOfRangeValue, "scale factor must lie in (0, 10]", num_at);
    if (shrink && c.factor >= 1.0)
      throw ParseError(Kind::OutOfRangeValue, "shrink factor must be below 1", num_at);
    if (!shrink && c.factor < 1.0)
      throw ParseError(Kind::OutOfRangeValue, "enlarge factor must be at least 1", num_at);
    cmd = std::move(c);
  } else if (head == "replace") {
    sc.expect_keyword("replace");
    sc.expect_keyword("source");
    sc.expect_keyword("with");
    sc.expect_keyword("target");
    expect_colon(sc);
    ReplaceCmd c;
    c.source = bracketed_ref(sc);
    sc.expect_keyword("to");
    c.target_desc = sc.bracketed("target description");
    cmd = std::move(c);
  } else if (head == "add" || head.rfind("add[", 0) == 0) {
    sc.expect_keyword("add");
    AddCmd c;
    c.target_desc = sc.bracketed("object description");
    const std::size_t at = (sc.skip_ws(), sc.pos());
    auto loc = sc.location_clause();
    if (!loc) throw ParseError(Kind::MalformedField, "Add needs a 'location: [relation] [reference]' clause", at);
    c.location = *loc;
    const auto r = c.location.relation;
    if (r == SpatialRelation::Above || r == SpatialRelation::Below)
      throw ParseError(Kind::OutOfRangeValue, "added objects can only be placed by a horizontal relation", at);
    cmd = std::move(c);
  } else if (head == "remove" || head.rfind("remove[", 0) == 0) {
    sc.expect_keyword("remove");
    RemoveCmd c;
    c.target = bracketed_ref(sc);
    cmd = std::move(c);
  } else {
    fail_unknown();
  }

  if (!sc.at_end()) {
    const std::size_t at = sc.pos();
    throw ParseError(Kind::MalformedField, "unexpected trailing text at offset " + std::to_string(at), at);
  }
  return cmd;
}

std::string format_template_command(const EditCommand& cmd) {
  validate_command(cmd);
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, RotateCmd>) {
          return "Rotate object " + format_decimal(c.angle_degrees) + " degrees : " + c.target.description +
                 format_ref_suffix(c.target);
        } else if constexpr (std::is_same_v<T, TranslateCmd>) {
          return "Move object towards the " + std::string(to_string(c.direction)) + " direction for " +
                 format_decimal(c.distance_m) + " meters : " + c.target.description + format_ref_suffix(c.target);
        } else if constexpr (std::is_same_v<T, ScaleCmd>) {
          return std::string(c.factor < 1.0 ? "Shrink" : "Enlarge") + " object by " + format_decimal(c.factor) +
                 " times : " + c.target.description + format_ref_suffix(c.target);
        } else if constexpr (std::is_same_v<T, ReplaceCmd>) {
          return "Replace source with target : [" + c.source.description + "]" + format_ref_suffix(c.source) +
                 " to [" + c.target_desc + "]";
        } else if constexpr (std::is_same_v<T, AddCmd>) {
          return "Add [" + c.target_desc + "] location: [" + std::string(to_phrase(c.location.relation)) + "] [" +
                 c.location.reference_desc + "]";
        } else {
          return "Remove [" + c.target.description + "]" + format_ref_suffix(c.target);
        }
      },
      cmd);
}

}  // namespace editroom
