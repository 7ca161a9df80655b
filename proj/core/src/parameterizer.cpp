#include "editroom/parameterizer.hpp"

#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

#include "editroom/executor.hpp"

namespace editroom {

std::string_view to_string(PlanBackend b) { return b == PlanBackend::Llm ? "llm" : "rules"; }

PlanBackend plan_backend_from_string(std::string_view name) {
  if (name == "llm") return PlanBackend::Llm;
  if (name == "rules") return PlanBackend::Rules;
  throw ValidationError("unknown backend '" + std::string(name) + "' (expected llm or rules)");
}

const char* to_string(PlanError::Kind kind) noexcept {
  switch (kind) {
    case PlanError::Kind::NoValidCommands: return "NoValidCommands";
    case PlanError::Kind::Unparseable: return "Unparseable";
  }
  return "Unparseable";
}

const std::vector<std::string>& breakdown_formats() {
  static const std::vector<std::string> formats = {
      "Rotate object <angle> degrees : <object description>",
      "Move object towards the <front|back|left|right> direction for <distance> meters : <object description>",
      "Enlarge object by <factor> times : <object description>  (Shrink object by <factor> times for factors below 1)",
      "Replace source with target : [<source object description>] to [<target object description>]",
      "Add [<object description>] location: [<relation>] [<reference object description>]",
      "Remove [<object description>]",
  };
  return formats;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << (v == 0.0 ? 0.0 : v);
  return os.str();
}

std::string vec(const Vec3& v) { return "(" + fixed(v.x, 2) + ", " + fixed(v.y, 2) + ", " + fixed(v.z, 2) + ")"; }

}  // namespace

std::string build_prompt(const Scene& scene, std::string_view natural_command, const ObjectCatalog& catalog) {
  std::ostringstream os;
  os << "You edit 3D room layouts. Break the user's command into basic editing operations, each acting on a "
        "single object.\n\n";
  os << "Room type: " << to_string(scene.room_type) << "\n";
  os << "Room bounds: min " << vec(scene.room_bounds.min) << ", max " << vec(scene.room_bounds.max) << "\n";
  os << "Units are meters. +x is right, +z is front, +y is up. Yaw is in degrees, positive counter-clockwise seen "
        "from above.\n";
  os << "Objects:\n";
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    const std::string category = o.category >= 0 && o.category < catalog.category_count()
                                     ? catalog.categories[static_cast<std::size_t>(o.category)]
                                     : "unknown";
    os << i + 1 << ". category: " << category << "; position: " << vec(o.position)
       << "; half extents: " << vec(o.half_extents) << "; yaw: " << fixed(o.yaw * 180.0 / kPi, 1)
       << "; caption: " << o.caption << "\n";
  }
  os << "\nCommand: " << natural_command << "\n\n";
  os << "Use only these formats:\n";
  for (const auto& f : breakdown_formats()) os << f << "\n";
  os << "\nRelations: ";
  for (int r = 0; r < kNumRelations; ++r) {
    const auto rel = static_cast<SpatialRelation>(r);
    if (rel == SpatialRelation::None) continue;
    os << (r ? ", " : "") << to_phrase(rel);
  }
  os << ".\nWhen an object description is not unique, append location: [<relation>] [<reference object "
        "description>] using a unique reference object.\n";
  os << "Reply with one breakdown command per line, in execution order, and nothing else.\n";
  return os.str();
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// "1.", "2)", "-", "*", "•" and surrounding backticks or quotes.
std::string strip_list_marker(std::string line) {
  static const std::regex marker(R"(^\s*(?:[-*+]|\d+[.)]|\xE2\x80\xA2)\s*)");
  line = std::regex_replace(line, marker, "", std::regex_constants::format_first_only);
  line = trim(line);
  while (line.size() >= 2 && (line.front() == '`' || line.front() == '"') && line.back() == line.front())
    line = trim(line.substr(1, line.size() - 2));
  return line;
}

bool looks_like_command(const std::string& line) {
  static const std::regex head(R"(^(move|rotate|shrink|enlarge|replace|add|remove)\b)", std::regex::icase);
  return std::regex_search(line, head);
}

}  // namespace

std::vector<EditCommand> parse_llm_response(std::string_view text, std::vector<std::string>* warnings) {
  std::vector<EditCommand> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_list_marker(raw);
    if (line.empty()) continue;
    std::vector<std::string> attempts{line};
    if (line.back() == '.') attempts.insert(attempts.begin(), trim(line.substr(0, line.size() - 1)));
    bool parsed = false;
    std::string error;
    for (const auto& a : attempts) {
      try {
        out.push_back(parse_template_command(a));
        parsed = true;
        break;
      } catch (const ParseError& e) {
        if (error.empty()) error = e.what();
      }
    }
    if (!parsed && looks_like_command(line) && warnings)
      warnings->push_back("line " + std::to_string(line_no) + ": " + error + ": " + line);
  }
  if (out.empty()) throw PlanError(PlanError::Kind::NoValidCommands, "reply contains no breakdown commands",
                                   std::string(text));
  return out;
}

namespace {

// ---- rules backend ----

const std::string kNum = R"((-?(?:\d+(?:\.\d*)?|\.\d+)))";
const std::string kRel =
    R"(((?:closely\s+|close\s+to\s+the\s+|directly\s+)?(?:to\s+the\s+|on\s+the\s+)?(?:left|right)(?:\s+side)?\s+of|)"
    R"((?:closely\s+|directly\s+)?in\s+front\s+of|(?:closely\s+|directly\s+)?behind|above|on\s+top\s+of|below|)"
    R"(under(?:neath)?))";

std::regex re(const std::string& s) { return std::regex(s, std::regex::ECMAScript | std::regex::optimize); }

std::optional<SpatialRelation> relation_of(const std::string& phrase) {
  const bool close = phrase.rfind("close", 0) == 0;
  auto pick = [&](SpatialRelation far, SpatialRelation near) { return close ? near : far; };
  if (phrase.find("left") != std::string::npos) return pick(SpatialRelation::LeftOf, SpatialRelation::CloselyLeftOf);
  if (phrase.find("right") != std::string::npos)
    return pick(SpatialRelation::RightOf, SpatialRelation::CloselyRightOf);
  if (phrase.find("front") != std::string::npos)
    return pick(SpatialRelation::InFrontOf, SpatialRelation::CloselyInFrontOf);
  if (phrase.find("behind") != std::string::npos)
    return pick(SpatialRelation::Behind, SpatialRelation::CloselyBehind);
  if (phrase == "above" || phrase.find("top") != std::string::npos) return SpatialRelation::Above;
  if (phrase == "below" || phrase.rfind("under", 0) == 0) return SpatialRelation::Below;
  return std::nullopt;
}

std::string strip_articles(std::string s) {
  static const std::regex article(R"(^(?:the|a|an)\s+)");
  s = trim(s);
  while (std::regex_search(s, article)) s = std::regex_replace(s, article, "", std::regex_constants::format_first_only);
  return s;
}

struct Unreadable {};

bool is_pronoun(const std::string& s) { return s == "it" || s == "that" || s == "this" || s == "them"; }

class ClauseReader {
public:
  ClauseReader(const Scene& scene, const ObjectCatalog& catalog) : scene_(scene), catalog_(catalog) {}

  EditCommand read(const std::string& clause) {
    std::smatch m;
    static const std::regex move1 = re(R"(^(?:move|shift|slide|push|pull)\s+(.+?)\s+(?:by\s+|for\s+)?)" + kNum +
                                       R"(\s*(m|meters?|metres?|cm|centimeters?|centimetres?)?\s+)" +
                                       R"((?:to\s+(?:the\s+)?|towards?\s+(?:the\s+)?)?)" +
                                       R"((left|right|forwards?|front|backwards?|back)(?:\s+direction)?$)");
    static const std::regex move2 = re(std::string(R"(^(?:move|shift|slide|push|pull)\s+(.+?)\s+)") +
                                       R"((?:to\s+(?:the\s+)?|towards?\s+(?:the\s+)?)?)" +
                                       R"((left|right|forwards?|front|backwards?|back)(?:\s+direction)?\s+)" +
                                       R"((?:by\s+|for\s+)?)" + kNum +
                                       R"(\s*(m|meters?|metres?|cm|centimeters?|centimetres?)?$)");
    static const std::regex rot1 = re(R"(^(?:rotate|turn|spin)\s+(.+?)\s+(?:by\s+)?)" + kNum +
                                      R"(\s*(?:degrees?|deg)?(?:\s+(counter-?clockwise|anti-?clockwise|clockwise))?$)");
    static const std::regex rot2 = re(R"(^(?:rotate|turn|spin)\s+(.+?)\s+(counter-?clockwise|anti-?clockwise|)"
                                      R"(clockwise)\s+(?:by\s+)?)" + kNum + R"(\s*(?:degrees?|deg)?$)");
    static const std::regex make_by = re(R"(^make\s+(.+?)\s+(bigger|larger|smaller)\s+by\s+(?:a\s+factor\s+of\s+)?)" +
                                         kNum + R"(\s*(%|percent|times|x)?$)");
    static const std::regex verb_by = re(R"(^(enlarge|grow|shrink)\s+(.+?)\s+by\s+(?:a\s+factor\s+of\s+)?)" + kNum +
                                         R"(\s*(%|percent|times|x)?$)");
    static const std::regex scale_by = re(std::string(R"(^(?:scale|resize)\s+(.+?)\s+(?:up\s+|down\s+)?(?:by|to)\s+)") +
                                          R"((?:a\s+factor\s+of\s+)?)" + kNum + R"(\s*(?:times|x)?$)");
    static const std::regex twice = re(R"(^make\s+(.+?)\s+twice\s+as\s+(?:big|large)$)");
    static const std::regex half = re(R"(^make\s+(.+?)\s+half\s+(?:as\s+(?:big|large)|(?:its|the)\s+size)$)");
    static const std::regex remove = re(R"(^(?:remove|delete|take\s+away|take\s+out|get\s+rid\s+of)\s+(.+)$)");
    static const std::regex add = re(R"(^(?:add|place|put|insert)\s+(.+?)\s+)" + kRel + R"(\s+(.+)$)");
    static const std::regex replace = re(R"(^(?:replace|swap|substitute)\s+(.+)$)");
    static const std::regex change = re(R"(^change\s+(.+?)\s+(?:into|to)\s+(.+)$)");

    if (std::regex_match(clause, m, move1)) return translate(m[1], m[2], m[3], m[4]);
    if (std::regex_match(clause, m, move2)) return translate(m[1], m[3], m[4], m[2]);
    if (std::regex_match(clause, m, rot2)) return rotate(m[1], m[3], m[2]);
    if (std::regex_match(clause, m, rot1)) return rotate(m[1], m[2], m[3]);
    if (std::regex_match(clause, m, make_by)) return scale(m[1], m[2] == "smaller", m[3], m[4]);
    if (std::regex_match(clause, m, verb_by)) return scale(m[2], m[1] == "shrink", m[3], m[4]);
    if (std::regex_match(clause, m, scale_by)) return finish(ScaleCmd{ref(m[1]), number(m[2])});
    if (std::regex_match(clause, m, twice)) return finish(ScaleCmd{ref(m[1]), 2.0});
    if (std::regex_match(clause, m, half)) return finish(ScaleCmd{ref(m[1]), 0.5});
    if (std::regex_match(clause, m, remove)) return finish(RemoveCmd{ref(m[1])});
    if (std::regex_match(clause, m, add)) {
      const auto rel = relation_of(m[2]);
      if (!rel) throw Unreadable{};
      AddCmd c;
      c.target_desc = strip_articles(m[1]);
      c.location = {*rel, desc(m[3])};
      if (is_pronoun(c.target_desc)) throw Unreadable{};
      return finish(c);
    }
    if (std::regex_match(clause, m, replace)) return replace_split(m[1]);
    if (std::regex_match(clause, m, change)) return finish(ReplaceCmd{ref(m[1]), strip_articles(m[2])});
    throw Unreadable{};
  }

private:
  EditCommand translate(const std::string& object, const std::string& amount, const std::string& unit,
                        const std::string& direction) {
    double d = number(amount);
    if (unit.rfind("c", 0) == 0) d /= 100.0;
    Direction dir = Direction::Front;
    if (direction == "left") dir = Direction::Left;
    else if (direction == "right") dir = Direction::Right;
    else if (direction.rfind("back", 0) == 0) dir = Direction::Back;
    return finish(TranslateCmd{ref(object), dir, d});
  }

  EditCommand rotate(const std::string& object, const std::string& amount, const std::string& sense) {
    double a = number(amount);
    if (sense == "clockwise") a = -a;
    // Same orientation, expressed inside (-180, 180].
    a = std::fmod(a, 360.0);
    if (a > 180.0) a -= 360.0;
    if (a <= -180.0) a += 360.0;
    return finish(RotateCmd{ref(object), a});
  }

  EditCommand scale(const std::string& object, bool smaller, const std::string& amount, const std::string& unit) {
    const double v = number(amount);
    double f = 0.0;
    if (unit == "%" || unit == "percent") {
      f = smaller ? 1.0 - v / 100.0 : 1.0 + v / 100.0;
    } else if (smaller) {
      f = v < 1.0 ? v : 1.0 / v;
    } else {
      if (v <= 1.0) throw Unreadable{};
      f = v;
    }
    if (!(f > 0.0) || (smaller && f >= 1.0) || (!smaller && f <= 1.0)) throw Unreadable{};
    return finish(ScaleCmd{ref(object), f});
  }

  // "X with Y" where X itself may contain "with": a left side equal to a
  // caption wins, then the first left side naming any object, then the first split.
  EditCommand replace_split(const std::string& rest) {
    static const std::regex sep(R"(\s+(?:with|by|for)\s+)");
    std::vector<std::pair<std::string, std::string>> splits;
    for (auto it = std::sregex_iterator(rest.begin(), rest.end(), sep); it != std::sregex_iterator(); ++it) {
      const auto pos = static_cast<std::size_t>(it->position());
      splits.emplace_back(rest.substr(0, pos), rest.substr(pos + static_cast<std::size_t>(it->length())));
    }
    if (splits.empty()) throw Unreadable{};
    auto chosen = splits.front();
    auto pick = [&](auto&& accept) {
      for (const auto& s : splits)
        if (accept(ref(s.first).description)) {
          chosen = s;
          return true;
        }
      return false;
    };
    pick([&](const std::string& d) {
      for (const auto& o : scene_.objects)
        if (strip_articles(lower(o.caption)) == d) return true;
      return false;
    }) || pick([&](const std::string& d) { return !match_candidates(scene_, d, catalog_).empty(); });
    ReplaceCmd c{ref(chosen.first), strip_articles(chosen.second)};
    if (c.target_desc.empty() || is_pronoun(c.target_desc)) throw Unreadable{};
    return finish(c);
  }

  ObjectRef ref(const std::string& text) {
    static const std::regex qualified = re(R"(^(.+?)\s+(?:(?:that|which)\s+is\s+)?)" + kRel + R"(\s+(.+)$)");
    const std::string s = strip_articles(text);
    if (is_pronoun(s)) {
      if (!last_) throw Unreadable{};
      return *last_;
    }
    std::smatch m;
    ObjectRef r;
    if (std::regex_match(s, m, qualified)) {
      const auto rel = relation_of(m[2]);
      if (!rel) throw Unreadable{};
      r.description = strip_articles(m[1]);
      r.relative = RelativeLocation{*rel, desc(m[3])};
    } else {
      r.description = s;
    }
    if (r.description.empty()) throw Unreadable{};
    return r;
  }

  std::string desc(const std::string& text) {
    std::string s = strip_articles(text);
    if (is_pronoun(s)) {
      if (!last_) throw Unreadable{};
      return last_->description;
    }
    return s;
  }

  static double number(const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw Unreadable{};
      return v;
    } catch (const std::logic_error&) {
      throw Unreadable{};
    }
  }

  EditCommand finish(EditCommand cmd) {
    try {
      validate_command(cmd);
    } catch (const ParseError&) {
      throw Unreadable{};
    }
    // Later "it" refers to the object this clause left in the scene.
    std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, AddCmd>) last_ = ObjectRef{c.target_desc, {}};
          else if constexpr (std::is_same_v<T, ReplaceCmd>) last_ = ObjectRef{c.target_desc, {}};
          else if constexpr (std::is_same_v<T, RemoveCmd>) last_.reset();
          else last_ = c.target;
        },
        cmd);
    return cmd;
  }

  const Scene& scene_;
  const ObjectCatalog& catalog_;
  std::optional<ObjectRef> last_;
};

std::string normalize(std::string_view text) {
  std::string s = lower(text);
  s = std::regex_replace(s, std::regex("\xC2\xB0"), " degrees");
  s = std::regex_replace(s, std::regex(R"(\bhalf\s+a\s+(met(?:er|re))\b)"), "0.5 $1s");
  s = std::regex_replace(s, std::regex(R"(\b(?:a|one)\s+(met(?:er|re))\b)"), "1 $1s");
  s = std::regex_replace(s, std::regex(R"([!?"]|\.(?!\d))"), " ");
  return collapse_whitespace(s);
}

std::vector<std::string> split_clauses(const std::string& text) {
  static const std::regex joiner(R"(\s*(?:;|,?\s*\b(?:and\s+then|and|then|after\s+that|afterwards)\b)\s*)");
  static const std::regex comma_verb(
      R"(,\s*(?=(?:move|shift|slide|push|pull|rotate|turn|spin|make|enlarge|grow|shrink|scale|resize|remove|)"
      R"(delete|take|get|add|place|put|insert|replace|swap|substitute|change)\b))");
  static const std::regex lead(R"(^(?:(?:first|finally|also|please|next|lastly)\s*,?\s*)+)");
  std::vector<std::string> out;
  std::sregex_token_iterator it(text.begin(), text.end(), joiner, -1), end;
  for (; it != end; ++it) {
    const std::string part = *it;
    std::sregex_token_iterator jt(part.begin(), part.end(), comma_verb, -1);
    for (; jt != end; ++jt) {
      std::string c = trim(std::regex_replace(std::string(*jt), lead, ""));
      while (!c.empty() && (c.back() == ',' || c.back() == '.')) c = trim(c.substr(0, c.size() - 1));
      if (!c.empty()) out.push_back(c);
    }
  }
  return out;
}

}  // namespace

BreakdownPlan plan_with_rules(const Scene& scene, std::string_view natural_command, const ObjectCatalog& catalog) {
  const auto clauses = split_clauses(normalize(natural_command));
  if (clauses.empty())
    throw PlanError(PlanError::Kind::Unparseable, "empty command", std::string(natural_command), 0);
  ClauseReader reader(scene, catalog);
  BreakdownPlan plan;
  plan.backend = PlanBackend::Rules;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    try {
      plan.commands.push_back(reader.read(clauses[i]));
    } catch (const Unreadable&) {
      throw PlanError(PlanError::Kind::Unparseable, "cannot read '" + clauses[i] + "' as an editing operation",
                      clauses[i], i);
    }
  }
  for (const auto& c : plan.commands) plan.raw_response += format_template_command(c) + "\n";
  return plan;
}

BreakdownPlan plan_with_llm(const Scene& scene, std::string_view natural_command, const ObjectCatalog& catalog,
                            LlmClient& client) {
  BreakdownPlan plan;
  plan.backend = PlanBackend::Llm;
  plan.raw_response = client.complete({{"system", "You are a planner for 3D room layout editing."},
                                       {"user", build_prompt(scene, natural_command, catalog)}});
  plan.commands = parse_llm_response(plan.raw_response, &plan.warnings);
  return plan;
}

BreakdownPlan parameterize(const Scene& scene, std::string_view natural_command, PlanBackend backend,
                           const ObjectCatalog& catalog, LlmClient* client) {
  if (backend == PlanBackend::Rules) return plan_with_rules(scene, natural_command, catalog);
  if (!client) throw ValidationError("llm backend requested but no LLM client is configured");
  return plan_with_llm(scene, natural_command, catalog, *client);
}

}  // namespace editroom
