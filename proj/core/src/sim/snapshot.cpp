#include "tamplan/sim/snapshot.hpp"

#include <algorithm>
#include <array>

namespace tamplan::sim {

namespace {
constexpr std::array<std::string_view, 7> kStateNames{"OPEN", "CLOSED", "ON", "OFF", "CLEAN", "DIRTY", "HELD"};
constexpr std::array<std::string_view, 3> kRelationNames{"ON", "INSIDE", "NEAR"};
}  // namespace

Fact Fact::state(ObjectId subject, StateKind s) {
  Fact f;
  f.kind = FactKind::kState;
  f.subject = subject;
  f.predicate = static_cast<std::uint8_t>(s);
  return f;
}

Fact Fact::relation(const RelationFact& r) {
  Fact f;
  f.kind = FactKind::kRelation;
  f.subject = r.subject;
  f.predicate = static_cast<std::uint8_t>(r.relation);
  f.target = r.target;
  return f;
}

std::string Fact::to_string() const {
  if (kind == FactKind::kState) {
    return std::string(kStateNames[predicate]) + "(" + std::string(name(subject)) + ")";
  }
  return std::string(kRelationNames[predicate]) + "(" + std::string(name(subject)) + "," + std::string(name(target)) +
         ")";
}

std::optional<Fact> Fact::parse(std::string_view text) {
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') return std::nullopt;
  const auto pred = text.substr(0, open);
  const auto args = text.substr(open + 1, text.size() - open - 2);
  const auto comma = args.find(',');
  if (comma == std::string_view::npos) {
    const auto subject = parse_object(args);
    if (!subject) return std::nullopt;
    for (std::size_t i = 0; i < kStateNames.size(); ++i) {
      if (kStateNames[i] == pred) return state(*subject, static_cast<StateKind>(i));
    }
    return std::nullopt;
  }
  const auto subject = parse_object(args.substr(0, comma));
  const auto target = parse_object(args.substr(comma + 1));
  if (!subject || !target) return std::nullopt;
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == pred) return relation({*subject, static_cast<RelationKind>(i), *target});
  }
  return std::nullopt;
}

FactSet graph_snapshot(const EnvironmentState& state) {
  FactSet facts;
  for (const auto& [id, info] : state.objects) {
    const auto& t = traits(id);
    if (t.openable) facts.push_back(Fact::state(id, info.open ? StateKind::kOpen : StateKind::kClosed));
    if (t.switchable) facts.push_back(Fact::state(id, info.on ? StateKind::kOn : StateKind::kOff));
    if (t.cleanable) facts.push_back(Fact::state(id, info.clean ? StateKind::kClean : StateKind::kDirty));
    if (info.held) facts.push_back(Fact::state(id, StateKind::kHeld));
  }
  for (const auto& r : state.relations) facts.push_back(Fact::relation(r));
  std::sort(facts.begin(), facts.end());
  facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
  return facts;
}

}  // namespace tamplan::sim
