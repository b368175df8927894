#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tamplan/sim/world.hpp"

namespace tamplan::sim {

/// Bijection between well-formed actions and token ids. Actions take ids
/// 0..n-1 in canonical order, then STOP, then PAD.
class ActionVocabulary {
 public:
  static const ActionVocabulary& instance();

  std::size_t size() const { return actions_.size() + 2; }
  /// Tokens a model may emit: every action plus STOP (PAD excluded).
  std::size_t output_size() const { return actions_.size() + 1; }
  std::size_t action_count() const { return actions_.size(); }
  std::size_t stop() const { return actions_.size(); }
  std::size_t pad() const { return actions_.size() + 1; }

  /// Throws ContractError for ill-formed actions.
  std::size_t encode(const Action& a) const;
  std::optional<std::size_t> try_encode(const Action& a) const;
  /// PAD decodes to STOP; out-of-range ids throw ContractError.
  Action decode(std::size_t token) const;
  std::string token_text(std::size_t token) const;

  /// Content hash of the token table; recorded in artifacts.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  ActionVocabulary();
  std::vector<Action> actions_;
  std::string fingerprint_;
};

}  // namespace tamplan::sim
