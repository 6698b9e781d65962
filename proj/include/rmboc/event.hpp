#pragma once

#include <cstdint>
#include <variant>

#include "rmboc/topology.hpp"

namespace rmboc {

struct RequestAction {
  NodeAddress source;
  NodeAddress destination;
  friend bool operator==(const RequestAction&, const RequestAction&) = default;
};

struct SendAction {
  NodeAddress source;
  NodeAddress destination;
  std::uint64_t word = 0;
  friend bool operator==(const SendAction&, const SendAction&) = default;
};

struct DestroyAction {
  NodeAddress source;
  NodeAddress destination;
  friend bool operator==(const DestroyAction&, const DestroyAction&) = default;
};

struct ReconfigureAction {
  NodeAddress pe;
  Cycle duration = 1;
  friend bool operator==(const ReconfigureAction&, const ReconfigureAction&) = default;
};

struct PolicyAction {
  NodeAddress pe;
  bool accept = true;
  friend bool operator==(const PolicyAction&, const PolicyAction&) = default;
};

using Action = std::variant<RequestAction, SendAction, DestroyAction, ReconfigureAction, PolicyAction>;

struct ScenarioEvent {
  Cycle at = 0;
  Action action;
  friend bool operator==(const ScenarioEvent&, const ScenarioEvent&) = default;
};

}  // namespace rmboc
