#pragma once

// Plain-text scenario files.
//
//   rmboc-scenario v1
//   # comment
//   at <cycle> request <src> <dst>
//   at <cycle> send <src> <dst> <hex word>
//   at <cycle> destroy <src> <dst>
//   at <cycle> reconfigure <pe> <duration>
//   at <cycle> refuse <pe>
//   at <cycle> accept <pe>
//
// Addresses are `j` in a 1D array and `r,c` in a 2D mesh.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rmboc/error.hpp"
#include "rmboc/event.hpp"
#include "rmboc/topology.hpp"

namespace rmboc {

inline constexpr std::string_view kScenarioHeader = "rmboc-scenario v1";

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out, int base = 10) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline NodeAddress parse_address(const Topology& t, std::string_view tok, std::size_t line) {
  NodeAddress a;
  bool ok = false;
  if (t.is_2d()) {
    auto comma = tok.find(',');
    ok = comma != std::string_view::npos && parse_number(tok.substr(0, comma), a.row) &&
         parse_number(tok.substr(comma + 1), a.col);
  } else {
    a.row = 0;
    ok = parse_number(tok, a.col);
  }
  if (!ok) throw ParseError(line, "malformed address '" + std::string(tok) + "'");
  if (!t.contains(a)) throw AddressError(line, "address " + std::string(tok) + " out of range");
  return a;
}

}  // namespace detail

inline std::vector<ScenarioEvent> parse_scenario(std::string_view text, const Topology& t) {
  std::vector<ScenarioEvent> events;
  bool seen_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto tok = detail::split_ws(raw);
    if (tok.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (!seen_header) {
      if (tok.size() != 2 || tok[0] + " " + tok[1] != kScenarioHeader)
        throw ParseError(line_no, "expected header '" + std::string(kScenarioHeader) + "'");
      seen_header = true;
      continue;
    }
    auto fail = [&](const std::string& why) { throw ParseError(line_no, why); };
    if (tok.size() < 3 || tok[0] != "at") fail("expected 'at <cycle> <action> ...'");
    ScenarioEvent ev;
    if (!detail::parse_number(tok[1], ev.at) || ev.at < 0) fail("bad cycle '" + tok[1] + "'");
    const std::string& verb = tok[2];
    auto want = [&](std::size_t n) {
      if (tok.size() != n) fail("'" + verb + "' takes " + std::to_string(n - 3) + " arguments");
    };
    auto addr = [&](std::size_t i) { return detail::parse_address(t, tok[i], line_no); };
    if (verb == "request") {
      want(5);
      ev.action = RequestAction{addr(3), addr(4)};
    } else if (verb == "destroy") {
      want(5);
      ev.action = DestroyAction{addr(3), addr(4)};
    } else if (verb == "send") {
      want(6);
      std::string_view hex = tok[5];
      if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
      std::uint64_t word = 0;
      if (!detail::parse_number(hex, word, 16)) fail("bad hex word '" + tok[5] + "'");
      if (t.data_width() < 64 && (word >> t.data_width()) != 0)
        fail("word " + tok[5] + " exceeds " + std::to_string(t.data_width()) + " bits");
      ev.action = SendAction{addr(3), addr(4), word};
    } else if (verb == "reconfigure") {
      want(5);
      Cycle d = 0;
      if (!detail::parse_number(tok[4], d) || d < 1) fail("bad duration '" + tok[4] + "'");
      ev.action = ReconfigureAction{addr(3), d};
    } else if (verb == "refuse" || verb == "accept") {
      want(4);
      ev.action = PolicyAction{addr(3), verb == "accept"};
    } else {
      fail("unknown action '" + verb + "'");
    }
    events.push_back(ev);
  }
  if (!seen_header) throw ParseError(line_no == 0 ? 1 : line_no, "missing scenario header");
  std::stable_sort(events.begin(), events.end(),
                   [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.at < b.at; });
  return events;
}

// Inverse of parse_scenario for sorted event lists.
inline std::string format_scenario(const std::vector<ScenarioEvent>& events, const Topology& t) {
  std::ostringstream out;
  out << kScenarioHeader << '\n';
  for (const auto& ev : events) {
    out << "at " << ev.at << ' ';
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, RequestAction>) {
            out << "request " << t.format(a.source) << ' ' << t.format(a.destination);
          } else if constexpr (std::is_same_v<T, SendAction>) {
            out << "send " << t.format(a.source) << ' ' << t.format(a.destination) << ' '
                << std::hex << a.word << std::dec;
          } else if constexpr (std::is_same_v<T, DestroyAction>) {
            out << "destroy " << t.format(a.source) << ' ' << t.format(a.destination);
          } else if constexpr (std::is_same_v<T, ReconfigureAction>) {
            out << "reconfigure " << t.format(a.pe) << ' ' << a.duration;
          } else {
            out << (a.accept ? "accept " : "refuse ") << t.format(a.pe);
          }
        },
        ev.action);
    out << '\n';
  }
  return out.str();
}

}  // namespace rmboc
