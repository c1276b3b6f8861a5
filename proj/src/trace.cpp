#include "luckchain/trace.hpp"

#include <cstdio>
#include <ostream>

namespace luckchain {

void EventTrace::configure(bool keep_events, std::ostream* sink) {
  keep_events_ = keep_events;
  sink_ = sink;
}

void EventTrace::record(const std::string& line) {
  digest_.update(line.data(), line.size());
  digest_.update("\n", 1);
  ++count_;
  if (sink_) (*sink_) << line << '\n';
  if (keep_events_) events.push_back(line);
}

std::string EventTrace::digest_hex() const {
  Sha256 copy = digest_;
  return to_hex(copy.finish());
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  // 17 significant digits round-trip binary64 exactly.
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_summary_csv(std::ostream& out, const EventTrace& t) {
  out << "height,winner,winner_luck,chain_luck,decided_ms,messages,bytes,"
         "callback_spread_ms\n";
  for (const RoundRow& r : t.rounds) {
    out << r.height << ',' << r.winner << ',' << fmt_double(r.winner_luck)
        << ',' << fmt_double(r.chain_luck) << ',' << r.decided_ms << ','
        << r.messages << ',' << r.bytes << ',' << r.callback_spread_ms << '\n';
  }
}

}  // namespace luckchain
