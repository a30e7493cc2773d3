#include "chewsense/common.hpp"

#include <algorithm>

namespace chewsense {

std::string_view to_string(Channel c) {
  return c == Channel::Masseter ? "masseter" : "submental";
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::NA: return "NA";
    case Label::C: return "C";
    case Label::S: return "S";
  }
  return "NA";
}

Label parse_label(std::string_view s) {
  if (s == "NA") return Label::NA;
  if (s == "C") return Label::C;
  if (s == "S") return Label::S;
  throw FormatError("unknown label '" + std::string(s) + "'");
}

double Interval::overlap(const Interval& o) const {
  return std::max(0.0, std::min(termination, o.termination) - std::max(onset, o.onset));
}

double Interval::iou(const Interval& o) const {
  const double inter = overlap(o);
  const double uni = duration() + o.duration() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace chewsense
