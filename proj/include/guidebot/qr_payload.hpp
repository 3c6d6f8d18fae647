#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "guidebot/geometry.hpp"

namespace guidebot {

struct MalformedPayload : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Contents of one QR anchor tag: where the map lives and where the tag is.
struct QrPayload {
  std::string map_link;
  std::string speed_map_link;
  std::optional<std::string> semantic_link;
  Transform3D tag_pose;  // map frame
};

namespace detail {

/// Just enough XML for the anchor schema: elements, attributes, comments,
/// an optional declaration. No namespaces, no CDATA, no DTD.
struct XmlElement {
  std::string name;
  std::map<std::string, std::string> attrs;
  std::vector<XmlElement> children;
};

class XmlParser {
 public:
  explicit XmlParser(const std::string& text) : s_(text) {}

  XmlElement parse_document() {
    skip_misc();
    XmlElement root = parse_element();
    skip_misc();
    if (pos_ != s_.size()) fail("trailing content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw MalformedPayload("payload XML: " + why);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  void skip_misc() {
    for (;;) {
      skip_ws();
      if (s_.compare(pos_, 2, "<?") == 0) {
        const auto end = s_.find("?>", pos_);
        if (end == std::string::npos) fail("unterminated declaration");
        pos_ = end + 2;
      } else if (s_.compare(pos_, 4, "<!--") == 0) {
        const auto end = s_.find("-->", pos_);
        if (end == std::string::npos) fail("unterminated comment");
        pos_ = end + 3;
      } else {
        return;
      }
    }
  }

  std::string parse_name() {
    const size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                      s_[pos_] == '-' || s_[pos_] == ':' || s_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a name");
    return s_.substr(start, pos_ - start);
  }

  std::string decode_entities(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (size_t i = 0; i < raw.size();) {
      if (raw[i] != '&') {
        out += raw[i++];
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string::npos) fail("unterminated entity");
      const std::string ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out += '&';
      else if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else fail("unknown entity &" + ent + ";");
      i = semi + 1;
    }
    return out;
  }

  std::string parse_attr_value() {
    const char quote = peek();
    if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
    ++pos_;
    const auto end = s_.find(quote, pos_);
    if (end == std::string::npos) fail("unterminated attribute value");
    std::string raw = s_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return decode_entities(raw);
  }

  XmlElement parse_element() {
    if (peek() != '<') fail("expected '<'");
    ++pos_;
    XmlElement el;
    el.name = parse_name();
    for (;;) {
      skip_ws();
      if (eof()) fail("unterminated tag <" + el.name + ">");
      if (peek() == '/') {
        ++pos_;
        if (peek() != '>') fail("malformed self-closing tag");
        ++pos_;
        return el;
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      const std::string key = parse_name();
      skip_ws();
      if (peek() != '=') fail("attribute " + key + " missing '='");
      ++pos_;
      skip_ws();
      if (!el.attrs.emplace(key, parse_attr_value()).second) {
        fail("duplicate attribute " + key);
      }
    }
    // Children and closing tag. Free text is ignored.
    for (;;) {
      const auto lt = s_.find('<', pos_);
      if (lt == std::string::npos) fail("missing </" + el.name + ">");
      pos_ = lt;
      if (s_.compare(pos_, 2, "</") == 0) {
        pos_ += 2;
        const std::string closing = parse_name();
        if (closing != el.name) fail("mismatched </" + closing + ">");
        skip_ws();
        if (peek() != '>') fail("malformed closing tag");
        ++pos_;
        return el;
      }
      if (s_.compare(pos_, 4, "<!--") == 0) {
        skip_misc();
        continue;
      }
      el.children.push_back(parse_element());
    }
  }

  const std::string& s_;
  size_t pos_ = 0;
};

inline double payload_number(const std::map<std::string, std::string>& attrs,
                             const std::string& key) {
  const auto it = attrs.find(key);
  if (it == attrs.end()) throw MalformedPayload("pose attribute " + key + " missing");
  const std::string& v = it->second;
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw MalformedPayload("pose attribute " + key + " is not a number: '" + v + "'");
  }
  return out;
}

inline const XmlElement* find_child(const XmlElement& el, const std::string& name) {
  for (const auto& c : el.children) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

inline std::string required_href(const XmlElement& root, const std::string& name) {
  const XmlElement* el = find_child(root, name);
  if (el == nullptr) throw MalformedPayload("missing <" + name + "> element");
  const auto it = el->attrs.find("href");
  if (it == el->attrs.end() || it->second.empty()) {
    throw MalformedPayload("<" + name + "> needs a nonempty href");
  }
  return it->second;
}

inline std::string encode_entities(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  for (const char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

/// Parses the anchor payload. The pose quaternion must be unit to within
/// 1e-3; anything further off is rejected rather than silently fixed.
inline QrPayload parse_payload(const std::string& text) {
  detail::XmlParser parser(text);
  const detail::XmlElement root = parser.parse_document();
  if (root.name != "speedmap_anchor") {
    throw MalformedPayload("root element must be <speedmap_anchor>, got <" + root.name + ">");
  }
  QrPayload p;
  p.map_link = detail::required_href(root, "map");
  p.speed_map_link = detail::required_href(root, "speedmap");
  if (const auto* sem = detail::find_child(root, "semantic")) {
    const auto it = sem->attrs.find("href");
    if (it == sem->attrs.end() || it->second.empty()) {
      throw MalformedPayload("<semantic> needs a nonempty href");
    }
    p.semantic_link = it->second;
  }
  const detail::XmlElement* pose = detail::find_child(root, "pose");
  if (pose == nullptr) throw MalformedPayload("missing <pose> element");
  const Vec3 t{detail::payload_number(pose->attrs, "x"), detail::payload_number(pose->attrs, "y"),
               detail::payload_number(pose->attrs, "z")};
  const Quat q{detail::payload_number(pose->attrs, "qw"), detail::payload_number(pose->attrs, "qx"),
               detail::payload_number(pose->attrs, "qy"), detail::payload_number(pose->attrs, "qz")};
  if (std::abs(q.norm() - 1.0) > 1e-3) {
    throw MalformedPayload("pose quaternion is not unit length");
  }
  p.tag_pose = Transform3D{t, q};
  return p;
}

/// Canonical emitter: fixed element order, 9 significant digits, so equal
/// payloads serialize byte-identically.
inline std::string generate_payload(const QrPayload& p) {
  using detail::encode_entities;
  using detail::fmt9;
  std::string out = "<?xml version=\"1.0\"?>\n<speedmap_anchor>\n";
  out += "  <map href=\"" + encode_entities(p.map_link) + "\"/>\n";
  out += "  <speedmap href=\"" + encode_entities(p.speed_map_link) + "\"/>\n";
  if (p.semantic_link) {
    out += "  <semantic href=\"" + encode_entities(*p.semantic_link) + "\"/>\n";
  }
  const Vec3& t = p.tag_pose.translation;
  const Quat& q = p.tag_pose.rotation;
  out += "  <pose x=\"" + fmt9(t.x()) + "\" y=\"" + fmt9(t.y()) + "\" z=\"" + fmt9(t.z()) +
         "\" qw=\"" + fmt9(q.w()) + "\" qx=\"" + fmt9(q.x()) + "\" qy=\"" + fmt9(q.y()) +
         "\" qz=\"" + fmt9(q.z()) + "\"/>\n";
  out += "</speedmap_anchor>\n";
  return out;
}

}  // namespace guidebot
