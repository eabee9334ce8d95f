#pragma once

// Lexical scanner for author documents: masked regions, bracket shortcodes,
// the TeX math syntaxes and inline MathML, plus the single-pass splicer that
// writes replacements back at exact byte offsets.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kblog/error.hpp"
#include "kblog/text.hpp"

namespace kblog {

struct SourceDocument {
  std::string text;
  std::string origin = "<stdin>";
};

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool intersects(const Span& o) const { return start < o.end && o.start < end; }
  bool operator==(const Span&) const = default;
};

enum class Severity { warn, error };

inline std::string_view to_string(Severity s) { return s == Severity::warn ? "warn" : "error"; }

struct Diagnostic {
  Severity severity = Severity::warn;
  std::size_t offset = 0;
  std::string message;
};

using Diagnostics = std::vector<Diagnostic>;

struct LineColumn {
  std::size_t line = 1;
  std::size_t column = 1;
};

/// 1-based line and column (counted in code points) of a byte offset.
inline LineColumn line_column(std::string_view text, std::size_t offset) {
  LineColumn lc;
  offset = std::min(offset, text.size());
  std::size_t i = 0;
  while (i < offset) {
    if (text[i] == '\n') {
      ++lc.line;
      lc.column = 1;
      ++i;
      continue;
    }
    i += text::utf8_length(static_cast<unsigned char>(text[i]));
    ++lc.column;
  }
  return lc;
}

struct ShortcodeToken {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::optional<std::string> body;
  Span span;

  std::optional<std::string> attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return v;
    return std::nullopt;
  }
  bool operator==(const ShortcodeToken&) const = default;
};

enum class MathSyntax { shortcode, double_dollar, dollar_latex, bracket, mathml };

inline std::string_view to_string(MathSyntax s) {
  switch (s) {
    case MathSyntax::shortcode: return "shortcode";
    case MathSyntax::double_dollar: return "double-dollar";
    case MathSyntax::dollar_latex: return "dollar-latex";
    case MathSyntax::bracket: return "bracket";
    case MathSyntax::mathml: return "mathml";
  }
  return "?";
}

struct MathFragment {
  MathSyntax syntax = MathSyntax::shortcode;
  std::string body;
  bool display = false;
  Span span;
  bool operator==(const MathFragment&) const = default;
};

enum class MaskKind { pre_element, code_element, html_comment, fenced_code };

struct MaskedRegion {
  Span span;
  MaskKind kind = MaskKind::pre_element;
  bool operator==(const MaskedRegion&) const = default;
};

/// Tags that never take a body; an immediately following close tag is absorbed.
inline const std::set<std::string, std::less<>>& void_shortcodes() {
  static const std::set<std::string, std::less<>> tags{"bibliography"};
  return tags;
}

namespace detail {

// `<name` followed by `>`, `/` or whitespace, so `<code` does not match `<codex`.
inline bool opens_element(std::string_view text, std::size_t pos, std::string_view name) {
  if (pos >= text.size() || text[pos] != '<') return false;
  if (!text::iequals(text.substr(pos + 1, name.size()), name)) return false;
  std::size_t after = pos + 1 + name.size();
  if (after >= text.size()) return false;
  char c = text[after];
  return c == '>' || c == '/' || text::is_space(c);
}

// End (exclusive) of the element opened at `pos`, honouring nesting of the same
// element name. Unterminated elements run to the end of the text.
inline std::size_t element_end(std::string_view text, std::size_t pos, std::string_view name) {
  const std::string close = "</" + std::string(name);
  std::size_t depth = 1;
  std::size_t i = pos + 1;
  while (i < text.size()) {
    std::size_t lt = text.find('<', i);
    if (lt == std::string_view::npos) break;
    if (opens_element(text, lt, name)) {
      ++depth;
      i = lt + 1;
      continue;
    }
    if (text::istarts_with(text.substr(lt), close)) {
      std::size_t gt = text.find('>', lt);
      if (gt == std::string_view::npos) return text.size();
      if (--depth == 0) return gt + 1;
      i = gt + 1;
      continue;
    }
    i = lt + 1;
  }
  return text.size();
}

// Index of the first masked region whose end is past `pos`.
inline std::size_t first_region_after(const std::vector<MaskedRegion>& masked, std::size_t pos) {
  auto it = std::upper_bound(masked.begin(), masked.end(), pos,
                             [](std::size_t p, const MaskedRegion& r) { return p < r.span.end; });
  return static_cast<std::size_t>(it - masked.begin());
}

inline bool is_masked(const std::vector<MaskedRegion>& masked, std::size_t pos) {
  std::size_t idx = first_region_after(masked, pos);
  return idx < masked.size() && masked[idx].span.start <= pos;
}

inline bool hits_mask(const std::vector<MaskedRegion>& masked, Span span) {
  std::size_t idx = first_region_after(masked, span.start);
  return idx < masked.size() && masked[idx].span.start < span.end;
}

// Cursor past any masked region containing `pos`.
inline std::size_t skip_masked(const std::vector<MaskedRegion>& masked, std::size_t pos) {
  std::size_t idx = first_region_after(masked, pos);
  if (idx < masked.size() && masked[idx].span.start <= pos) return masked[idx].span.end;
  return pos;
}

inline bool is_tag_char(char c) { return c >= 'a' && c <= 'z'; }

struct OpeningTag {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  bool self_closing = false;
  std::size_t end = 0;  // one past ']'
};

enum class TagParse { not_a_tag, malformed, ok };

// Parses `[name attr="v" attr='v' attr=v /]` at `pos`.
inline TagParse parse_opening(std::string_view text, std::size_t pos, OpeningTag& out) {
  std::size_t i = pos + 1;
  std::size_t name_start = i;
  while (i < text.size() && is_tag_char(text[i])) ++i;
  if (i == name_start || i >= text.size()) return TagParse::not_a_tag;
  if (text[i] != ']' && text[i] != '/' && !text::is_space(text[i])) return TagParse::not_a_tag;
  out.name = std::string(text.substr(name_start, i - name_start));
  out.attributes.clear();
  out.self_closing = false;
  for (;;) {
    while (i < text.size() && text::is_space(text[i])) ++i;
    if (i >= text.size()) return TagParse::malformed;
    if (text[i] == ']') {
      out.end = i + 1;
      return TagParse::ok;
    }
    if (text[i] == '/' && i + 1 < text.size() && text[i + 1] == ']') {
      out.self_closing = true;
      out.end = i + 2;
      return TagParse::ok;
    }
    std::size_t key_start = i;
    while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_' ||
                               text[i] == '-'))
      ++i;
    if (i == key_start) return TagParse::malformed;
    std::string key = text::to_lower(text.substr(key_start, i - key_start));
    while (i < text.size() && text::is_space(text[i])) ++i;
    if (i >= text.size() || text[i] != '=') {
      // valueless attribute
      out.attributes.emplace_back(std::move(key), std::string());
      continue;
    }
    ++i;
    while (i < text.size() && text::is_space(text[i])) ++i;
    if (i >= text.size()) return TagParse::malformed;
    std::string value;
    if (text[i] == '"' || text[i] == '\'') {
      char quote = text[i++];
      bool closed = false;
      while (i < text.size()) {
        char c = text[i];
        if (c == '\\' && i + 1 < text.size() &&
            (text[i + 1] == quote || text[i + 1] == ']' || text[i + 1] == '\\')) {
          value.push_back(text[i + 1]);
          i += 2;
          continue;
        }
        if (c == ']') return TagParse::malformed;
        if (c == quote) {
          closed = true;
          ++i;
          break;
        }
        value.push_back(c);
        ++i;
      }
      if (!closed) return TagParse::malformed;
    } else {
      while (i < text.size() && !text::is_space(text[i]) && text[i] != ']') {
        if (text[i] == '"' || text[i] == '\'') return TagParse::malformed;
        if (text[i] == '/' && i + 1 < text.size() && text[i + 1] == ']') break;
        value.push_back(text[i++]);
      }
    }
    out.attributes.emplace_back(std::move(key), std::move(value));
  }
}

inline void diag(Diagnostics* sink, Severity sev, std::size_t offset, std::string message) {
  if (sink) sink->push_back({sev, offset, std::move(message)});
}

}  // namespace detail

/// Maximal `<pre>`, `<code>`, comment and backtick-fence regions, sorted and
/// non-overlapping. Unterminated constructs extend to the end of the text.
inline std::vector<MaskedRegion> find_masked_regions(const SourceDocument& doc) {
  std::string_view text = doc.text;
  std::vector<MaskedRegion> regions;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t lt = text.find('<', i);
    std::size_t fence = text.find("```", i);
    std::size_t next = std::min(lt, fence);
    if (next == std::string_view::npos) break;
    if (next == fence) {
      std::size_t close = text.find("```", fence + 3);
      std::size_t end = close == std::string_view::npos ? text.size() : close + 3;
      regions.push_back({{fence, end}, MaskKind::fenced_code});
      i = end;
    } else if (text.substr(lt, 4) == "<!--") {
      std::size_t close = text.find("-->", lt + 4);
      std::size_t end = close == std::string_view::npos ? text.size() : close + 3;
      regions.push_back({{lt, end}, MaskKind::html_comment});
      i = end;
    } else if (detail::opens_element(text, lt, "pre")) {
      std::size_t end = detail::element_end(text, lt, "pre");
      regions.push_back({{lt, end}, MaskKind::pre_element});
      i = end;
    } else if (detail::opens_element(text, lt, "code")) {
      std::size_t end = detail::element_end(text, lt, "code");
      regions.push_back({{lt, end}, MaskKind::code_element});
      i = end;
    } else {
      i = lt + 1;
    }
  }
  return regions;
}

/// Every well-formed `[tag ...]body[/tag]` for `tags` whose opening bracket is
/// outside `masked`. Unterminated or malformed tags are skipped with a
/// diagnostic.
inline std::vector<ShortcodeToken> scan_shortcodes(const SourceDocument& doc,
                                                   const std::set<std::string, std::less<>>& tags,
                                                   const std::vector<MaskedRegion>& masked,
                                                   Diagnostics* diags = nullptr) {
  std::string_view text = doc.text;
  std::vector<ShortcodeToken> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    i = detail::skip_masked(masked, i);
    std::size_t open = text.find('[', i);
    if (open == std::string_view::npos) break;
    if (detail::is_masked(masked, open)) {
      i = detail::skip_masked(masked, open);
      continue;
    }
    detail::OpeningTag tag;
    auto parsed = detail::parse_opening(text, open, tag);
    if (parsed == detail::TagParse::not_a_tag || !tags.contains(tag.name)) {
      i = open + 1;
      continue;
    }
    if (parsed == detail::TagParse::malformed) {
      detail::diag(diags, Severity::warn, open, "malformed [" + tag.name + "] opening tag; left unchanged");
      i = open + 1;
      continue;
    }
    ShortcodeToken token;
    token.name = tag.name;
    token.attributes = std::move(tag.attributes);
    const std::string close = "[/" + token.name + "]";
    if (tag.self_closing || void_shortcodes().contains(token.name)) {
      std::size_t end = tag.end;
      if (!tag.self_closing && text.substr(end, close.size()) == close) end += close.size();
      token.span = {open, end};
      if (detail::hits_mask(masked, token.span)) token.span.end = tag.end;
      tokens.push_back(std::move(token));
      i = tokens.back().span.end;
      continue;
    }
    std::size_t close_pos = text.find(close, tag.end);
    bool ok = close_pos != std::string_view::npos;
    if (ok) {
      // A recognized opening before the close means this tag was never closed.
      for (std::size_t k = text.find('[', tag.end); k != std::string_view::npos && k < close_pos;
           k = text.find('[', k + 1)) {
        detail::OpeningTag inner;
        if (detail::parse_opening(text, k, inner) != detail::TagParse::not_a_tag &&
            tags.contains(inner.name)) {
          ok = false;
          break;
        }
      }
    }
    Span span{open, ok ? close_pos + close.size() : text.size()};
    if (ok && detail::hits_mask(masked, span)) ok = false;
    if (!ok) {
      detail::diag(diags, Severity::warn, open, "unterminated [" + token.name + "] shortcode; left unchanged");
      i = tag.end;
      continue;
    }
    token.body = std::string(text.substr(tag.end, close_pos - tag.end));
    token.span = span;
    tokens.push_back(std::move(token));
    i = span.end;
  }
  return tokens;
}

namespace detail {

inline bool escaped(std::string_view text, std::size_t pos) {
  std::size_t n = 0;
  while (pos > n && text[pos - n - 1] == '\\') ++n;
  return n % 2 == 1;
}

// Already-rendered math wrappers are skipped so a second pass leaves them alone.
inline std::size_t rendered_wrapper_end(std::string_view text, std::size_t pos) {
  for (std::string_view name : {"span", "div"}) {
    if (!opens_element(text, pos, name)) continue;
    std::size_t gt = text.find('>', pos);
    if (gt == std::string_view::npos) return 0;
    std::string_view open_tag = text.substr(pos, gt - pos);
    if (open_tag.find("class=\"kblog-math") == std::string_view::npos) return 0;
    return element_end(text, pos, name);
  }
  return 0;
}

}  // namespace detail

/// All math fragments outside `masked`, left to right; a span claimed by one
/// syntax is never matched again by another.
inline std::vector<MathFragment> scan_math(const SourceDocument& doc, const std::vector<MaskedRegion>& masked,
                                           Diagnostics* diags = nullptr) {
  std::string_view text = doc.text;
  std::vector<MathFragment> out;
  std::size_t i = 0;

  auto claim = [&](MathSyntax syntax, std::size_t start, std::size_t body_start, std::size_t body_end,
                   std::size_t end, bool display) -> bool {
    Span span{start, end};
    if (detail::hits_mask(masked, span)) return false;
    out.push_back({syntax, std::string(text.substr(body_start, body_end - body_start)), display, span});
    i = end;
    return true;
  };
  auto unterminated = [&](std::size_t pos, std::size_t opener_len, std::string_view what) {
    detail::diag(diags, Severity::warn, pos, "unterminated " + std::string(what) + " math; left unchanged");
    i = pos + opener_len;
  };

  while (i < text.size()) {
    i = detail::skip_masked(masked, i);
    if (i >= text.size()) break;
    char c = text[i];
    if (c == '$') {
      if (detail::escaped(text, i)) { ++i; continue; }
      if (text.substr(i, 2) == "$$") {
        std::size_t close = text.find("$$", i + 2);
        if (close == std::string_view::npos || !claim(MathSyntax::double_dollar, i, i + 2, close, close + 2, true))
          unterminated(i, 2, "$$");
        continue;
      }
      if (text.substr(i, 6) == "$latex" && i + 6 < text.size() && text::is_space(text[i + 6])) {
        std::size_t close = text.find('$', i + 6);
        if (close == std::string_view::npos || !claim(MathSyntax::dollar_latex, i, i + 6, close, close + 1, false))
          unterminated(i, 6, "$latex");
        continue;
      }
      ++i;
      continue;
    }
    if (c == '\\' && text.substr(i, 2) == "\\[" && !detail::escaped(text, i)) {
      std::size_t close = text.find("\\]", i + 2);
      if (close == std::string_view::npos || !claim(MathSyntax::bracket, i, i + 2, close, close + 2, true))
        unterminated(i, 2, "\\[");
      continue;
    }
    if (c == '[' && text.substr(i, 7) == "[latex]") {
      std::size_t close = text.find("[/latex]", i + 7);
      if (close == std::string_view::npos || !claim(MathSyntax::shortcode, i, i + 7, close, close + 8, false))
        unterminated(i, 7, "[latex]");
      continue;
    }
    if (c == '<') {
      if (std::size_t end = detail::rendered_wrapper_end(text, i); end > i) {
        i = end;
        continue;
      }
      if (detail::opens_element(text, i, "math")) {
        std::size_t close = text::ifind(text, "</math>", i);
        if (close == std::string_view::npos) {
          unterminated(i, 5, "<math>");
          continue;
        }
        std::size_t gt = text.find('>', i);
        std::string_view open_tag = text.substr(i, gt - i);
        bool display = text::ifind(open_tag, "display=\"block\"") != std::string_view::npos ||
                       text::ifind(open_tag, "display='block'") != std::string_view::npos;
        if (!claim(MathSyntax::mathml, i, i, close + 7, close + 7, display)) unterminated(i, 5, "<math>");
        continue;
      }
    }
    ++i;
  }
  return out;
}

/// Replaces each span with its string in one pass; bytes outside spans are
/// copied unchanged.
inline std::string splice(const SourceDocument& doc, std::vector<std::pair<Span, std::string>> replacements) {
  std::stable_sort(replacements.begin(), replacements.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.start != b.first.start ? a.first.start < b.first.start : a.first.end < b.first.end;
                   });
  for (std::size_t k = 0; k < replacements.size(); ++k) {
    const Span& s = replacements[k].first;
    if (s.start > s.end || s.end > doc.text.size())
      throw Error(ErrorCode::InvalidSpan, "span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                              ") outside document of " + std::to_string(doc.text.size()) + " bytes");
    if (k > 0) {
      const Span& prev = replacements[k - 1].first;
      if (s.start < prev.end)
        throw Error(ErrorCode::OverlappingReplacement,
                    "spans starting at " + std::to_string(prev.start) + " and " + std::to_string(s.start) + " overlap");
    }
  }
  std::string out;
  out.reserve(doc.text.size());
  std::size_t cursor = 0;
  for (const auto& [span, replacement] : replacements) {
    out.append(doc.text, cursor, span.start - cursor);
    out += replacement;
    cursor = span.end;
  }
  out.append(doc.text, cursor, std::string::npos);
  return out;
}

}  // namespace kblog
