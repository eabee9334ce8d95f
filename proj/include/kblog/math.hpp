#pragma once

#include <string>
#include <string_view>

#include "kblog/error.hpp"
#include "kblog/scanner.hpp"
#include "kblog/text.hpp"

namespace kblog {

struct NormalizedMath {
  std::string body;
  bool display = false;
  MathSyntax original_syntax = MathSyntax::shortcode;
  bool operator==(const NormalizedMath&) const = default;
};

inline NormalizedMath normalize_fragment(const MathFragment& f) {
  if (f.syntax == MathSyntax::mathml)
    throw Error(ErrorCode::MalformedMetadata, "MathML fragments are passed through, not normalized");
  std::string_view body = text::trim(f.body);
  if (body.empty()) throw Error(ErrorCode::EmptyBody, "empty " + std::string(to_string(f.syntax)) + " math fragment");
  return {std::string(body), f.display, f.syntax};
}

inline std::string render_math(const NormalizedMath& m) {
  if (m.display) return "<div class=\"kblog-math\">\\[" + text::escape_html(m.body) + "\\]</div>";
  return "<span class=\"kblog-math\">\\(" + text::escape_html(m.body) + "\\)</span>";
}

inline std::string passthrough_mathml(const MathFragment& f) {
  return "<span class=\"kblog-math kblog-mathml\">" + f.body + "</span>";
}

inline constexpr std::string_view kLoaderClass = "kblog-math-loader";

/// Adds the client-side renderer script once, before `</body>` when there is
/// one. Documents without math, or that already carry the loader, are returned
/// unchanged.
inline std::string inject_renderer(std::string html, std::size_t fragment_count, std::string_view renderer_url) {
  if (fragment_count == 0) return html;
  if (html.find("class=\"" + std::string(kLoaderClass) + "\"") != std::string::npos) return html;
  std::string tag = "<script src=\"" + text::escape_attr(renderer_url) + "\" class=\"" + std::string(kLoaderClass) +
                    "\"></script>";
  auto body_end = text::irfind(html, "</body>");
  if (body_end != std::string::npos) {
    html.insert(body_end, tag + "\n");
  } else {
    if (!html.empty() && html.back() != '\n') html += "\n";
    html += tag + "\n";
  }
  return html;
}

}  // namespace kblog
