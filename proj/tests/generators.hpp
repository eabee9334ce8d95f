#pragma once

// Random inputs and brute-force oracles shared by the property tests and the
// acceptance suite.

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "kblog/citations.hpp"
#include "kblog/scanner.hpp"

namespace kblog_test {

struct GeneratedDoc {
  std::string text;
  std::vector<std::string> cite_bodies;  // planted outside masked regions, in order
  std::size_t math_count = 0;            // likewise
};

namespace gen {

inline std::size_t pick(std::mt19937& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

inline std::string noise(std::mt19937& rng, bool hostile) {
  static const std::string safe = "abcdefghij XYZ 0123456789.,;:/-_\n\t&\"'=";
  static const std::vector<std::string> tricky{"[", "]", "$", "$$", "\\", "\\[", "<", ">", "[/cite]", "[cite",
                                               "<pre", "</code>", "-->", "```", "$latex", "[latex]", "\xC3\xA9",
                                               "[bibliography", "<math", "/]", "=\""};
  std::string out;
  std::size_t n = pick(rng, 12);
  for (std::size_t i = 0; i < n; ++i) {
    if (hostile && pick(rng, 4) == 0) out += tricky[pick(rng, tricky.size())];
    else out += safe[pick(rng, safe.size())];
  }
  return out;
}

inline std::string masked_block(std::mt19937& rng) {
  static const std::vector<std::string> inner{"[cite]10.1000/masked[/cite]", "$$m$$", "\\[m\\]", "[latex]m[/latex]",
                                              "[aexp id=\"E-MEXP-1\"]species[/aexp]", "<math><mi>m</mi></math>"};
  const std::string& body = inner[pick(rng, inner.size())];
  switch (pick(rng, 4)) {
    case 0: return "<pre>" + body + "</pre>";
    case 1: return "<code class=\"x\">" + body + "</code>";
    case 2: return "<!-- " + body + " -->";
    default: return "\n```\n" + body + "\n```\n";
  }
}

}  // namespace gen

/// Noise interleaved with valid tokens, some of them masked. With `hostile`,
/// noise may contain delimiter fragments, so only structural properties hold;
/// without it every planted token is expected back.
inline GeneratedDoc random_document(std::mt19937& rng, bool hostile) {
  GeneratedDoc doc;
  std::size_t pieces = gen::pick(rng, 16);
  for (std::size_t i = 0; i < pieces; ++i) {
    doc.text += gen::noise(rng, hostile);
    switch (gen::pick(rng, 8)) {
      case 0: {
        std::string body = "10.1000/t" + std::to_string(gen::pick(rng, 50));
        doc.text += "[cite]" + body + "[/cite]";
        doc.cite_bodies.push_back(body);
        break;
      }
      case 1: {
        std::string body = std::to_string(1 + gen::pick(rng, 9999999));
        doc.text += "[cite source='pubmed']" + body + "[/cite]";
        doc.cite_bodies.push_back(body);
        break;
      }
      case 2: doc.text += "[latex]x^" + std::to_string(i) + "[/latex]"; ++doc.math_count; break;
      case 3: doc.text += " $$y_" + std::to_string(i) + "$$ "; ++doc.math_count; break;
      case 4: doc.text += "\\[z\\]"; ++doc.math_count; break;
      case 5: doc.text += "<math><mi>w</mi></math>"; ++doc.math_count; break;
      case 6: doc.text += "[aexp id=\"E-MEXP-" + std::to_string(gen::pick(rng, 9)) + "\"]species[/aexp]"; break;
      default: doc.text += gen::masked_block(rng); break;
    }
  }
  doc.text += gen::noise(rng, hostile);
  return doc;
}

/// Walks the list keeping a seen-set: the obvious first-appearance numbering.
inline std::map<std::string, int> numbering_oracle(const std::vector<std::string>& keys) {
  std::vector<std::string> seen;
  for (const auto& k : keys)
    if (std::find(seen.begin(), seen.end(), k) == seen.end()) seen.push_back(k);
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < seen.size(); ++i) out[seen[i]] = static_cast<int>(i + 1);
  return out;
}

/// Citation instances over an alphabet of `alphabet` DOIs; about one in ten is
/// a grammar failure, which takes no number.
inline std::vector<kblog::CitationInstance> random_citations(std::mt19937& rng, std::size_t alphabet,
                                                             std::size_t length, std::vector<std::string>& keys) {
  std::vector<kblog::CitationInstance> out;
  for (std::size_t i = 0; i < length; ++i) {
    kblog::CitationInstance c;
    if (gen::pick(rng, 10) == 0) {
      c.status = kblog::CitationStatus::invalid;
    } else {
      c.identifier = kblog::Identifier{kblog::IdentifierKind::doi_unknown_agency,
                                       "10.1000/id" + std::to_string(gen::pick(rng, alphabet))};
      keys.push_back(c.identifier->key());
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace kblog_test
