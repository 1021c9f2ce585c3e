#include "vulnkg/distant_labeling.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "vulnkg/util.hpp"

namespace vulnkg {

const char* to_string(Iob iob) {
    switch (iob) {
        case Iob::B: return "B";
        case Iob::I: return "I";
        case Iob::O: return "O";
    }
    return "O";
}

const char* to_string(Domain d) {
    switch (d) {
        case Domain::VENDOR: return "VENDOR";
        case Domain::PRODUCT: return "PRODUCT";
        case Domain::VERSION: return "VERSION";
        case Domain::RELEVANT_TERM: return "RELEVANT_TERM";
        case Domain::NONE: return "NONE";
    }
    return "NONE";
}

Iob iob_from_string(const std::string& s) {
    if (s == "B") return Iob::B;
    if (s == "I") return Iob::I;
    if (s == "O") return Iob::O;
    throw std::runtime_error("unknown IOB tag: " + s);
}

Domain domain_from_string(const std::string& s) {
    if (s == "VENDOR") return Domain::VENDOR;
    if (s == "PRODUCT") return Domain::PRODUCT;
    if (s == "VERSION") return Domain::VERSION;
    if (s == "RELEVANT_TERM") return Domain::RELEVANT_TERM;
    if (s == "NONE") return Domain::NONE;
    throw std::runtime_error("unknown domain label: " + s);
}

bool is_iob_well_formed(const std::vector<LabeledToken>& labeled) {
    for (size_t i = 0; i < labeled.size(); ++i) {
        const LabeledToken& t = labeled[i];
        if ((t.iob == Iob::O) != (t.domain == Domain::NONE)) return false;
        if (t.iob == Iob::I) {
            if (i == 0) return false;
            const LabeledToken& prev = labeled[i - 1];
            if (prev.iob == Iob::O || prev.domain != t.domain) return false;
        }
    }
    return true;
}

bool is_version_shaped(std::string_view s) {
    size_t i = 0;
    if (i >= s.size() || !isdigit(static_cast<unsigned char>(s[i]))) return false;
    while (i < s.size() && isdigit(static_cast<unsigned char>(s[i]))) ++i;
    while (i < s.size()) {
        if (s[i] != '.') return false;
        ++i;
        size_t seg = 0;
        while (i < s.size() &&
               (isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == '-')) {
            ++i;
            ++seg;
        }
        if (seg == 0) return false;
    }
    return true;
}

size_t count_dots(std::string_view s) {
    return static_cast<size_t>(std::count(s.begin(), s.end(), '.'));
}

namespace {

bool is_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        size_t chunk_end = i;
        while (chunk_end < text.size() &&
               !std::isspace(static_cast<unsigned char>(text[chunk_end]))) {
            ++chunk_end;
        }
        size_t s = i;
        size_t e = chunk_end;
        // Peel leading punctuation (a version-shaped core starts with a digit,
        // so this never eats into one).
        while (s < e && is_punct(text[s])) {
            tokens.push_back({std::string(text.substr(s, 1)), s, s + 1});
            ++s;
        }
        // Peel trailing punctuation until the core is version-shaped or clean.
        std::vector<Token> tail;
        while (s < e && is_punct(text[e - 1]) && !is_version_shaped(text.substr(s, e - s))) {
            tail.push_back({std::string(text.substr(e - 1, 1)), e - 1, e});
            --e;
        }
        if (s < e) tokens.push_back({std::string(text.substr(s, e - s)), s, e});
        for (auto it = tail.rbegin(); it != tail.rend(); ++it) tokens.push_back(*it);
        i = chunk_end;
    }
    return tokens;
}

void Gazetteer::add_phrase(std::string_view phrase) {
    std::string lowered = to_lower(phrase);
    std::vector<Token> toks = tokenize(lowered);
    if (toks.empty()) throw std::invalid_argument("gazetteer phrase is empty");
    std::vector<std::string> words;
    words.reserve(toks.size());
    for (auto& t : toks) words.push_back(std::move(t.text));
    if (std::find(phrases_.begin(), phrases_.end(), words) == phrases_.end()) {
        phrases_.push_back(std::move(words));
    }
}

Gazetteer Gazetteer::from_text(std::string_view text) {
    Gazetteer gaz;
    for (const std::string& line : split(text, '\n')) {
        size_t hash = line.find('#');
        std::string body = hash == std::string::npos ? line : line.substr(0, hash);
        // trim
        size_t b = body.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = body.find_last_not_of(" \t\r");
        gaz.add_phrase(std::string_view(body).substr(b, e - b + 1));
    }
    return gaz;
}

Gazetteer Gazetteer::from_file(const std::string& path) {
    return from_text(read_file(path));
}

const std::vector<std::string>& default_version_cues() {
    static const std::vector<std::string> cues = {"before", "after",    "through", "prior",
                                                  "to",     "earlier",  "and",     "up",
                                                  "versions", "version"};
    return cues;
}

namespace {

struct MatchPhrase {
    std::vector<std::string> words;  // lowercase
    Domain domain = Domain::NONE;
    int tie_rank = 0;  // lower wins at equal length
};

// Greedy left-to-right longest match over unclaimed tokens. Ties at equal token
// length go to the lowest tie_rank.
void apply_phrase_matches(const std::vector<Token>& tokens,
                          const std::vector<MatchPhrase>& phrases, std::vector<bool>& claimed,
                          std::vector<LabeledToken>& out) {
    std::vector<std::string> lowered(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) lowered[i] = to_lower(tokens[i].text);

    size_t i = 0;
    while (i < tokens.size()) {
        if (claimed[i]) {
            ++i;
            continue;
        }
        const MatchPhrase* best = nullptr;
        for (const MatchPhrase& p : phrases) {
            size_t len = p.words.size();
            if (i + len > tokens.size()) continue;
            bool ok = true;
            for (size_t k = 0; k < len; ++k) {
                if (claimed[i + k] || lowered[i + k] != p.words[k]) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            if (!best || len > best->words.size() ||
                (len == best->words.size() && p.tie_rank < best->tie_rank)) {
                best = &p;
            }
        }
        if (!best) {
            ++i;
            continue;
        }
        for (size_t k = 0; k < best->words.size(); ++k) {
            out[i + k].iob = k == 0 ? Iob::B : Iob::I;
            out[i + k].domain = best->domain;
            claimed[i + k] = true;
        }
        i += best->words.size();
    }
}

std::vector<LabeledToken> all_outside(const std::vector<Token>& tokens) {
    std::vector<LabeledToken> out(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) out[i].token = tokens[i];
    return out;
}

std::vector<MatchPhrase> cpe_phrases(const std::vector<CpeEntry>& cpes) {
    std::vector<MatchPhrase> phrases;
    auto add = [&phrases](const std::string& raw, Domain domain, int rank) {
        if (raw.empty() || raw == "*" || raw == "-") return;
        std::string normalized = to_lower(raw);
        std::replace(normalized.begin(), normalized.end(), '_', ' ');
        std::vector<Token> toks = tokenize(normalized);
        if (toks.empty()) return;
        MatchPhrase p;
        p.domain = domain;
        p.tie_rank = rank;
        for (auto& t : toks) p.words.push_back(std::move(t.text));
        for (const MatchPhrase& q : phrases) {
            if (q.words == p.words && q.domain == p.domain) return;
        }
        phrases.push_back(std::move(p));
    };
    // At equal length a product reading beats a vendor one (vendors often reuse
    // the product name, e.g. limesurvey:limesurvey).
    for (const CpeEntry& c : cpes) {
        add(c.product, Domain::PRODUCT, 0);
        add(c.vendor, Domain::VENDOR, 1);
        add(c.version, Domain::VERSION, 2);
    }
    return phrases;
}

void apply_regex_labels(const std::vector<Token>& tokens, const std::vector<std::string>& cues,
                        std::vector<bool>& claimed, std::vector<LabeledToken>& out) {
    auto is_cue = [&cues](const Token& t) {
        std::string lower = to_lower(t.text);
        return std::find(cues.begin(), cues.end(), lower) != cues.end();
    };
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (claimed[i]) continue;
        const std::string& text = tokens[i].text;
        if (!is_version_shaped(text)) continue;
        size_t dots = count_dots(text);
        bool label = false;
        if (dots >= 2) {
            label = true;
        } else if (dots >= 1) {
            bool cue_before = i > 0 && is_cue(tokens[i - 1]);
            bool cue_after = i + 1 < tokens.size() && is_cue(tokens[i + 1]);
            label = cue_before || cue_after;
        }
        if (label) {
            out[i].iob = Iob::B;
            out[i].domain = Domain::VERSION;
            claimed[i] = true;
        }
    }
}

std::vector<MatchPhrase> gazetteer_phrases(const Gazetteer& gaz) {
    std::vector<MatchPhrase> phrases;
    phrases.reserve(gaz.phrases().size());
    for (const auto& words : gaz.phrases()) {
        phrases.push_back({words, Domain::RELEVANT_TERM, 0});
    }
    return phrases;
}

}  // namespace

std::vector<LabeledToken> label_with_cpe(const std::vector<Token>& tokens,
                                         const std::vector<CpeEntry>& cpes) {
    std::vector<LabeledToken> out = all_outside(tokens);
    std::vector<bool> claimed(tokens.size(), false);
    apply_phrase_matches(tokens, cpe_phrases(cpes), claimed, out);
    return out;
}

std::vector<LabeledToken> label_with_regex(const std::vector<Token>& tokens,
                                           const std::vector<std::string>& cues) {
    std::vector<LabeledToken> out = all_outside(tokens);
    std::vector<bool> claimed(tokens.size(), false);
    apply_regex_labels(tokens, cues, claimed, out);
    return out;
}

std::vector<LabeledToken> label_with_gazetteer(const std::vector<Token>& tokens,
                                               const Gazetteer& gaz) {
    std::vector<LabeledToken> out = all_outside(tokens);
    std::vector<bool> claimed(tokens.size(), false);
    apply_phrase_matches(tokens, gazetteer_phrases(gaz), claimed, out);
    return out;
}

std::vector<LabeledToken> label_record(const CveRecord& record, const Gazetteer& gaz,
                                       const std::vector<std::string>& cues) {
    std::vector<Token> tokens = tokenize(record.description);
    std::vector<LabeledToken> out = all_outside(tokens);
    std::vector<bool> claimed(tokens.size(), false);
    apply_phrase_matches(tokens, cpe_phrases(record.cpes), claimed, out);
    apply_phrase_matches(tokens, gazetteer_phrases(gaz), claimed, out);
    apply_regex_labels(tokens, cues, claimed, out);
    return out;
}

std::string to_conll(const std::vector<std::vector<LabeledToken>>& sentences) {
    std::string out;
    for (const auto& sentence : sentences) {
        for (const LabeledToken& t : sentence) {
            out += t.token.text;
            out += '\t';
            out += to_string(t.iob);
            out += '\t';
            out += to_string(t.domain);
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

std::vector<std::vector<LabeledToken>> from_conll(const std::string& text) {
    std::vector<std::vector<LabeledToken>> sentences;
    if (text.empty()) return sentences;
    std::vector<std::string> lines = split(text, '\n');
    if (text.back() == '\n') lines.pop_back();

    // Each sentence block is terminated by one blank line, so empty sentences
    // round-trip (they appear as a lone blank line).
    std::vector<LabeledToken> current;
    size_t offset = 0;
    bool open = false;
    for (std::string& line : lines) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            sentences.push_back(std::move(current));
            current.clear();
            offset = 0;
            open = false;
            continue;
        }
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 3) throw std::runtime_error("bad corpus line: " + line);
        LabeledToken t;
        t.token.text = cols[0];
        t.token.start = offset;
        t.token.end = offset + cols[0].size();
        offset = t.token.end + 1;
        t.iob = iob_from_string(cols[1]);
        t.domain = domain_from_string(cols[2]);
        current.push_back(std::move(t));
        open = true;
    }
    if (open) sentences.push_back(std::move(current));
    return sentences;
}

}  // namespace vulnkg
