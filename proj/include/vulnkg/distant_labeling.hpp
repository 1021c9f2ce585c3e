#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vulnkg/nvd_ingest.hpp"

namespace vulnkg {

/// One token of a description. Offsets are byte offsets into the original text,
/// so text == description.substr(start, end - start).
struct Token {
    std::string text;
    size_t start = 0;
    size_t end = 0;

    bool operator==(const Token&) const = default;
};

enum class Iob { B, I, O };
enum class Domain { VENDOR, PRODUCT, VERSION, RELEVANT_TERM, NONE };

const char* to_string(Iob iob);
const char* to_string(Domain d);
Iob iob_from_string(const std::string& s);
Domain domain_from_string(const std::string& s);

struct LabeledToken {
    Token token;
    Iob iob = Iob::O;
    Domain domain = Domain::NONE;
};

/// iob == O exactly when domain == NONE, and every I continues a same-domain span.
bool is_iob_well_formed(const std::vector<LabeledToken>& labeled);

/// Dictionary of vulnerability-relevant phrases, matched longest-first.
class Gazetteer {
public:
    Gazetteer() = default;

    /// Adds one phrase (lowercased and tokenized for lookup). Empty phrases are rejected.
    void add_phrase(std::string_view phrase);

    /// One phrase per line, UTF-8, '#' starts a comment line.
    static Gazetteer from_file(const std::string& path);
    static Gazetteer from_text(std::string_view text);

    size_t size() const { return phrases_.size(); }
    const std::vector<std::vector<std::string>>& phrases() const { return phrases_; }

private:
    std::vector<std::vector<std::string>> phrases_;  // pre-tokenized, lowercase
};

/// Matches \d+(\.[0-9a-zA-Z_-]+)*  (a digit run, then dot-separated segments).
bool is_version_shaped(std::string_view s);
size_t count_dots(std::string_view s);

/// Whitespace split, then leading/trailing punctuation peeled off as single-char
/// tokens. Trailing punctuation is kept when the remaining core is version-shaped
/// (so "2.5." loses the final dot but keeps its internal one).
std::vector<Token> tokenize(std::string_view text);

/// Cue words that license a one-dot version token ("before 2.5").
const std::vector<std::string>& default_version_cues();

std::vector<LabeledToken> label_with_cpe(const std::vector<Token>& tokens,
                                         const std::vector<CpeEntry>& cpes);
std::vector<LabeledToken> label_with_regex(
    const std::vector<Token>& tokens,
    const std::vector<std::string>& cues = default_version_cues());
std::vector<LabeledToken> label_with_gazetteer(const std::vector<Token>& tokens,
                                               const Gazetteer& gaz);

/// Runs all three labelers with priority CPE > gazetteer > regex; a token claimed
/// by a higher-priority labeler is never relabeled.
std::vector<LabeledToken> label_record(
    const CveRecord& record, const Gazetteer& gaz,
    const std::vector<std::string>& cues = default_version_cues());

/// CoNLL-style corpus: token<TAB>IOB<TAB>DOMAIN, blank line between descriptions.
std::string to_conll(const std::vector<std::vector<LabeledToken>>& sentences);
std::vector<std::vector<LabeledToken>> from_conll(const std::string& text);

}  // namespace vulnkg
