#pragma once

#include <string>
#include <vector>

namespace kpseq {

using Token = std::string;
using Phrase = std::vector<Token>;

// Lowercases and splits on whitespace/punctuation boundaries; runs of
// alphanumeric characters form tokens, every other printable character is a
// token of its own. Digit-only tokens are normalized to "<digit>".
std::vector<Token> tokenize(const std::string& text);

// Porter (1980) stemmer over a lowercase token. Idempotent.
std::string stem(const std::string& token);

// stem() applied to every token of a phrase.
Phrase stem_phrase(const Phrase& phrase);

std::string join(const Phrase& phrase, const std::string& sep = " ");

}  // namespace kpseq
