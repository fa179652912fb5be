#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ctxtag/errors.hpp"

namespace ctxtag {

// A BIO label is "O", "B-<type>" or "I-<type>".
bool is_valid_bio(const std::string& label);
std::string bio_entity_type(const std::string& label);  // "" for "O"

struct Token {
  std::string text;        // non-empty, no whitespace
  std::string gold_label;  // BIO
};

struct Sentence {
  std::vector<Token> tokens;  // non-empty
};

struct Span {
  int start = 0;  // token index, inclusive
  int end = 0;    // exclusive
  std::string entity_type;

  auto operator<=>(const Span&) const = default;
};

struct TaggedCorpus {
  std::string name;
  std::vector<Sentence> train, dev, test;
  std::set<std::string> tag_set;  // entity types, sorted

  static TaggedCorpus from_splits(std::string name, std::vector<Sentence> train,
                                  std::vector<Sentence> dev,
                                  std::vector<Sentence> test);
};

// Character stream for LM pretraining: Unicode scalar values with U+0000
// document-separator sentinels between source files.
struct CharStream {
  std::string source_id;
  std::vector<char32_t> chars;

  static constexpr char32_t kSentinel = U'\0';
};

// Whitespace-separated columns, blank line terminates a sentence,
// "-DOCSTART-" lines skipped. label_col = -1 means the last column.
std::vector<Sentence> parse_conll(const std::string& text, int token_col = 0,
                                  int label_col = -1);
std::string write_conll(const std::vector<Sentence>& split);

// Maximal BIO spans. An "I-X" that does not continue a same-type span is
// repaired as "B-X" (conlleval-style tolerance); never rejects.
std::vector<Span> extract_spans(const std::vector<std::string>& labels);
std::vector<std::string> labels_from_spans(const std::vector<Span>& spans,
                                           int length);
// True if the sequence needed any I- -> B- repair.
bool needs_bio_repair(const std::vector<std::string>& labels);

// Cross-corpus merge: train and dev are concatenated, test stays a's test
// (the evaluation target remains the first corpus), name becomes "a(+b)".
TaggedCorpus merge_corpora(const TaggedCorpus& a, const TaggedCorpus& b);

// UTF-8 decode; throws DataError naming the byte offset on invalid input.
std::vector<char32_t> utf8_decode(const std::string& bytes,
                                  const std::string& source = "");
std::string utf8_encode(const std::vector<char32_t>& chars);

// Concatenates the files with one sentinel between consecutive files.
CharStream load_char_stream(const std::vector<std::string>& paths);
CharStream char_stream_from_text(const std::string& text,
                                 const std::string& id = "inline");

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace ctxtag
