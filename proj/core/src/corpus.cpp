#include "ctxtag/corpus.hpp"

#include <fstream>
#include <sstream>

namespace ctxtag {

bool is_valid_bio(const std::string& label) {
  if (label == "O") return true;
  if (label.size() < 3) return false;
  if (label[0] != 'B' && label[0] != 'I') return false;
  return label[1] == '-';
}

std::string bio_entity_type(const std::string& label) {
  if (label == "O") return "";
  return label.substr(2);
}

TaggedCorpus TaggedCorpus::from_splits(std::string name,
                                       std::vector<Sentence> train,
                                       std::vector<Sentence> dev,
                                       std::vector<Sentence> test) {
  TaggedCorpus c;
  c.name = std::move(name);
  c.train = std::move(train);
  c.dev = std::move(dev);
  c.test = std::move(test);
  for (const auto* split : {&c.train, &c.dev, &c.test}) {
    for (const auto& s : *split) {
      for (const auto& t : s.tokens) {
        const std::string type = bio_entity_type(t.gold_label);
        if (!type.empty()) c.tag_set.insert(type);
      }
    }
  }
  return c;
}

std::vector<Sentence> parse_conll(const std::string& text, int token_col,
                                  int label_col) {
  std::vector<Sentence> out;
  Sentence current;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      out.push_back(std::move(current));
      current = Sentence{};
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Blank (or whitespace-only) line ends the sentence.
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line.rfind("-DOCSTART-", 0) == 0) continue;

    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string field;
    while (ls >> field) cols.push_back(field);

    const int lcol = label_col < 0 ? static_cast<int>(cols.size()) - 1 : label_col;
    if (token_col >= static_cast<int>(cols.size()) ||
        lcol >= static_cast<int>(cols.size()) || lcol < 0) {
      throw DataError("parse error at line " + std::to_string(line_no) +
                      ": expected at least " +
                      std::to_string(std::max(token_col, lcol) + 1) + " columns");
    }
    const std::string& label = cols[lcol];
    if (!is_valid_bio(label)) {
      throw DataError("parse error at line " + std::to_string(line_no) +
                      ": malformed BIO label '" + label + "'");
    }
    current.tokens.push_back(Token{cols[token_col], label});
  }
  flush();
  return out;
}

std::string write_conll(const std::vector<Sentence>& split) {
  std::string out;
  for (const auto& s : split) {
    for (const auto& t : s.tokens) {
      out += t.text;
      out += ' ';
      out += t.gold_label;
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

bool needs_bio_repair(const std::vector<std::string>& labels) {
  std::string prev_type;
  for (const auto& label : labels) {
    const std::string type = bio_entity_type(label);
    if (label[0] == 'I' && type != prev_type) return true;
    prev_type = type;
  }
  return false;
}

std::vector<Span> extract_spans(const std::vector<std::string>& labels) {
  std::vector<Span> spans;
  int start = -1;
  std::string open_type;
  auto close = [&](int end) {
    if (start >= 0) spans.push_back(Span{start, end, open_type});
    start = -1;
    open_type.clear();
  };
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    const std::string& label = labels[i];
    if (label == "O") {
      close(i);
      continue;
    }
    const std::string type = bio_entity_type(label);
    if (label[0] == 'B' || type != open_type) {
      // fresh B-, or an I- that cannot continue: starts a new span (repair)
      close(i);
      start = i;
      open_type = type;
    }
  }
  close(static_cast<int>(labels.size()));
  return spans;
}

std::vector<std::string> labels_from_spans(const std::vector<Span>& spans,
                                           int length) {
  std::vector<std::string> labels(length, "O");
  for (const auto& sp : spans) {
    labels[sp.start] = "B-" + sp.entity_type;
    for (int i = sp.start + 1; i < sp.end; ++i)
      labels[i] = "I-" + sp.entity_type;
  }
  return labels;
}

TaggedCorpus merge_corpora(const TaggedCorpus& a, const TaggedCorpus& b) {
  TaggedCorpus out;
  out.name = a.name + "(+" + b.name + ")";
  out.train = a.train;
  out.train.insert(out.train.end(), b.train.begin(), b.train.end());
  out.dev = a.dev;
  out.dev.insert(out.dev.end(), b.dev.begin(), b.dev.end());
  out.test = a.test;  // evaluation target stays the first corpus
  out.tag_set = a.tag_set;
  out.tag_set.insert(b.tag_set.begin(), b.tag_set.end());
  return out;
}

std::vector<char32_t> utf8_decode(const std::string& bytes,
                                  const std::string& source) {
  std::vector<char32_t> out;
  out.reserve(bytes.size());
  size_t i = 0;
  auto fail = [&](size_t at) -> DataError {
    return DataError("invalid UTF-8 in " + (source.empty() ? "input" : source) +
                     " at byte offset " + std::to_string(at));
  };
  while (i < bytes.size()) {
    const unsigned char b0 = bytes[i];
    int len;
    char32_t cp;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      throw fail(i);
    }
    if (i + len > bytes.size()) throw fail(i);
    for (int k = 1; k < len; ++k) {
      const unsigned char bk = bytes[i + k];
      if ((bk & 0xC0) != 0x80) throw fail(i + k);
      cp = (cp << 6) | (bk & 0x3F);
    }
    // reject overlong encodings and surrogates
    static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      throw fail(i);
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(const std::vector<char32_t>& chars) {
  std::string out;
  for (char32_t cp : chars) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
}

CharStream load_char_stream(const std::vector<std::string>& paths) {
  CharStream stream;
  for (size_t i = 0; i < paths.size(); ++i) {
    if (i > 0) stream.chars.push_back(CharStream::kSentinel);
    const std::vector<char32_t> chars = utf8_decode(read_file(paths[i]), paths[i]);
    stream.chars.insert(stream.chars.end(), chars.begin(), chars.end());
    if (!stream.source_id.empty()) stream.source_id += "+";
    stream.source_id += paths[i];
  }
  return stream;
}

CharStream char_stream_from_text(const std::string& text,
                                 const std::string& id) {
  CharStream stream;
  stream.source_id = id;
  stream.chars = utf8_decode(text, id);
  return stream;
}

}  // namespace ctxtag
