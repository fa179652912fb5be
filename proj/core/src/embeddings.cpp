#include "ctxtag/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ctxtag {

PoolOp parse_pool_op(const std::string& name) {
  if (name == "mean") return PoolOp::Mean;
  if (name == "min") return PoolOp::Min;
  if (name == "max") return PoolOp::Max;
  throw ConfigError("unknown pool op '" + name + "' (expected mean|min|max)");
}

std::string pool_op_name(PoolOp op) {
  switch (op) {
    case PoolOp::Mean: return "mean";
    case PoolOp::Min: return "min";
    case PoolOp::Max: return "max";
  }
  return "?";
}

namespace {

// "\n" + tokens joined by single spaces + " ", as Unicode scalar values,
// plus each token's [first, last] character positions.
struct Rendering {
  std::vector<char32_t> chars;
  std::vector<std::pair<int, int>> token_bounds;
};

Rendering render_sentence(const Sentence& s) {
  Rendering r;
  r.chars.push_back(U'\n');
  for (const auto& tok : s.tokens) {
    const std::vector<char32_t> tchars = utf8_decode(tok.text, "token");
    const int first = static_cast<int>(r.chars.size());
    r.chars.insert(r.chars.end(), tchars.begin(), tchars.end());
    const int last = static_cast<int>(r.chars.size()) - 1;
    r.token_bounds.emplace_back(first, last);
    r.chars.push_back(U' ');
  }
  return r;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), 1);
  for (int r = 0; r < a.rows(); ++r) out.at(r, 0) = a.at(r, 0);
  for (int r = 0; r < b.rows(); ++r) out.at(a.rows() + r, 0) = b.at(r, 0);
  return out;
}

}  // namespace

std::vector<Matrix> contextual_string_embed(const CharLMCheckpoint& fwd,
                                            const CharLMCheckpoint& bwd,
                                            const Sentence& s) {
  if (fwd.direction != LmDirection::Forward ||
      bwd.direction != LmDirection::Backward)
    throw ConfigError("contextual_string_embed: need a forward/backward pair");
  if (fwd.hidden_dim != bwd.hidden_dim)
    throw ConfigError("contextual_string_embed: hidden dims differ");

  const Rendering r = render_sentence(s);
  const std::vector<Matrix> fwd_states = hidden_states(fwd, fwd.vocab.encode(r.chars));
  const std::vector<Matrix> bwd_states = hidden_states(bwd, bwd.vocab.encode(r.chars));

  std::vector<Matrix> out;
  out.reserve(s.tokens.size());
  for (const auto& [first, last] : r.token_bounds) {
    out.push_back(concat_cols(fwd_states[last], bwd_states[first]));
  }
  return out;
}

ContextualEmbedder::ContextualEmbedder(std::shared_ptr<CharLMCheckpoint> fwd,
                                       std::shared_ptr<CharLMCheckpoint> bwd)
    : fwd_(std::move(fwd)), bwd_(std::move(bwd)) {
  if (fwd_->direction != LmDirection::Forward ||
      bwd_->direction != LmDirection::Backward)
    throw ConfigError("ContextualEmbedder: need a forward/backward pair");
  if (fwd_->hidden_dim != bwd_->hidden_dim)
    throw ConfigError("ContextualEmbedder: hidden dims differ");
}

std::vector<Matrix> ContextualEmbedder::embed(const Sentence& s,
                                              const SentencePosition&) {
  std::string key;
  for (const auto& t : s.tokens) {
    key += t.text;
    key += ' ';
  }
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  std::vector<Matrix> vecs = contextual_string_embed(*fwd_, *bwd_, s);
  cache_.emplace(std::move(key), vecs);
  return vecs;
}

void PooledMemory::update(const std::string& word, const Matrix& current) {
  auto it = entries_.find(word);
  if (it == entries_.end()) {
    entries_.emplace(word, Aggregate{1, current, current, current});
    return;
  }
  Aggregate& agg = it->second;
  ++agg.count;
  const real inv = real{1} / agg.count;
  for (size_t i = 0; i < current.size(); ++i) {
    agg.mean[i] += (current[i] - agg.mean[i]) * inv;
    agg.min[i] = std::min(agg.min[i], current[i]);
    agg.max[i] = std::max(agg.max[i], current[i]);
  }
}

Matrix PooledMemory::pooled(const std::string& word, PoolOp op) const {
  auto it = entries_.find(word);
  if (it == entries_.end())
    throw DataError("PooledMemory: no aggregate for '" + word + "'");
  switch (op) {
    case PoolOp::Mean: return it->second.mean;
    case PoolOp::Min: return it->second.min;
    case PoolOp::Max: return it->second.max;
  }
  throw DataError("PooledMemory: bad op");
}

Matrix pooled_embed(PooledMemory& mem, PoolOp pool,
                    const std::string& token_text, const Matrix& current) {
  mem.update(token_text, current);
  return concat_cols(mem.pooled(token_text, pool), current);
}

PooledContextualEmbedder::PooledContextualEmbedder(
    std::shared_ptr<CharLMCheckpoint> fwd, std::shared_ptr<CharLMCheckpoint> bwd,
    PoolOp pool)
    : base_(std::move(fwd), std::move(bwd)), pool_(pool) {}

std::vector<Matrix> PooledContextualEmbedder::embed(
    const Sentence& s, const SentencePosition& pos) {
  std::vector<Matrix> base = base_.embed(s, pos);
  std::vector<Matrix> out;
  out.reserve(base.size());
  for (size_t i = 0; i < base.size(); ++i) {
    out.push_back(pooled_embed(memory_, pool_, s.tokens[i].text, base[i]));
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

real parse_real(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<real>(v);
  } catch (const std::exception&) {
    throw DataError(where + ": bad number '" + s + "'");
  }
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

StaticTable parse_static_table(const std::string& text,
                               const std::string& source) {
  StaticTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    // Optional "count dim" header.
    if (first && fields.size() == 2 && is_integer(fields[0]) &&
        is_integer(fields[1])) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() < 2)
      throw DataError(source + " line " + std::to_string(line_no) +
                      ": expected 'word v1 ... vd'");
    const int d = static_cast<int>(fields.size()) - 1;
    if (table.dim == 0) table.dim = d;
    if (d != table.dim)
      throw DataError(source + " line " + std::to_string(line_no) +
                      ": dimension " + std::to_string(d) + " != " +
                      std::to_string(table.dim));
    Matrix vec(d, 1);
    for (int i = 0; i < d; ++i)
      vec.at(i, 0) = parse_real(fields[i + 1],
                                source + " line " + std::to_string(line_no));
    table.vectors[fields[0]] = std::move(vec);
  }
  if (table.dim == 0) throw DataError(source + ": empty table");
  return table;
}

StaticTable load_static_table(const std::string& path) {
  return parse_static_table(read_file(path), path);
}

Matrix static_lookup(const StaticTable& table, const std::string& token_text) {
  auto it = table.vectors.find(token_text);
  if (it != table.vectors.end()) return it->second;
  // lowercase fallback (ASCII) before declaring OOV
  std::string lower = token_text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  it = table.vectors.find(lower);
  if (it != table.vectors.end()) return it->second;
  return Matrix(table.dim, 1);
}

std::vector<Matrix> StaticEmbedder::embed(const Sentence& s,
                                          const SentencePosition&) {
  std::vector<Matrix> out;
  out.reserve(s.tokens.size());
  for (const auto& t : s.tokens) out.push_back(static_lookup(table_, t.text));
  return out;
}

ExternalVectors parse_external_vectors(const std::string& text,
                                       const std::string& source) {
  ExternalVectors ev;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::string where = source + " line " + std::to_string(line_no);
    if (fields.size() < 4)
      throw DataError(where + ": expected 'split sent_idx tok_idx v1 ... vd'");
    if (!is_integer(fields[1]) || !is_integer(fields[2]))
      throw DataError(where + ": bad indices");
    const int d = static_cast<int>(fields.size()) - 3;
    if (ev.dim == 0) ev.dim = d;
    if (d != ev.dim)
      throw DataError(where + ": dimension " + std::to_string(d) + " != " +
                      std::to_string(ev.dim));
    Matrix vec(d, 1);
    for (int i = 0; i < d; ++i) vec.at(i, 0) = parse_real(fields[i + 3], where);
    auto key = std::make_tuple(fields[0], std::stoi(fields[1]),
                               std::stoi(fields[2]));
    if (!ev.vectors.emplace(std::move(key), std::move(vec)).second)
      throw DataError(where + ": duplicate key (" + fields[0] + ", " +
                      fields[1] + ", " + fields[2] + ")");
  }
  if (ev.dim == 0) throw DataError(source + ": empty vector file");
  return ev;
}

ExternalVectors load_external_vectors(const std::string& path) {
  return parse_external_vectors(read_file(path), path);
}

const Matrix& external_embed(const ExternalVectors& ev, const std::string& split,
                             int sent_idx, int tok_idx) {
  auto it = ev.vectors.find(std::make_tuple(split, sent_idx, tok_idx));
  if (it == ev.vectors.end())
    throw CoverageError("external vectors missing key (" + split + ", " +
                        std::to_string(sent_idx) + ", " +
                        std::to_string(tok_idx) + ")");
  return it->second;
}

std::vector<Matrix> ExternalEmbedder::embed(const Sentence& s,
                                            const SentencePosition& pos) {
  std::vector<Matrix> out;
  out.reserve(s.tokens.size());
  for (int i = 0; i < static_cast<int>(s.tokens.size()); ++i)
    out.push_back(external_embed(vectors_, pos.split, pos.sent_idx, i));
  return out;
}

int EmbedderStack::dim() const {
  int d = 0;
  for (const auto& p : parts_) d += p->dim();
  return d;
}

std::vector<Matrix> EmbedderStack::embed(const Sentence& s,
                                         const SentencePosition& pos) {
  if (parts_.empty()) throw ConfigError("EmbedderStack: empty stack");
  std::vector<Matrix> out(s.tokens.size(), Matrix(dim(), 1));
  int offset = 0;
  for (const auto& part : parts_) {
    const std::vector<Matrix> vecs = part->embed(s, pos);
    for (size_t t = 0; t < vecs.size(); ++t) {
      for (int r = 0; r < vecs[t].rows(); ++r)
        out[t].at(offset + r, 0) = vecs[t].at(r, 0);
    }
    offset += part->dim();
  }
  return out;
}

void EmbedderStack::reset_memory() {
  for (const auto& p : parts_) p->reset_memory();
}

std::vector<std::pair<EmbedderKind, int>> EmbedderStack::signature() const {
  std::vector<std::pair<EmbedderKind, int>> sig;
  for (const auto& p : parts_) sig.emplace_back(p->kind(), p->dim());
  return sig;
}

}  // namespace ctxtag
