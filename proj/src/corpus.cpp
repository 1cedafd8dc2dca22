#include "sedd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sedd/errors.hpp"

namespace sedd {

void Corpus::validate() const {
  if (vocab < 2) throw IngestionError("corpus vocabulary must have at least 2 tokens");
  if (seq_len < 1) throw IngestionError("corpus sequence length must be positive");
  for (const auto& s : sequences) {
    if (static_cast<int>(s.size()) != seq_len)
      throw IngestionError("corpus sequence has the wrong length");
    for (int tok : s)
      if (tok < 0 || tok >= vocab) throw IngestionError("corpus token out of range");
  }
}

namespace {

// Softmax of scaled gaussian draws: a fixed, fully seeded way to get a
// non-degenerate distribution with full support.
std::vector<double> random_simplex(int n, Rng& rng) {
  std::vector<double> w(static_cast<size_t>(n));
  double mx = -1e300;
  for (double& v : w) {
    v = rng.normal();
    mx = std::max(mx, v);
  }
  double z = 0.0;
  for (double& v : w) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : w) v /= z;
  return w;
}

}  // namespace

IidSpec iid_spec(int n, int d, uint64_t seed) {
  if (n < 2 || d < 1) throw ArgumentError("iid_spec needs n >= 2, d >= 1");
  IidSpec s;
  s.n = n;
  s.d = d;
  Rng rng(seed);
  s.weights = random_simplex(n, rng);
  return s;
}

Corpus gen_iid(const IidSpec& spec, int count, uint64_t seed) {
  if (count < 1) throw ArgumentError("corpus count must be positive");
  Corpus c;
  c.vocab = spec.n;
  c.seq_len = spec.d;
  c.sequences.reserve(static_cast<size_t>(count));
  Rng root(seed);
  for (int i = 0; i < count; ++i) {
    Rng rng = root.child(static_cast<uint64_t>(i));
    std::vector<int> s(static_cast<size_t>(spec.d));
    for (int& tok : s) tok = rng.categorical(spec.weights);
    c.sequences.push_back(std::move(s));
  }
  return c;
}

EnumeratedDist iid_ground_truth(const IidSpec& spec) {
  EnumeratedDist out(spec.d, spec.n);
  std::vector<int> seq(static_cast<size_t>(spec.d));
  for (size_t idx = 0; idx < out.p.size(); ++idx) {
    decode_sequence(idx, spec.n, seq);
    double p = 1.0;
    for (int tok : seq) p *= spec.weights[static_cast<size_t>(tok)];
    out.p[idx] = p;
  }
  return out;
}

MarkovSpec markov_spec(int n, int d, uint64_t seed) {
  if (n < 2 || d < 1) throw ArgumentError("markov_spec needs n >= 2, d >= 1");
  MarkovSpec s;
  s.n = n;
  s.d = d;
  Rng rng(seed);
  s.init = random_simplex(n, rng);
  s.trans.reserve(static_cast<size_t>(n) * n);
  for (int row = 0; row < n; ++row) {
    const std::vector<double> r = random_simplex(n, rng);
    s.trans.insert(s.trans.end(), r.begin(), r.end());
  }
  return s;
}

Corpus gen_markov(const MarkovSpec& spec, int count, uint64_t seed) {
  if (count < 1) throw ArgumentError("corpus count must be positive");
  Corpus c;
  c.vocab = spec.n;
  c.seq_len = spec.d;
  c.sequences.reserve(static_cast<size_t>(count));
  Rng root(seed);
  for (int i = 0; i < count; ++i) {
    Rng rng = root.child(static_cast<uint64_t>(i));
    std::vector<int> s(static_cast<size_t>(spec.d));
    s[0] = rng.categorical(spec.init);
    for (int pos = 1; pos < spec.d; ++pos) {
      const auto row = std::span<const double>(spec.trans).subspan(
          static_cast<size_t>(s[static_cast<size_t>(pos - 1)]) * spec.n,
          static_cast<size_t>(spec.n));
      s[static_cast<size_t>(pos)] = rng.categorical(row);
    }
    c.sequences.push_back(std::move(s));
  }
  return c;
}

EnumeratedDist markov_ground_truth(const MarkovSpec& spec) {
  EnumeratedDist out(spec.d, spec.n);
  std::vector<int> seq(static_cast<size_t>(spec.d));
  for (size_t idx = 0; idx < out.p.size(); ++idx) {
    decode_sequence(idx, spec.n, seq);
    double p = spec.init[static_cast<size_t>(seq[0])];
    for (int pos = 1; pos < spec.d; ++pos)
      p *= spec.trans[static_cast<size_t>(seq[static_cast<size_t>(pos - 1)]) * spec.n +
                      seq[static_cast<size_t>(pos)]];
    out.p[idx] = p;
  }
  return out;
}

EnumeratedDist corpus_empirical(const Corpus& corpus) {
  corpus.validate();
  if (corpus.sequences.empty()) throw ArgumentError("empty corpus has no distribution");
  EnumeratedDist out(corpus.seq_len, corpus.vocab);
  const double w = 1.0 / static_cast<double>(corpus.size());
  for (const auto& s : corpus.sequences) out.p[encode_sequence(s, corpus.vocab)] += w;
  return out;
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t take_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw IngestionError(std::string("corpus file truncated reading ") + what);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  corpus.validate();
  if (corpus.vocab > 0xFFFF)
    throw IngestionError("corpus vocabulary too large for the u16 token format");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file: " + path);
  put_u32(out, static_cast<uint32_t>(corpus.vocab));
  put_u32(out, static_cast<uint32_t>(corpus.seq_len));
  put_u32(out, static_cast<uint32_t>(corpus.size()));
  for (const auto& s : corpus.sequences)
    for (int tok : s) {
      const unsigned char b[2] = {static_cast<unsigned char>(tok),
                                  static_cast<unsigned char>(tok >> 8)};
      out.write(reinterpret_cast<const char*>(b), 2);
    }
  if (!out) throw IoError("failed writing corpus file: " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  Corpus c;
  c.vocab = static_cast<int>(take_u32(in, "vocab"));
  c.seq_len = static_cast<int>(take_u32(in, "seq_len"));
  const uint32_t count = take_u32(in, "count");
  if (c.vocab < 2 || c.vocab > 0xFFFF) throw IngestionError("corpus header has invalid vocab");
  if (c.seq_len < 1 || c.seq_len > (1 << 20))
    throw IngestionError("corpus header has invalid seq_len");
  c.sequences.assign(count, std::vector<int>(static_cast<size_t>(c.seq_len)));
  std::vector<unsigned char> row(static_cast<size_t>(c.seq_len) * 2);
  for (uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
      throw IngestionError("corpus file truncated reading tokens");
    for (int j = 0; j < c.seq_len; ++j) {
      const int tok = static_cast<int>(row[static_cast<size_t>(j) * 2]) |
                      static_cast<int>(row[static_cast<size_t>(j) * 2 + 1]) << 8;
      if (tok >= c.vocab) throw IngestionError("corpus token out of range");
      c.sequences[i][static_cast<size_t>(j)] = tok;
    }
  }
  if (in.get() != std::char_traits<char>::eof())
    throw IngestionError("corpus file has trailing bytes");
  return c;
}

std::vector<uint32_t> decode_utf8(const std::string& text) {
  std::vector<uint32_t> cps;
  cps.reserve(text.size());
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const size_t len = text.size();
  size_t i = 0;
  while (i < len) {
    const unsigned char b0 = s[i];
    uint32_t cp = 0;
    int extra = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      throw IngestionError("invalid UTF-8 lead byte");
    }
    if (extra > 0 && i + static_cast<size_t>(extra) >= len)
      throw IngestionError("truncated UTF-8 sequence");
    for (int k = 1; k <= extra; ++k) {
      const unsigned char bk = s[i + static_cast<size_t>(k)];
      if ((bk & 0xC0) != 0x80) throw IngestionError("invalid UTF-8 continuation byte");
      cp = cp << 6 | (bk & 0x3F);
    }
    // Reject overlong forms and surrogates.
    static constexpr uint32_t kMin[4] = {0, 0x80, 0x800, 0x10000};
    if (extra > 0 && cp < kMin[extra]) throw IngestionError("overlong UTF-8 encoding");
    if (cp >= 0xD800 && cp <= 0xDFFF) throw IngestionError("UTF-8 encodes a surrogate");
    if (cp > 0x10FFFF) throw IngestionError("UTF-8 codepoint out of range");
    cps.push_back(cp);
    i += static_cast<size_t>(extra) + 1;
  }
  return cps;
}

std::string encode_utf8(std::span<const uint32_t> codepoints) {
  std::string out;
  for (uint32_t cp : codepoints) {
    if (cp >= 0xD800 && cp <= 0xDFFF) throw ArgumentError("cannot encode a surrogate");
    if (cp > 0x10FFFF) throw ArgumentError("codepoint out of range");
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | cp >> 6));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | cp >> 12));
      out.push_back(static_cast<char>(0x80 | (cp >> 6 & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | cp >> 18));
      out.push_back(static_cast<char>(0x80 | (cp >> 12 & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp >> 6 & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

Corpus corpus_from_text(const std::string& text, int seq_len, std::vector<uint32_t>& vocab_out) {
  if (seq_len < 1) throw ArgumentError("seq_len must be positive");
  const std::vector<uint32_t> cps = decode_utf8(text);
  if (cps.size() < static_cast<size_t>(seq_len))
    throw IngestionError("text shorter than one sequence");
  std::map<uint32_t, int> index;
  for (uint32_t cp : cps) index.emplace(cp, 0);
  if (index.size() < 2) throw IngestionError("text uses fewer than 2 distinct codepoints");
  vocab_out.clear();
  vocab_out.reserve(index.size());
  int next = 0;
  for (auto& [cp, tok] : index) {
    tok = next++;
    vocab_out.push_back(cp);
  }
  Corpus c;
  c.vocab = static_cast<int>(index.size());
  c.seq_len = seq_len;
  const size_t chunks = cps.size() / static_cast<size_t>(seq_len);  // tail dropped
  c.sequences.reserve(chunks);
  for (size_t k = 0; k < chunks; ++k) {
    std::vector<int> s(static_cast<size_t>(seq_len));
    for (int j = 0; j < seq_len; ++j)
      s[static_cast<size_t>(j)] = index[cps[k * static_cast<size_t>(seq_len) +
                                            static_cast<size_t>(j)]];
    c.sequences.push_back(std::move(s));
  }
  return c;
}

std::string text_from_tokens(std::span<const int> tokens, std::span<const uint32_t> vocab) {
  std::vector<uint32_t> cps;
  cps.reserve(tokens.size());
  for (int tok : tokens) {
    if (tok < 0 || tok >= static_cast<int>(vocab.size()))
      throw ArgumentError("token outside the vocabulary");
    cps.push_back(vocab[static_cast<size_t>(tok)]);
  }
  return encode_utf8(cps);
}

void save_vocab(std::span<const uint32_t> vocab, const std::string& path) {
  nlohmann::json j{{"codepoints", std::vector<uint32_t>(vocab.begin(), vocab.end())}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocab file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing vocab file: " + path);
}

std::vector<uint32_t> load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file: " + path);
  nlohmann::json j;
  try {
    in >> j;
    return j.at("codepoints").get<std::vector<uint32_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("invalid vocab file: ") + e.what());
  }
}

Corpus make_corpus(const CorpusConfig& cfg, int vocab, int seq_len) {
  Corpus c;
  if (cfg.kind == "iid") {
    c = gen_iid(iid_spec(vocab, seq_len, cfg.seed), cfg.count, cfg.seed + 1);
  } else if (cfg.kind == "markov") {
    c = gen_markov(markov_spec(vocab, seq_len, cfg.seed), cfg.count, cfg.seed + 1);
  } else if (cfg.kind == "file") {
    c = load_corpus(cfg.path);
  } else if (cfg.kind == "text") {
    std::ifstream in(cfg.path, std::ios::binary);
    if (!in) throw IoError("cannot open text file: " + cfg.path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::vector<uint32_t> vocab_cps;
    c = corpus_from_text(ss.str(), seq_len, vocab_cps);
  } else {
    throw ConfigError("unknown corpus kind '" + cfg.kind + "'");
  }
  if (c.vocab != vocab)
    throw IngestionError("corpus vocabulary (" + std::to_string(c.vocab) +
                         ") does not match the process (" + std::to_string(vocab) + ")");
  if (c.seq_len != seq_len)
    throw IngestionError("corpus sequence length (" + std::to_string(c.seq_len) +
                         ") does not match the run (" + std::to_string(seq_len) + ")");
  c.validate();
  return c;
}

}  // namespace sedd
