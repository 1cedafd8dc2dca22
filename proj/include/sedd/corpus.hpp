#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sedd/config.hpp"
#include "sedd/enumerated.hpp"
#include "sedd/rng.hpp"

namespace sedd {

// Clean training data: fixed-length sequences over tokens 0..vocab-1.
struct Corpus {
  int vocab = 0;
  int seq_len = 0;
  std::vector<std::vector<int>> sequences;

  size_t size() const { return sequences.size(); }
  void validate() const;  // shape and token range
};

// Synthetic sources carry their own descriptor so the exact data distribution
// stays available to oracles. All randomness is derived from seeds through
// per-sequence child streams: sequence i is reproducible in isolation.

struct IidSpec {
  int n = 0;
  int d = 0;
  std::vector<double> weights;  // token distribution, sums to 1
};

IidSpec iid_spec(int n, int d, uint64_t seed);
Corpus gen_iid(const IidSpec& spec, int count, uint64_t seed);
EnumeratedDist iid_ground_truth(const IidSpec& spec);

struct MarkovSpec {
  int n = 0;
  int d = 0;
  std::vector<double> init;   // n entries
  std::vector<double> trans;  // n x n row-major, rows sum to 1
};

MarkovSpec markov_spec(int n, int d, uint64_t seed);
Corpus gen_markov(const MarkovSpec& spec, int count, uint64_t seed);
EnumeratedDist markov_ground_truth(const MarkovSpec& spec);

// Exhaustive empirical distribution of a corpus over its clean vocabulary.
EnumeratedDist corpus_empirical(const Corpus& corpus);

// Binary token format: three little-endian u32 fields (vocab, seq_len, count)
// followed by count*seq_len little-endian u16 tokens, row-major.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// UTF-8 text handling. Tokens are codepoints indexed by their sorted order of
// first appearance universe (ascending codepoint). Malformed UTF-8 raises
// IngestionError.
std::vector<uint32_t> decode_utf8(const std::string& text);
std::string encode_utf8(std::span<const uint32_t> codepoints);

// Chunk text into seq_len-codepoint sequences, dropping the trailing
// remainder. The derived vocabulary (ascending codepoints) is returned
// through vocab_out.
Corpus corpus_from_text(const std::string& text, int seq_len, std::vector<uint32_t>& vocab_out);
std::string text_from_tokens(std::span<const int> tokens, std::span<const uint32_t> vocab);

// Vocab files are JSON: {"codepoints": [...]}.
void save_vocab(std::span<const uint32_t> vocab, const std::string& path);
std::vector<uint32_t> load_vocab(const std::string& path);

// Realize a corpus config: synthetic kinds generate, "file" loads the binary
// format, "text" ingests UTF-8 (its derived vocab must have exactly `vocab`
// tokens). The result always matches (vocab, seq_len) or an error is thrown.
Corpus make_corpus(const CorpusConfig& cfg, int vocab, int seq_len);

}  // namespace sedd
