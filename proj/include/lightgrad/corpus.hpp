#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lightgrad/mel.hpp"

namespace lightgrad {

// Deterministic synthetic corpus: 16 pseudo-phonemes, each with a fixed
// smooth log-mel template (distinct spectral peak) and a duration range.
// Utterances are random phoneme strings; mels are concatenated templates
// plus small seeded noise.

constexpr int kToyVocab = 16;  // ids 1..16; id 0 reserved for padding/silence

struct ToyCorpusConfig {
    int n_utts = 64;
    uint64_t seed = 0;
    int n_mels = 80;
    int min_len = 6;   // phonemes per utterance
    int max_len = 12;
    double noise_sd = 0.05;
};

// Log-mel column for pseudo-phoneme id (1-based): a Gaussian bump over a
// -4 dB-ish floor, peak position spread across the mel axis by id.
std::vector<float> phoneme_template(int id, int n_mels);

// Inclusive per-occurrence frame-count range for pseudo-phoneme id.
std::pair<int, int> phoneme_duration_range(int id);

struct Utterance {
    std::string id;
    std::vector<int> phonemes;  // 1-based ids
};

struct Corpus {
    std::string dir;
    int n_mels = 0;
    std::vector<std::string> tokens;  // tokens[i] has id i+1
    std::vector<Utterance> utts;

    int vocab_size() const { return static_cast<int>(tokens.size()) + 1; }
    Mel load_mel(size_t utt_index) const;
    std::string mel_path(const std::string& utt_id) const;
};

// Writes phonemes.txt, transcript.txt, corpus.cfg and mels/<utt>.mel.
void gen_toy_corpus(const ToyCorpusConfig& cfg, const std::string& out_dir);

// Reads a directory produced by gen_toy_corpus (or hand-assembled with the
// same layout). Transcript lines are "utt_id|tok tok tok".
Corpus load_corpus(const std::string& dir);

// Expand the templates for a phoneme string with given durations (the
// noise-free reference a trained model should approach).
Mel template_mel(const std::vector<int>& phonemes, const std::vector<int>& durations,
                 int n_mels);

}  // namespace lightgrad
